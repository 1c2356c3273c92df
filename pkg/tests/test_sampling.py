import pytest

from classcoder.codebook import builtin_cdas
from classcoder.demo import make_demo_lesson
from classcoder.errors import SelectionError
from classcoder.sampling import ExampleSelectionSpec, select_examples, spec_from_dict, spec_to_dict

CODEBOOK = builtin_cdas()


def corpus_of(total):
    lessons, gold = [], []
    per = total // 3
    for i, name in enumerate(("c-a", "c-b", "c-c")):
        lesson, g = make_demo_lesson(name, n=per, offset=i * 4)
        lessons.append(lesson)
        gold.append(g)
    return lessons, gold


def test_per_code_counts(demo_corpus):
    lessons, gold = demo_corpus
    one = select_examples(lessons, gold, ExampleSelectionSpec.per_code_isolated(1, seed=3))
    assert len(one.items) == 12
    ten = select_examples(lessons, gold, ExampleSelectionSpec.per_code_isolated(10, seed=3))
    assert len(ten.items) == 120


def test_per_code_covers_every_substantive_code(demo_corpus):
    lessons, gold = demo_corpus
    picked = select_examples(lessons, gold, ExampleSelectionSpec.per_code_isolated(2, seed=5))
    covered = set()
    for item in picked.items:
        covered |= item.gold_codes
    assert set(CODEBOOK.substantive_ids) <= covered


def test_per_code_items_have_no_context(demo_corpus):
    lessons, gold = demo_corpus
    picked = select_examples(lessons, gold, ExampleSelectionSpec.per_code_isolated(1, seed=5))
    assert all(item.context_turns == () for item in picked.items)


def test_per_code_insufficient_instances_names_the_code():
    lessons, gold = corpus_of(9)
    with pytest.raises(SelectionError) as exc:
        select_examples(lessons, gold, ExampleSelectionSpec.per_code_isolated(5, seed=1))
    assert any(code in str(exc.value) for code in CODEBOOK.substantive_ids)


def test_contextual_counts(demo_corpus):
    lessons, gold = demo_corpus
    for n in (120, 500):
        spec = ExampleSelectionSpec.contextual_flow(n, window=6, seed=11)
        picked = select_examples(lessons, gold, spec)
        assert len(picked.items) == n


def test_contextual_context_is_the_preceding_window(demo_corpus):
    lessons, gold = demo_corpus
    spec = ExampleSelectionSpec.contextual_flow(24, window=6, seed=11)
    picked = select_examples(lessons, gold, spec)
    by_lesson = {lesson.lesson_id: lesson for lesson in lessons}
    for item in picked.items:
        # context turns immediately precede the focus turn, in order
        ids = [t.turn_id for t in item.context_turns] + [item.focus_turn.turn_id]
        assert ids == list(range(ids[0], ids[0] + len(ids)))
        assert len(item.context_turns) < spec.window


def test_contextual_rejects_oversized_request(demo_corpus):
    lessons, gold = demo_corpus
    total = sum(len(lesson.turns) for lesson in lessons)
    with pytest.raises(SelectionError):
        select_examples(
            lessons, gold, ExampleSelectionSpec.contextual_flow(total + 1, window=6, seed=1)
        )


def test_same_seed_same_selection(demo_corpus):
    lessons, gold = demo_corpus
    for spec in (
        ExampleSelectionSpec.per_code_isolated(3, seed=42),
        ExampleSelectionSpec.contextual_flow(60, window=6, seed=42),
    ):
        a = select_examples(lessons, gold, spec)
        b = select_examples(lessons, gold, spec)
        assert a == b


def test_different_seed_can_differ(demo_corpus):
    lessons, gold = demo_corpus
    a = select_examples(lessons, gold, ExampleSelectionSpec.per_code_isolated(3, seed=1))
    b = select_examples(lessons, gold, ExampleSelectionSpec.per_code_isolated(3, seed=2))
    assert a != b


def test_spec_validation():
    with pytest.raises(SelectionError):
        ExampleSelectionSpec(mode="bogus")
    with pytest.raises(SelectionError):
        ExampleSelectionSpec.per_code_isolated(0)
    with pytest.raises(SelectionError):
        ExampleSelectionSpec.contextual_flow(0)
    with pytest.raises(SelectionError):
        ExampleSelectionSpec.contextual_flow(10, window=0)


def test_spec_dict_round_trip():
    for spec in (
        ExampleSelectionSpec.per_code_isolated(4, seed=9),
        ExampleSelectionSpec.contextual_flow(50, window=4, seed=2),
    ):
        assert spec_from_dict(spec_to_dict(spec)) == spec


def test_empty_corpus_rejected():
    with pytest.raises(SelectionError):
        select_examples([], [], ExampleSelectionSpec.per_code_isolated(1))
