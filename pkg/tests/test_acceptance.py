"""Acceptance gate: one checked criterion per test, one printed verdict each.

Every criterion runs offline against the deterministic mock backend. The
verdict lines are echoed in the terminal summary after the run.
"""

import json
import random
import time

import pytest

from conftest import ACCEPTANCE_LINES

from classcoder.backends import MockKeywordBackend
from classcoder.coder import (
    SessionPolicy,
    TurnCoding,
    code_lesson,
    parse_agent_response,
    render_agent_response,
    run_to_report_dict,
)
from classcoder.codebook import builtin_cdas
from classcoder.demo import make_demo_lesson
from classcoder.errors import ResponseParseError
from classcoder.evaluation import (
    build_confusion,
    evaluate_run,
    harmonic_f1,
    render_text_table,
)
from classcoder.experiment import (
    builtin_experiment_definition,
    comparison_to_dict,
    run_experiment,
    sections_equal_except_examples,
)
from classcoder.prompting import (
    Action,
    Branch,
    DecisionTree,
    ExampleItem,
    ExampleSet,
    SECTION_ORDER,
    Step,
    compile_instructions,
    config_hash,
    default_config,
    default_decision_tree,
    validate_decision_tree,
    validate_example_quota,
)
from classcoder.store import Store, _canonical_json
from classcoder.transcript import Batch, GoldAnnotationSet, Lesson, Turn, make_batches

CODEBOOK = builtin_cdas()


def check(name: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f": {detail}" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def random_code_set(rng: random.Random) -> frozenset[str]:
    if rng.random() < 0.15:
        return frozenset({"UC"})
    return frozenset(rng.sample(CODEBOOK.substantive_ids, rng.randint(1, 3)))


def make_run(labels_by_turn: dict[int, frozenset[str]], lesson_id: str) -> "CodingRun":
    from classcoder.coder import CodingRun

    codings = tuple(
        TurnCoding(turn_id=t, predicted=labels_by_turn[t]) for t in sorted(labels_by_turn)
    )
    return CodingRun(
        run_id="acceptance",
        lesson_id=lesson_id,
        config_hash="h",
        backend_id="mock-keyword",
        policy=SessionPolicy(),
        status="complete",
        codings=codings,
        event_log=(),
    )


def test_c01_harmonic_mean_reference_values():
    triplets = (
        (0.5114, 0.3214, 0.3947),
        (0.6095, 0.5664, 0.5872),
        (0.8077, 0.5153, 0.6292),
    )
    started = time.perf_counter()
    worst = max(abs(harmonic_f1(p, r) - expected) for p, r, expected in triplets)
    elapsed = time.perf_counter() - started
    check(
        "harmonic F1 reproduces reference precision/recall pairs",
        worst <= 5e-4 and elapsed < 1.0,
        f"max deviation {worst:.2e}, {elapsed:.3f}s",
    )


def test_c02_confusion_matches_brute_force():
    rng = random.Random(20260817)
    n = 600
    gold_labels = {t: random_code_set(rng) for t in range(1, n + 1)}
    predicted = {t: random_code_set(rng) for t in range(1, n + 1)}
    gold = GoldAnnotationSet(lesson_id="oracle", labels=gold_labels)
    run = make_run(predicted, "oracle")

    started = time.perf_counter()
    mismatches = []
    for code_id in CODEBOOK.ids:
        tp = fp = fn = tn = 0
        for t in range(1, n + 1):
            in_gold = code_id in gold_labels[t]
            in_pred = code_id in predicted[t]
            tp += in_gold and in_pred
            fp += in_pred and not in_gold
            fn += in_gold and not in_pred
            tn += not in_gold and not in_pred
        m = build_confusion(gold, run, code_id)
        if (m.tp, m.fp, m.fn, m.tn) != (tp, fp, fn, tn) or m.total != n:
            mismatches.append(code_id)
    elapsed = time.perf_counter() - started
    check(
        "confusion counts equal an independent brute-force counter",
        not mismatches and elapsed < 5.0,
        f"{n} random assignments x {len(CODEBOOK.ids)} codes, {elapsed:.3f}s",
    )


def test_c03_perfect_agreement_scores_one():
    rng = random.Random(99)
    labels = {t: random_code_set(rng) for t in range(1, 81)}
    gold = GoldAnnotationSet(lesson_id="same", labels=labels)
    run = make_run(dict(labels), "same")
    ok = True
    for mode in ("exact", "overlap"):
        report = evaluate_run(gold, run, mode=mode)
        ok = ok and report.turn_precision == 1.0
        for row in report.per_code:
            for value in (row.precision, row.recall, row.accuracy, row.f1):
                if value is not None and value != 1.0:
                    ok = False
    check("perfect agreement yields 1.0 for every defined metric", ok, "both match modes")


def test_c04_compilation_is_deterministic_and_ordered():
    config = default_config()
    started = time.perf_counter()
    first = compile_instructions(config)
    second = compile_instructions(config)
    elapsed = time.perf_counter() - started

    identical = first.text == second.text and first.config_hash == second.config_hash
    identical = identical and first.config_hash == config_hash(config)

    names = list(first.section_map)
    offsets_tile = True
    cursor = 0
    for start, end in first.section_map.values():
        offsets_tile = offsets_tile and start == cursor and end >= start
        cursor = end
    ordered = names == list(SECTION_ORDER) and offsets_tile and cursor == len(first.text)

    all_codes = all(
        f"{code.id} ({code.name})" in first.section_text("codes") for code in CODEBOOK.codes
    )
    check(
        "compilation is byte-deterministic with canonically ordered sections",
        identical and ordered and all_codes and elapsed < 1.0,
        f"13 code definitions, {elapsed:.3f}s",
    )


def test_c05_decision_tree_validation():
    gate = DecisionTree(
        steps=(
            Step(
                number=1,
                title="Verify the Learning Goal Before Coding",
                branches=(
                    Branch("not relevant to the learning goal", Action.uncoded()),
                    Branch("relevant to the learning goal", Action.proceed()),
                ),
            ),
            Step(
                number=2,
                title="Code the contribution",
                branches=(Branch("it reasons", Action.assign("RE")),),
            ),
        )
    )
    gate_ok = validate_decision_tree(gate, CODEBOOK).ok
    default_ok = validate_decision_tree(default_decision_tree(), CODEBOOK).ok

    backward = DecisionTree(
        steps=(
            Step(1, "first", (Branch("x", Action.goto(2)),)),
            Step(2, "second", (Branch("y", Action.goto(1)),)),
        )
    )
    report = validate_decision_tree(backward, CODEBOOK)
    backward_caught = not report.ok and any(
        v.kind == "backward_goto" and v.step == 2 for v in report.violations
    )

    unknown = DecisionTree(
        steps=(Step(1, "only", (Branch("z", Action.assign("ZZ")),)),)
    )
    report = validate_decision_tree(unknown, CODEBOOK)
    unknown_caught = not report.ok and any(
        v.kind == "unknown_code" and v.step == 1 for v in report.violations
    )
    check(
        "decision-tree validator accepts the relevance gate and locates violations",
        gate_ok and default_ok and backward_caught and unknown_caught,
    )


def quota_set(core: int, ambiguous: int, multi: int, edge: int) -> ExampleSet:
    items = []
    substantive = CODEBOOK.substantive_ids
    for i in range(core):
        codes = frozenset({substantive[i % len(substantive)]})
        items.append(
            ExampleItem(
                kind="core",
                focus_turn=Turn(i + 1, "Student", f"core sample {i + 1}."),
                gold_codes=codes,
            )
        )
    for i in range(ambiguous):
        items.append(
            ExampleItem(
                kind="ambiguous",
                focus_turn=Turn(100 + i, "Student", "it could go either way."),
                gold_codes=frozenset({"RE"}),
            )
        )
    for i in range(multi):
        items.append(
            ExampleItem(
                kind="multi_utterance",
                focus_turn=Turn(200 + i, "Student", "I agree. And it floats because of density."),
                gold_codes=frozenset({"A", "RE"}),
            )
        )
    for i in range(edge):
        items.append(
            ExampleItem(
                kind="edge",
                focus_turn=Turn(300 + i, "Teacher", "borderline case."),
                gold_codes=frozenset({"OI"}),
            )
        )
    return ExampleSet(items=tuple(items))


def test_c06_example_quota_thresholds():
    passes = validate_example_quota(quota_set(13, 7, 5, 5), CODEBOOK).ok
    nine_core = validate_example_quota(quota_set(9, 7, 5, 5), CODEBOOK)
    zero_multi = validate_example_quota(quota_set(13, 7, 0, 5), CODEBOOK)
    check(
        "example quotas pass at 13/7/5/5 and fail at 9 core or 0 multi-utterance",
        passes and not nine_core.ok and not zero_multi.ok,
    )


def test_c07_batching_and_session_isolation():
    turns = tuple(
        Turn(
            turn_id=i,
            speaker="Teacher" if i % 2 else "Student",
            text=f"utterance {i}: why does sample {i} behave this way?",
        )
        for i in range(1, 1387)
    )
    lesson = Lesson(lesson_id="long", subject="science", turns=turns)
    batches = make_batches(lesson, 20)
    concatenation = tuple(t for b in batches for t in b.turns)
    partitioned = len(batches) == 70 and concatenation == lesson.turns

    document = compile_instructions(default_config())
    run = code_lesson(
        lesson,
        document,
        MockKeywordBackend(),
        SessionPolicy(batch_size=20, reset_between_batches=True, verify_rules_first=False),
    )
    isolated = run.status == "complete" and len(run.event_log) == 70
    for k in range(1, len(run.event_log)):
        previous_ids = [t.turn_id for t in batches[k - 1].turns]
        contents = [m["content"] for m in run.event_log[k]["messages"]]
        for turn_id in previous_ids:
            marker = f"Turn {turn_id} ("
            if any(marker in c for c in contents):
                isolated = False
    check(
        "1386 turns split into 70 batches of 20 and resets isolate sessions",
        partitioned and isolated,
        f"{len(batches)} batches, {len(run.codings)} turns coded",
    )


def test_c08_response_format_round_trip():
    rng = random.Random(4242)
    words = ("echoes", "invites", "reasons", "agrees", "queries", "builds", "recalls")
    codings = []
    turn_id = 0
    for _ in range(300):
        turn_id += rng.randint(1, 4)
        codings.append(
            TurnCoding(
                turn_id=turn_id,
                predicted=random_code_set(rng),
                justification=" ".join(rng.choice(words) for _ in range(rng.randint(0, 5))),
            )
        )
    batch = Batch(
        lesson_id="rt",
        ordinal=1,
        turns=tuple(Turn(c.turn_id, "S", f"text {c.turn_id}") for c in codings),
    )
    for self_check in (False, True):
        rendered = render_agent_response(codings, self_check=self_check)
        parsed = parse_agent_response(
            rendered, batch, CODEBOOK, expect_self_check=self_check
        )
        round_trip = parsed == codings
        if not round_trip:
            break

    reference = (
        "Turn 241\n"
        "Codes: A, EL, OI\n"
        "Justification: agrees with the claim, elaborates it, and asks the group.\n"
    )
    ref_batch = Batch(lesson_id="rt", ordinal=1, turns=(Turn(241, "Student", "x"),))
    literal = parse_agent_response(reference, ref_batch, CODEBOOK)
    literal_ok = literal[0].predicted == {"A", "EL", "OI"}

    try:
        parse_agent_response(
            "Turn 7\nCodes: XY\n",
            Batch(lesson_id="rt", ordinal=1, turns=(Turn(7, "S", "x"),)),
            CODEBOOK,
        )
        named = False
    except ResponseParseError as exc:
        named = "7" in str(exc)
    check(
        "coded blocks round-trip and unknown labels fail naming the turn",
        round_trip and literal_ok and named,
        "300 random codings, literal multi-label block",
    )


def test_c09_end_to_end_byte_determinism(tmp_path):
    lesson, gold = make_demo_lesson("det", n=30)
    config = default_config()
    document = compile_instructions(config)

    reports = []
    tables = []
    for name in ("one", "two"):
        store = Store(tmp_path / name)
        store.save_lesson(lesson, gold)
        run = store.execute_run(
            lesson, document, MockKeywordBackend(), SessionPolicy(), config=config
        )
        reports.append(store.report_path(run.run_id).read_bytes())
        tables.append(render_text_table(evaluate_run(gold, run)))
    coding_identical = reports[0] == reports[1] and tables[0] == tables[1]

    outcomes = [
        run_experiment(builtin_experiment_definition(), backend=MockKeywordBackend())
        for _ in range(2)
    ]
    grids = [
        json.dumps(comparison_to_dict(o.table), sort_keys=True).encode() for o in outcomes
    ]
    experiment_identical = grids[0] == grids[1]
    shape_ok = (
        len(outcomes[0].table.condition_ids) == 4 and len(outcomes[0].table.cells) == 13
    )

    documents = [r.document for r in outcomes[0].results]
    examples_only = all(
        sections_equal_except_examples(documents[0], other) for other in documents[1:]
    ) and len({d.text for d in documents}) == len(documents)
    check(
        "coding, evaluation, and the built-in experiment are byte-deterministic",
        coding_identical and experiment_identical and shape_ok and examples_only,
        "reports, rendered tables, 4x13 comparison grid",
    )


def test_c10_event_replay_reproduces_reports(tmp_path):
    store = Store(tmp_path / "data")
    config = default_config()
    document = compile_instructions(config)

    lesson, gold = make_demo_lesson("replay-a", n=25)
    store.save_lesson(lesson, gold)
    complete = store.execute_run(
        lesson, document, MockKeywordBackend(), SessionPolicy(batch_size=10), config=config
    )

    predicted = {c.turn_id: c.predicted for c in complete.codings}
    flipped = ["EL"] if predicted[3] != {"EL"} else ["RB"]
    store.append_event(
        complete.run_id,
        "adjudication",
        {"turn_id": 3, "codes": flipped, "note": "", "agent_codes": sorted(predicted[3])},
    )
    store.compile_feedback(complete.run_id)

    class Failing:
        id = "failing"
        deterministic = True

        def send(self, messages):
            from classcoder.errors import BackendError

            raise BackendError("down")

    doomed, _ = make_demo_lesson("replay-b", n=6)
    store.save_lesson(doomed)
    store.execute_run(doomed, document, Failing(), SessionPolicy(), config=config)

    ok = True
    for run_id in store.list_runs():
        state = store.replay_run(run_id)
        regenerated = _canonical_json(run_to_report_dict(state.run)).encode()
        if regenerated != store.report_path(run_id).read_bytes():
            ok = False
    check(
        "replaying every persisted event log reproduces the stored report bytes",
        ok,
        f"{len(store.list_runs())} runs, including a failed and an adjudicated one",
    )
