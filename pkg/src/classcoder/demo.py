"""Deterministic demo corpus.

Synthetic classroom-style lessons with gold labels, generated by cycling
a fixed template list. Large enough to feed every selection mode of the
built-in experiment (each substantive code occurs dozens of times) and
fully reproducible: same arguments, same corpus, no randomness.
"""

from __future__ import annotations

from .transcript import GoldAnnotationSet, Lesson, Turn

# (speaker, text, gold codes); together the templates cover all 13 codes.
_TEMPLATES: tuple[tuple[str, str, frozenset[str]], ...] = (
    ("Teacher", "Can anyone build on what Mia just said?", frozenset({"ELI"})),
    ("Student", "Adding to that, the area also grows when the sides get longer.", frozenset({"EL"})),
    ("Teacher", "Why do you think the shadow gets shorter at noon?", frozenset({"IRE"})),
    ("Student", "It floats because the density is lower than water.", frozenset({"RE"})),
    ("Teacher", "How could we combine these two ideas into one rule?", frozenset({"IC"})),
    ("Student", "My answer is different from Leo's answer.", frozenset({"SC"})),
    ("Student", "Our method is better because it works for every triangle.", frozenset({"RC", "RE"})),
    ("Student", "Yes, I agree with that.", frozenset({"A"})),
    ("Student", "I disagree, that rule fails for zero.", frozenset({"Q"})),
    ("Student", "Remember last week we measured the hallway with strides.", frozenset({"RB"})),
    ("Student", "My dad uses the same trick when he tiles a floor.", frozenset({"RW"})),
    ("Teacher", "Would anyone like to add something?", frozenset({"OI"})),
    ("Teacher", "Good afternoon, everyone.", frozenset({"UC"})),
    ("Teacher", "Please open your workbooks to page forty.", frozenset({"UC"})),
)


def make_demo_lesson(
    lesson_id: str, n: int = 210, offset: int = 0, subject: str = "science"
) -> tuple[Lesson, GoldAnnotationSet]:
    turns = []
    labels = {}
    for i in range(n):
        speaker, text, codes = _TEMPLATES[(offset + i) % len(_TEMPLATES)]
        turns.append(Turn(turn_id=i + 1, speaker=speaker, text=text))
        labels[i + 1] = codes
    lesson = Lesson(lesson_id=lesson_id, subject=subject, turns=tuple(turns))
    return lesson, GoldAnnotationSet(lesson_id=lesson_id, labels=labels)


def make_demo_corpus() -> tuple[list[Lesson], list[GoldAnnotationSet]]:
    """Three example-sourcing lessons, 630 turns in total."""
    pairs = [
        make_demo_lesson("demo-a", n=210, offset=0),
        make_demo_lesson("demo-b", n=210, offset=5),
        make_demo_lesson("demo-c", n=210, offset=9),
    ]
    return [p[0] for p in pairs], [p[1] for p in pairs]


def make_demo_test() -> tuple[Lesson, GoldAnnotationSet]:
    """A small held-out test lesson, disjoint from the corpus by id."""
    return make_demo_lesson("demo-test", n=40, offset=3)
