"""Seeded selection of anchor examples from a gold-annotated corpus.

Two modes. `per_code_isolated` picks k bare turns per substantive code.
`contextual_flow` picks contiguous turn windows and emits one example per
turn, each carrying the earlier turns of its window as context, so codes
appear at their natural frequency. Both are deterministic for a fixed
seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .codebook import UNCODED_ID, Codebook, builtin_cdas
from .errors import SelectionError
from .prompting import ExampleItem, ExampleSet
from .transcript import GoldAnnotationSet, Lesson, Turn

DEFAULT_WINDOW = 6


@dataclass(frozen=True)
class ExampleSelectionSpec:
    mode: str  # per_code_isolated | contextual_flow
    seed: int = 0
    per_code: int = 1
    total_n: int = 0
    window: int = DEFAULT_WINDOW

    def __post_init__(self) -> None:
        if self.mode not in ("per_code_isolated", "contextual_flow"):
            raise SelectionError(f"unknown selection mode {self.mode!r}")
        if self.mode == "per_code_isolated" and self.per_code < 1:
            raise SelectionError(f"per_code must be positive, got {self.per_code}")
        if self.mode == "contextual_flow":
            if self.total_n < 1:
                raise SelectionError(f"total_n must be positive, got {self.total_n}")
            if self.window < 1:
                raise SelectionError(f"window must be positive, got {self.window}")

    @staticmethod
    def per_code_isolated(k: int, seed: int = 0) -> "ExampleSelectionSpec":
        return ExampleSelectionSpec(mode="per_code_isolated", per_code=k, seed=seed)

    @staticmethod
    def contextual_flow(
        total_n: int, window: int = DEFAULT_WINDOW, seed: int = 0
    ) -> "ExampleSelectionSpec":
        return ExampleSelectionSpec(
            mode="contextual_flow", total_n=total_n, window=window, seed=seed
        )


def spec_to_dict(spec: ExampleSelectionSpec) -> dict:
    if spec.mode == "per_code_isolated":
        return {"mode": spec.mode, "per_code": spec.per_code, "seed": spec.seed}
    return {"mode": spec.mode, "total_n": spec.total_n, "window": spec.window, "seed": spec.seed}


def spec_from_dict(data: dict) -> ExampleSelectionSpec:
    mode = data.get("mode")
    if mode == "per_code_isolated":
        return ExampleSelectionSpec.per_code_isolated(
            k=data.get("per_code", 1), seed=data.get("seed", 0)
        )
    if mode == "contextual_flow":
        return ExampleSelectionSpec.contextual_flow(
            total_n=data.get("total_n", 0),
            window=data.get("window", DEFAULT_WINDOW),
            seed=data.get("seed", 0),
        )
    raise SelectionError(f"unknown selection mode {mode!r}")


def _gold_index(
    corpus: list[Lesson], gold: list[GoldAnnotationSet]
) -> dict[str, GoldAnnotationSet]:
    by_lesson = {g.lesson_id: g for g in gold}
    for lesson in corpus:
        if lesson.lesson_id not in by_lesson:
            raise SelectionError(f"lesson {lesson.lesson_id!r} has no gold annotations")
    return by_lesson


def _labels_for(gold: GoldAnnotationSet, turn: Turn) -> frozenset[str]:
    labels = gold.labels.get(turn.turn_id)
    if labels is None:
        raise SelectionError(
            f"lesson {gold.lesson_id!r}: turn {turn.turn_id} has no gold annotation"
        )
    return labels


def _select_per_code(
    corpus: list[Lesson],
    by_lesson: dict[str, GoldAnnotationSet],
    codebook: Codebook,
    spec: ExampleSelectionSpec,
) -> ExampleSet:
    rng = random.Random(spec.seed)
    pools: dict[str, list[tuple[str, Turn, frozenset[str]]]] = {
        code_id: [] for code_id in codebook.substantive_ids
    }
    for lesson in corpus:
        gold = by_lesson[lesson.lesson_id]
        for turn in lesson.turns:
            for code_id in _labels_for(gold, turn):
                if code_id != UNCODED_ID:
                    pools[code_id].append((lesson.lesson_id, turn, gold.labels[turn.turn_id]))

    items: list[ExampleItem] = []
    used: set[tuple[str, int]] = set()
    for code_id in codebook.substantive_ids:
        pool = pools[code_id]
        if len(pool) < spec.per_code:
            raise SelectionError(
                f"corpus holds {len(pool)} instances of {code_id}, "
                f"but {spec.per_code} were requested"
            )
        shuffled = list(pool)
        rng.shuffle(shuffled)
        # Prefer turns not already picked for another code; the sort is
        # stable, so the shuffled order decides within each class.
        shuffled.sort(key=lambda entry: (entry[0], entry[1].turn_id) in used)
        for lesson_id, turn, labels in shuffled[: spec.per_code]:
            used.add((lesson_id, turn.turn_id))
            items.append(ExampleItem(kind="core", focus_turn=turn, gold_codes=labels))
    return ExampleSet(items=tuple(items))


def _select_contextual(
    corpus: list[Lesson],
    by_lesson: dict[str, GoldAnnotationSet],
    spec: ExampleSelectionSpec,
) -> ExampleSet:
    total_turns = sum(len(lesson.turns) for lesson in corpus)
    if spec.total_n > total_turns:
        raise SelectionError(
            f"requested {spec.total_n} turns but the corpus holds {total_turns}"
        )

    # Non-overlapping window tiles per lesson; a short tail is a candidate too.
    windows: list[tuple[tuple[Turn, ...], tuple[frozenset[str], ...]]] = []
    for lesson in corpus:
        gold = by_lesson[lesson.lesson_id]
        for start in range(0, len(lesson.turns), spec.window):
            turns = tuple(lesson.turns[start : start + spec.window])
            windows.append((turns, tuple(_labels_for(gold, t) for t in turns)))

    rng = random.Random(spec.seed)
    order = list(range(len(windows)))
    rng.shuffle(order)

    # Greedy coverage: take the window adding the most unseen codes, ties
    # broken by the shuffled order; once nothing new remains, the shuffle
    # alone decides, which keeps the natural code distribution.
    covered: set[str] = set()
    items: list[ExampleItem] = []
    remaining = spec.total_n
    while remaining > 0:
        best_pos = 0
        best_gain = -1
        for pos, window_index in enumerate(order):
            gain = len(frozenset().union(*windows[window_index][1]) - covered)
            if gain > best_gain:
                best_pos, best_gain = pos, gain
        turns, labels = windows[order.pop(best_pos)]
        covered |= frozenset().union(*labels)
        take = min(len(turns), remaining)
        for i in range(take):
            items.append(
                ExampleItem(
                    kind="core",
                    focus_turn=turns[i],
                    gold_codes=labels[i],
                    context_turns=turns[:i],
                )
            )
        remaining -= take
    return ExampleSet(items=tuple(items))


def select_examples(
    corpus: list[Lesson],
    gold: list[GoldAnnotationSet],
    spec: ExampleSelectionSpec,
    codebook: Codebook | None = None,
) -> ExampleSet:
    """Select anchor examples from an annotated corpus in the requested mode."""
    if not corpus:
        raise SelectionError("empty corpus")
    by_lesson = _gold_index(corpus, gold)
    if spec.mode == "per_code_isolated":
        return _select_per_code(corpus, by_lesson, codebook or builtin_cdas(), spec)
    return _select_contextual(corpus, by_lesson, spec)
