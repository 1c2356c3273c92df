"""Variable-control experiments and the refinement cycle.

An experiment codes one held-out lesson under several conditions that
share a base config and differ only in their example sets, then compares
per-code precision across conditions. The refinement cycle turns
adjudicated disagreements into new configs with hash-linked lineage.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

from .backends import make_backend
from .coder import (
    CodingRun,
    FeedbackItem,
    SessionPolicy,
    code_lesson,
    inject_feedback,
    policy_from_dict,
    policy_to_dict,
)
from .errors import ExperimentError
from .evaluation import (
    MetricsReport,
    confusion_pairs,
    evaluate_run,
)
from .prompting import (
    InstructionConfig,
    InstructionDocument,
    SECTION_ORDER,
    compile_instructions,
    config_from_dict,
    config_from_json,
    config_hash,
)
from .sampling import ExampleSelectionSpec, select_examples, spec_from_dict, spec_to_dict
from .transcript import GoldAnnotationSet, Lesson, parse_gold, parse_transcript


@dataclass(frozen=True)
class ConditionSpec:
    condition_id: str
    selection: ExampleSelectionSpec
    base_config: InstructionConfig
    seed: int | None = None  # overrides the selection seed when set

    def effective_selection(self) -> ExampleSelectionSpec:
        if self.seed is None:
            return self.selection
        return replace(self.selection, seed=self.seed)


@dataclass(frozen=True)
class ConditionResult:
    condition_id: str
    config: InstructionConfig
    document: InstructionDocument
    run: CodingRun
    report: MetricsReport


def run_condition(
    corpus: Sequence[Lesson],
    corpus_gold: Sequence[GoldAnnotationSet],
    test_lesson: Lesson,
    test_gold: GoldAnnotationSet,
    spec: ConditionSpec,
    backend,
    policy: SessionPolicy = SessionPolicy(),
) -> ConditionResult:
    """Select examples, compile, code the test lesson, evaluate."""
    for lesson in corpus:
        if lesson.lesson_id == test_lesson.lesson_id:
            raise ExperimentError(
                f"example corpus reuses the test lesson {test_lesson.lesson_id!r}"
            )
    base = spec.base_config
    examples = select_examples(
        list(corpus), list(corpus_gold), spec.effective_selection(), base.codebook
    )
    config = base.with_examples(examples)
    document = compile_instructions(config)
    run = code_lesson(test_lesson, document, backend, policy)
    if run.status != "complete":
        raise ExperimentError(
            f"condition {spec.condition_id}: run failed "
            f"(batch {run.failed_batch}): {run.failure}"
        )
    report = evaluate_run(test_gold, run, codebook=base.codebook)
    return ConditionResult(
        condition_id=spec.condition_id,
        config=config,
        document=document,
        run=run,
        report=report,
    )


# ---------------------------------------------------------------------------
# Condition comparison


@dataclass(frozen=True)
class ComparisonTable:
    condition_ids: tuple[str, ...]
    code_ids: tuple[str, ...]
    # cells[i][j] = precision of code i under condition j
    cells: tuple[tuple[float | None, ...], ...]
    turn_precision: tuple[float, ...]
    match_mode: str


def compare_conditions(reports: Sequence[tuple[str, MetricsReport]]) -> ComparisonTable:
    """Per-code precision grid across conditions, in codebook order."""
    if len(reports) < 2:
        raise ExperimentError(f"need at least 2 reports to compare, got {len(reports)}")
    code_ids = tuple(row.code_id for row in reports[0][1].per_code)
    mode = reports[0][1].match_mode
    for condition_id, report in reports:
        if tuple(row.code_id for row in report.per_code) != code_ids:
            raise ExperimentError(
                f"report for {condition_id!r} covers a different codebook"
            )
    by_code = {
        condition_id: {row.code_id: row.precision for row in report.per_code}
        for condition_id, report in reports
    }
    return ComparisonTable(
        condition_ids=tuple(condition_id for condition_id, _ in reports),
        code_ids=code_ids,
        cells=tuple(
            tuple(by_code[condition_id][code_id] for condition_id, _ in reports)
            for code_id in code_ids
        ),
        turn_precision=tuple(report.turn_precision for _, report in reports),
        match_mode=mode,
    )


def _cell(value: float | None) -> str:
    return "-" if value is None else f"{100 * value:.1f}%"


def render_comparison_text(table: ComparisonTable) -> str:
    header = ("Code", *table.condition_ids)
    rows = [
        (code_id, *(_cell(v) for v in table.cells[i]))
        for i, code_id in enumerate(table.code_ids)
    ]
    footer = ("Turn precision", *(_cell(v) for v in table.turn_precision))
    widths = [max(len(c) for c in col) for col in zip(header, *rows, footer)]

    def line(cells: tuple[str, ...]) -> str:
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    out = [line(header), *(line(r) for r in rows), line(footer)]
    return "\n".join(out) + f"\n(match mode: {table.match_mode})\n"


def comparison_to_dict(table: ComparisonTable) -> dict:
    return {
        "condition_ids": list(table.condition_ids),
        "code_ids": list(table.code_ids),
        "precision": [list(row) for row in table.cells],
        "turn_precision": list(table.turn_precision),
        "match_mode": table.match_mode,
    }


def sections_equal_except_examples(a: InstructionDocument, b: InstructionDocument) -> bool:
    """True when two documents differ at most within the examples section."""
    for name in SECTION_ORDER:
        if name == "examples":
            continue
        if a.section_text(name) != b.section_text(name):
            return False
    return True


# ---------------------------------------------------------------------------
# Experiment definitions


@dataclass(frozen=True)
class ExperimentDefinition:
    experiment_id: str
    base_config: InstructionConfig
    conditions: tuple[ConditionSpec, ...]
    corpus: tuple[Lesson, ...]
    corpus_gold: tuple[GoldAnnotationSet, ...]
    test_lesson: Lesson
    test_gold: GoldAnnotationSet
    policy: SessionPolicy
    backend_id: str


@dataclass(frozen=True)
class ExperimentResult:
    experiment_id: str
    results: tuple[ConditionResult, ...]
    table: ComparisonTable


def run_experiment(
    definition: ExperimentDefinition,
    backend=None,
    on_condition: Callable[[ConditionResult], None] | None = None,
) -> ExperimentResult:
    """Run every condition with a fresh session stack and compare them."""
    backend = backend or make_backend(definition.backend_id)
    results = []
    for spec in definition.conditions:
        result = run_condition(
            definition.corpus,
            definition.corpus_gold,
            definition.test_lesson,
            definition.test_gold,
            spec,
            backend,
            definition.policy,
        )
        if on_condition is not None:
            on_condition(result)
        results.append(result)
    table = compare_conditions([(r.condition_id, r.report) for r in results])
    return ExperimentResult(
        experiment_id=definition.experiment_id, results=tuple(results), table=table
    )


def builtin_experiment_definition(backend_id: str = "mock-keyword") -> ExperimentDefinition:
    """The pre-registered four-condition definition over the demo corpus:
    1 and 10 isolated examples per code, then 120 and 500 in context."""
    from .demo import make_demo_corpus, make_demo_test
    from .prompting import default_config

    corpus, corpus_gold = make_demo_corpus()
    test_lesson, test_gold = make_demo_test()
    base = default_config(token_budget=120_000)
    selections = (
        ExampleSelectionSpec.per_code_isolated(1, seed=11),
        ExampleSelectionSpec.per_code_isolated(10, seed=11),
        ExampleSelectionSpec.contextual_flow(120, window=6, seed=11),
        ExampleSelectionSpec.contextual_flow(500, window=6, seed=11),
    )
    conditions = tuple(
        ConditionSpec(condition_id=f"condition-{i}", selection=selection, base_config=base)
        for i, selection in enumerate(selections, start=1)
    )
    return ExperimentDefinition(
        experiment_id="builtin-example-scaling",
        base_config=base,
        conditions=conditions,
        corpus=tuple(corpus),
        corpus_gold=tuple(corpus_gold),
        test_lesson=test_lesson,
        test_gold=test_gold,
        policy=SessionPolicy(),
        backend_id=backend_id,
    )


def definition_to_dict(definition: ExperimentDefinition) -> dict:
    """Summary form for persistence (lessons stay in their own files)."""
    return {
        "experiment_id": definition.experiment_id,
        "base_config_hash": config_hash(definition.base_config),
        "conditions": [
            {
                "condition_id": c.condition_id,
                "selection": spec_to_dict(c.effective_selection()),
            }
            for c in definition.conditions
        ],
        "test_lesson": definition.test_lesson.lesson_id,
        "corpus": [lesson.lesson_id for lesson in definition.corpus],
        "policy": policy_to_dict(definition.policy),
        "backend": definition.backend_id,
    }


def load_experiment_definition(path: str | Path) -> ExperimentDefinition:
    """Read a definition file; relative paths resolve against its directory.

    Schema: experiment_id; base_config (inline object or config-file
    path); conditions [{condition_id, selection, seed?}]; corpus
    [{lesson, gold}]; test_lesson; test_gold; policy?; backend?.
    """
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    base_dir = path.parent

    raw_config = data["base_config"]
    if isinstance(raw_config, str):
        base_config = config_from_json((base_dir / raw_config).read_text(encoding="utf-8"))
    else:
        base_config = config_from_dict(raw_config)
    codebook = base_config.codebook

    def load_lesson(rel: str) -> Lesson:
        return parse_transcript((base_dir / rel).read_text(encoding="utf-8"))

    corpus = []
    corpus_gold = []
    for entry in data.get("corpus", ()):
        lesson = load_lesson(entry["lesson"])
        corpus.append(lesson)
        corpus_gold.append(
            parse_gold(
                (base_dir / entry["gold"]).read_text(encoding="utf-8"), lesson, codebook
            )
        )
    test_lesson = load_lesson(data["test_lesson"])
    test_gold = parse_gold(
        (base_dir / data["test_gold"]).read_text(encoding="utf-8"), test_lesson, codebook
    )
    conditions = tuple(
        ConditionSpec(
            condition_id=c["condition_id"],
            selection=spec_from_dict(c["selection"]),
            base_config=base_config,
            seed=c.get("seed"),
        )
        for c in data["conditions"]
    )
    return ExperimentDefinition(
        experiment_id=data["experiment_id"],
        base_config=base_config,
        conditions=conditions,
        corpus=tuple(corpus),
        corpus_gold=tuple(corpus_gold),
        test_lesson=test_lesson,
        test_gold=test_gold,
        policy=policy_from_dict(data.get("policy", {})),
        backend_id=data.get("backend", "mock-keyword"),
    )


# ---------------------------------------------------------------------------
# Refinement cycle


@dataclass(frozen=True)
class FeedbackSet:
    run_id: str
    items: tuple[FeedbackItem, ...]


@dataclass(frozen=True)
class LineageRecord:
    cycle: int
    parent_hash: str
    config_hash: str
    turn_ids: tuple[int, ...]
    confusion_pairs: tuple[tuple[str, str, int], ...]


def lineage_to_dict(record: LineageRecord) -> dict:
    return {
        "cycle": record.cycle,
        "parent_hash": record.parent_hash,
        "config_hash": record.config_hash,
        "turn_ids": list(record.turn_ids),
        "confusion_pairs": [list(p) for p in record.confusion_pairs],
    }


def refinement_cycle(
    run: CodingRun,
    gold: GoldAnnotationSet,
    adjudications: Sequence[FeedbackItem],
    config: InstructionConfig,
    lesson: Lesson,
    cycle: int = 0,
    allow_agreeing: bool = False,
) -> tuple[FeedbackSet, InstructionConfig, LineageRecord]:
    """One feedback round: validate adjudications, inject them, link hashes.

    By default an adjudication must target a turn where prediction and
    gold disagree; `allow_agreeing` lifts that (to correct gold itself).
    """
    if run.status != "complete":
        raise ExperimentError(f"run {run.run_id} is {run.status}, not complete")
    predicted = {c.turn_id: c.predicted for c in run.codings}
    for item in adjudications:
        if item.turn_id not in predicted:
            raise ExperimentError(f"run has no coding for turn {item.turn_id}")
        if not allow_agreeing and predicted[item.turn_id] == gold.labels.get(item.turn_id):
            raise ExperimentError(
                f"turn {item.turn_id}: prediction agrees with gold; "
                "pass allow_agreeing to adjudicate anyway"
            )
    feedback = FeedbackSet(run_id=run.run_id, items=tuple(adjudications))
    new_config = inject_feedback(config, list(adjudications), lesson)
    record = LineageRecord(
        cycle=cycle,
        parent_hash=config_hash(config),
        config_hash=config_hash(new_config),
        turn_ids=tuple(item.turn_id for item in adjudications),
        confusion_pairs=tuple(confusion_pairs(gold, run)),
    )
    return feedback, new_config, record
