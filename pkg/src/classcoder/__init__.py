"""Deductive coding workbench for classroom dialogue transcripts.

Compiles codebook-driven instruction documents, runs batched coding
sessions against a chat backend, and scores the output against gold
labels per code.
"""

from .codebook import Code, Codebook, builtin_cdas, parse_codebook, resolve_code, serialize_codebook
from .coder import (
    FeedbackItem,
    SessionPolicy,
    TurnCoding,
    code_lesson,
    inject_feedback,
    parse_agent_response,
    render_agent_response,
)
from .errors import (
    BackendError,
    CodebookError,
    CompileError,
    EvaluationError,
    ExperimentError,
    OverBudgetError,
    ResponseParseError,
    RunFailedError,
    SelectionError,
    StoreError,
    TranscriptError,
    UnknownLabelError,
    WorkbenchError,
)
from .evaluation import (
    build_confusion,
    confusion_pairs,
    evaluate_run,
    harmonic_f1,
    metrics,
    render_csv,
    render_json,
    render_text_table,
    turn_precision,
)
from .experiment import (
    ConditionSpec,
    ExperimentDefinition,
    builtin_experiment_definition,
    compare_conditions,
    refinement_cycle,
    run_condition,
    run_experiment,
)
from .prompting import (
    DecisionTree,
    ExampleItem,
    ExampleSet,
    InstructionConfig,
    InstructionDocument,
    compile_instructions,
    config_from_json,
    config_hash,
    config_to_json,
    default_config,
    validate_decision_tree,
)
from .sampling import ExampleSelectionSpec, select_examples
from .store import Store
from .transcript import (
    Lesson,
    Turn,
    make_batches,
    parse_gold,
    parse_transcript,
    serialize_gold,
    serialize_transcript,
)

__version__ = "0.1.0"

__all__ = [
    "BackendError",
    "Code",
    "Codebook",
    "CodebookError",
    "CompileError",
    "ConditionSpec",
    "DecisionTree",
    "EvaluationError",
    "ExampleItem",
    "ExampleSelectionSpec",
    "ExampleSet",
    "ExperimentDefinition",
    "ExperimentError",
    "FeedbackItem",
    "InstructionConfig",
    "InstructionDocument",
    "Lesson",
    "OverBudgetError",
    "ResponseParseError",
    "RunFailedError",
    "SelectionError",
    "SessionPolicy",
    "Store",
    "StoreError",
    "TranscriptError",
    "Turn",
    "TurnCoding",
    "UnknownLabelError",
    "WorkbenchError",
    "build_confusion",
    "builtin_cdas",
    "builtin_experiment_definition",
    "code_lesson",
    "compare_conditions",
    "compile_instructions",
    "config_from_json",
    "config_hash",
    "config_to_json",
    "confusion_pairs",
    "default_config",
    "evaluate_run",
    "harmonic_f1",
    "inject_feedback",
    "make_batches",
    "metrics",
    "parse_agent_response",
    "parse_codebook",
    "parse_gold",
    "parse_transcript",
    "refinement_cycle",
    "render_agent_response",
    "render_csv",
    "render_json",
    "render_text_table",
    "resolve_code",
    "run_condition",
    "run_experiment",
    "select_examples",
    "serialize_codebook",
    "serialize_gold",
    "serialize_transcript",
    "turn_precision",
    "validate_decision_tree",
]
