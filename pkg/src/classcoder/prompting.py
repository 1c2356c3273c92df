"""Declarative instruction configs and their deterministic compilation.

A config bundles a role preamble, priority-ordered rules, a codebook, a
forward-only decision tree, justification/stability rules, anchor examples
and a token budget. Compilation renders a byte-stable document with a
section map and a content hash of the originating config.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field, replace
from typing import Callable

from .codebook import UNCODED_ID, Code, Codebook, builtin_cdas, resolve_code
from .errors import CompileError, OverBudgetError, UnknownLabelError
from .transcript import Turn

log = logging.getLogger(__name__)

# Canonical section order of a compiled document.
SECTION_ORDER = (
    "role",
    "rules",
    "codes",
    "decision_tree",
    "justification",
    "stability",
    "examples",
)

EXAMPLE_KINDS = ("core", "ambiguous", "multi_utterance", "edge")

# Prompt template sent when a prior turn with the same code set exists.
STABILITY_PROBE_TEMPLATE = "A similar response was coded as [X]. Does this classification align?"

# Self-monitoring line the agent is asked to end each turn block with.
SELF_CHECK_LINE = "Coding confirmed using decision tree."

DEFAULT_TOKEN_BUDGET = 8000


# ---------------------------------------------------------------------------
# Decision tree


@dataclass(frozen=True)
class Action:
    """A branch outcome: assign codes, leave uncoded, jump forward, or continue."""

    kind: str  # assign | uncoded | goto | continue
    codes: tuple[str, ...] = ()
    target: int = 0

    @staticmethod
    def assign(*codes: str) -> "Action":
        return Action(kind="assign", codes=tuple(codes))

    @staticmethod
    def uncoded() -> "Action":
        return Action(kind="uncoded")

    @staticmethod
    def goto(target: int) -> "Action":
        return Action(kind="goto", target=target)

    @staticmethod
    def proceed() -> "Action":
        return Action(kind="continue")


@dataclass(frozen=True)
class Branch:
    condition: str
    action: Action


@dataclass(frozen=True)
class Step:
    number: int
    title: str
    branches: tuple[Branch, ...]


@dataclass(frozen=True)
class DecisionTree:
    steps: tuple[Step, ...]


@dataclass(frozen=True)
class TreeViolation:
    kind: str
    step: int
    message: str
    severity: str = "error"  # error | warning


@dataclass(frozen=True)
class TreeValidationReport:
    violations: tuple[TreeViolation, ...]

    @property
    def ok(self) -> bool:
        return not any(v.severity == "error" for v in self.violations)


def validate_decision_tree(tree: DecisionTree, codebook: Codebook) -> TreeValidationReport:
    """Check a tree against the forward-only step/branch rules.

    Violations are data, not exceptions: backward or dangling GOTOs,
    unknown ASSIGN codes, branchless steps, CONTINUE in the last step, and
    non-consecutive numbering are errors; unreachable steps are warnings.
    """
    violations: list[TreeViolation] = []
    if not tree.steps:
        return TreeValidationReport((TreeViolation("empty", 0, "tree has no steps"),))

    numbers = [s.number for s in tree.steps]
    numbering_ok = numbers == list(range(1, len(tree.steps) + 1))
    if not numbering_ok:
        violations.append(
            TreeViolation("numbering", 0, f"step numbers must be 1..{len(tree.steps)}, got {numbers}")
        )

    last = tree.steps[-1].number
    for step in tree.steps:
        if not step.branches:
            violations.append(
                TreeViolation("no_branches", step.number, f"step {step.number} has no branches")
            )
        for branch in step.branches:
            action = branch.action
            if action.kind == "goto":
                if action.target <= step.number:
                    violations.append(
                        TreeViolation(
                            "backward_goto",
                            step.number,
                            f"step {step.number}: goto {action.target} is not strictly forward",
                        )
                    )
                elif action.target not in numbers:
                    violations.append(
                        TreeViolation(
                            "goto_target",
                            step.number,
                            f"step {step.number}: goto {action.target} targets no step",
                        )
                    )
            elif action.kind == "assign":
                if not action.codes:
                    violations.append(
                        TreeViolation(
                            "empty_assign", step.number, f"step {step.number}: assign with no codes"
                        )
                    )
                for code_id in action.codes:
                    try:
                        resolve_code(codebook, code_id)
                    except UnknownLabelError:
                        violations.append(
                            TreeViolation(
                                "unknown_code",
                                step.number,
                                f"step {step.number}: assign references unknown code {code_id!r}",
                            )
                        )
            elif action.kind == "continue" and step.number == last:
                violations.append(
                    TreeViolation(
                        "continue_in_last_step",
                        step.number,
                        f"step {step.number} is last and cannot continue",
                    )
                )
            elif action.kind not in ("assign", "uncoded", "goto", "continue"):
                violations.append(
                    TreeViolation(
                        "unknown_action", step.number, f"unknown action kind {action.kind!r}"
                    )
                )

    if numbering_ok:
        reachable = {1}
        for step in tree.steps:
            if step.number not in reachable:
                continue
            for branch in step.branches:
                if branch.action.kind == "goto":
                    reachable.add(branch.action.target)
                elif branch.action.kind == "continue":
                    reachable.add(step.number + 1)
        for step in tree.steps:
            if step.number not in reachable:
                violations.append(
                    TreeViolation(
                        "unreachable_step",
                        step.number,
                        f"step {step.number} is unreachable",
                        severity="warning",
                    )
                )

    return TreeValidationReport(tuple(violations))


# ---------------------------------------------------------------------------
# Examples


@dataclass(frozen=True)
class ExampleItem:
    """An anchor example: a focus turn with optional dialogue context.

    `adjudicated` marks items produced by the feedback cycle; they render
    in the dedicated adjudicated sub-block instead of their kind group.
    """

    kind: str
    focus_turn: Turn
    gold_codes: frozenset[str]
    context_turns: tuple[Turn, ...] = ()
    rationale: str = ""
    adjudicated: bool = False

    def __post_init__(self) -> None:
        if self.kind not in EXAMPLE_KINDS:
            raise CompileError(f"unknown example kind {self.kind!r}")
        if not self.gold_codes:
            raise CompileError(f"example for turn {self.focus_turn.turn_id}: empty gold codes")
        if UNCODED_ID in self.gold_codes and len(self.gold_codes) > 1:
            raise CompileError(
                f"example for turn {self.focus_turn.turn_id}: "
                f"{UNCODED_ID} cannot combine with other codes"
            )


@dataclass(frozen=True)
class ExampleSet:
    items: tuple[ExampleItem, ...] = ()

    def of_kind(self, kind: str) -> tuple[ExampleItem, ...]:
        return tuple(i for i in self.items if i.kind == kind and not i.adjudicated)

    @property
    def adjudicated(self) -> tuple[ExampleItem, ...]:
        return tuple(i for i in self.items if i.adjudicated)


_SENTENCE_SPLIT_RE = re.compile(r"[.?!]+")


def utterance_count(text: str) -> int:
    """Rough count of sentence-level utterances within a turn."""
    return sum(1 for part in _SENTENCE_SPLIT_RE.split(text) if part.strip())


@dataclass(frozen=True)
class QuotaViolation:
    kind: str
    message: str


@dataclass(frozen=True)
class QuotaReport:
    violations: tuple[QuotaViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_example_quota(examples: ExampleSet, codebook: Codebook) -> QuotaReport:
    """Check the anchor-example quotas.

    Core: 10-15 items jointly covering every substantive code. Ambiguous:
    5-10. Multi-utterance: at least 5, each with either two or more gold
    codes or a multi-sentence focus turn. Edge: at least 5. Adjudicated
    items come from feedback cycles, not curation, and are not counted.
    """
    violations: list[QuotaViolation] = []
    counts = {kind: len(examples.of_kind(kind)) for kind in EXAMPLE_KINDS}

    if not 10 <= counts["core"] <= 15:
        violations.append(
            QuotaViolation("core_count", f"core examples must number 10-15, got {counts['core']}")
        )
    covered = set()
    for item in examples.of_kind("core"):
        covered |= item.gold_codes
    missing = [c for c in codebook.substantive_ids if c not in covered]
    if missing:
        violations.append(
            QuotaViolation("core_coverage", f"no core example covers: {', '.join(missing)}")
        )
    if not 5 <= counts["ambiguous"] <= 10:
        violations.append(
            QuotaViolation(
                "ambiguous_count", f"ambiguous examples must number 5-10, got {counts['ambiguous']}"
            )
        )
    if counts["multi_utterance"] < 5:
        violations.append(
            QuotaViolation(
                "multi_utterance_count",
                f"multi-utterance examples must number at least 5, got {counts['multi_utterance']}",
            )
        )
    for item in examples.of_kind("multi_utterance"):
        if len(item.gold_codes) < 2 and utterance_count(item.focus_turn.text) < 2:
            violations.append(
                QuotaViolation(
                    "not_multi_utterance",
                    f"turn {item.focus_turn.turn_id}: multi-utterance example has a single code "
                    "and a single utterance",
                )
            )
    if counts["edge"] < 5:
        violations.append(
            QuotaViolation("edge_count", f"edge examples must number at least 5, got {counts['edge']}")
        )
    return QuotaReport(tuple(violations))


# ---------------------------------------------------------------------------
# Config and compilation


@dataclass(frozen=True)
class PrioritizedRule:
    priority: int
    text: str


@dataclass(frozen=True)
class InstructionConfig:
    role_preamble: str
    global_rules: tuple[PrioritizedRule, ...]
    codebook: Codebook
    decision_tree: DecisionTree
    justification_rules: tuple[str, ...] = ()
    stability_rules: tuple[str, ...] = ()
    examples: ExampleSet = field(default_factory=ExampleSet)
    token_budget: int = DEFAULT_TOKEN_BUDGET

    def __post_init__(self) -> None:
        if self.token_budget <= 0:
            raise CompileError(f"token_budget must be positive, got {self.token_budget}")

    def with_examples(self, examples: ExampleSet) -> "InstructionConfig":
        return replace(self, examples=examples)


@dataclass(frozen=True)
class InstructionDocument:
    """A compiled instruction document.

    `section_map` tiles the full text (no gaps) in canonical section
    order. `token_budget` and `codebook` are carried over from the source
    config, so consumers can reject over-budget documents up front and
    parse responses without re-reading the config.
    """

    text: str
    section_map: dict[str, tuple[int, int]]
    token_estimate: int
    config_hash: str
    token_budget: int
    codebook: Codebook

    def section_text(self, name: str) -> str:
        start, end = self.section_map[name]
        return self.text[start:end]


TokenEstimator = Callable[[str], int]


def estimate_tokens(text: str) -> int:
    """Default token estimator: ceiling(character count / 4)."""
    return (len(text) + 3) // 4


def _action_text(action: Action) -> str:
    if action.kind == "assign":
        return "assign " + ", ".join(action.codes)
    if action.kind == "uncoded":
        return f"assign {UNCODED_ID} (uncoded)"
    if action.kind == "goto":
        return f"go to step {action.target}"
    return "continue to the next step"


def _render_code(code: Code) -> str:
    lines = [f"{code.id} ({code.name}): {code.definition}"]
    if code.keywords:
        lines.append("    Keywords: " + ", ".join(code.keywords))
    if code.exclusions:
        lines.append("    " + code.exclusions)
    if code.aliases:
        lines.append("    Also written: " + ", ".join(code.aliases))
    return "\n".join(lines)


def _render_turn(turn: Turn) -> str:
    return f"{turn.turn_id} ({turn.speaker}): {turn.text}"


def _render_example(item: ExampleItem, number: int) -> str:
    lines = [f"Example {number}:"]
    if item.context_turns:
        lines.append("    Context:")
        for turn in item.context_turns:
            lines.append("        " + _render_turn(turn))
    lines.append(f"    Turn {_render_turn(item.focus_turn)}")
    lines.append("    Codes: " + ", ".join(sorted(item.gold_codes)))
    if item.rationale:
        lines.append(f"    Rationale: {item.rationale}")
    return "\n".join(lines)


_EXAMPLE_GROUP_TITLES = {
    "core": "Core examples (clear cases)",
    "ambiguous": "Ambiguous and borderline examples",
    "multi_utterance": "Multi-utterance examples",
    "edge": "Edge cases",
}


def _render_sections(config: InstructionConfig) -> dict[str, str]:
    sections: dict[str, str] = {}
    sections["role"] = config.role_preamble.rstrip("\n") + "\n\n"

    indexed = sorted(
        enumerate(config.global_rules), key=lambda pair: (-pair[1].priority, pair[0])
    )
    rule_lines = [f"{i}. {rule.text}" for i, (_, rule) in enumerate(indexed, start=1)]
    sections["rules"] = "## Coding rules (highest priority first)\n" + (
        "\n".join(rule_lines) + "\n\n" if rule_lines else "(none)\n\n"
    )

    code_blocks = [_render_code(code) for code in config.codebook.codes]
    sections["codes"] = "## Code definitions\n" + "\n".join(code_blocks) + "\n\n"

    tree_lines = []
    for step in config.decision_tree.steps:
        tree_lines.append(f"Step {step.number}: {step.title}")
        for branch in step.branches:
            tree_lines.append(f"    - If {branch.condition}: {_action_text(branch.action)}.")
    sections["decision_tree"] = "## Decision procedure\n" + (
        "\n".join(tree_lines) + "\n\n" if tree_lines else "(none)\n\n"
    )

    sections["justification"] = "## Rules for justification\n" + (
        "\n".join(f"- {r}" for r in config.justification_rules) + "\n\n"
        if config.justification_rules
        else "(none)\n\n"
    )

    sections["stability"] = "## Stability control\n" + (
        "\n".join(f"- {r}" for r in config.stability_rules) + "\n\n"
        if config.stability_rules
        else "(none)\n\n"
    )

    example_blocks: list[str] = []
    number = 0
    for kind in EXAMPLE_KINDS:
        items = config.examples.of_kind(kind)
        if not items:
            continue
        group = [f"### {_EXAMPLE_GROUP_TITLES[kind]}"]
        for item in items:
            number += 1
            group.append(_render_example(item, number))
        example_blocks.append("\n".join(group))
    adjudicated = config.examples.adjudicated
    if adjudicated:
        group = ["### Adjudicated examples"]
        for item in adjudicated:
            number += 1
            group.append(_render_example(item, number))
        example_blocks.append("\n".join(group))
    sections["examples"] = "## Anchor examples\n" + (
        "\n\n".join(example_blocks) + "\n" if example_blocks else "(none)\n"
    )
    return sections


def compile_instructions(
    config: InstructionConfig, estimator: TokenEstimator = estimate_tokens
) -> InstructionDocument:
    """Compile a config into a deterministic instruction document.

    Canonical section order: role preamble, global rules by descending
    priority, code definitions, decision tree, justification rules,
    stability rules, anchor examples grouped by kind. Raises on an invalid
    tree, unknown example codes, or a busted token budget.
    """
    report = validate_decision_tree(config.decision_tree, config.codebook)
    if not report.ok:
        messages = "; ".join(v.message for v in report.violations if v.severity == "error")
        raise CompileError(f"invalid decision tree: {messages}")

    for item in config.examples.items:
        for code_id in item.gold_codes:
            try:
                resolve_code(config.codebook, code_id)
            except UnknownLabelError:
                raise CompileError(
                    f"example for turn {item.focus_turn.turn_id} references unknown code "
                    f"{code_id!r}"
                ) from None

    sections = _render_sections(config)
    section_map: dict[str, tuple[int, int]] = {}
    offset = 0
    parts = []
    for name in SECTION_ORDER:
        text = sections[name]
        section_map[name] = (offset, offset + len(text))
        parts.append(text)
        offset += len(text)
    text = "".join(parts)

    token_estimate = estimator(text)
    if token_estimate > config.token_budget:
        raise OverBudgetError(token_estimate, config.token_budget)
    if token_estimate > 0.8 * config.token_budget:
        log.warning(
            "instruction document at %d of %d estimated tokens (over 80%% of budget)",
            token_estimate,
            config.token_budget,
        )

    return InstructionDocument(
        text=text,
        section_map=section_map,
        token_estimate=token_estimate,
        config_hash=config_hash(config),
        token_budget=config.token_budget,
        codebook=config.codebook,
    )


# ---------------------------------------------------------------------------
# Canonical serialization and hashing


def _turn_to_dict(turn: Turn) -> dict:
    return {"turn_id": turn.turn_id, "speaker": turn.speaker, "text": turn.text}


def _action_to_dict(action: Action) -> dict:
    out: dict = {"kind": action.kind}
    if action.kind == "assign":
        out["codes"] = list(action.codes)
    if action.kind == "goto":
        out["target"] = action.target
    return out


def config_to_dict(config: InstructionConfig) -> dict:
    """Plain-data form of a config (the JSON file schema, codebook inlined)."""
    return {
        "role_preamble": config.role_preamble,
        "global_rules": [{"priority": r.priority, "text": r.text} for r in config.global_rules],
        "codebook": {
            "version": config.codebook.version,
            "codes": [
                {
                    "id": c.id,
                    "name": c.name,
                    "definition": c.definition,
                    "keywords": list(c.keywords),
                    "exclusions": c.exclusions,
                    "aliases": list(c.aliases),
                }
                for c in config.codebook.codes
            ],
        },
        "decision_tree": {
            "steps": [
                {
                    "number": s.number,
                    "title": s.title,
                    "branches": [
                        {"condition": b.condition, "action": _action_to_dict(b.action)}
                        for b in s.branches
                    ],
                }
                for s in config.decision_tree.steps
            ]
        },
        "justification_rules": list(config.justification_rules),
        "stability_rules": list(config.stability_rules),
        "examples": [
            {
                "kind": i.kind,
                "context_turns": [_turn_to_dict(t) for t in i.context_turns],
                "focus_turn": _turn_to_dict(i.focus_turn),
                "gold_codes": sorted(i.gold_codes),
                "rationale": i.rationale,
                "adjudicated": i.adjudicated,
            }
            for i in config.examples.items
        ],
        "token_budget": config.token_budget,
    }


def config_from_dict(data: dict) -> InstructionConfig:
    """Inverse of config_to_dict. `codebook` may also be the string "builtin:cdas"."""
    cb = data["codebook"]
    if cb == "builtin:cdas":
        codebook = builtin_cdas()
    elif isinstance(cb, dict):
        codebook = Codebook(
            version=cb.get("version", "custom"),
            codes=tuple(
                Code(
                    id=c["id"],
                    name=c.get("name", c["id"]),
                    definition=c.get("definition", ""),
                    keywords=tuple(c.get("keywords", ())),
                    exclusions=c.get("exclusions", ""),
                    aliases=tuple(c.get("aliases", ())),
                )
                for c in cb["codes"]
            ),
        )
    else:
        raise CompileError(f"unsupported codebook reference {cb!r}")

    def turn(d: dict) -> Turn:
        return Turn(turn_id=d["turn_id"], speaker=d["speaker"], text=d["text"])

    def action(d: dict) -> Action:
        kind = d["kind"]
        if kind == "assign":
            return Action.assign(*d["codes"])
        if kind == "goto":
            return Action.goto(d["target"])
        if kind == "uncoded":
            return Action.uncoded()
        if kind == "continue":
            return Action.proceed()
        raise CompileError(f"unknown action kind {kind!r}")

    tree = DecisionTree(
        steps=tuple(
            Step(
                number=s["number"],
                title=s["title"],
                branches=tuple(
                    Branch(condition=b["condition"], action=action(b["action"]))
                    for b in s["branches"]
                ),
            )
            for s in data.get("decision_tree", {}).get("steps", ())
        )
    )
    examples = ExampleSet(
        items=tuple(
            ExampleItem(
                kind=e["kind"],
                focus_turn=turn(e["focus_turn"]),
                gold_codes=frozenset(e["gold_codes"]),
                context_turns=tuple(turn(t) for t in e.get("context_turns", ())),
                rationale=e.get("rationale", ""),
                adjudicated=e.get("adjudicated", False),
            )
            for e in data.get("examples", ())
        )
    )
    return InstructionConfig(
        role_preamble=data["role_preamble"],
        global_rules=tuple(
            PrioritizedRule(priority=r["priority"], text=r["text"])
            for r in data.get("global_rules", ())
        ),
        codebook=codebook,
        decision_tree=tree,
        justification_rules=tuple(data.get("justification_rules", ())),
        stability_rules=tuple(data.get("stability_rules", ())),
        examples=examples,
        token_budget=data.get("token_budget", DEFAULT_TOKEN_BUDGET),
    )


def config_to_json(config: InstructionConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def config_from_json(text: str) -> InstructionConfig:
    return config_from_dict(json.loads(text))


def config_hash(config: InstructionConfig) -> str:
    """Stable content hash over the canonical serialization of a config.

    Structurally equal configs hash identically regardless of how they
    were constructed or formatted on disk.
    """
    canonical = json.dumps(
        config_to_dict(config), sort_keys=True, separators=(",", ":"), ensure_ascii=False
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def document_sidecar(document: InstructionDocument) -> dict:
    """JSON sidecar exported next to the plain-text document."""
    return {
        "section_map": {k: list(v) for k, v in document.section_map.items()},
        "token_estimate": document.token_estimate,
        "config_hash": document.config_hash,
        "token_budget": document.token_budget,
    }


# ---------------------------------------------------------------------------
# Built-in defaults (the CDAS fixture configuration)


def default_decision_tree() -> DecisionTree:
    """Three-step default tree: relevance gate, invitations, contributions."""
    return DecisionTree(
        steps=(
            Step(
                number=1,
                title="Verify the Learning Goal Before Coding",
                branches=(
                    Branch(
                        condition=(
                            "the utterance is not relevant to the learning goal "
                            "(greetings, administration, off-topic talk)"
                        ),
                        action=Action.uncoded(),
                    ),
                    Branch(
                        condition="the utterance is relevant to the learning goal",
                        action=Action.goto(2),
                    ),
                ),
            ),
            Step(
                number=2,
                title="Check for invitations",
                branches=(
                    Branch(
                        condition="it asks for explanation, justification, speculation or prediction",
                        action=Action.assign("IRE"),
                    ),
                    Branch(
                        condition="it invites building on, evaluating or clarifying a prior contribution",
                        action=Action.assign("ELI"),
                    ),
                    Branch(
                        condition="it invites comparing, synthesising or resolving ideas",
                        action=Action.assign("IC"),
                    ),
                    Branch(
                        condition="it is any other verbal invitation",
                        action=Action.assign("OI"),
                    ),
                    Branch(condition="it invites nothing", action=Action.proceed()),
                ),
            ),
            Step(
                number=3,
                title="Code the contribution",
                branches=(
                    Branch(condition="it gives reasons, explanations or evidence", action=Action.assign("RE")),
                    Branch(condition="it builds on or adds to earlier ideas", action=Action.assign("EL")),
                    Branch(condition="it compares ideas without reasons", action=Action.assign("SC")),
                    Branch(condition="it compares ideas with justification", action=Action.assign("RC")),
                    Branch(condition="it explicitly agrees or accepts", action=Action.assign("A")),
                    Branch(condition="it challenges or disagrees", action=Action.assign("Q")),
                    Branch(condition="it refers back to prior class knowledge", action=Action.assign("RB")),
                    Branch(condition="it links to wider, out-of-class context", action=Action.assign("RW")),
                    Branch(condition="none of the definitions fit", action=Action.uncoded()),
                ),
            ),
        )
    )


def default_config(
    codebook: Codebook | None = None,
    examples: ExampleSet | None = None,
    token_budget: int = DEFAULT_TOKEN_BUDGET,
) -> InstructionConfig:
    """The baseline instruction configuration over the CDAS codebook."""
    codebook = codebook or builtin_cdas()
    return InstructionConfig(
        role_preamble=(
            "You are a coding assistant that applies a classroom-dialogue coding scheme "
            f"({codebook.version}) to lesson transcripts. Codes describe the dialogic "
            "function of each turn, so always interpret an utterance in the context of "
            "the surrounding dialogue."
        ),
        global_rules=(
            PrioritizedRule(100, "Use only the codes defined in this document."),
            PrioritizedRule(
                90,
                "Judge each turn by how meaning flows across turns, not sentence by sentence.",
            ),
            PrioritizedRule(80, "A turn may carry more than one code when distinct moves co-occur."),
            PrioritizedRule(
                70,
                f"Assign {UNCODED_ID} only when no other code applies, never alongside another code.",
            ),
            PrioritizedRule(
                60, "This is a coding session, not a conversation: reply only with codings."
            ),
        ),
        codebook=codebook,
        decision_tree=default_decision_tree(),
        justification_rules=(
            "Give a one-line justification per turn, naming the words that triggered each code.",
            "Do not apply invitation codes (ELI, IRE, IC, OI) to rhetorical or non-verbal prompts.",
        ),
        stability_rules=(
            "Compare each decision with your previous codings in this session.",
            STABILITY_PROBE_TEMPLATE,
        ),
        examples=examples or ExampleSet(),
        token_budget=token_budget,
    )
