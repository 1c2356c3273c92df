"""Batched coding sessions against a pluggable backend.

Drives a lesson through a backend in batches with optional session resets,
rule-verification probes before any coding, stability probes against
recent precedents, and a self-check suffix. Parses the agent's response
blocks into normalized per-turn codings and folds human adjudications
back into configs.
"""

from __future__ import annotations

import re
import uuid
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .codebook import UNCODED_ID, Codebook, resolve_code
from .errors import BackendError, OverBudgetError, ResponseParseError, UnknownLabelError
from .prompting import (
    SELF_CHECK_LINE,
    STABILITY_PROBE_TEMPLATE,
    ExampleItem,
    ExampleSet,
    InstructionConfig,
    InstructionDocument,
    compile_instructions,
)
from .transcript import Batch, Lesson, Turn, make_batches

Message = dict[str, str]  # {"role": system|user|assistant, "content": text}

# Fixed instruction closing every batch request.
REQUEST_SUFFIX = (
    "Code each turn. Output for each: `Turn <id>` then `Codes: ...` "
    "then `Justification: ...`."
)
SELF_CHECK_REQUEST = f'End each turn block with the line "{SELF_CHECK_LINE}"'

# Probes sent before any coding when rule verification is on. The
# multi-utterance probe must come first.
VERIFICATION_PROBES = (
    "Before we start coding: explain your understanding of coding multi-utterance dialogue.",
)

STABILITY_WINDOW = 5


@dataclass(frozen=True)
class SessionPolicy:
    batch_size: int = 20
    reset_between_batches: bool = True
    verify_rules_first: bool = True
    stability_probe: bool = False
    self_check_suffix: bool = True

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {self.batch_size}")


def policy_to_dict(policy: SessionPolicy) -> dict:
    return {
        "batch_size": policy.batch_size,
        "reset_between_batches": policy.reset_between_batches,
        "verify_rules_first": policy.verify_rules_first,
        "stability_probe": policy.stability_probe,
        "self_check_suffix": policy.self_check_suffix,
    }


def policy_from_dict(data: dict) -> SessionPolicy:
    defaults = SessionPolicy()
    return SessionPolicy(
        batch_size=data.get("batch_size", defaults.batch_size),
        reset_between_batches=data.get("reset_between_batches", defaults.reset_between_batches),
        verify_rules_first=data.get("verify_rules_first", defaults.verify_rules_first),
        stability_probe=data.get("stability_probe", defaults.stability_probe),
        self_check_suffix=data.get("self_check_suffix", defaults.self_check_suffix),
    )


@dataclass(frozen=True)
class TurnCoding:
    turn_id: int
    predicted: frozenset[str]
    justification: str = ""
    # Char range of the source block in the raw response; not part of
    # coding identity.
    raw_span: tuple[int, int] = field(default=(0, 0), compare=False)

    def __post_init__(self) -> None:
        if not self.predicted:
            raise ValueError(f"turn {self.turn_id}: empty predicted set")
        if UNCODED_ID in self.predicted and len(self.predicted) > 1:
            raise ValueError(
                f"turn {self.turn_id}: {UNCODED_ID} cannot co-occur with other codes"
            )


def coding_to_dict(coding: TurnCoding) -> dict:
    return {
        "turn_id": coding.turn_id,
        "predicted": sorted(coding.predicted),
        "justification": coding.justification,
    }


def coding_from_dict(data: dict) -> TurnCoding:
    return TurnCoding(
        turn_id=data["turn_id"],
        predicted=frozenset(data["predicted"]),
        justification=data.get("justification", ""),
    )


@dataclass(frozen=True)
class FeedbackItem:
    turn_id: int
    agent_codes: frozenset[str]
    adjudicated_codes: frozenset[str]
    note: str = ""

    def __post_init__(self) -> None:
        if not self.adjudicated_codes:
            raise ValueError(f"turn {self.turn_id}: empty adjudicated codes")
        if UNCODED_ID in self.adjudicated_codes and len(self.adjudicated_codes) > 1:
            raise ValueError(
                f"turn {self.turn_id}: {UNCODED_ID} cannot co-occur with other codes"
            )


@dataclass
class CodingRun:
    run_id: str
    lesson_id: str
    config_hash: str
    backend_id: str
    policy: SessionPolicy
    codings: list[TurnCoding] = field(default_factory=list)
    status: str = "pending"  # pending | running | complete | failed
    # One entry per batch: the messages newly exchanged while processing
    # it (including the instruction document when a session was opened),
    # plus any normalization warnings.
    event_log: list[dict] = field(default_factory=list)
    failure: str = ""
    failed_batch: int | None = None


def run_to_report_dict(run: CodingRun) -> dict:
    """Deterministic snapshot of a run: no run id, timestamps or transcript."""
    return {
        "lesson_id": run.lesson_id,
        "config_hash": run.config_hash,
        "backend_id": run.backend_id,
        "policy": policy_to_dict(run.policy),
        "status": run.status,
        "codings": [coding_to_dict(c) for c in run.codings],
        "failure": run.failure,
        "failed_batch": run.failed_batch,
    }


# ---------------------------------------------------------------------------
# Response rendering and parsing

_MARKUP_RE = re.compile(r"[*_]")
_HEADER_RE = re.compile(r"^\s*(?:#+\s*)?Turn\s+(\d+)\s*(?:\([^)]*\))?\s*:?\s*$", re.IGNORECASE)
_CODES_RE = re.compile(r"^\s*Codes\s*:\s*(.*?)\s*$", re.IGNORECASE)
_JUSTIFICATION_RE = re.compile(r"^\s*Justification\s*:\s*(.*?)\s*$", re.IGNORECASE)


def render_agent_response(codings: Sequence[TurnCoding], self_check: bool = True) -> str:
    """Reference renderer for response blocks; the mock backend speaks this."""
    blocks = []
    for coding in codings:
        lines = [f"Turn {coding.turn_id}", "Codes: " + ", ".join(sorted(coding.predicted))]
        if coding.justification:
            lines.append("Justification: " + " ".join(coding.justification.split()))
        if self_check:
            lines.append(SELF_CHECK_LINE)
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def _split_blocks(response: str) -> dict[int, tuple[int, int]]:
    """Map turn_id -> char span of its block. Duplicate headers error later."""
    headers: list[tuple[int, int]] = []  # (turn_id, line start offset)
    offset = 0
    for line in response.splitlines(keepends=True):
        match = _HEADER_RE.match(_MARKUP_RE.sub("", line.rstrip("\n")))
        if match:
            headers.append((int(match.group(1)), offset))
        offset += len(line)
    spans: dict[int, tuple[int, int]] = {}
    duplicates: set[int] = set()
    for i, (turn_id, start) in enumerate(headers):
        end = headers[i + 1][1] if i + 1 < len(headers) else len(response)
        if turn_id in spans:
            duplicates.add(turn_id)
        spans[turn_id] = (start, end)
    for turn_id in duplicates:
        spans[turn_id] = (-1, -1)
    return spans


def _extract_labels(line_value: str) -> list[str]:
    return [part for part in (p.strip() for p in line_value.split(",")) if part]


def _normalize(
    turn_id: int,
    labels: list[str],
    codebook: Codebook,
    warnings: list[str],
) -> frozenset[str]:
    resolved = set()
    for label in labels:
        try:
            resolved.add(resolve_code(codebook, label).id)
        except UnknownLabelError:
            raise ResponseParseError(
                f"turn {turn_id}: unknown code label {label!r}", turn_id=turn_id
            ) from None
    if not resolved:
        resolved = {UNCODED_ID}
    elif UNCODED_ID in resolved and len(resolved) > 1:
        resolved.discard(UNCODED_ID)
        warnings.append(
            f"turn {turn_id}: {UNCODED_ID} co-occurred with "
            f"{', '.join(sorted(resolved))}; dropped {UNCODED_ID}"
        )
    return frozenset(resolved)


def parse_agent_response(
    response: str,
    batch: Batch,
    codebook: Codebook,
    expect_self_check: bool = False,
    warnings: list[str] | None = None,
) -> list[TurnCoding]:
    """Parse response blocks into one normalized coding per batch turn.

    A block starts at a `Turn <id>` header (optional speaker suffix,
    markdown emphasis tolerated). The last `Codes:` line wins; labels
    resolve case-insensitively through aliases. An empty code list
    normalizes to UC; UC alongside other codes is dropped with a warning.
    """
    if warnings is None:
        warnings = []
    spans = _split_blocks(response)
    codings: list[TurnCoding] = []
    for turn in batch.turns:
        span = spans.get(turn.turn_id)
        if span is None:
            raise ResponseParseError(
                f"turn {turn.turn_id}: no response block found", turn_id=turn.turn_id
            )
        if span == (-1, -1):
            raise ResponseParseError(
                f"turn {turn.turn_id}: duplicate response blocks", turn_id=turn.turn_id
            )
        block = response[span[0] : span[1]]
        labels: list[str] | None = None
        justification = ""
        saw_self_check = False
        for raw_line in block.splitlines():
            line = _MARKUP_RE.sub("", raw_line)
            codes_match = _CODES_RE.match(line)
            if codes_match:
                labels = _extract_labels(codes_match.group(1))
                continue
            just_match = _JUSTIFICATION_RE.match(line)
            if just_match:
                justification = just_match.group(1)
            if SELF_CHECK_LINE in line:
                saw_self_check = True
        if labels is None:
            raise ResponseParseError(
                f"turn {turn.turn_id}: block has no Codes line", turn_id=turn.turn_id
            )
        if expect_self_check and not saw_self_check:
            warnings.append(f"turn {turn.turn_id}: self-check line missing")
        codings.append(
            TurnCoding(
                turn_id=turn.turn_id,
                predicted=_normalize(turn.turn_id, labels, codebook, warnings),
                justification=justification,
                raw_span=span,
            )
        )
    return codings


def _extract_codes_line(text: str) -> list[str] | None:
    """Last `Codes:` line of a free-form answer, or None."""
    labels = None
    for raw_line in text.splitlines():
        match = _CODES_RE.match(_MARKUP_RE.sub("", raw_line))
        if match:
            labels = _extract_labels(match.group(1))
    return labels


# ---------------------------------------------------------------------------
# Sessions


class Session:
    """One ordered message exchange with a backend."""

    def __init__(self, backend, document_text: str):
        self.backend = backend
        self.messages: list[Message] = [{"role": "system", "content": document_text}]

    def ask(self, content: str) -> str:
        self.messages.append({"role": "user", "content": content})
        try:
            answer = self.backend.send(self.messages)
        except Exception:
            # The unanswered question must not linger in the transcript.
            self.messages.pop()
            raise
        self.messages.append({"role": "assistant", "content": answer})
        return answer


def _send_probes(session: Session) -> list[dict]:
    return [{"question": probe, "answer": session.ask(probe)} for probe in VERIFICATION_PROBES]


def verify_rules(document: InstructionDocument, backend) -> list[dict]:
    """Send the fixed probe set in a fresh session; return Q/A pairs."""
    return _send_probes(Session(backend, document.text))


def batch_request(batch: Batch, self_check: bool = True) -> str:
    lines = [f"Turn {t.turn_id} ({t.speaker}): {t.text}" for t in batch.turns]
    suffix = REQUEST_SUFFIX + (" " + SELF_CHECK_REQUEST if self_check else "")
    return "\n".join(lines) + "\n\n" + suffix


def _stability_exchange(
    session: Session,
    coding: TurnCoding,
    precedent: TurnCoding,
    codebook: Codebook,
    warnings: list[str],
) -> TurnCoding:
    codes_text = ", ".join(sorted(precedent.predicted))
    probe = STABILITY_PROBE_TEMPLATE.replace("[X]", f"[{codes_text}]")
    answer = session.ask(probe)
    labels = _extract_codes_line(answer)
    if labels is None:
        return coding
    predicted = _normalize(coding.turn_id, labels, codebook, warnings)
    return TurnCoding(
        turn_id=coding.turn_id,
        predicted=predicted,
        justification=coding.justification,
        raw_span=coding.raw_span,
    )


def code_lesson(
    lesson: Lesson,
    document: InstructionDocument,
    backend,
    policy: SessionPolicy = SessionPolicy(),
    run_id: str | None = None,
    on_batch: Callable[[dict], None] | None = None,
) -> CodingRun:
    """Code a whole lesson in batches; returns the run, complete or failed.

    Backend transport gets one retry per batch; a second failure or an
    unparseable response fails the run, recording the batch ordinal.
    `on_batch` sees each event-log entry as soon as its batch settles,
    which lets callers persist progress incrementally.
    """
    if document.token_estimate > document.token_budget:
        raise OverBudgetError(document.token_estimate, document.token_budget)

    run = CodingRun(
        run_id=run_id or f"run-{uuid.uuid4().hex[:12]}",
        lesson_id=lesson.lesson_id,
        config_hash=document.config_hash,
        backend_id=backend.id,
        policy=policy,
        status="running",
    )
    batches = make_batches(lesson, policy.batch_size)
    session: Session | None = None
    for batch in batches:
        opened = session is None or policy.reset_between_batches
        if opened:
            session = Session(backend, document.text)
        assert session is not None
        start = 0 if opened else len(session.messages)
        warnings: list[str] = []
        entry: dict = {"ordinal": batch.ordinal, "messages": [], "warnings": warnings}
        try:
            if batch.ordinal == 1 and policy.verify_rules_first:
                _send_probes(session)
            request = batch_request(batch, self_check=policy.self_check_suffix)
            try:
                response = session.ask(request)
            except BackendError:
                response = session.ask(request)
            codings = parse_agent_response(
                response,
                batch,
                document.codebook,
                expect_self_check=policy.self_check_suffix,
                warnings=warnings,
            )
            if policy.stability_probe:
                history = list(run.codings)
                probed: list[TurnCoding] = []
                for coding in codings:
                    window = (history + probed)[-STABILITY_WINDOW:]
                    precedent = next(
                        (p for p in reversed(window) if p.predicted == coding.predicted),
                        None,
                    )
                    if precedent is not None:
                        coding = _stability_exchange(
                            session, coding, precedent, document.codebook, warnings
                        )
                    probed.append(coding)
                codings = probed
        except (BackendError, ResponseParseError) as exc:
            entry["messages"] = [dict(m) for m in session.messages[start:]]
            run.event_log.append(entry)
            run.status = "failed"
            run.failure = str(exc)
            run.failed_batch = batch.ordinal
            if on_batch is not None:
                on_batch(entry)
            return run
        entry["messages"] = [dict(m) for m in session.messages[start:]]
        entry["codings"] = [coding_to_dict(c) for c in codings]
        run.event_log.append(entry)
        run.codings.extend(codings)
        if on_batch is not None:
            on_batch(entry)

    if [c.turn_id for c in run.codings] != list(lesson.turn_ids):
        run.status = "failed"
        run.failure = "codings do not cover the lesson's turns in order"
        return run
    run.status = "complete"
    return run


# ---------------------------------------------------------------------------
# Feedback injection


def inject_feedback(
    config: InstructionConfig, feedback: Sequence[FeedbackItem], lesson: Lesson
) -> InstructionConfig:
    """Fold adjudications into a new config as adjudicated ambiguous examples.

    The result is recompiled to enforce the token budget; the input config
    is untouched, and an empty feedback list yields a structurally equal
    config with the identical hash.
    """
    items = list(config.examples.items)
    for item in feedback:
        turn = lesson.turn(item.turn_id)
        items.append(
            ExampleItem(
                kind="ambiguous",
                focus_turn=turn,
                gold_codes=item.adjudicated_codes,
                rationale=item.note,
                adjudicated=True,
            )
        )
    new_config = config.with_examples(ExampleSet(items=tuple(items)))
    compile_instructions(new_config)
    return new_config
