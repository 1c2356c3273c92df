"""Lesson transcripts, gold annotations, and batch partitioning."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .codebook import UNCODED_ID, Codebook, resolve_code
from .errors import TranscriptError, UnknownLabelError


@dataclass(frozen=True)
class Turn:
    """One speaker's contribution; the unit of coding."""

    turn_id: int
    speaker: str
    text: str

    def __post_init__(self) -> None:
        if self.turn_id <= 0:
            raise TranscriptError(f"turn_id must be positive, got {self.turn_id}")
        if not self.text:
            raise TranscriptError(f"turn {self.turn_id}: empty utterance")
        if "\t" in self.text or "\t" in self.speaker:
            raise TranscriptError(f"turn {self.turn_id}: raw tab in speaker or text")


@dataclass(frozen=True)
class Lesson:
    lesson_id: str
    subject: str
    turns: tuple[Turn, ...]

    def __post_init__(self) -> None:
        ids = [t.turn_id for t in self.turns]
        for prev, cur in zip(ids, ids[1:]):
            if cur <= prev:
                raise TranscriptError(
                    f"turn ids must be strictly increasing ({prev} then {cur})"
                )

    def turn(self, turn_id: int) -> Turn:
        for t in self.turns:
            if t.turn_id == turn_id:
                return t
        raise TranscriptError(f"lesson {self.lesson_id} has no turn {turn_id}")

    @property
    def turn_ids(self) -> tuple[int, ...]:
        return tuple(t.turn_id for t in self.turns)


@dataclass(frozen=True)
class GoldAnnotationSet:
    """Human-assigned multi-label code sets, one nonempty set per turn."""

    lesson_id: str
    labels: dict[int, frozenset[str]]

    def __post_init__(self) -> None:
        for turn_id, codes in self.labels.items():
            if not codes:
                raise TranscriptError(f"turn {turn_id}: empty gold code set")
            if UNCODED_ID in codes and len(codes) > 1:
                raise TranscriptError(
                    f"turn {turn_id}: {UNCODED_ID} cannot combine with other codes"
                )


@dataclass(frozen=True)
class Batch:
    """A contiguous slice of a lesson's turns, 1-based ordinal."""

    lesson_id: str
    ordinal: int
    turns: tuple[Turn, ...]


# Raw tabs are rejected outright (the Turn invariant), so the tab-separated
# file formats escape only backslash and the line terminators. Records are
# framed by "\n" alone; other Unicode line breaks pass through as text.
_UNESCAPE_RE = re.compile(r"\\(.)")


def escape_text(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\n", "\\n").replace("\r", "\\r")


def unescape_text(text: str) -> str:
    def sub(m: re.Match[str]) -> str:
        c = m.group(1)
        if c == "n":
            return "\n"
        if c == "r":
            return "\r"
        if c == "\\":
            return "\\"
        raise TranscriptError(f"unsupported escape sequence \\{c}")

    return _UNESCAPE_RE.sub(sub, text)


def _record_lines(source: str) -> list[str]:
    # split("\n") rather than splitlines(): the latter also breaks on
    # \v, \f, \x1c-\x1e, \u2028 etc., which are legitimate text here.
    return [line.rstrip("\r") for line in source.split("\n")]


_HEADER_RE = re.compile(r"^#\s*(lesson_id|subject)\s*:\s*(.*)$")


def parse_transcript(source: str) -> Lesson:
    """Parse the transcript file format into a Lesson.

    Optional `# key: value` header lines (lesson_id, subject), then one
    `<turn_id><TAB><speaker><TAB><text>` line per turn. Other `#` lines are
    comments. Errors carry the offending line number.
    """
    lesson_id = ""
    subject = ""
    turns: list[Turn] = []
    last_id = 0
    for lineno, raw in enumerate(_record_lines(source), start=1):
        if not raw.strip():
            continue
        if raw.lstrip().startswith("#"):
            m = _HEADER_RE.match(raw.strip())
            if m:
                if m.group(1) == "lesson_id":
                    lesson_id = m.group(2).strip()
                else:
                    subject = m.group(2).strip()
            continue
        fields = raw.split("\t")
        if len(fields) != 3:
            raise TranscriptError(
                f"line {lineno}: expected 3 tab-separated fields, got {len(fields)}"
            )
        id_text, speaker, text = fields
        try:
            turn_id = int(id_text)
        except ValueError:
            raise TranscriptError(f"line {lineno}: non-integer turn id {id_text!r}") from None
        if turn_id <= last_id:
            raise TranscriptError(
                f"line {lineno}: turn id {turn_id} not greater than previous {last_id}"
            )
        if not text:
            raise TranscriptError(f"line {lineno}: empty utterance")
        try:
            turns.append(
                Turn(turn_id=turn_id, speaker=unescape_text(speaker), text=unescape_text(text))
            )
        except TranscriptError as exc:
            raise TranscriptError(f"line {lineno}: {exc}") from None
        last_id = turn_id
    return Lesson(lesson_id=lesson_id, subject=subject, turns=tuple(turns))


def serialize_transcript(lesson: Lesson) -> str:
    """Render a lesson in canonical transcript form (round-trips through parse)."""
    lines = []
    if lesson.lesson_id:
        lines.append(f"# lesson_id: {lesson.lesson_id}")
    if lesson.subject:
        lines.append(f"# subject: {lesson.subject}")
    for t in lesson.turns:
        lines.append(f"{t.turn_id}\t{escape_text(t.speaker)}\t{escape_text(t.text)}")
    return "\n".join(lines) + "\n"


def parse_gold(
    source: str,
    lesson: Lesson,
    codebook: Codebook,
    strict: bool = True,
) -> GoldAnnotationSet:
    """Parse a gold file: one `<turn_id><TAB><CODE>[,<CODE>...]` line per turn.

    Labels may be canonical ids or aliases and are resolved to canonical
    form. Strict mode (the default) requires every lesson turn to be
    annotated; lenient mode fills unannotated turns with UC.
    """
    lesson_ids = set(lesson.turn_ids)
    labels: dict[int, frozenset[str]] = {}
    for lineno, raw in enumerate(_record_lines(source), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise TranscriptError(
                f"line {lineno}: expected 2 tab-separated fields, got {len(fields)}"
            )
        try:
            turn_id = int(fields[0])
        except ValueError:
            raise TranscriptError(f"line {lineno}: non-integer turn id {fields[0]!r}") from None
        if turn_id not in lesson_ids:
            raise TranscriptError(
                f"line {lineno}: turn {turn_id} not present in lesson {lesson.lesson_id!r}"
            )
        if turn_id in labels:
            raise TranscriptError(f"line {lineno}: duplicate annotation for turn {turn_id}")
        code_ids = set()
        for label in fields[1].split(","):
            try:
                code_ids.add(resolve_code(codebook, label).id)
            except UnknownLabelError:
                raise TranscriptError(
                    f"line {lineno}: unknown code label {label.strip()!r}"
                ) from None
        if not code_ids:
            raise TranscriptError(f"line {lineno}: empty code list")
        if UNCODED_ID in code_ids and len(code_ids) > 1:
            raise TranscriptError(
                f"line {lineno}: {UNCODED_ID} cannot combine with other codes"
            )
        labels[turn_id] = frozenset(code_ids)

    missing = lesson_ids - labels.keys()
    if missing:
        if strict:
            raise TranscriptError(
                f"turns without gold annotation: {sorted(missing)} (strict mode)"
            )
        for turn_id in missing:
            labels[turn_id] = frozenset({UNCODED_ID})
    return GoldAnnotationSet(lesson_id=lesson.lesson_id, labels=labels)


def serialize_gold(gold: GoldAnnotationSet) -> str:
    """Render gold annotations in canonical form (codes alphabetical)."""
    lines = []
    for turn_id in sorted(gold.labels):
        lines.append(f"{turn_id}\t" + ",".join(sorted(gold.labels[turn_id])))
    return "\n".join(lines) + "\n"


def make_batches(lesson: Lesson, max_size: int) -> list[Batch]:
    """Partition a lesson into contiguous batches of at most `max_size` turns.

    All batches except possibly the last have exactly `max_size` turns;
    concatenating them in ordinal order reproduces the lesson.
    """
    if max_size < 1:
        raise TranscriptError(f"max_size must be >= 1, got {max_size}")
    if not lesson.turns:
        raise TranscriptError(f"lesson {lesson.lesson_id!r} has no turns")
    batches = []
    for i in range(0, len(lesson.turns), max_size):
        batches.append(
            Batch(
                lesson_id=lesson.lesson_id,
                ordinal=len(batches) + 1,
                turns=lesson.turns[i : i + max_size],
            )
        )
    return batches
