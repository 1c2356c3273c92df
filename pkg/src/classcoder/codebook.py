"""Coding schemes: the code/codebook model, the built-in 13-code CDAS scheme,
the codebook file format, and label resolution."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import CodebookError, UnknownLabelError

_ID_RE = re.compile(r"^[A-Z0-9]{1,4}$")

UNCODED_ID = "UC"


@dataclass(frozen=True)
class Code:
    """One category of a coding scheme.

    `id` is the canonical short label (uppercase alphanumeric, 1-4 chars);
    `aliases` are alternate labels that resolve to this code.
    """

    id: str
    name: str
    definition: str
    keywords: tuple[str, ...] = ()
    exclusions: str = ""
    aliases: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not _ID_RE.match(self.id):
            raise CodebookError(
                f"code id {self.id!r} must be 1-4 uppercase alphanumeric characters"
            )


@dataclass(frozen=True)
class Codebook:
    """An ordered, validated collection of codes.

    Immutable after construction; exactly one code must carry the UC
    ("none apply") id, and no id or alias may collide with another code's
    id or aliases (case-insensitively).
    """

    version: str
    codes: tuple[Code, ...]
    _lookup: dict[str, Code] = field(
        init=False, repr=False, compare=False, hash=False, default_factory=dict
    )

    def __post_init__(self) -> None:
        seen: dict[str, str] = {}  # lowercased label -> owning code id
        for code in self.codes:
            for label in (code.id, *code.aliases):
                key = label.lower()
                if key in seen and seen[key] != code.id:
                    raise CodebookError(
                        f"label {label!r} of code {code.id} collides with code {seen[key]}"
                    )
                if key in seen and label != code.id:
                    raise CodebookError(
                        f"alias {label!r} of code {code.id} duplicates its own id"
                    )
                seen[key] = code.id
        ids = [c.id for c in self.codes]
        if len(set(ids)) != len(ids):
            raise CodebookError("duplicate code ids in codebook")
        if sum(1 for c in self.codes if c.id == UNCODED_ID) != 1:
            raise CodebookError(f"codebook must contain exactly one {UNCODED_ID} code")
        lookup: dict[str, Code] = {}
        for code in self.codes:
            lookup[code.id.lower()] = code
        for code in self.codes:
            for alias in code.aliases:
                lookup.setdefault(alias.lower(), code)
        object.__setattr__(self, "_lookup", lookup)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(c.id for c in self.codes)

    @property
    def substantive_ids(self) -> tuple[str, ...]:
        """All code ids except the UC ("none apply") code."""
        return tuple(c.id for c in self.codes if c.id != UNCODED_ID)

    def __contains__(self, code_id: str) -> bool:
        return any(c.id == code_id for c in self.codes)

    def get(self, code_id: str) -> Code:
        for code in self.codes:
            if code.id == code_id:
                return code
        raise UnknownLabelError(code_id)


def resolve_code(codebook: Codebook, label: str) -> Code:
    """Resolve a label case-insensitively against code ids, then aliases.

    Raises UnknownLabelError carrying the offending text when the label
    matches nothing.
    """
    if not label:
        raise UnknownLabelError(label)
    code = codebook._lookup.get(label.strip().lower())
    if code is None:
        raise UnknownLabelError(label)
    return code


def builtin_cdas() -> Codebook:
    """The built-in 13-code CDAS scheme.

    Canonical ids follow the reporting convention (IRE, IC, UC); the
    alternate labels REI, CI and "Uncoded" are aliases.
    """
    codes = (
        Code(
            id="ELI",
            name="Elaboration Invitation",
            definition="Invites others to build on, evaluate, or clarify prior contributions.",
            exclusions="Excludes unseen work or procedural follow-ups.",
        ),
        Code(
            id="EL",
            name="Elaboration",
            definition=(
                "Builds on or adds new ideas/perspectives to earlier contributions. "
                "Includes brief but meaningful elaborations or related ideas."
            ),
        ),
        Code(
            id="IRE",
            name="Reasoning Invitation",
            definition=(
                "Asks for explanation, justification, speculation, or prediction "
                '(e.g. "Why?", "What if...?").'
            ),
            keywords=("why", "what if"),
            exclusions="Excludes simple answer requests.",
            aliases=("REI",),
        ),
        Code(
            id="RE",
            name="Reasoning",
            definition=(
                "Provides reasons, explanations, or evidence for a view. "
                "Includes analogies, distinctions, and justified speculations."
            ),
            keywords=(
                "because",
                "if...then",
                "so",
                "therefore",
                "not...unless",
                "would",
                "could",
                "might",
            ),
        ),
        Code(
            id="IC",
            name="Co-ordination Invitation",
            definition="Invites comparison, synthesis, or resolution of two or more ideas.",
            aliases=("CI",),
        ),
        Code(
            id="SC",
            name="Simple Co-ordination",
            definition="Summarises or compares ideas (own or others') without giving reasons.",
        ),
        Code(
            id="RC",
            name="Reasoned Co-ordination",
            definition=(
                "Compares or integrates ideas with justification or evidence. "
                "Includes counter-arguments and reasoned agreement."
            ),
        ),
        Code(
            id="A",
            name="Agreement",
            definition=(
                'Explicit agreement or acceptance (e.g. "Yes", "I agree"). '
                "Includes paraphrasing or repetition to signal agreement."
            ),
            keywords=("yes", "i agree"),
        ),
        Code(
            id="Q",
            name="Querying",
            definition=(
                "Challenges or disagrees with a statement. "
                "Includes verbal disagreement, sarcasm, or questioning."
            ),
        ),
        Code(
            id="RB",
            name="Reference Back",
            definition="Refers to prior class knowledge, shared experiences, or earlier activities.",
        ),
        Code(
            id="RW",
            name="Reference to Wider Context",
            definition=(
                "Links current learning to broader contexts "
                "(e.g. real-world examples, outside expertise)."
            ),
        ),
        Code(
            id="OI",
            name="Other Invitation",
            definition=(
                "All other verbal invitations "
                "(e.g. ideas, opinions, closed/open questions, calculations)."
            ),
            exclusions="Excludes non-verbal prompts.",
        ),
        Code(
            id="UC",
            name="Uncoded",
            definition="When none of the above codes apply.",
            aliases=("Uncoded",),
        ),
    )
    return Codebook(version="cdas-13", codes=codes)


_SECTION_RE = re.compile(r"^\[code\]\s*$")
_KV_RE = re.compile(r"^([A-Za-z_]+)\s*=\s*(.*)$")
_KNOWN_KEYS = {"id", "name", "definition", "keywords", "exclusions", "aliases"}


def parse_codebook(source: str, version: str = "custom") -> Codebook:
    """Parse the codebook file format.

    Repeated `[code]` sections of `key = value` lines; keys are id, name,
    definition, keywords (comma-separated), exclusions, aliases
    (comma-separated). Blank lines are ignored and `#` starts a comment.
    Unknown keys, duplicate ids, alias collisions and a missing UC code are
    errors, each reported with its line number.
    """
    sections: list[tuple[int, dict[str, str]]] = []
    current: dict[str, str] | None = None
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if _SECTION_RE.match(line):
            current = {}
            sections.append((lineno, current))
            continue
        m = _KV_RE.match(line)
        if m is None:
            raise CodebookError(f"line {lineno}: malformed line {raw!r}")
        if current is None:
            raise CodebookError(f"line {lineno}: key outside any [code] section")
        key, value = m.group(1), m.group(2).strip()
        if key not in _KNOWN_KEYS:
            raise CodebookError(f"line {lineno}: unknown key {key!r}")
        if key in current:
            raise CodebookError(f"line {lineno}: repeated key {key!r} in section")
        current[key] = value

    codes: list[Code] = []
    seen_labels: dict[str, str] = {}
    for lineno, fields in sections:
        if "id" not in fields:
            raise CodebookError(f"line {lineno}: [code] section missing id")
        code_id = fields["id"]
        try:
            code = Code(
                id=code_id,
                name=fields.get("name", code_id),
                definition=fields.get("definition", ""),
                keywords=_split_list(fields.get("keywords", "")),
                exclusions=fields.get("exclusions", ""),
                aliases=_split_list(fields.get("aliases", "")),
            )
        except CodebookError as exc:
            raise CodebookError(f"line {lineno}: {exc}") from None
        for label in (code.id, *code.aliases):
            key = label.lower()
            if key in seen_labels:
                kind = "duplicate id" if label == code.id else "alias collision"
                raise CodebookError(
                    f"line {lineno}: {kind}: {label!r} already used by code {seen_labels[key]}"
                )
            seen_labels[key] = code.id
        codes.append(code)

    if not any(c.id == UNCODED_ID for c in codes):
        raise CodebookError(f"codebook has no {UNCODED_ID} code")
    return Codebook(version=version, codes=tuple(codes))


def serialize_codebook(codebook: Codebook) -> str:
    """Render a codebook in the codebook file format (canonical form)."""
    blocks: list[str] = []
    for code in codebook.codes:
        lines = ["[code]", f"id = {code.id}", f"name = {code.name}"]
        if code.definition:
            lines.append(f"definition = {code.definition}")
        if code.keywords:
            lines.append("keywords = " + ", ".join(code.keywords))
        if code.exclusions:
            lines.append(f"exclusions = {code.exclusions}")
        if code.aliases:
            lines.append("aliases = " + ", ".join(code.aliases))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"


def _split_list(value: str) -> tuple[str, ...]:
    return tuple(item.strip() for item in value.split(",") if item.strip())
