"""Deterministic keyword-rule coder.

A crude single-turn coder over surface cues. It makes no claim of coding
quality (cues like "so" and "would" are noisy on purpose): its job is to
be a deterministic stand-in for a live agent, so pipeline mechanics can
be tested end to end and verified against hand-derived expectations.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache

from .codebook import UNCODED_ID, Codebook, resolve_code
from .transcript import Turn

# Trigger kinds. `contains` matches any phrase on word boundaries,
# case-insensitive. `contains_pattern` needs its first phrase somewhere
# before its second. `ends_with` matches a literal suffix and is skipped
# when a code from `unless` already matched (rule order is precedence
# order, so earlier rules have run by then).
CONTAINS = "contains"
CONTAINS_PATTERN = "contains_pattern"
ENDS_WITH = "ends_with"


@dataclass(frozen=True)
class KeywordRule:
    code_id: str
    kind: str
    phrases: tuple[str, ...]
    unless: frozenset[str] = frozenset()


@dataclass(frozen=True)
class KeywordRuleSet:
    rules: tuple[KeywordRule, ...]
    default_code: str = UNCODED_ID


@lru_cache(maxsize=512)
def _phrase_re(phrase: str) -> re.Pattern:
    return re.compile(r"\b" + re.escape(phrase) + r"\b", re.IGNORECASE)


def _matches(rule: KeywordRule, text: str, matched: set[str]) -> bool:
    if rule.unless & matched:
        return False
    if rule.kind == CONTAINS:
        return any(_phrase_re(p).search(text) for p in rule.phrases)
    if rule.kind == CONTAINS_PATTERN:
        first, second = rule.phrases
        head = _phrase_re(first).search(text)
        return head is not None and _phrase_re(second).search(text, head.end()) is not None
    if rule.kind == ENDS_WITH:
        return text.rstrip().endswith(rule.phrases[0])
    raise ValueError(f"unknown trigger kind {rule.kind!r}")


def keyword_code_turn(turn: Turn, rules: KeywordRuleSet) -> set[str]:
    """Apply every rule in order, accumulating codes; no match means default."""
    codes: set[str] = set()
    for rule in rules.rules:
        if _matches(rule, turn.text, codes):
            codes.add(rule.code_id)
    return codes or {rules.default_code}


def default_keyword_rules(codebook: Codebook) -> KeywordRuleSet:
    """The documented default rule table, in precedence order.

    IRE on "why"/"what if"; A on "yes"/"i agree"; Q on "disagree"/"are you
    sure"; RE on reasoning connectives or an "if ... then" pattern; OI when
    the turn ends with "?" and no invitation code matched; UC otherwise.
    """
    required = ("IRE", "A", "Q", "RE", "OI", "ELI", "IC", UNCODED_ID)
    for code_id in required:
        resolve_code(codebook, code_id)
    invitations = frozenset(("ELI", "IRE", "IC"))
    return KeywordRuleSet(
        rules=(
            KeywordRule("IRE", CONTAINS, ("why", "what if")),
            KeywordRule("A", CONTAINS, ("yes", "i agree")),
            KeywordRule("Q", CONTAINS, ("disagree", "are you sure")),
            KeywordRule(
                "RE", CONTAINS, ("because", "therefore", "so", "would", "could", "might")
            ),
            KeywordRule("RE", CONTAINS_PATTERN, ("if", "then")),
            KeywordRule("OI", ENDS_WITH, ("?",), unless=invitations),
        ),
        default_code=UNCODED_ID,
    )
