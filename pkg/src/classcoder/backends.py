"""Coding backends: the behavioral contract, the mock, and the live client.

A backend answers an ordered message list with generated text. The mock
applies the deterministic keyword rules to the turns of the last user
message and renders reference-format blocks, which makes full pipeline
runs reproducible and oracle-checkable. The live backend speaks a
chat-completion HTTP exchange.
"""

from __future__ import annotations

import os
import re
from typing import Protocol, runtime_checkable

import httpx

from .codebook import Codebook, builtin_cdas
from .coder import Message, TurnCoding, render_agent_response
from .errors import BackendError
from .keyword_coder import KeywordRuleSet, default_keyword_rules, keyword_code_turn
from .transcript import Turn

MOCK_BACKEND_ID = "mock-keyword"

# Live configuration comes from the environment, never from code:
# endpoint and model directly, the credential via a named variable whose
# name is itself configurable.
ENV_URL = "CODER_BACKEND_URL"
ENV_MODEL = "CODER_BACKEND_MODEL"
ENV_KEY_VAR = "CODER_BACKEND_KEY_VAR"
DEFAULT_KEY_VAR = "CODER_BACKEND_KEY"


@runtime_checkable
class Backend(Protocol):
    id: str
    deterministic: bool

    def send(self, messages: list[Message]) -> str: ...


_TURN_LINE_RE = re.compile(r"^Turn (\d+) \((.*?)\): (.*)$")


def _parse_request_turns(content: str) -> list[Turn]:
    """Recover the turns of a batch request; continuation lines are text."""
    cut = content.rfind("\n\nCode each turn.")
    body = content[:cut] if cut != -1 else content
    turns: list[Turn] = []
    for line in body.splitlines():
        match = _TURN_LINE_RE.match(line)
        if match:
            turns.append(
                Turn(turn_id=int(match.group(1)), speaker=match.group(2), text=match.group(3))
            )
        elif turns:
            last = turns[-1]
            turns[-1] = Turn(
                turn_id=last.turn_id, speaker=last.speaker, text=last.text + "\n" + line
            )
    return turns


class MockKeywordBackend:
    """Deterministic stand-in agent built on the keyword rules."""

    deterministic = True

    def __init__(self, rules: KeywordRuleSet | None = None, codebook: Codebook | None = None):
        self.id = MOCK_BACKEND_ID
        self.rules = rules or default_keyword_rules(codebook or builtin_cdas())

    def send(self, messages: list[Message]) -> str:
        if not messages:
            raise BackendError("empty message list")
        last = messages[-1]
        if last["role"] != "user":
            raise BackendError("last message must be a user message")
        turns = _parse_request_turns(last["content"])
        if not turns:
            return self._probe_answer(last["content"])
        codings = []
        for turn in turns:
            codes = frozenset(keyword_code_turn(turn, self.rules))
            codings.append(
                TurnCoding(
                    turn_id=turn.turn_id,
                    predicted=codes,
                    justification="cue match: " + ", ".join(sorted(codes)),
                )
            )
        return render_agent_response(codings, self_check=True)

    @staticmethod
    def _probe_answer(question: str) -> str:
        # Canned answers deliberately contain no `Codes:` line, so probes
        # never overturn a coding.
        if "multi-utterance" in question:
            return (
                "A turn can hold several utterances with different functions. I read "
                "them against the surrounding dialogue and assign every code whose "
                "function appears, rather than stopping at the first match.\n"
            )
        if "align" in question:
            return "Yes, the classification aligns with the precedent.\n"
        return "Understood.\n"


class HttpChatBackend:
    """Chat-completion client over HTTP.

    Sends the ordered message list as-is and returns the first choice's
    content. The credential is read from the environment at send time and
    never stored on the instance.
    """

    deterministic = False

    def __init__(
        self,
        endpoint: str,
        model: str,
        key_var: str = DEFAULT_KEY_VAR,
        timeout: float = 120.0,
    ):
        self.id = f"http:{model}"
        self.endpoint = endpoint
        self.model = model
        self.key_var = key_var
        self.timeout = timeout

    def send(self, messages: list[Message]) -> str:
        key = os.environ.get(self.key_var)
        if not key:
            raise BackendError(f"credential environment variable {self.key_var} is not set")
        try:
            response = httpx.post(
                self.endpoint,
                json={"model": self.model, "messages": messages},
                headers={"Authorization": f"Bearer {key}"},
                timeout=self.timeout,
            )
        except httpx.HTTPError as exc:
            raise BackendError(f"transport failure: {exc}") from exc
        if response.status_code != 200:
            raise BackendError(f"backend returned HTTP {response.status_code}")
        try:
            return response.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise BackendError(f"malformed backend response: {exc}") from exc


def make_backend(backend_id: str) -> Backend:
    """Resolve a backend id. `mock-keyword` is built in; `http` reads the
    endpoint, model and credential variable name from the environment."""
    if backend_id == MOCK_BACKEND_ID:
        return MockKeywordBackend()
    if backend_id == "http":
        endpoint = os.environ.get(ENV_URL)
        if not endpoint:
            raise BackendError(f"backend 'http' needs {ENV_URL} set")
        model = os.environ.get(ENV_MODEL, "gpt-4")
        key_var = os.environ.get(ENV_KEY_VAR, DEFAULT_KEY_VAR)
        return HttpChatBackend(endpoint=endpoint, model=model, key_var=key_var)
    raise BackendError(f"unknown backend id {backend_id!r}")
