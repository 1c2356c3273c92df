import json

import httpx
import pytest

from classcoder.backends import (
    DEFAULT_KEY_VAR,
    ENV_KEY_VAR,
    ENV_MODEL,
    ENV_URL,
    HttpChatBackend,
    MockKeywordBackend,
    make_backend,
)
from classcoder.coder import batch_request, parse_agent_response
from classcoder.codebook import builtin_cdas
from classcoder.errors import BackendError
from classcoder.transcript import Batch, Turn


def request_messages(texts):
    turns = tuple(Turn(turn_id=i + 1, speaker="S", text=t) for i, t in enumerate(texts))
    batch = Batch(lesson_id="x", ordinal=1, turns=turns)
    return batch, [{"role": "user", "content": batch_request(batch, self_check=True)}]


def test_mock_is_deterministic_and_parseable():
    batch, messages = request_messages(["Why does it sink?", "Yes, I agree with her."])
    backend = MockKeywordBackend()
    first = backend.send(messages)
    assert first == backend.send(messages)
    codings = parse_agent_response(first, batch, builtin_cdas(), expect_self_check=True)
    assert codings[0].predicted == {"IRE"}
    assert codings[1].predicted == {"A"}


def test_mock_recovers_multiline_turn_text():
    batch, messages = request_messages(["line one\nand are you sure about this?"])
    response = MockKeywordBackend().send(messages)
    codings = parse_agent_response(response, batch, builtin_cdas(), expect_self_check=True)
    assert codings[0].predicted == {"Q", "OI"}


def test_mock_probe_answer_has_no_codes_line():
    backend = MockKeywordBackend()
    answer = backend.send(
        [{"role": "user", "content": "Before we start coding: explain your understanding of coding multi-utterance dialogue."}]
    )
    assert "Codes:" not in answer
    assert answer.strip()


def test_mock_rejects_malformed_exchanges():
    backend = MockKeywordBackend()
    with pytest.raises(BackendError):
        backend.send([])
    with pytest.raises(BackendError):
        backend.send([{"role": "assistant", "content": "hello"}])


def test_make_backend_mock_and_unknown():
    assert make_backend("mock-keyword").id == "mock-keyword"
    with pytest.raises(BackendError):
        make_backend("carrier-pigeon")


def test_make_backend_http_requires_endpoint(monkeypatch):
    monkeypatch.delenv(ENV_URL, raising=False)
    with pytest.raises(BackendError) as exc:
        make_backend("http")
    assert ENV_URL in str(exc.value)


def test_make_backend_http_reads_environment(monkeypatch):
    monkeypatch.setenv(ENV_URL, "https://llm.example/v1/chat")
    monkeypatch.setenv(ENV_MODEL, "tutor-large")
    monkeypatch.setenv(ENV_KEY_VAR, "MY_KEY")
    backend = make_backend("http")
    assert isinstance(backend, HttpChatBackend)
    assert backend.endpoint == "https://llm.example/v1/chat"
    assert backend.id == "http:tutor-large"
    assert backend.key_var == "MY_KEY"


def test_http_backend_missing_credential(monkeypatch):
    monkeypatch.delenv(DEFAULT_KEY_VAR, raising=False)
    backend = HttpChatBackend(endpoint="https://llm.example/v1", model="m")
    with pytest.raises(BackendError) as exc:
        backend.send([{"role": "user", "content": "hi"}])
    assert DEFAULT_KEY_VAR in str(exc.value)


def test_http_backend_round_trip(monkeypatch):
    seen = {}

    def fake_post(url, json=None, headers=None, timeout=None):
        seen["url"] = url
        seen["payload"] = json
        seen["auth"] = headers["Authorization"]
        return httpx.Response(
            200,
            json={"choices": [{"message": {"content": "Turn 1\nCodes: A\n"}}]},
            request=httpx.Request("POST", url),
        )

    monkeypatch.setenv(DEFAULT_KEY_VAR, "s3cret")
    monkeypatch.setattr(httpx, "post", fake_post)
    backend = HttpChatBackend(endpoint="https://llm.example/v1", model="tutor")
    out = backend.send([{"role": "user", "content": "Turn 1 (S): Yes.\n\nCode each turn."}])
    assert out == "Turn 1\nCodes: A\n"
    assert seen["url"] == "https://llm.example/v1"
    assert seen["payload"]["model"] == "tutor"
    assert seen["auth"] == "Bearer s3cret"
    # credential is read per send, never kept on the instance
    assert "s3cret" not in json.dumps(backend.__dict__)


def test_http_backend_error_statuses(monkeypatch):
    monkeypatch.setenv(DEFAULT_KEY_VAR, "k")

    def httpx_error(*a, **k):
        raise httpx.ConnectError("no route")

    monkeypatch.setattr(httpx, "post", httpx_error)
    backend = HttpChatBackend(endpoint="https://llm.example", model="m")
    with pytest.raises(BackendError) as exc:
        backend.send([{"role": "user", "content": "x"}])
    assert "transport" in str(exc.value)

    def bad_status(url, **k):
        return httpx.Response(503, json={}, request=httpx.Request("POST", url))

    monkeypatch.setattr(httpx, "post", bad_status)
    with pytest.raises(BackendError) as exc:
        backend.send([{"role": "user", "content": "x"}])
    assert "503" in str(exc.value)

    def bad_body(url, **k):
        return httpx.Response(200, json={"choices": []}, request=httpx.Request("POST", url))

    monkeypatch.setattr(httpx, "post", bad_body)
    with pytest.raises(BackendError) as exc:
        backend.send([{"role": "user", "content": "x"}])
    assert "malformed" in str(exc.value)
