"""File-based persistence: content-addressed configs, lessons, run events.

Layout under one data directory:

    configs/<config_hash>.json
    lessons/<lesson_id>.tsv, lessons/<lesson_id>.gold.tsv
    runs/<run_id>/events.ndjson, runs/<run_id>/report.json
    experiments/<experiment_id>.json

Run history is an append-only NDJSON event log; replaying it reconstructs
the run state, and re-serializing that state reproduces report.json byte
for byte. A lock file serializes writers per data directory.
"""

from __future__ import annotations

import json
import logging
import secrets
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

from filelock import FileLock, Timeout

from .codebook import Codebook
from .coder import (
    CodingRun,
    FeedbackItem,
    code_lesson,
    coding_from_dict,
    inject_feedback,
    policy_from_dict,
    policy_to_dict,
    run_to_report_dict,
)
from .errors import StoreError
from .prompting import InstructionConfig, config_from_json, config_hash, config_to_json
from .transcript import (
    GoldAnnotationSet,
    Lesson,
    parse_gold,
    parse_transcript,
    serialize_gold,
    serialize_transcript,
)

log = logging.getLogger(__name__)

EVENT_KINDS = (
    "config_saved",
    "run_started",
    "batch_sent",
    "batch_parsed",
    "run_completed",
    "run_failed",
    "adjudication",
    "feedback_compiled",
)

_LOCK_TIMEOUT = 10.0


def _canonical_json(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


@dataclass
class RunState:
    """State folded from a run's event log."""

    run: CodingRun
    # turn_id -> adjudicated code set; last write wins.
    adjudications: dict[int, frozenset[str]] = field(default_factory=dict)
    # Adjudication payloads not yet folded into a config by feedback
    # compilation: turn_id -> {turn_id, codes, note, agent_codes}.
    pending: dict[int, dict] = field(default_factory=dict)
    lineage: list[dict] = field(default_factory=list)

    @property
    def current_config_hash(self) -> str:
        if self.lineage:
            return self.lineage[-1]["config_hash"]
        return self.run.config_hash


class Store:
    def __init__(self, data_dir: str | Path, create: bool = True):
        self.data_dir = Path(data_dir)
        if create:
            self.data_dir.mkdir(parents=True, exist_ok=True)
        elif not self.data_dir.is_dir():
            raise StoreError(f"data directory {self.data_dir} does not exist")
        for sub in ("configs", "lessons", "runs", "experiments"):
            (self.data_dir / sub).mkdir(exist_ok=True)
        # thread_local=False so a service that holds the lock for its
        # lifetime can still mutate from request worker threads; _serial
        # keeps those threads from interleaving once the file lock is shared.
        self._lock = FileLock(str(self.data_dir / ".lock"), thread_local=False)
        self._serial = threading.RLock()
        self._last_ts: dict[str, datetime] = {}
        self._event_count: dict[str, int] = {}

    @contextmanager
    def _locked(self):
        with self._serial:
            try:
                self._lock.acquire(timeout=_LOCK_TIMEOUT)
            except Timeout:
                raise StoreError(
                    f"data directory {self.data_dir} is locked by another process"
                ) from None
            try:
                yield
            finally:
                self._lock.release()

    def hold_lock(self):
        """Long-held single-writer lock for a service instance. Deliberately
        skips _serial: only the flock is held open, so the holder's own
        worker threads can still enter _locked()."""
        try:
            return self._lock.acquire(timeout=_LOCK_TIMEOUT)
        except Timeout:
            raise StoreError(
                f"data directory {self.data_dir} is locked by another process"
            ) from None

    # -- configs ------------------------------------------------------------

    def config_path(self, hash_value: str) -> Path:
        return self.data_dir / "configs" / f"{hash_value}.json"

    def save_config(self, config: InstructionConfig) -> str:
        hash_value = config_hash(config)
        path = self.config_path(hash_value)
        with self._locked():
            if not path.exists():
                path.write_text(config_to_json(config), encoding="utf-8")
        return hash_value

    def load_config(self, hash_value: str) -> InstructionConfig:
        path = self.config_path(hash_value)
        if not path.exists():
            raise StoreError(f"unknown config {hash_value}")
        config = config_from_json(path.read_text(encoding="utf-8"))
        actual = config_hash(config)
        if actual != hash_value:
            raise StoreError(
                f"{path} is corrupt: content hashes to {actual}, filename says {hash_value}"
            )
        return config

    def list_configs(self) -> list[str]:
        return sorted(p.stem for p in (self.data_dir / "configs").glob("*.json"))

    # -- lessons ------------------------------------------------------------

    def lesson_path(self, lesson_id: str) -> Path:
        return self.data_dir / "lessons" / f"{lesson_id}.tsv"

    def gold_path(self, lesson_id: str) -> Path:
        return self.data_dir / "lessons" / f"{lesson_id}.gold.tsv"

    def save_lesson(self, lesson: Lesson, gold: GoldAnnotationSet | None = None) -> None:
        with self._locked():
            self.lesson_path(lesson.lesson_id).write_text(
                serialize_transcript(lesson), encoding="utf-8"
            )
            if gold is not None:
                self.gold_path(lesson.lesson_id).write_text(
                    serialize_gold(gold), encoding="utf-8"
                )

    def load_lesson(self, lesson_id: str) -> Lesson:
        path = self.lesson_path(lesson_id)
        if not path.exists():
            raise StoreError(f"unknown lesson {lesson_id!r}")
        return parse_transcript(path.read_text(encoding="utf-8"))

    def has_gold(self, lesson_id: str) -> bool:
        return self.gold_path(lesson_id).exists()

    def load_gold(self, lesson_id: str, codebook: Codebook) -> GoldAnnotationSet:
        path = self.gold_path(lesson_id)
        if not path.exists():
            raise StoreError(f"lesson {lesson_id!r} has no gold annotations")
        return parse_gold(
            path.read_text(encoding="utf-8"), self.load_lesson(lesson_id), codebook
        )

    def list_lessons(self) -> list[str]:
        return sorted(
            p.name[: -len(".tsv")]
            for p in (self.data_dir / "lessons").glob("*.tsv")
            if not p.name.endswith(".gold.tsv")
        )

    # -- run events ---------------------------------------------------------

    def run_dir(self, run_id: str) -> Path:
        return self.data_dir / "runs" / run_id

    def events_path(self, run_id: str) -> Path:
        return self.run_dir(run_id) / "events.ndjson"

    def report_path(self, run_id: str) -> Path:
        return self.run_dir(run_id) / "report.json"

    def new_run_id(self) -> str:
        while True:
            stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
            run_id = f"{stamp}-{secrets.token_hex(3)}"
            if not self.run_dir(run_id).exists():
                return run_id

    def list_runs(self) -> list[str]:
        return sorted(p.name for p in (self.data_dir / "runs").iterdir() if p.is_dir())

    def _next_timestamp(self, run_id: str) -> str:
        now = datetime.now(timezone.utc)
        last = self._last_ts.get(run_id)
        if last is None and self.events_path(run_id).exists():
            events = self.read_events(run_id)
            if events:
                last = datetime.fromisoformat(events[-1]["ts"])
        if last is not None and now <= last:
            now = last + timedelta(microseconds=1)
        self._last_ts[run_id] = now
        return now.isoformat()

    def append_event(self, run_id: str, kind: str, payload: dict) -> int:
        """Append one event line; returns its zero-based position."""
        if kind not in EVENT_KINDS:
            raise StoreError(f"unknown event kind {kind!r}")
        path = self.events_path(run_id)
        if not path.parent.is_dir():
            raise StoreError(f"run directory for {run_id!r} does not exist")
        record = {"ts": self._next_timestamp(run_id), "kind": kind, "payload": payload}
        line = json.dumps(record, sort_keys=True, ensure_ascii=False)
        with self._locked():
            position = self._event_count.get(run_id)
            if position is None:
                position = len(self.read_events(run_id)) if path.exists() else 0
            with path.open("a", encoding="utf-8") as handle:
                handle.write(line + "\n")
                handle.flush()
            self._event_count[run_id] = position + 1
        return position

    def read_events(self, run_id: str) -> list[dict]:
        """All complete events; a truncated final line is dropped with a
        warning, a malformed line elsewhere is an error."""
        path = self.events_path(run_id)
        if not path.exists():
            raise StoreError(f"unknown run {run_id!r}")
        raw = path.read_text(encoding="utf-8")
        lines = raw.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        events = []
        for i, line in enumerate(lines):
            try:
                events.append(json.loads(line))
            except json.JSONDecodeError:
                if i == len(lines) - 1:
                    log.warning("%s: dropping truncated final line", path)
                    break
                raise StoreError(f"{path}: corrupt event at line {i + 1}") from None
        return events

    # -- run recording and replay -------------------------------------------

    def create_run_dir(self, run_id: str) -> None:
        with self._locked():
            self.run_dir(run_id).mkdir(parents=True, exist_ok=True)

    def record_run(self, run: CodingRun, config: InstructionConfig | None = None) -> str:
        """Persist a finished run as its full event stream plus report."""
        self.create_run_dir(run.run_id)
        if config is not None:
            self.save_config(config)
            self.append_event(run.run_id, "config_saved", {"config_hash": run.config_hash})
        self.append_event(run.run_id, "run_started", run_started_payload(run))
        for entry in run.event_log:
            self.append_event(
                run.run_id,
                "batch_sent",
                {"ordinal": entry["ordinal"], "messages": entry["messages"]},
            )
            if "codings" in entry:
                self.append_event(
                    run.run_id,
                    "batch_parsed",
                    {
                        "ordinal": entry["ordinal"],
                        "codings": entry["codings"],
                        "warnings": entry["warnings"],
                    },
                )
        if run.status == "complete":
            self.append_event(run.run_id, "run_completed", {"turn_count": len(run.codings)})
        elif run.status == "failed":
            self.append_event(
                run.run_id,
                "run_failed",
                {"ordinal": run.failed_batch, "reason": run.failure},
            )
        self.write_report(run)
        return run.run_id

    def write_report(self, run: CodingRun) -> None:
        with self._locked():
            self.report_path(run.run_id).write_text(
                _canonical_json(run_to_report_dict(run)), encoding="utf-8"
            )

    def load_report(self, run_id: str) -> dict:
        path = self.report_path(run_id)
        if not path.exists():
            raise StoreError(f"run {run_id!r} has no report")
        return json.loads(path.read_text(encoding="utf-8"))

    def replay_run(self, run_id: str) -> RunState:
        """Fold the event log back into run state."""
        events = self.read_events(run_id)
        run: CodingRun | None = None
        state: RunState | None = None
        for event in events:
            kind = event["kind"]
            payload = event["payload"]
            if kind == "config_saved":
                continue
            if kind == "run_started":
                run = CodingRun(
                    run_id=payload["run_id"],
                    lesson_id=payload["lesson_id"],
                    config_hash=payload["config_hash"],
                    backend_id=payload["backend_id"],
                    policy=policy_from_dict(payload["policy"]),
                    status="running",
                )
                state = RunState(run=run)
                continue
            if state is None or run is None:
                raise StoreError(f"run {run_id!r}: event {kind!r} precedes run_started")
            if kind == "batch_sent":
                run.event_log.append(
                    {
                        "ordinal": payload["ordinal"],
                        "messages": payload["messages"],
                        "warnings": [],
                    }
                )
            elif kind == "batch_parsed":
                if not run.event_log or run.event_log[-1]["ordinal"] != payload["ordinal"]:
                    raise StoreError(
                        f"run {run_id!r}: batch_parsed {payload['ordinal']} out of order"
                    )
                entry = run.event_log[-1]
                entry["warnings"] = payload["warnings"]
                entry["codings"] = payload["codings"]
                run.codings.extend(coding_from_dict(c) for c in payload["codings"])
            elif kind == "run_completed":
                run.status = "complete"
            elif kind == "run_failed":
                run.status = "failed"
                run.failed_batch = payload["ordinal"]
                run.failure = payload["reason"]
            elif kind == "adjudication":
                state.adjudications[payload["turn_id"]] = frozenset(payload["codes"])
                state.pending[payload["turn_id"]] = payload
            elif kind == "feedback_compiled":
                state.lineage.append(payload)
                state.pending = {}
            else:
                raise StoreError(f"run {run_id!r}: unknown event kind {kind!r}")
        if state is None:
            raise StoreError(f"run {run_id!r} has no run_started event")
        return state

    # -- orchestration --------------------------------------------------------

    def execute_run(
        self,
        lesson: Lesson,
        document,
        backend,
        policy,
        config: InstructionConfig | None = None,
    ) -> CodingRun:
        """Run code_lesson with live event persistence per batch."""
        run_id = self.new_run_id()
        self.create_run_dir(run_id)
        if config is not None:
            self.save_config(config)
            self.append_event(run_id, "config_saved", {"config_hash": document.config_hash})
        self.append_event(
            run_id,
            "run_started",
            {
                "run_id": run_id,
                "lesson_id": lesson.lesson_id,
                "config_hash": document.config_hash,
                "backend_id": backend.id,
                "policy": policy_to_dict(policy),
            },
        )

        def persist(entry: dict) -> None:
            self.append_event(
                run_id,
                "batch_sent",
                {"ordinal": entry["ordinal"], "messages": entry["messages"]},
            )
            if "codings" in entry:
                self.append_event(
                    run_id,
                    "batch_parsed",
                    {
                        "ordinal": entry["ordinal"],
                        "codings": entry["codings"],
                        "warnings": entry["warnings"],
                    },
                )

        run = code_lesson(lesson, document, backend, policy, run_id=run_id, on_batch=persist)
        if run.status == "complete":
            self.append_event(run_id, "run_completed", {"turn_count": len(run.codings)})
        else:
            self.append_event(
                run_id, "run_failed", {"ordinal": run.failed_batch, "reason": run.failure}
            )
        self.write_report(run)
        return run

    def compile_feedback(self, run_id: str) -> str:
        """Fold the run's pending adjudications into a new config; returns
        its hash. The lineage chains: each cycle's parent is the previous
        cycle's result."""
        state = self.replay_run(run_id)
        if state.run.status != "complete":
            raise StoreError(f"run {run_id!r} is {state.run.status}, not complete")
        if not state.pending:
            raise StoreError(f"run {run_id!r} has no pending adjudications")
        parent_hash = state.current_config_hash
        config = self.load_config(parent_hash)
        lesson = self.load_lesson(state.run.lesson_id)
        predicted = {c.turn_id: c.predicted for c in state.run.codings}
        items = [
            FeedbackItem(
                turn_id=turn_id,
                agent_codes=frozenset(entry.get("agent_codes", predicted.get(turn_id, ()))),
                adjudicated_codes=frozenset(entry["codes"]),
                note=entry.get("note", ""),
            )
            for turn_id, entry in sorted(state.pending.items())
        ]
        new_config = inject_feedback(config, items, lesson)
        new_hash = self.save_config(new_config)
        self.append_event(
            run_id,
            "feedback_compiled",
            {
                "parent_hash": parent_hash,
                "config_hash": new_hash,
                "cycle": len(state.lineage),
                "turn_ids": sorted(state.pending),
            },
        )
        return new_hash

    # -- experiments ----------------------------------------------------------

    def save_experiment(self, experiment_id: str, payload: dict) -> Path:
        path = self.data_dir / "experiments" / f"{experiment_id}.json"
        with self._locked():
            path.write_text(_canonical_json(payload), encoding="utf-8")
        return path

    def verify(self) -> None:
        """Startup integrity check: every stored artifact must parse."""
        for hash_value in self.list_configs():
            self.load_config(hash_value)
        for run_id in self.list_runs():
            if self.events_path(run_id).exists():
                self.replay_run(run_id)


def run_started_payload(run: CodingRun) -> dict:
    return {
        "run_id": run.run_id,
        "lesson_id": run.lesson_id,
        "config_hash": run.config_hash,
        "backend_id": run.backend_id,
        "policy": policy_to_dict(run.policy),
    }
