"""Command-line surface.

Subcommands: compile, code, eval, experiment, adjudicate, feedback,
serve. Exit status 0 on success, 1 on validation errors (including
usage), 2 on backend or runtime failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .backends import make_backend
from .coder import SessionPolicy
from .errors import BackendError, RunFailedError, WorkbenchError
from .evaluation import evaluate_run, render_csv, render_json, render_text_table
from .experiment import (
    builtin_experiment_definition,
    comparison_to_dict,
    definition_to_dict,
    load_experiment_definition,
    render_comparison_text,
    run_experiment,
)
from .evaluation import report_to_dict
from .prompting import compile_instructions, config_from_json, document_sidecar
from .store import Store
from .transcript import parse_gold, parse_transcript
from .codebook import resolve_code


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the documented contract is 1.
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="classcoder", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compile", help="compile a config into an instruction document")
    p.add_argument("--config", required=True, help="config JSON file")
    p.add_argument("--out", help="write the document here (plus a JSON sidecar)")

    p = sub.add_parser("code", help="code a lesson with a backend")
    p.add_argument("--lesson", required=True, help="lesson transcript TSV")
    p.add_argument("--config", required=True, help="config JSON file")
    p.add_argument("--backend", required=True, help="backend id (mock-keyword, http)")
    p.add_argument("--batch-size", type=int, default=20)
    p.add_argument("--no-reset", action="store_true", help="keep one session across batches")
    p.add_argument("--verify-rules", action="store_true", help="send probe questions first")
    p.add_argument("--gold", help="optional gold TSV to store alongside the lesson")
    p.add_argument("--data", default="data", help="data directory (default: ./data)")

    p = sub.add_parser("eval", help="evaluate a stored run against gold labels")
    p.add_argument("--run", required=True, help="run id")
    p.add_argument("--gold", required=True, help="gold TSV file")
    p.add_argument("--mode", choices=("exact", "overlap"), default="exact")
    p.add_argument("--format", choices=("table", "json", "csv"), default="table")
    p.add_argument("--data", default="data")

    p = sub.add_parser("experiment", help="run a multi-condition experiment")
    p.add_argument(
        "--def",
        dest="definition",
        required=True,
        help="experiment definition JSON, or 'builtin' for the bundled four-condition design",
    )
    p.add_argument("--data", default="data")

    p = sub.add_parser("adjudicate", help="record a human adjudication for one turn")
    p.add_argument("--run", required=True)
    p.add_argument("--turn", type=int, required=True)
    p.add_argument("--codes", required=True, help="comma-separated code list")
    p.add_argument("--note", default="")
    p.add_argument("--data", default="data")

    p = sub.add_parser("feedback", help="compile pending adjudications into a new config")
    p.add_argument("--run", required=True)
    p.add_argument("--data", default="data")

    p = sub.add_parser("serve", help="serve the HTTP review API")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--data", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--ui", help="static directory with the built review interface")

    return parser


def _load_config(path: str):
    return config_from_json(Path(path).read_text(encoding="utf-8"))


def cmd_compile(args) -> int:
    document = compile_instructions(_load_config(args.config))
    if args.out:
        out = Path(args.out)
        out.write_text(document.text, encoding="utf-8")
        sidecar = out.with_name(out.name + ".sidecar.json")
        sidecar.write_text(
            json.dumps(document_sidecar(document), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        print(f"wrote {out} and {sidecar} ({document.token_estimate} tokens estimated)")
    else:
        print(document.text, end="")
    return 0


def cmd_code(args) -> int:
    lesson = parse_transcript(Path(args.lesson).read_text(encoding="utf-8"))
    config = _load_config(args.config)
    document = compile_instructions(config)
    backend = make_backend(args.backend)
    policy = SessionPolicy(
        batch_size=args.batch_size,
        reset_between_batches=not args.no_reset,
        verify_rules_first=args.verify_rules,
    )
    store = Store(args.data)
    gold = None
    if args.gold:
        gold = parse_gold(Path(args.gold).read_text(encoding="utf-8"), lesson, config.codebook)
    store.save_lesson(lesson, gold)
    run = store.execute_run(lesson, document, backend, policy, config=config)
    if run.status != "complete":
        print(
            f"run {run.run_id} failed at batch {run.failed_batch}: {run.failure}",
            file=sys.stderr,
        )
        return 2
    print(f"run {run.run_id} complete: {len(run.codings)} turns coded")
    return 0


def cmd_eval(args) -> int:
    store = Store(args.data)
    state = store.replay_run(args.run)
    run = state.run
    if run.status != "complete":
        raise WorkbenchError(f"run {args.run} is {run.status}, not complete")
    lesson = store.load_lesson(run.lesson_id)
    codebook = store.load_config(run.config_hash).codebook
    gold = parse_gold(Path(args.gold).read_text(encoding="utf-8"), lesson, codebook)
    store.save_lesson(lesson, gold)
    report = evaluate_run(gold, run, mode=args.mode, codebook=codebook)
    renderer = {"table": render_text_table, "json": render_json, "csv": render_csv}
    print(renderer[args.format](report), end="")
    return 0


def cmd_experiment(args) -> int:
    if args.definition == "builtin":
        definition = builtin_experiment_definition()
    else:
        definition = load_experiment_definition(args.definition)
    store = Store(args.data)
    store.save_config(definition.base_config)
    for lesson, gold in zip(definition.corpus, definition.corpus_gold):
        store.save_lesson(lesson, gold)
    store.save_lesson(definition.test_lesson, definition.test_gold)

    condition_records = []

    def persist(result) -> None:
        store.save_config(result.config)
        store.record_run(result.run, config=result.config)
        condition_records.append(
            {
                "condition_id": result.condition_id,
                "run_id": result.run.run_id,
                "config_hash": result.document.config_hash,
                "report": report_to_dict(result.report),
            }
        )

    outcome = run_experiment(definition, on_condition=persist)
    store.save_experiment(
        definition.experiment_id,
        {
            "definition": definition_to_dict(definition),
            "conditions": condition_records,
            "comparison": comparison_to_dict(outcome.table),
        },
    )
    print(render_comparison_text(outcome.table), end="")
    return 0


def cmd_adjudicate(args) -> int:
    store = Store(args.data)
    state = store.replay_run(args.run)
    if state.run.status != "complete":
        raise WorkbenchError(f"run {args.run} is {state.run.status}, not complete")
    predicted = {c.turn_id: c.predicted for c in state.run.codings}
    if args.turn not in predicted:
        raise WorkbenchError(f"run {args.run} has no coding for turn {args.turn}")
    codebook = store.load_config(state.run.config_hash).codebook
    labels = [part.strip() for part in args.codes.split(",") if part.strip()]
    if not labels:
        raise WorkbenchError("empty code list")
    codes = sorted({resolve_code(codebook, label).id for label in labels})
    if "UC" in codes and len(codes) > 1:
        raise WorkbenchError("UC cannot be combined with other codes")
    store.append_event(
        args.run,
        "adjudication",
        {
            "turn_id": args.turn,
            "codes": codes,
            "note": args.note,
            "agent_codes": sorted(predicted[args.turn]),
        },
    )
    print(f"turn {args.turn} adjudicated as {', '.join(codes)}")
    return 0


def cmd_feedback(args) -> int:
    store = Store(args.data)
    new_hash = store.compile_feedback(args.run)
    print(new_hash)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    store = Store(args.data)
    store.verify()
    static_dir = Path(args.ui) if args.ui else None
    app = create_app(store, static_dir=static_dir)
    with store.hold_lock():
        uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


_COMMANDS = {
    "compile": cmd_compile,
    "code": cmd_code,
    "eval": cmd_eval,
    "experiment": cmd_experiment,
    "adjudicate": cmd_adjudicate,
    "feedback": cmd_feedback,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (BackendError, RunFailedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (WorkbenchError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
