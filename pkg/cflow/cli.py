#!/usr/bin/env python3
"""
cflow <invariants|energy|flow|check> --config run.json [--output-dir DIR] [--threads N]

JSON results go to stdout, logs to stderr.  Exit codes:
  0 success / Converged   2 config error   3 check failure
  4 flow Diverged         5 flow TimeUp    1 any other cflow error
"""

import argparse
import hashlib
import json
import logging
import os
import sys
from typing import List, Optional

logger = logging.getLogger("cflow.cli")

EXIT_OK        = 0
EXIT_ERROR     = 1
EXIT_CONFIG    = 2
EXIT_CHECK     = 3
EXIT_DIVERGED  = 4
EXIT_TIME_UP   = 5

COMMANDS = ("invariants", "energy", "flow", "check")
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cflow", description="Conformal-harmonic map flow on a 4-torus")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--output-dir", default=None, help="Where flow writes CSV, snapshots and summary")
    parser.add_argument("--threads", type=int, default=None, help="Thread count (fallback: $CFLOW_THREADS)")
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return parser


def set_threads(threads: Optional[int]) -> Optional[int]:
    """Export the BLAS/OpenMP thread count; only effective before numpy is first imported."""
    source = "--threads"
    if threads is None:
        env = os.environ.get("CFLOW_THREADS")
        if not env:
            return None
        source = f"CFLOW_THREADS={env!r}"
        threads = int(env) if env.strip().isdigit() else None
    if threads is None or threads < 1:
        logger.warning(f"ignoring {source}: thread count must be a positive integer")
        return None
    for var in THREAD_VARS:
        os.environ[var] = str(threads)
    return threads


def _emit(payload) -> None:
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    sys.stdout.flush()


def config_hash(config) -> str:
    return hashlib.md5(config.model_dump_json().encode()).hexdigest()


# --------------------------------------------------------------------------- #
#  Subcommands                                                                #
# --------------------------------------------------------------------------- #
def _cmd_invariants(client, out_dir) -> int:
    _emit(client.invariants())
    return EXIT_OK


def _cmd_energy(client, out_dir) -> int:
    _emit(client.energy())
    return EXIT_OK


def _cmd_check(client, out_dir) -> int:
    results = client.check()
    for res in results:
        print(res.row())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "checks.json"), "w") as f:
            json.dump([r.to_dict() for r in results], f, indent=2)
    if failed:
        logger.error(f"failed checks: {', '.join(failed)}")
        return EXIT_CHECK
    return EXIT_OK


def _cmd_flow(client, out_dir, history=None) -> int:
    from cflow.flow.monitor import write_history_csv
    from cflow.flow.state import ExitReason
    from cflow.grid.container import write_field, write_sidecar

    out_dir = out_dir or "."
    os.makedirs(out_dir, exist_ok=True)

    def _save_map(u, stem):
        write_field(os.path.join(out_dir, f"{stem}.cflow"), u.as_field())
        write_sidecar(os.path.join(out_dir, f"{stem}.json"), u.sidecar())

    def _snapshot(state):
        _save_map(state.u, f"snap_{state.step:08d}")

    result = client.flow(on_snapshot=_snapshot)
    write_history_csv(result.state.history, os.path.join(out_dir, "diagnostics.csv"))
    _save_map(result.state.u, "final")

    summary = result.summary()
    with open(os.path.join(out_dir, "summary.json"), "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    _emit(summary)

    if history is not None:
        db, run_id = history
        db.add_records(run_id, list(result.state.history))

    return {
        ExitReason.CONVERGED: EXIT_OK,
        ExitReason.TIME_UP:   EXIT_TIME_UP,
        ExitReason.DIVERGED:  EXIT_DIVERGED,
    }[result.reason]


# --------------------------------------------------------------------------- #
#  Entry point                                                                #
# --------------------------------------------------------------------------- #
def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    threads = set_threads(args.threads)

    # numeric modules load only after the thread variables are exported
    from cflow.client import CFlowClient
    from cflow.configs.base import parse_config
    from cflow.exceptions import CFlowError, ConfigError
    from cflow.flow.storage_sqlite import RunHistoryDB

    try:
        config = parse_config(args.config)
    except ConfigError as e:
        print(f"config error [{e.field or 'config'}]: {e}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = args.output_dir or config.output_dir
    logger.info(f"cflow {args.command}: config={args.config} threads={threads} output={out_dir}")

    db, run_id = None, None
    db_path = config.history_db_path()
    if db_path:
        db = RunHistoryDB(db_path)
        run_id = db.start_run(args.command, config_hash(config))

    client  = CFlowClient(config)
    reason  = "ok"
    try:
        if args.command == "invariants":
            code = _cmd_invariants(client, out_dir)
        elif args.command == "energy":
            code = _cmd_energy(client, out_dir)
        elif args.command == "check":
            code = _cmd_check(client, out_dir)
        else:
            code = _cmd_flow(client, out_dir, history=(db, run_id) if db else None)
    except ConfigError as e:
        print(f"config error [{e.field or 'config'}]: {e}", file=sys.stderr)
        code, reason = EXIT_CONFIG, "config_error"
    except (CFlowError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        code, reason = EXIT_ERROR, "error"

    if db is not None:
        if reason == "ok":
            reason = {EXIT_OK: "ok", EXIT_CHECK: "check_failed",
                      EXIT_DIVERGED: "Diverged", EXIT_TIME_UP: "TimeUp"}.get(code, "error")
        db.finish_run(run_id, reason, code)
        db.close()
    return code


if __name__ == "__main__":
    sys.exit(main())
