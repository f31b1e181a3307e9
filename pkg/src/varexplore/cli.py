"""Command-line entry point.

    varexplore run --payload payload.json [--store PATH|URL] [--staging DIR] [--out DIR]
                   [--parallelism N] [--seed S] [--agent-offset K]
    varexplore serve-store --store PATH [--listen HOST:PORT]
    varexplore report --store PATH|URL --study NAME {convergence,importances,pareto}
                      [--format csv|svg] [--out DIR] [--objective I]

stdout carries ``key=value`` status lines only; diagnostics go to stderr.
``VAREXPLORE_STORE`` and ``VAREXPLORE_STAGING`` supply defaults for
``--store`` and ``--staging``.

Exit codes: 0 success, 1 runtime error, 2 invalid payload or arguments,
3 store unreachable.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import signal
import sys
import threading
import warnings
from pathlib import Path

from . import report as rpt
from .driver import run_study, validate_payload
from .errors import PayloadError, StoreError, StoreUnavailable, StudyNotFound
from .trialstore import FileStore, RemoteStore, open_store, serve

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVALID = 2
EXIT_STORE = 3

log = logging.getLogger("varexplore")


def _status(**fields) -> None:
    print(" ".join(f"{k}={_token(v)}" for k, v in fields.items()), flush=True)


def _token(v) -> str:
    if isinstance(v, (dict, list)):
        return json.dumps(v, separators=(",", ":"), sort_keys=True)
    return str(v)


def _err(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _open_store(location: str):
    store = open_store(location)
    if isinstance(store, RemoteStore) and not store.ping():
        raise StoreUnavailable(f"store server at {location} is not answering")
    return store


# -- run ----------------------------------------------------------------------

def cmd_run(args) -> int:
    try:
        document = json.loads(Path(args.payload).read_text())
    except OSError as exc:
        _err(f"error: cannot read payload: {exc}")
        return EXIT_INVALID
    except json.JSONDecodeError as exc:
        _err(f"error: payload is not valid JSON: {exc}")
        return EXIT_INVALID
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            plan = validate_payload(document)
        except PayloadError as exc:
            plan = None
            diagnostics = exc.diagnostics
    for w in caught:
        _err(f"warning: {w.message}")
    if plan is None:
        for path, msg in diagnostics:
            _err(f"payload error: {path or '<root>'}: {msg}")
        return EXIT_INVALID

    try:
        store = _open_store(args.store)
    except (StoreUnavailable, OSError) as exc:
        _err(f"error: store unreachable: {exc}")
        return EXIT_STORE

    staging = args.staging or os.path.join(args.out, "staging")
    try:
        with store:
            results = run_study(plan, store, staging_dir=staging, parallelism=args.parallelism,
                                seed=args.seed, agent_offset=args.agent_offset)
            for res in results:
                files = rpt.export_study(store, res, args.out)
                best = res.best[0] if res.best else None
                _status(study=res.study, trials=res.trial_count,
                        complete=sum(c["complete"] for c in res.agent_counts.values()),
                        failed=sum(c["failed"] for c in res.agent_counts.values()),
                        snapshots=len(res.importance_history),
                        best_values=best.values if best else [], best_params=best.params if best else {},
                        pareto_size=len(res.best), report=files["report"], trials_csv=files["trials"],
                        snapshots_csv=files["snapshots"])
    except StoreUnavailable as exc:
        _err(f"error: store unreachable: {exc}")
        return EXIT_STORE
    except StoreError as exc:
        _err(f"error: {type(exc).__name__}: {exc}")
        return EXIT_ERROR
    return EXIT_OK


# -- serve-store ----------------------------------------------------------------

def cmd_serve_store(args) -> int:
    try:
        backend = FileStore(args.store)
    except OSError as exc:
        _err(f"error: cannot open store log {args.store}: {exc}")
        return EXIT_STORE
    try:
        server = serve(backend, args.listen)
    except OSError as exc:
        _err(f"error: cannot listen on {args.listen}: {exc.strerror or exc}")
        backend.close()
        return EXIT_ERROR
    stop = threading.Event()

    def on_signal(signum, frame):
        stop.set()

    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, on_signal)
    th = server.start()
    _status(status="listening", url=server.url, store=args.store, studies=len(backend.list_studies()))
    stop.wait()
    server.stop()
    th.join()
    backend.close()
    _status(status="stopped")
    return EXIT_OK


# -- report -------------------------------------------------------------------

def cmd_report(args) -> int:
    if "://" not in args.store and args.store != ":memory:" and not Path(args.store).exists():
        _err(f"error: store unreachable: no store log at {args.store}")
        return EXIT_STORE
    try:
        store = _open_store(args.store)
    except (StoreUnavailable, OSError) as exc:
        _err(f"error: store unreachable: {exc}")
        return EXIT_STORE
    with store:
        try:
            study = store.get_study(args.study)
            trials = store.list_trials(args.study)
        except StudyNotFound:
            _err(f"error: UnknownStudy: no study named {args.study!r}")
            return EXIT_ERROR
        except StoreUnavailable as exc:
            _err(f"error: store unreachable: {exc}")
            return EXIT_STORE
    out = Path(args.out)
    stem = f"{rpt.safe_stem(args.study)}-{args.kind}"
    if not 0 <= args.objective < len(study.directions):
        _err(f"error: --objective must be below {len(study.directions)}")
        return EXIT_INVALID
    try:
        if args.kind == "convergence":
            path = rpt.write_convergence_csv(study, trials, out / f"{stem}.csv", args.objective)
        elif args.kind == "importances":
            path = rpt.write_snapshots_csv(study, out / f"{stem}.csv")
        else:
            path = rpt.write_pareto_csv(study, trials, out / f"{stem}.csv")
        written = {"csv": path}
        if args.format == "svg":
            if args.kind == "convergence":
                written["svg"] = rpt.plot_convergence_svg(study, trials, out / f"{stem}.svg", args.objective)
            elif args.kind == "importances":
                written["svg"] = rpt.plot_importances_svg(study, out / f"{stem}.svg", args.objective)
            else:
                written["svg"] = rpt.plot_pareto_svg(study, trials, out / f"{stem}.svg")
    except StoreError as exc:
        _err(f"error: {type(exc).__name__}: {exc}")
        return EXIT_ERROR
    except RuntimeError as exc:
        _err(f"error: {exc}")
        return EXIT_ERROR
    _status(study=args.study, kind=args.kind, **{k: v for k, v in written.items()})
    return EXIT_OK


# -- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    env_store = os.environ.get("VAREXPLORE_STORE")
    env_staging = os.environ.get("VAREXPLORE_STAGING")
    p = argparse.ArgumentParser(prog="varexplore", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a study from a payload file")
    r.add_argument("--payload", required=True)
    r.add_argument("--store", default=env_store or "varexplore-store.jsonl",
                   help="file log path, ':memory:' or http://host:port (env VAREXPLORE_STORE)")
    r.add_argument("--staging", default=env_staging, help="per-trial staging root (env VAREXPLORE_STAGING)")
    r.add_argument("--out", default="varexplore-out", help="directory for report and CSV files")
    r.add_argument("--parallelism", type=int, default=None, help="cap on concurrent agents")
    r.add_argument("--seed", type=int, default=None, help="overrides variational_options.seed")
    r.add_argument("--agent-offset", type=int, default=0,
                   help="first agent id, for agents of one study spread over several processes")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("serve-store", help="serve a file-log store over HTTP")
    s.add_argument("--store", default=env_store or "varexplore-store.jsonl")
    s.add_argument("--listen", default="127.0.0.1:8765", help="HOST:PORT (port 0 picks a free one)")
    s.set_defaults(func=cmd_serve_store)

    g = sub.add_parser("report", help="export convergence, importances or Pareto data")
    g.add_argument("--store", default=env_store or "varexplore-store.jsonl")
    g.add_argument("--study", required=True)
    g.add_argument("kind", choices=("convergence", "importances", "pareto"))
    g.add_argument("--format", choices=("csv", "svg"), default="csv",
                   help="csv always; svg adds a static plot")
    g.add_argument("--out", default="varexplore-out")
    g.add_argument("--objective", type=int, default=0)
    g.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    if args.command == "run" and args.parallelism is not None and args.parallelism < 1:
        _err("error: --parallelism must be >= 1")
        return EXIT_INVALID
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
