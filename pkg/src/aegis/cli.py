"""``aegis`` command line: check, analyze, scenario, gov.

Exit codes: 0 clean, 1 findings (bad patterns, oracle disagreement, script
errors), 2 usage errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import ExitStack
from pathlib import Path

from .dsl.corpus import PatternSource, builtin_patterns, load_pattern_dir, load_pattern_file, parse_pattern_text
from .dsl.parser import PatternError
from .dsl.validate import PatternValidationError, validate_pattern
from .engine import Engine, brute_force_oracle, compile_pattern, engine_matches, write_verdicts
from .engine.oracle import OracleBoundExceeded
from .evm.scenarios import UnknownScenario, run_scenario, scenario_names
from .flow.calltree import MalformedDepth
from .governance import ScriptError, read_event_log, replay_events, run_script, write_event_log
from .trace import TraceError, export_traces, read_trace_file

log = logging.getLogger("aegis")

CLI_ORACLE_BOUND = 2000


class UsageError(Exception):
    pass


def _setup_logging() -> None:
    level = os.environ.get("AEGIS_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def load_sources(source: str) -> list[PatternSource]:
    """``builtin``, ``gov:<event log>``, a pattern directory or a pattern file."""
    if source == "builtin":
        return builtin_patterns()
    if source.startswith("gov:"):
        texts = replay_events(read_event_log(source[4:]))
        return [parse_pattern_text(t, f"gov-{i}") for i, t in enumerate(texts)]
    p = Path(source)
    if p.is_dir():
        return load_pattern_dir(p)
    if p.is_file():
        return [load_pattern_file(p)]
    raise UsageError(f"no pattern source {source!r}")


# -- check ---------------------------------------------------------------------------


def _pattern_files(paths: list[str]) -> list[str]:
    out = []
    for s in paths:
        p = Path(s)
        if p.is_dir():
            out.extend(str(f) for f in sorted(p.glob("*.pattern")))
        elif p.is_file():
            out.append(s)
        else:
            raise UsageError(f"no such file or directory: {s}")
    return out


def cmd_check(args) -> int:
    if args.paths == ["builtin"]:
        sources = [(p.path, p.text) for p in builtin_patterns()]
    else:
        sources = [(f, Path(f).read_text(encoding="utf-8")) for f in _pattern_files(args.paths)]
    bad = 0
    for path, text in sources:
        try:
            src = parse_pattern_text(text, Path(path).stem, path)
        except PatternError as exc:
            print(f"{path}:{exc} [{type(exc).__name__}]")
            bad += 1
            continue
        report = validate_pattern(src.ast)
        if not report.ok:
            for f in report.findings:
                print(f"{path}: relation {f.relation}: {f.message} [ValidationError]")
            bad += 1
            continue
        pid = "0x" + src.id.hex()
        if src.declared_id is not None and src.declared_id.lower() != pid:
            print(f"{path}: declared id {src.declared_id} does not match {pid} [IdMismatch]")
            bad += 1
            continue
        print(f"{pid} {path}")
        print(f"    {src.canonical}")
    return 1 if bad else 0


# -- analyze ---------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    if (args.trace is None) == (args.scenario is None):
        raise UsageError("analyze needs exactly one of --trace or --scenario")
    sources = load_sources(args.patterns)
    programs = [compile_pattern(s.ast, s.name) for s in sources]
    if args.trace is not None:
        traces = read_trace_file(args.trace)
    else:
        traces = [t.trace for t in run_scenario(args.scenario)]
    cap = None if args.history_cap == 0 else args.history_cap
    with ExitStack() as stack:
        dump = stack.enter_context(open(args.dump_taint, "w", encoding="utf-8")) if args.dump_taint else None
        engine = Engine(programs, history_cap=cap, taint_dump=dump)
        verdicts = [engine.process_transaction(t) for t in traces]
    for v in verdicts:
        log.info("tx 0x%064x %s %d matches", v.tx_hash, v.action, len(v.matched))
    if args.output and args.output != "-":
        with open(args.output, "w", encoding="utf-8") as fp:
            write_verdicts(verdicts, fp)
    else:
        write_verdicts(verdicts, sys.stdout)
    if args.timing and verdicts:
        ms = [v.elapsed * 1000 for v in verdicts]
        print(
            f"timing: {len(ms)} transactions, mean {statistics.mean(ms):.3f} ms, "
            f"median {statistics.median(ms):.3f} ms",
            file=sys.stderr,
        )
    if args.oracle:
        try:
            expected = brute_force_oracle(programs, traces, bound=args.oracle_bound)
        except OracleBoundExceeded as exc:
            print(f"oracle: {exc}", file=sys.stderr)
            return 2
        got = engine_matches(verdicts)
        if got != expected:
            print(
                f"oracle: disagreement, {len(got - expected)} engine-only and "
                f"{len(expected - got)} oracle-only bindings",
                file=sys.stderr,
            )
            return 1
        print(f"oracle: agree on {len(got)} bindings", file=sys.stderr)
    return 0


# -- scenario --------------------------------------------------------------------------


def _run_named(name: str) -> tuple[str, list]:
    return name, run_scenario(name)


def cmd_scenario(args) -> int:
    if args.list:
        for n in scenario_names():
            print(n)
        return 0
    if not args.names:
        raise UsageError("scenario needs a name or --list")
    for n in args.names:
        if n not in scenario_names():
            raise UsageError(f"unknown scenario {n!r}")
    if args.jobs > 1 and len(args.names) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_run_named, args.names))
    else:
        results = [_run_named(n) for n in args.names]
    for name, txs in results:
        if args.export:
            out = Path(args.export)
            if len(results) > 1:
                out.mkdir(parents=True, exist_ok=True)
                out = out / f"{name}.jsonl"
            with open(out, "w", encoding="utf-8", newline="\n") as fp:
                export_traces([t.trace for t in txs], fp)
        else:
            for t in txs:
                print(f"{name} {t.label} {t.status} records={len(t.trace.records)} tx=0x{t.trace.tx.hash:064x}")
    return 0


# -- gov -------------------------------------------------------------------------------


def cmd_gov(args) -> int:
    path = Path(args.script)
    if not path.is_file():
        raise UsageError(f"no such script: {args.script}")
    try:
        with open(path, encoding="utf-8") as fp:
            result = run_script(fp, base_dir=path.parent)
    except ScriptError as exc:
        print(f"{path}:{exc}", file=sys.stderr)
        return 1
    for line_no, err in result.errors:
        print(f"{path}:line {line_no}: {type(err).__name__}: {err}", file=sys.stderr)
    st = result.state
    if args.events:
        with open(args.events, "w", encoding="utf-8", newline="\n") as fp:
            write_event_log(st.events, fp)
    else:
        write_event_log(st.events, sys.stdout)
    for text in st.active_patterns:
        src = parse_pattern_text(text)
        print(f"active 0x{src.id.hex()} {src.canonical}")
    return 0


# -- entry -----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aegis", description="Pattern-based transaction analysis over EVM traces.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="parse and validate pattern files")
    p.add_argument("paths", nargs="+", help="pattern files or directories, or 'builtin'")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("analyze", help="match patterns against a trace stream")
    p.add_argument("--trace", help="wire-format trace file")
    p.add_argument("--scenario", help="built-in scenario name")
    p.add_argument("--patterns", default="builtin", help="builtin, a directory, a file, or gov:<event log>")
    p.add_argument("--history-cap", type=int, default=4096, help="partial matches kept per contract (0 = unbounded)")
    p.add_argument("--oracle", action="store_true", help="cross-check against the exhaustive matcher")
    p.add_argument("--oracle-bound", type=int, default=CLI_ORACLE_BOUND)
    p.add_argument("--output", "-o", help="verdict report path (default stdout)")
    p.add_argument("--timing", action="store_true", help="print per-transaction latency to stderr")
    p.add_argument("--dump-taint", help="write a per-transaction taint summary here")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("scenario", help="run mini-EVM scenarios")
    p.add_argument("names", nargs="*")
    p.add_argument("--list", action="store_true")
    p.add_argument("--export", help="trace output file (a directory for several names)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("gov", help="run a governance script")
    p.add_argument("script")
    p.add_argument("--events", help="event log output path (default stdout)")
    p.set_defaults(func=cmd_gov)
    return ap


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    try:
        return args.func(args)
    except (UsageError, UnknownScenario) as exc:
        print(f"aegis: {exc}", file=sys.stderr)
        return 2
    except (PatternError, PatternValidationError) as exc:
        print(f"aegis: pattern error: {exc}", file=sys.stderr)
        return 1
    except (TraceError, MalformedDepth, OSError) as exc:
        print(f"aegis: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
