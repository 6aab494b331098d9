"""``aalsim`` command-line front end.

Exit codes: 0 success, 1 scenario failure (failed slots, or deadline misses
under ``--strict``), 2 configuration or usage error.
"""

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from .engine import EventTrace
from .errors import ConfigInvalid
from .mgmt import PROFILE_DESCRIPTIONS
from .sim import (COMPARE_CSV_COLUMNS, RUN_CSV_COLUMNS, fold_trace, load_config, run_scenario)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _csv(header, rows):
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return out.getvalue()


def _json(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _config_error(exc):
    for path, msg in exc.diagnostics:
        print(f"error: {path}: {msg}", file=sys.stderr)
    return EXIT_CONFIG


def _trace_paths(args, names):
    base = args.emit_trace if isinstance(args.emit_trace, str) else (args.out or "aalsim")
    if len(names) == 1:
        return {names[0]: Path(f"{base}.trace")}
    return {n: Path(f"{base}.{n}.trace") for n in names}


def _render_run(report, fmt):
    if fmt == "csv":
        return _csv(RUN_CSV_COLUMNS, [s.csv_row() for s in report.slots])
    return _json(report.to_dict())


def _render_compare(report, fmt):
    if fmt == "csv":
        return _csv(COMPARE_CSV_COLUMNS, report.csv_rows())
    return _json(report.to_dict())


def _load(args):
    path = Path(args.config)
    return load_config(path), path.parent


def _exit_status(report, strict):
    if report.failed:
        return EXIT_FAIL
    if strict and report.deadline_misses:
        return EXIT_FAIL
    return EXIT_OK


def cmd_run(args):
    try:
        cfg, base = _load(args)
    except ConfigInvalid as exc:
        return _config_error(exc)
    report, traces = run_scenario(cfg, args.seed, base_dir=base)
    if cfg.direction == "compare_modes":
        text = _render_compare(report, args.format)
        traces = dict(traces)
    else:
        text = _render_run(report, args.format)
        traces = {"run": traces}
    _emit(text, args.out)
    if args.emit_trace:
        for name, path in _trace_paths(args, list(traces)).items():
            traces[name].write(path)
    return _exit_status(report, args.strict)


def cmd_compare(args):
    try:
        cfg, base = _load(args)
    except ConfigInvalid as exc:
        return _config_error(exc)
    if cfg.direction != "compare_modes":
        cfg = cfg.model_copy(update={"direction": "compare_modes",
                                     "compare_direction": cfg.direction_run})
        if cfg.offload_mode.kind != "lookaside":
            print("error: offload_mode: compare needs a lookaside stage list", file=sys.stderr)
            return EXIT_CONFIG
    report, traces = run_scenario(cfg, args.seed, base_dir=base)
    _emit(_render_compare(report, args.format), args.out)
    print(f"output_sha256 inline={report.inline.output_sha256} "
          f"lookaside={report.lookaside.output_sha256}", file=sys.stderr)
    if args.emit_trace:
        for name, path in _trace_paths(args, list(traces)).items():
            traces[name].write(path)
    return _exit_status(report, args.strict)


def cmd_validate_config(args):
    try:
        load_config(args.config)
    except ConfigInvalid as exc:
        return _config_error(exc)
    print("OK")
    return EXIT_OK


def cmd_list_profiles(args):
    rows = [(p.value, mode, desc) for p, (mode, desc) in PROFILE_DESCRIPTIONS.items()]
    if args.format == "csv":
        sys.stdout.write(_csv(("profile", "mode", "description"), rows))
    elif args.format == "json":
        sys.stdout.write(_json([dict(zip(("profile", "mode", "description"), r)) for r in rows]))
    else:
        width = max(len(r[0]) for r in rows)
        print(f"{'PROFILE':<{width}}  {'MODE':<9}  DESCRIPTION")
        for name, mode, desc in rows:
            print(f"{name:<{width}}  {mode:<9}  {desc}")
    return EXIT_OK


def trace_diff(a_lines, b_lines):
    """``None`` if identical, else ``(line_no, a_line, b_line)`` of the first divergence."""
    for i in range(max(len(a_lines), len(b_lines))):
        a = a_lines[i] if i < len(a_lines) else None
        b = b_lines[i] if i < len(b_lines) else None
        if a != b:
            return i + 1, a, b
    return None


def cmd_trace_diff(args):
    try:
        a = Path(args.a).read_text().splitlines()
        b = Path(args.b).read_text().splitlines()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    diff = trace_diff(a, b)
    if diff is None:
        print("identical")
        return EXIT_OK
    line, la, lb = diff
    print(f"diverge at line {line}")
    print(f"< {la if la is not None else '<end of file>'}")
    print(f"> {lb if lb is not None else '<end of file>'}")
    return EXIT_FAIL


def cmd_fold(args):
    try:
        trace = EventTrace.read(args.trace)
        report = fold_trace(trace.records)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: cannot fold {args.trace}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(_render_run(report, args.format), args.out)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="aalsim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_flags(sp):
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--out", metavar="PATH")
        sp.add_argument("--emit-trace", nargs="?", const=True, default=None, metavar="BASE",
                        help="write the event trace next to --out (or to BASE.trace)")
        sp.add_argument("--strict", action="store_true", help="deadline misses fail the run")

    sp = sub.add_parser("run", help="run a scenario and write its metrics report")
    scenario_flags(sp)
    sp.set_defaults(fn=cmd_run)

    sp = sub.add_parser("compare", help="run inline and lookaside side by side")
    scenario_flags(sp)
    sp.set_defaults(fn=cmd_compare)

    sp = sub.add_parser("validate-config", help="check a scenario config")
    sp.add_argument("--config", required=True, metavar="PATH")
    sp.set_defaults(fn=cmd_validate_config)

    sp = sub.add_parser("list-profiles", help="list the acceleration profiles")
    sp.add_argument("--format", choices=("table", "json", "csv"), default="table")
    sp.set_defaults(fn=cmd_list_profiles)

    sp = sub.add_parser("trace-diff", help="report the first diverging trace line")
    sp.add_argument("a")
    sp.add_argument("b")
    sp.set_defaults(fn=cmd_trace_diff)

    sp = sub.add_parser("fold", help="rebuild a run report from a trace file")
    sp.add_argument("trace")
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.add_argument("--out", metavar="PATH")
    sp.set_defaults(fn=cmd_fold)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
