"""Command-line entry point: ``awp-lab {run, oracle-compare, list-scenarios, dump-field-info}``.

Exit codes: 0 success, 1 runtime numeric failure (including a failed oracle
comparison), 2 validation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2


def _threads(value: Optional[int]) -> None:
    from . import _fft

    if value is None:
        _fft.get_threads()  # validates AWP_LAB_THREADS early
        return
    _fft.set_threads(value)
    try:
        import numba

        numba.set_num_threads(min(value, numba.config.NUMBA_NUM_THREADS))
    except ImportError:  # pragma: no cover - numba is optional at runtime
        pass


def _summary(metrics: dict) -> str:
    return "\n".join(f"  {k} = {q['value']:.6g} {q['unit']}" if isinstance(q["value"], float)
                     else f"  {k} = {q['value']} {q['unit']}" for k, q in sorted(metrics.items()))


def _cmd_run(args) -> int:
    from .scenario import load_scenario, run_scenario

    sc = load_scenario(args.scenario, args.grid_override, args.output_dir)
    manifest = run_scenario(sc, emit_plots_data=args.emit_plots_data)
    print(f"{sc.name}: wrote {Path(sc.output_dir) / 'manifest.json'}")
    print(_summary(manifest["metrics"]))
    return EXIT_OK


def _cmd_oracle(args) -> int:
    from .scenario import load_scenario, oracle_compare, write_json_atomic

    sc = load_scenario(args.scenario, args.grid_override, args.output_dir)
    report = oracle_compare(sc)
    out = Path(sc.output_dir)
    write_json_atomic(out / "oracle_report.json", report)
    status = "PASS" if report["passed"] else "FAIL"
    extra = " (trivial)" if report.get("trivial") else ""
    print(f"{sc.name}: oracle comparison {status}{extra}; report {out / 'oracle_report.json'}")
    for k in ("relative_l2", "tilt_relative_error"):
        if k in report:
            print(f"  {k} = {report[k]['value']:.3e}")
    return EXIT_OK if report["passed"] else EXIT_RUNTIME


def _cmd_list(args) -> int:
    from .scenario import _tomllib_load, bundled_scenarios

    for name, path in sorted(bundled_scenarios().items()):
        raw = _tomllib_load(path)
        print(f"{name:24s} {raw.get('protocol', '?'):11s} {raw.get('description', '')}")
    return EXIT_OK


def _cmd_dump(args) -> int:
    from .fieldio import read_field, read_header

    head = read_header(args.file)
    f = read_field(args.file)
    info = {
        "nx": {"value": head["nx"], "unit": "1"},
        "ny": {"value": head["ny"], "unit": "1"},
        "dx": {"value": head["dx"], "unit": "m"},
        "dy": {"value": head["dy"], "unit": "m"},
        "lambda_vac": {"value": head["lambda_vac"], "unit": "m"},
        "norm2": {"value": f.norm2(), "unit": "arb*m^2"},
        "peak_abs": {"value": float(np.abs(f.amp).max()), "unit": "arb"},
    }
    print(json.dumps(info, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="awp-lab", description="Advanced-wave biphoton simulations.")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp):
        sp.add_argument("scenario", help="scenario TOML file or bundled scenario name")
        sp.add_argument("--grid-override", metavar="KEY=VAL[,...]",
                        help="replace grid entries, e.g. n=128,dx=1e-6")
        sp.add_argument("--threads", type=int, help="worker threads (default: AWP_LAB_THREADS or 1)")
        sp.add_argument("--output-dir", help="directory for results (overrides [output].dir)")

    r = sub.add_parser("run", help="execute a scenario and write its manifest")
    common(r)
    r.add_argument("--emit-plots-data", action="store_true", help="also write plot-ready CSV cross-sections")
    r.set_defaults(func=_cmd_run)

    o = sub.add_parser("oracle-compare", help="compare the kernel with direct volume integration")
    common(o)
    o.set_defaults(func=_cmd_oracle)

    ls = sub.add_parser("list-scenarios", help="list bundled scenarios")
    ls.set_defaults(func=_cmd_list)

    d = sub.add_parser("dump-field-info", help="print the header and norm of an AWPF field dump")
    d.add_argument("file")
    d.set_defaults(func=_cmd_dump)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    from .engine import PerfectCavityError
    from .fieldio import FieldFormatError
    from .scenario import ScenarioError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    try:
        _threads(getattr(args, "threads", None))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FieldFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FloatingPointError, ArithmeticError, PerfectCavityError, np.linalg.LinAlgError, RuntimeError,
            ValueError) as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
