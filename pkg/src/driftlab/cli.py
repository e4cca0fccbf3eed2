"""Command line interface: one subcommand per module op plus the acceptance report.

Exit codes: 0 all checks pass, 1 some check fails, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Sequence

from . import report
from .acceptance import TOLERANCES
from .config import DEFAULT_SEED, ConfigError, ScenarioConfig, load_config, parse_int, parse_list
from .results import DomainError, ScanResult, jsonable

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _tol_item(text: str) -> tuple[str, float]:
    key, eq, val = text.partition("=")
    if not eq or not key.strip():
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key.strip(), float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance {key!r} needs a number, got {val!r}") from None


def _seed(text: str) -> int:
    try:
        return parse_int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None


def _common(p: argparse.ArgumentParser, grid: bool = True) -> None:
    if grid:
        p.add_argument("--grid", type=int, default=32, metavar="N", help="points per axis")
        p.add_argument("--box", type=float, default=4.0, metavar="L", help="box half width")
        p.add_argument("--dim", type=int, default=3, metavar="d", help="space dimension")
        p.add_argument("--boundary", choices=("periodic", "dirichlet"), default="periodic")
        p.add_argument("--drift", default="zero", help="drift spec, e.g. hardy:c=0.5,sign=+")
        p.add_argument("--matrix", default="identity", help="matrix spec, e.g. radialproj:c=1")
    p.add_argument("--seed", type=_seed, default=DEFAULT_SEED, metavar="S")
    p.add_argument("--out", metavar="DIR", help="write index.json, CSV and SVG files here")
    p.add_argument("--tol", type=_tol_item, action="append", default=[], metavar="key=value",
                   help="override a named tolerance (repeatable)")
    p.add_argument("--json", action="store_true", help="print the full result as JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driftlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, spec in report.OPS.items():
        p = sub.add_parser(name, help=f"run the {name} op on one grid")
        _common(p)
        for key, (conv, default) in spec.params.items():
            p.add_argument(f"--{key.replace('_', '-')}", dest=f"op_{key}", default=None,
                           metavar="VALUE", help=f"default {default}")
        p.epilog = "tolerances: " + ", ".join(f"{k}={v:g}" for k, v in spec.tolerances.items())
    p = sub.add_parser("report", help="run a named suite")
    p.add_argument("--suite", required=True, choices=("acceptance",))
    p.add_argument("--only", default="", help="comma list of criteria, e.g. C01,C09")
    _common(p, grid=False)
    p.epilog = "tolerances: " + ", ".join(f"{k}={v:g}" for k, v in TOLERANCES.items())
    p = sub.add_parser("run", help="run a scenario config file")
    p.add_argument("config", help="path to a key = value scenario file")
    _common(p, grid=False)
    return parser


def _config_from_args(args: argparse.Namespace) -> ScenarioConfig:
    spec = report.OPS[args.command]
    params = {}
    for key, (conv, _) in spec.params.items():
        raw = getattr(args, f"op_{key}")
        if raw is not None:
            try:
                params[key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{args.command}.{key}: {exc}") from None
    return ScenarioConfig(id=args.command, dim=args.dim, n=args.grid, box=args.box,
                          boundary=args.boundary, drift=args.drift, matrix=args.matrix,
                          ops=[args.command], params={args.command: params}, seed=args.seed,
                          tolerances=dict(args.tol))


def _print_result(res: ScanResult, as_json: bool) -> None:
    if as_json:
        print(json.dumps(jsonable(res.as_dict(include_runtime=False)), indent=1, sort_keys=True))
        return
    status = "PASS" if res.passed else "FAIL"
    print(f"{status} {res.scenario} margin={report.summary_margin(res):.4g} "
          f"runtime={res.runtime:.1f}s")
    for c in res.checks:
        print(f"  [{'PASS' if c.passed else 'FAIL'}] {c.name}: measured={c.measured:.6g} "
              f"target={c.target:.6g} ({c.tolerance}) margin={c.margin:.4g}")
    for k, v in sorted(res.measured.items()):
        if isinstance(v, float):
            print(f"  {k} = {v:.8g}")
    for n in res.notes:
        print(f"  note: {n}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        out_dir = args.out
        if args.command == "report":
            keys = parse_list(args.only) or None

            def progress(res: ScanResult, key: str) -> None:
                print(f"{key} {'PASS' if res.passed else 'FAIL'} {res.scenario} "
                      f"margin={report.summary_margin(res):.4g} runtime={res.runtime:.1f}s",
                      flush=True)

            results = report.run_suite(keys, dict(args.tol), args.seed, progress)
        else:
            if args.command == "run":
                with open(args.config) as fh:
                    cfg = load_config(fh.read(), report.OP_PARAMS)
                if args.seed != DEFAULT_SEED:
                    cfg.seed = args.seed
                cfg.tolerances.update(dict(args.tol))
                out_dir = out_dir or cfg.out
            else:
                cfg = _config_from_args(args)
            cfg.out = None
            res = report.run_scenario(cfg)
            _print_result(res, args.json)
            results = [res]
        if out_dir:
            report.emit_report(results, out_dir)
    except (ConfigError, DomainError, OSError) as exc:
        print(f"driftlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "report" and args.json:
        print(json.dumps({r.scenario: r.passed for r in results}, indent=1, sort_keys=True))
    return EXIT_PASS if all(r.passed for r in results) else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
