"""Command-line entry point.

`w2lab run` executes configured suites and writes deterministic report files;
`w2lab compute` exposes the individual numerical routines for quick
interactive checks. Exit codes: 0 all non-vacuous checks passed, 1 at least
one failed, 2 bad configuration or usage.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, W2LabError
from .generator import build_generator, evolve, spectral_gap
from .hopflax import GridFunction, hopf_lax
from .measures import build_grid_measure, functionals, gaussian_tilt
from .reporting import format_float
from .suites import SUITE_IDS, SuiteConfig, config_from_dict, resolve_model, run_suite


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="w2lab",
        description="Desk-scale numerical checks for transport and functional inequalities.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command")

    run = sub.add_parser("run", help="execute suites from a config and write reports")
    run.add_argument("--config", type=Path, default=None,
                     help="JSON config file (defaults to the built-in quadratic-model run)")
    run.add_argument("--out", type=Path, required=True, help="output directory")
    run.add_argument("--jobs", type=int, default=1, help="worker threads (default 1)")
    run.add_argument("--no-figures", action="store_true",
                     help="skip figure rendering regardless of config")
    run.add_argument("--list-suites", action="store_true",
                     help="print available suite ids and exit")

    compute = sub.add_parser("compute", help="run a single routine and print the result")
    compute.add_argument("what", choices=("gap", "w2", "evolve", "hopflax"))
    compute.add_argument("--model", default="ou", help="model name (default ou)")
    compute.add_argument("--n", type=int, default=None, help="grid size override")
    compute.add_argument("--tilt", type=float, default=0.5,
                         help="exponential tilt parameter for w2/evolve (default 0.5)")
    compute.add_argument("--time", type=float, default=1.0,
                         help="evolution / inf-convolution time (default 1.0)")

    return parser


def _load_config(path: Path | None) -> SuiteConfig:
    if path is None:
        return SuiteConfig()
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path} ({exc})") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: {path} is not valid JSON ({exc})") from exc
    return config_from_dict(raw)


def _summary_table(records: tuple[dict, ...]) -> str:
    lines = []
    by_suite: dict[str, Counter] = {}
    for rec in records:
        by_suite.setdefault(rec["suite"], Counter())[rec["verdict"]] += 1
    width = max((len(s) for s in by_suite), default=5)
    header = f"{'suite':<{width}}  pass  fail  vacuous"
    lines.append(header)
    lines.append("-" * len(header))
    for suite in sorted(by_suite):
        c = by_suite[suite]
        lines.append(
            f"{suite:<{width}}  {c.get('pass', 0):>4}  {c.get('fail', 0):>4}  {c.get('vacuous', 0):>7}"
        )
    total = Counter()
    for c in by_suite.values():
        total.update(c)
    lines.append("-" * len(header))
    lines.append(
        f"{'total':<{width}}  {total.get('pass', 0):>4}  {total.get('fail', 0):>4}  {total.get('vacuous', 0):>7}"
    )
    return "\n".join(lines)


def _cmd_run(args: argparse.Namespace) -> int:
    if args.list_suites:
        for sid in SUITE_IDS:
            print(sid)
        return 0
    config = _load_config(args.config)
    render = False if args.no_figures else None
    result = run_suite(config, args.out, jobs=max(1, args.jobs), render_figures=render)
    print(_summary_table(result.records))
    print()
    failures = [r for r in result.records if r["verdict"] == "fail"]
    for rec in failures[:20]:
        print(f"FAIL {rec['suite']}/{rec['id']} [{rec['context']}] "
              f"margin={format_float(rec['margin'])}")
    if len(failures) > 20:
        print(f"... and {len(failures) - 20} more failures")
    print(f"report: {result.json_path}")
    print(f"summary: {result.csv_path}")
    for fig in result.figure_paths:
        print(f"figure: {fig}")
    return result.exit_code


def _compute_setup(args: argparse.Namespace):
    model = resolve_model(args.model, None, args.n)
    mu = build_grid_measure(model.potential, model.domain, model.n,
                            tail_mass=0.0 if model.bounded else None)
    return model, mu


def _cmd_compute(args: argparse.Namespace) -> int:
    model, mu = _compute_setup(args)
    if args.what == "gap":
        L = build_generator(mu)
        gap, c_p = spectral_gap(L)
        print(f"model={model.name} n={mu.n} gap={format_float(gap)} C_P={format_float(c_p)}")
        return 0
    if args.what == "w2":
        from .battery import quantile_backend

        f = gaussian_tilt(args.tilt, mu)
        dist = quantile_backend(f, mu)
        print(f"model={model.name} tilt={args.tilt:g} W2={format_float(dist)}")
        return 0
    if args.what == "evolve":
        L = build_generator(mu)
        f = gaussian_tilt(args.tilt, mu)
        g = evolve(L, f, args.time)
        bundle = functionals(g, mu)
        print(f"model={model.name} tilt={args.tilt:g} t={args.time:g}")
        print(f"  variance={format_float(bundle.variance)}")
        print(f"  entropy={format_float(bundle.entropy)}")
        print(f"  fisher={format_float(bundle.fisher)}")
        print(f"  dirichlet={format_float(bundle.dirichlet)}")
        return 0
    # hopflax: inf-convolution of a reference kink at the measure's base point
    h = GridFunction.on_measure(mu, np.abs(mu.x - mu.x[mu.base_index]))
    result = hopf_lax(h, args.time)
    values = result.values
    picks = np.linspace(0, mu.n - 1, 9).astype(int)
    print(f"model={model.name} t={args.time:g} min={format_float(float(values.min()))}")
    for i in picks:
        print(f"  x={mu.x[i]: .6f}  value={format_float(float(values[i]))}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 2
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_compute(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except W2LabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
