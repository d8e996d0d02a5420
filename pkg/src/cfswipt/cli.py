"""Command line entry point: ``cfswipt {validate,sweep,plot,oracle-gap}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .params import SystemParams

EXIT_SPEC_ERROR = 2


def _load_config(path):
    """Experiment spec when the file has a ``sweep`` block, otherwise bare system parameters."""
    if path is None:
        return None, SystemParams()
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ex.SpecError(f"{path}: {exc}") from exc
    if "sweep" in d:
        spec = ex.ExperimentSpec.from_dict(d)
        return spec, spec.base
    try:
        return None, SystemParams.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise ex.SpecError(f"{path}: {exc}") from exc


def cmd_validate(args) -> int:
    spec, params = _load_config(args.config)
    trials = args.trials or (spec.n_mc_trials if spec and spec.n_mc_trials else 20000)
    out = args.out or "out/validation"
    rows = ex.run_validation(params, trials, seed=args.seed, out=out)
    print(f"{'config':<12} {'quantity':<14} {'idx':>3} {'closed_form':>14} {'empirical':>14} {'rel_err':>9}")
    for r in rows:
        print(f"{r.config:<12} {r.quantity:<14} {r.index:>3} {r.closed_form:>14.6g} {r.empirical:>14.6g} "
              f"{r.rel_error:>9.2e}")
    print(f"wrote {Path(out) / 'validation.csv' if Path(out).suffix != '.csv' else out}")
    return 0


def cmd_sweep(args) -> int:
    spec, _ = _load_config(args.config)
    if spec is None:
        raise ex.SpecError("sweep needs an experiment spec with a 'sweep' block")
    if args.seed is not None:
        spec.master_seed = args.seed
    out = args.out or spec.output_dir
    result = ex.run_experiment(spec, threads=args.threads, n_drops=args.drops, out_dir=out)
    for scheme in result.schemes():
        cells = ", ".join(f"{a.sweep_value:g}: {a.mean:.4g} uW ({a.n_feasible}/{a.n_drops})"
                          for a in result.series(scheme))
        print(f"{scheme:<11} {cells}")
    print(f"wrote {out}")
    return 0


def cmd_plot(args) -> int:
    out = Path(args.out or "out")
    src = out / "aggregates.csv"
    if not src.exists():
        raise ex.SpecError(f"{src} not found; run 'sweep' first")
    aggs = ex.read_aggregates_csv(src)
    if not aggs:
        print("nothing to plot: aggregates.csv is empty", file=sys.stderr)
        return 1
    spec = None
    if args.config:
        spec, _ = _load_config(args.config)
    result = ex.SweepResult(spec, [], aggregates=aggs)
    xlabel = spec.sweep_variable if spec else "sweep value"
    path = ex.render_plot(result, out / "plot.svg", xlabel=xlabel, title=spec.name if spec else "")
    print(f"wrote {path}")
    return 0


def cmd_oracle_gap(args) -> int:
    spec, params = _load_config(args.config)
    m_values = [int(v) for v in spec.values] if spec and spec.sweep_variable == "M" else [params.M]
    drops = args.drops or (spec.n_drops if spec else 20)
    out = args.out or "out/oracle_gap"
    rows = ex.run_oracle_gap(params, m_values, drops, master_seed=args.seed or 0, threads=args.threads, out=out)
    ratios = np.array([r.ratio for r in rows if r.oracle_feasible])
    for r in rows:
        print(f"drop {r.drop:>3} M={r.M} relaxed {r.relaxed_uW:.6g} rounded {r.rounded_uW:.6g} "
              f"oracle {r.oracle_uW:.6g} ratio {r.ratio:.4f}")
    if ratios.size:
        q = np.nanpercentile(ratios, [0, 25, 50, 75, 100])
        print("rounded/oracle quantiles " + " ".join(f"{v:.4f}" for v in q))
    print(f"wrote {Path(out) / 'oracle_gap.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cfswipt", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_default=0):
        sp.add_argument("--config", help="experiment spec or system parameter JSON file")
        sp.add_argument("--seed", type=int, default=seed_default)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--drops", type=int)
        sp.add_argument("--trials", type=int)

    sp = sub.add_parser("validate", help="closed forms against Monte-Carlo simulation")
    common(sp)
    sp.set_defaults(func=cmd_validate)
    sp = sub.add_parser("sweep", help="run an experiment spec")
    common(sp, seed_default=None)
    sp.set_defaults(func=cmd_sweep)
    sp = sub.add_parser("plot", help="render plot.svg from an output directory")
    common(sp)
    sp.set_defaults(func=cmd_plot)
    sp = sub.add_parser("oracle-gap", help="rounded SCA against exhaustive mode search")
    common(sp)
    sp.set_defaults(func=cmd_oracle_gap)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except ex.SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC_ERROR


if __name__ == "__main__":
    sys.exit(main())
