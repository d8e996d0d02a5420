"""Declarative sweeps over network size, CSV/SVG output and closed-form validation runs."""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import montecarlo, sca
from .metrics import Allocation
from .network import generate_network
from .params import SystemParams

log = logging.getLogger(__name__)

RESULTS_HEADER = "# cfswipt results v1"
AGGREGATES_HEADER = "# cfswipt aggregates v1"
ORACLE_GAP_HEADER = "# cfswipt oracle-gap v1"
RESULT_FIELDS = ("sweep_value", "M", "N", "scheme", "drop", "drop_seed", "status", "feasible",
                 "sum_phi_uW", "relaxed_sum_phi_uW", "min_se_bpsHz", "se_bpsHz", "phi_uW",
                 "iterations", "flips", "violated")
AGGREGATE_FIELDS = ("sweep_value", "scheme", "n_drops", "n_feasible", "feasibility_rate",
                    "mean_sum_phi_uW", "stderr_sum_phi_uW", "mean_all_sum_phi_uW")
SWEEP_VARIABLES = ("M", "N", "MN")
KNOWN_SCHEMES = tuple(sca.SCHEMES)


class SpecError(ValueError):
    """Invalid experiment specification."""


@dataclass
class ExperimentSpec:
    name: str
    base: SystemParams
    sweep_variable: str
    values: list
    n_drops: int = 10
    n_mc_trials: int = 0
    schemes: list[str] = field(default_factory=lambda: ["proposed", "benchmark1", "benchmark2", "benchmark3"])
    master_seed: int = 0
    output_dir: str = "out"
    product: int | None = None  # M*N for the "MN" sweep
    note: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise SpecError(f"sweep variable must be one of {SWEEP_VARIABLES}, got {self.sweep_variable!r}")
        if not self.values:
            raise SpecError("sweep needs at least one value")
        if self.n_drops < 1:
            raise SpecError("n_drops must be >= 1")
        if self.n_mc_trials < 0:
            raise SpecError("n_mc_trials must be >= 0")
        bad = [s for s in self.schemes if s not in KNOWN_SCHEMES]
        if bad or not self.schemes:
            raise SpecError(f"unknown schemes {bad}; choose from {KNOWN_SCHEMES}")
        if self.sweep_variable == "MN" and not self.product:
            raise SpecError("an MN sweep needs 'product'")
        for v in self.values:
            try:
                self.point_params(v)
            except ValueError as exc:
                raise SpecError(f"sweep value {v!r}: {exc}") from exc

    def point_params(self, value) -> SystemParams:
        if self.sweep_variable == "M":
            return self.base.replace(M=int(value))
        if self.sweep_variable == "N":
            return self.base.replace(N=int(value))
        n = int(value)
        if self.product % n:
            raise ValueError(f"N={n} does not divide M*N={self.product}")
        return self.base.replace(N=n, M=self.product // n)

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "base": self.base.to_dict(),
            "sweep": {"variable": self.sweep_variable, "values": list(self.values)},
            "n_drops": self.n_drops,
            "n_mc_trials": self.n_mc_trials,
            "schemes": list(self.schemes),
            "master_seed": self.master_seed,
            "output_dir": self.output_dir,
        }
        if self.product is not None:
            d["sweep"]["product"] = self.product
        if self.note:
            d["note"] = self.note
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        try:
            sweep = d["sweep"]
            return cls(
                name=str(d["name"]),
                base=SystemParams.from_dict(d.get("base", {})),
                sweep_variable=sweep["variable"],
                values=list(sweep["values"]),
                n_drops=int(d.get("n_drops", 10)),
                n_mc_trials=int(d.get("n_mc_trials", 0)),
                schemes=list(d.get("schemes", ["proposed", "benchmark1", "benchmark2", "benchmark3"])),
                master_seed=int(d.get("master_seed", 0)),
                output_dir=str(d.get("output_dir", "out")),
                product=sweep.get("product"),
                note=str(d.get("note", "")),
            )
        except (KeyError, TypeError) as exc:
            raise SpecError(f"malformed experiment spec: {exc}") from exc
        except ValueError as exc:
            if isinstance(exc, SpecError):
                raise
            raise SpecError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentSpec":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}: {exc}") from exc
        return cls.from_dict(d)


def drop_seed(master_seed: int, point: int, drop: int) -> int:
    """Stable 63-bit seed; blake2b of the three integers, independent of the sweep length."""
    h = hashlib.blake2b(f"{int(master_seed)}:{int(point)}:{int(drop)}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little") >> 1


@dataclass
class ResultRow:
    sweep_value: float
    M: int
    N: int
    scheme: str
    drop: int
    drop_seed: int
    status: str
    feasible: bool
    sum_phi_uW: float
    relaxed_sum_phi_uW: float
    min_se_bpsHz: float
    se_bpsHz: list[float]
    phi_uW: list[float]
    iterations: int
    flips: int
    violated: str
    wall_time: float = 0.0  # kept out of results.csv so reruns are byte-identical

    def csv_cells(self) -> list:
        return [
            _fmt(self.sweep_value), self.M, self.N, self.scheme, self.drop, self.drop_seed, self.status,
            int(self.feasible), _fmt(self.sum_phi_uW), _fmt(self.relaxed_sum_phi_uW), _fmt(self.min_se_bpsHz),
            ";".join(_fmt(v) for v in self.se_bpsHz), ";".join(_fmt(v) for v in self.phi_uW),
            self.iterations, self.flips, self.violated,
        ]

    @classmethod
    def from_cells(cls, c: dict) -> "ResultRow":
        def floats(s):
            return [float(v) for v in s.split(";")] if s else []

        return cls(float(c["sweep_value"]), int(c["M"]), int(c["N"]), c["scheme"], int(c["drop"]),
                   int(c["drop_seed"]), c["status"], c["feasible"] == "1", float(c["sum_phi_uW"]),
                   float(c["relaxed_sum_phi_uW"]), float(c["min_se_bpsHz"]), floats(c["se_bpsHz"]),
                   floats(c["phi_uW"]), int(c["iterations"]), int(c["flips"]), c["violated"])


@dataclass
class Aggregate:
    sweep_value: float
    scheme: str
    n_drops: int
    n_feasible: int
    mean: float  # over feasible drops, uW
    stderr: float
    mean_all: float  # infeasible drops counted as zero harvest

    @property
    def feasibility_rate(self) -> float:
        return self.n_feasible / self.n_drops if self.n_drops else 0.0

    def csv_cells(self) -> list:
        return [_fmt(self.sweep_value), self.scheme, self.n_drops, self.n_feasible, _fmt(self.feasibility_rate),
                _fmt(self.mean), _fmt(self.stderr), _fmt(self.mean_all)]


@dataclass
class SweepResult:
    spec: ExperimentSpec | None
    rows: list[ResultRow]
    aggregates: list[Aggregate] = field(default_factory=list)
    log_lines: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.aggregates and self.rows:
            self.aggregates = aggregate(self.rows)

    def schemes(self) -> list[str]:
        seen: list[str] = []
        for a in self.aggregates:
            if a.scheme not in seen:
                seen.append(a.scheme)
        return seen

    def series(self, scheme: str) -> list[Aggregate]:
        return sorted((a for a in self.aggregates if a.scheme == scheme), key=lambda a: a.sweep_value)

    def lookup(self, value, scheme: str) -> Aggregate:
        for a in self.aggregates:
            if a.scheme == scheme and a.sweep_value == float(value):
                return a
        raise KeyError((value, scheme))

    def write(self, out_dir: str | Path, plot: bool = True) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_results_csv(self.rows, out / "results.csv")
        write_aggregates_csv(self.aggregates, out / "aggregates.csv")
        (out / "run.log").write_text("\n".join(self.log_lines) + "\n")
        if plot and self.aggregates:
            xlabel = self.spec.sweep_variable if self.spec else "sweep value"
            if self.spec and self.spec.sweep_variable == "MN":
                xlabel = f"N (M*N = {self.spec.product})"
            title = self.spec.name if self.spec else "sweep"
            render_plot(self, out / "plot.svg", xlabel=xlabel, title=title)
        return out


def _fmt(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


def write_results_csv(rows: list[ResultRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(RESULTS_HEADER + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_FIELDS)
        for r in rows:
            w.writerow(r.csv_cells())


def write_aggregates_csv(aggs: list[Aggregate], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(AGGREGATES_HEADER + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_FIELDS)
        for a in aggs:
            w.writerow(a.csv_cells())


def _read_versioned(path: str | Path, header: str) -> list[dict]:
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\n")
        if first != header:
            raise ValueError(f"{path}: expected header {header!r}, found {first!r}")
        return list(csv.DictReader(fh))


def read_results_csv(path: str | Path) -> list[ResultRow]:
    return [ResultRow.from_cells(c) for c in _read_versioned(path, RESULTS_HEADER)]


def read_aggregates_csv(path: str | Path) -> list[Aggregate]:
    out = []
    for c in _read_versioned(path, AGGREGATES_HEADER):
        out.append(Aggregate(float(c["sweep_value"]), c["scheme"], int(c["n_drops"]), int(c["n_feasible"]),
                             float(c["mean_sum_phi_uW"]), float(c["stderr_sum_phi_uW"]),
                             float(c["mean_all_sum_phi_uW"])))
    return out


def aggregate(rows: list[ResultRow]) -> list[Aggregate]:
    groups: dict[tuple[float, str], list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.sweep_value, r.scheme), []).append(r)
    out = []
    for (value, scheme), rs in groups.items():
        feas = np.array([r.sum_phi_uW for r in rs if r.feasible])
        n = len(rs)
        mean = float(feas.mean()) if feas.size else float("nan")
        stderr = float(feas.std(ddof=1) / np.sqrt(feas.size)) if feas.size > 1 else (0.0 if feas.size else float("nan"))
        mean_all = float(feas.sum() / n)
        out.append(Aggregate(value, scheme, n, int(feas.size), mean, stderr, mean_all))
    return out


def pooled_stderr(a: Aggregate, b: Aggregate) -> float:
    return float(np.hypot(a.stderr, b.stderr))


def _run_task(task):
    value, point_idx, drop, seed, params, schemes = task
    net = generate_network(params, seed)
    out = []
    for scheme in schemes:
        t0 = time.perf_counter()
        res = sca.SCHEMES[scheme](net, params, seed)
        wall = time.perf_counter() - t0
        rep = res.report
        feasible = bool(res.feasible)
        out.append(ResultRow(
            sweep_value=float(value), M=params.M, N=params.N, scheme=scheme, drop=drop, drop_seed=seed,
            status=res.status, feasible=feasible,
            sum_phi_uW=res.objective_sum_he * 1e6 if feasible else float("nan"),
            relaxed_sum_phi_uW=res.relaxed_objective * 1e6 if feasible else float("nan"),
            min_se_bpsHz=float(np.min(rep.se_per_iu, initial=np.inf)) if rep is not None and params.K_d else float("nan"),
            se_bpsHz=[float(v) for v in rep.se_per_iu] if rep is not None else [],
            phi_uW=[float(v) * 1e6 for v in rep.phi_per_eu] if rep is not None else [],
            iterations=res.iterations, flips=len(res.flips), violated=res.violated, wall_time=wall,
        ))
    return point_idx, drop, out


def _tasks(spec: ExperimentSpec, n_drops: int):
    for i, value in enumerate(spec.values):
        params = spec.point_params(value)
        for d in range(n_drops):
            yield value, i, d, drop_seed(spec.master_seed, i, d), params, list(spec.schemes)


def run_experiment(spec: ExperimentSpec, threads: int = 1, n_drops: int | None = None,
                   out_dir: str | Path | None = None) -> SweepResult:
    """Run every scheme on every drop of every sweep point; rows come back in a fixed order."""
    n_drops = spec.n_drops if n_drops is None else int(n_drops)
    tasks = list(_tasks(spec, n_drops))
    t0 = time.perf_counter()
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            done = list(pool.map(_run_task, tasks))
    else:
        done = [_run_task(t) for t in tasks]
    done.sort(key=lambda x: (x[0], x[1]))
    order = {s: i for i, s in enumerate(spec.schemes)}
    rows = [r for _, _, rs in done for r in sorted(rs, key=lambda r: order[r.scheme])]
    lines = [f"experiment {spec.name} sweep {spec.sweep_variable} values {spec.values} drops {n_drops} "
             f"master_seed {spec.master_seed}"]
    if spec.note:
        lines.append(f"note: {spec.note}")
    for r in rows:
        lines.append(f"value {r.sweep_value:g} drop {r.drop} seed {r.drop_seed} {r.scheme} {r.status} "
                     f"feasible {int(r.feasible)} sum_phi_uW {r.sum_phi_uW:.6g} iterations {r.iterations} "
                     f"wall_s {r.wall_time:.2f}")
    lines.append(f"total wall_s {time.perf_counter() - t0:.1f}")
    result = SweepResult(spec, rows, log_lines=lines)
    if out_dir is not None:
        result.write(out_dir)
    return result


# ----------------------------------------------------------------------------- plotting

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not math.isfinite(lo) or not math.isfinite(hi):
        return []
    if hi <= lo:
        hi = lo + (abs(lo) if lo else 1.0)
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.floor(lo / step) * step
    return [start + i * step for i in range(int(math.ceil((hi - start) / step)) + 1)]


def render_plot(result: SweepResult, path: str | Path, xlabel: str = "sweep value", title: str = "",
                width: int = 640, height: int = 420) -> Path:
    """Mean sum harvested power (uW) per scheme with stderr bars, as standalone SVG."""
    aggs = [a for a in result.aggregates if math.isfinite(a.mean)]
    if not result.aggregates:
        raise ValueError("nothing to plot: the result has no aggregates")
    xs = sorted({a.sweep_value for a in result.aggregates})
    ml, mr, mt, mb = 70, 130, 40, 55
    pw, ph = width - ml - mr, height - mt - mb
    if aggs:
        ylo = min(a.mean - a.stderr for a in aggs)
        yhi = max(a.mean + a.stderr for a in aggs)
    else:
        ylo, yhi = 0.0, 1.0
    ylo = min(0.0, ylo)
    yticks = _nice_ticks(ylo, yhi)
    if yticks:
        ylo, yhi = yticks[0], yticks[-1]
    xlo, xhi = (xs[0] - 0.5, xs[0] + 0.5) if len(xs) == 1 else (xs[0], xs[-1])

    def sx(x):
        return ml + (x - xlo) / (xhi - xlo) * pw

    def sy(y):
        return mt + ph - (y - ylo) / (yhi - ylo) * ph

    el = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
          f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
          f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>']
    if title:
        el.append(f'<text x="{ml + pw / 2:.1f}" y="22" text-anchor="middle" font-size="14">{_esc(title)}</text>')
    el.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for t in yticks:
        y = sy(t)
        el.append(f'<line x1="{ml - 4}" y1="{y:.2f}" x2="{ml}" y2="{y:.2f}" stroke="black"/>')
        el.append(f'<text x="{ml - 7}" y="{y + 4:.2f}" text-anchor="end">{t:g}</text>')
    for x in xs:
        px = sx(x)
        el.append(f'<line x1="{px:.2f}" y1="{mt + ph}" x2="{px:.2f}" y2="{mt + ph + 4}" stroke="black"/>')
        el.append(f'<text x="{px:.2f}" y="{mt + ph + 18}" text-anchor="middle">{x:g}</text>')
    el.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">{_esc(xlabel)}</text>')
    el.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
              f'transform="rotate(-90 16 {mt + ph / 2:.1f})">mean sum harvested power (uW)</text>')
    for i, scheme in enumerate(result.schemes()):
        color = _COLORS[i % len(_COLORS)]
        pts = [a for a in result.series(scheme) if math.isfinite(a.mean)]
        el.append(f'<g class="series" data-scheme="{_esc(scheme)}">')
        if len(pts) > 1:
            line = " ".join(f"{sx(a.sweep_value):.2f},{sy(a.mean):.2f}" for a in pts)
            el.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for a in pts:
            px, py = sx(a.sweep_value), sy(a.mean)
            if a.stderr > 0:
                el.append(f'<line x1="{px:.2f}" y1="{sy(a.mean - a.stderr):.2f}" x2="{px:.2f}" '
                          f'y2="{sy(a.mean + a.stderr):.2f}" stroke="{color}"/>')
            el.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="3.5" fill="{color}" '
                      f'data-x="{a.sweep_value:.6g}" data-y="{a.mean:.6g}" data-stderr="{a.stderr:.6g}"/>')
        el.append("</g>")
        ly = mt + 14 + 18 * i
        el.append(f'<line x1="{ml + pw + 10}" y1="{ly}" x2="{ml + pw + 30}" y2="{ly}" stroke="{color}" '
                  f'stroke-width="2"/>')
        el.append(f'<text x="{ml + pw + 35}" y="{ly + 4}">{_esc(scheme)}</text>')
    el.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(el) + "\n")
    return path


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;").replace('"', "&quot;")


# ----------------------------------------------------------------------------- validation

def reference_allocation(params: SystemParams, seed: int) -> Allocation:
    """Random binary modes (at least one AP per mode) with power split equally over served users."""
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, 23])
    a = sca._random_modes(params.M, params.K_d, params.L, rng)
    ei = np.repeat(a[:, None], params.K_d, axis=1) / max(params.K_d, 1)
    ee = np.repeat((1.0 - a)[:, None], params.L, axis=1) / max(params.L, 1)
    return Allocation(a, ei, ee)


def run_validation(params: SystemParams, n_trials: int, seed: int = 0, out: str | Path | None = None,
                   perfect_csi: bool = True) -> list[montecarlo.ValidationRow]:
    """Closed forms against simulation on one fixed drop; optional perfect-CSI leakage rows."""
    net = generate_network(params, seed)
    alloc = reference_allocation(params, seed)
    rows = montecarlo.compare(alloc, net, params, n_trials, base_seed=seed, config="reference")
    if perfect_csi:
        rows += [r for r in montecarlo.compare(alloc, net.with_perfect_csi(), params, n_trials, base_seed=seed,
                                               config="perfect_csi")
                 if r.quantity == "eui_max_ratio"]
    if out is not None:
        p = Path(out)
        if p.suffix != ".csv":
            p.mkdir(parents=True, exist_ok=True)
            p = p / "validation.csv"
        montecarlo.write_validation_csv(rows, p)
    return rows


# ----------------------------------------------------------------------------- oracle gap

@dataclass
class GapRow:
    drop: int
    M: int
    seed: int
    relaxed_uW: float
    rounded_uW: float
    oracle_uW: float
    rounded_feasible: bool
    oracle_feasible: bool
    wall_time: float = 0.0

    @property
    def ratio(self) -> float:
        return self.rounded_uW / self.oracle_uW if self.oracle_feasible and self.oracle_uW > 0 else float("nan")


def _gap_task(task):
    drop, params, seed = task
    net = generate_network(params, seed)
    t0 = time.perf_counter()
    relaxed = sca.sca_solve(net, params, seed)
    rounded = sca.round_modes(relaxed, net, params)
    oracle = sca.brute_force_oracle(net, params)
    ok_rel = relaxed.status in ("converged", "max_iter")
    return GapRow(drop, params.M, seed,
                  relaxed.objective_sum_he * 1e6 if ok_rel else float("nan"),
                  rounded.objective_sum_he * 1e6 if rounded.feasible else float("nan"),
                  oracle.objective_sum_he * 1e6 if oracle.feasible else float("nan"),
                  rounded.feasible, oracle.feasible, time.perf_counter() - t0)


def run_oracle_gap(base: SystemParams, m_values, n_drops: int, master_seed: int = 0, threads: int = 1,
                   out: str | Path | None = None) -> list[GapRow]:
    """Relaxed and rounded SCA against exhaustive mode search; ``M`` cycles through ``m_values``."""
    m_values = list(m_values)
    tasks = [(d, base.replace(M=int(m_values[d % len(m_values)])), drop_seed(master_seed, 0, d))
             for d in range(n_drops)]
    if threads > 1 and n_drops > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_gap_task, tasks))
    else:
        rows = [_gap_task(t) for t in tasks]
    if out is not None:
        p = Path(out)
        p.mkdir(parents=True, exist_ok=True)
        with open(p / "oracle_gap.csv", "w", newline="") as fh:
            fh.write(ORACLE_GAP_HEADER + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("drop", "M", "drop_seed", "relaxed_sum_phi_uW", "rounded_sum_phi_uW", "oracle_sum_phi_uW",
                        "rounded_feasible", "oracle_feasible", "rounded_over_oracle"))
            for r in rows:
                w.writerow((r.drop, r.M, r.seed, _fmt(r.relaxed_uW), _fmt(r.rounded_uW), _fmt(r.oracle_uW),
                            int(r.rounded_feasible), int(r.oracle_feasible), _fmt(r.ratio)))
    return rows


def default_threads() -> int:
    return max(1, min(8, os.cpu_count() or 1))
