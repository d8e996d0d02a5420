"""Acceptance criteria 1-9, one verdict line each.

Every criterion is checked as stated.  Where the stated harvesting target
cannot be met by any allocation, the criterion fails and the same properties
are reported at a 1 nW target as clearly labelled supplementary lines.
"""
import os
import time
from pathlib import Path

import numpy as np
import pytest

from cfswipt import montecarlo as mc
from cfswipt import sca
from cfswipt.conic import check_kkt, solve
from cfswipt.experiments import (
    ExperimentSpec,
    drop_seed,
    pooled_stderr,
    reference_allocation,
    run_experiment,
    run_oracle_gap,
)
from cfswipt.metrics import received_energy_terms
from cfswipt.network import generate_network
from cfswipt.params import load_params

from conic_cases import all_cases
from conftest import VERDICTS

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
THREADS = max(1, min(8, os.cpu_count() or 1))
DIAG_DROPS = int(os.environ.get("CFSWIPT_DIAG_DROPS", "6"))


def report(capsys, tag: str, ok: bool, detail: str) -> None:
    line = f"{tag}: {'PASS' if ok else 'FAIL'}  {detail}"
    VERDICTS.append(line)
    with capsys.disabled():
        print("\n" + line)


def note(capsys, tag: str, detail: str) -> None:
    line = f"{tag}: {detail}"
    VERDICTS.append(line)
    with capsys.disabled():
        print("\n" + line)


# ----------------------------------------------------------------------------- 1-3

@pytest.fixture(scope="module")
def reference():
    params = load_params(CONFIGS / "reference.json")
    net = generate_network(params, 0)
    alloc = reference_allocation(params, 0)
    t0 = time.perf_counter()
    rows = mc.compare(alloc, net, params, 20_000, base_seed=0)
    return params, net, alloc, rows, time.perf_counter() - t0


def test_criterion_1_se_matches_simulation(reference, capsys):
    params, _, alloc, rows, elapsed = reference
    assert alloc.is_binary and 0 < alloc.a.sum() < params.M
    err = np.array([r.rel_error for r in rows if r.quantity == "se_bpsHz"])
    ok = bool(np.all(err <= 0.02)) and elapsed <= 120.0
    report(capsys, "criterion 1", ok,
           f"per-IU SE rel. error max {err.max():.2e} (<= 2e-2), {len(err)} IUs, 2e4 trials, {elapsed:.1f} s")
    assert ok


def test_criterion_2_energy_matches_simulation(reference, capsys):
    params, net, alloc, rows, elapsed = reference
    err = np.array([r.rel_error for r in rows if r.quantity == "q_Wsym"])
    ok = bool(np.all(err <= 0.02)) and elapsed <= 120.0
    # the PMRT beam also delivers the estimation-error energy (beta - gamma) to its own EU
    miss = params.rho * np.sum((1 - alloc.a)[:, None] * alloc.eta_e * (net.beta_eu - net.gamma_eu), axis=0)
    share = float(np.max(miss / received_energy_terms(alloc, net, params)))
    report(capsys, "criterion 2", ok, f"per-EU Q rel. error max {err.max():.2e} (<= 2e-2), {len(err)} EUs, "
                                      f"2e4 trials; uncounted estimation-error energy up to {share:.2%}")
    assert ok


def test_criterion_3_perfect_csi_protects_ius(reference, capsys):
    params, net, alloc, _, _ = reference
    gains = mc.simulate_gains(alloc, net.with_perfect_csi(), params, 20_000, base_seed=0)
    worst = float(gains.leak_ratio.max())
    # energy-user interference at IUs relative to the desired-signal scale, every trial
    rel = float(np.max(np.abs(gains.e) ** 2) / np.mean(np.abs(gains.b) ** 2))
    ok = worst <= 1e-12 and rel <= 1e-12
    report(capsys, "criterion 3", ok, f"max per-trial normalised |g^H w_E|^2 {worst:.1e}, max |EUI|^2 / mean|b|^2 {rel:.1e}")
    assert ok


# ----------------------------------------------------------------------------- 4

def test_criterion_4_conic_suite(capsys):
    cases = all_cases()
    worst_kkt = worst_t = worst_obj = 0.0
    bad = []
    for case in cases:
        t0 = time.perf_counter()
        sol = solve(case.prog)
        dt = time.perf_counter() - t0
        kkt = max(check_kkt(case.prog, sol))
        gap = abs(sol.objective_value - case.optimum) / (1 + abs(case.optimum))
        worst_kkt, worst_t, worst_obj = max(worst_kkt, kkt), max(worst_t, dt), max(worst_obj, gap)
        if sol.status != "optimal" or kkt > 1e-6 or dt > 1.0 or gap > 1e-6:
            bad.append(case.name)
    ok = len(cases) >= 20 and not bad
    fams = {f: sum(c.family == f for c in cases) for f in ("lp", "soc", "exp")}
    report(capsys, "criterion 4", ok, f"{len(cases)} programs {fams}, max KKT {worst_kkt:.1e}, "
                                      f"max |obj - opt| {worst_obj:.1e}, max time {worst_t:.2f} s, failed {bad}")
    assert ok


# ----------------------------------------------------------------------------- 5

def _sca_behaviour(spec, value, n_drops):
    point = list(spec.values).index(value)
    params = spec.point_params(value)
    runs = []
    for d in range(n_drops):
        seed = drop_seed(spec.master_seed, point, d)
        net = generate_network(params, seed)
        runs.append(sca.solve_proposed(net, params, seed))
    return params, runs


def _judge_sca(params, runs):
    mono = [bool(np.all(np.diff(r.history) >= -1e-9)) for r in runs]
    worst_rel = min((float(np.min(np.diff(r.history))) / max(r.history) for r in runs if len(r.history) > 1),
                    default=0.0)
    terminated = [r.status == "converged" and r.iterations <= sca.MAX_ITER for r in runs]
    qos = []
    for r in runs:
        if r.status != "converged":
            continue
        rep = r.report
        qos.append(bool(np.all(rep.se_per_iu >= params.se_target - 1e-6)
                        and np.all(rep.phi_per_eu >= np.asarray(params.he_targets) - 1e-9)))
    ok = all(mono) and all(terminated) and all(qos)
    statuses = {s: sum(r.status == s for r in runs) for s in sorted({r.status for r in runs})}
    detail = (f"monotone {sum(mono)}/{len(runs)} (worst rel. step {worst_rel:.1e}), "
              f"converged by the rule within {sca.MAX_ITER} it. {sum(terminated)}/{len(runs)}, "
              f"QoS of converged outputs {sum(qos)}/{len(qos)}, statuses {statuses}")
    return ok, detail


def test_criterion_5_sca_behaviour(capsys):
    spec = ExperimentSpec.load(CONFIGS / "fig2.json")
    params, runs = _sca_behaviour(spec, 16, 20)
    ok, detail = _judge_sca(params, runs)
    why = {r.violated for r in runs if r.status == "infeasible"}
    report(capsys, "criterion 5", ok, f"M=16, 100 uW, 20 drops: {detail}; infeasible class {sorted(why)}")
    assert ok


def test_criterion_5_supplementary_1nW(capsys):
    spec = ExperimentSpec.load(CONFIGS / "fig2_1nW.json")
    params, runs = _sca_behaviour(spec, 16, DIAG_DROPS)
    ok, detail = _judge_sca(params, runs)
    note(capsys, "criterion 5 supplementary", f"{'holds' if ok else 'violated'} at 1 nW, M=16, {DIAG_DROPS} drops: {detail}")
    assert all(r.status != "numerical" for r in runs)


# ----------------------------------------------------------------------------- 6

def test_criterion_6_oracle_sandwich(capsys, tmp_path):
    spec = ExperimentSpec.load(CONFIGS / "oracle.json")
    t0 = time.perf_counter()
    rows = run_oracle_gap(spec.base, spec.values, spec.n_drops, spec.master_seed, threads=THREADS, out=tmp_path)
    elapsed = time.perf_counter() - t0
    feas = [r for r in rows if r.oracle_feasible]
    # objectives are compared in watts
    lower = [r.relaxed_uW * 1e-6 >= r.oracle_uW * 1e-6 - 1e-6 for r in feas]
    lower_rel = [r.relaxed_uW >= r.oracle_uW * (1 - 1e-6) for r in feas]
    ratios = np.array([r.ratio if np.isfinite(r.ratio) else 0.0 for r in feas])
    share = float(np.mean(ratios >= 0.90)) if feas else 0.0
    ok = bool(feas) and all(lower) and share >= 0.80 and elapsed <= 900.0
    q = np.percentile(ratios, [0, 10, 25, 50, 75, 100]) if feas else []
    report(capsys, "criterion 6", ok,
           f"{len(feas)}/{len(rows)} oracle-feasible drops, relaxed >= oracle - 1e-6 W on {sum(lower)}/{len(feas)}, "
           f"rounded >= 0.9 oracle on {share:.0%}, {elapsed:.0f} s")
    note(capsys, "criterion 6 supplementary",
         f"relative form relaxed >= oracle (1 - 1e-6) on {sum(lower_rel)}/{len(feas)}; rounded/oracle quantiles "
         f"(0,10,25,50,75,100%) " + " ".join(f"{v:.3f}" for v in q)
         + "; per drop " + " ".join(f"{r.ratio:.3f}" for r in feas))
    assert ok


# ----------------------------------------------------------------------------- 7, 8

def _run(name, n_drops=None, tmp=None):
    spec = ExperimentSpec.load(CONFIGS / name)
    return spec, run_experiment(spec, threads=THREADS, n_drops=n_drops, out_dir=tmp)


def _fig2_checks(spec, res):
    xs = list(spec.values)
    prop = [res.lookup(x, "proposed") for x in xs]
    b1 = [res.lookup(x, "benchmark1") for x in xs]
    b2 = [res.lookup(x, "benchmark2") for x in xs]
    means = np.array([a.mean for a in prop])
    nondecr = bool(np.all(np.isfinite(means))) and all(
        means[i + 1] >= means[i] - pooled_stderr(prop[i], prop[i + 1]) * 0 for i in range(len(xs) - 1))
    order = all(np.isfinite(p.mean) and np.isfinite(q.mean) and np.isfinite(r.mean)
                and p.mean >= q.mean - pooled_stderr(p, q) and q.mean >= r.mean - pooled_stderr(q, r)
                for p, q, r in zip(prop, b2, b1))
    g2 = float(np.mean([(p.mean - q.mean) / q.mean for p, q in zip(prop, b2)]))
    g1 = float(np.mean([(p.mean - r.mean) / r.mean for p, r in zip(prop, b1)]))
    gains = np.isfinite(g2) and np.isfinite(g1) and g2 > 0 and g1 > g2
    feas = " ".join(f"{a.n_feasible}/{a.n_drops}" for a in prop)
    detail = (f"proposed means (uW) " + " ".join(f"{m:.4g}" for m in means)
              + f" [feasible {feas}]; non-decreasing {nondecr}; ordering within 1 SE {order}; "
              f"mean gain vs b2 {g2:+.1%}, vs b1 {g1:+.1%} (b1 > b2 > 0: {gains})")
    return nondecr and order and gains, detail


def _fig3_checks(spec, res):
    xs = list(spec.values)
    prop = [res.lookup(x, "proposed") for x in xs]
    b3 = [res.lookup(x, "benchmark3") for x in xs]
    means = np.array([a.mean for a in prop])
    interior = []
    if np.all(np.isfinite(means)):
        for i in range(1, len(xs) - 1):
            if (means[i] - means[0] > pooled_stderr(prop[i], prop[0])
                    and means[i] - means[-1] > pooled_stderr(prop[i], prop[-1])):
                interior.append(xs[i])
    m3 = np.array([a.mean for a in b3])
    decr = bool(np.all(np.isfinite(m3))) and bool(np.all(np.diff(m3) <= 0))
    detail = ("proposed means (uW) " + " ".join(f"{m:.4g}" for m in means)
              + f"; interior maxima at N={interior}; benchmark3 means " + " ".join(f"{m:.4g}" for m in m3)
              + f"; benchmark3 non-increasing {decr}")
    return bool(interior) and decr, detail


def test_criterion_7_fig2_trend(capsys, tmp_path):
    spec, res = _run("fig2.json", tmp=tmp_path)
    ok, detail = _fig2_checks(spec, res)
    zero = all(a.mean_all == 0.0 for a in res.aggregates)
    report(capsys, "criterion 7", ok, f"100 uW, {spec.n_drops} drops: {detail}; every drop infeasible: {zero}")
    assert ok


def test_criterion_7_supplementary_1nW(capsys):
    spec, res = _run("fig2_1nW.json", n_drops=DIAG_DROPS)
    ok, detail = _fig2_checks(spec, res)
    note(capsys, "criterion 7 supplementary", f"{'holds' if ok else 'violated'} at 1 nW, {DIAG_DROPS} drops: {detail}")
    assert all(a.n_feasible > 0 for a in res.aggregates if a.scheme == "proposed")


def test_criterion_8_fig3_trend(capsys, tmp_path):
    spec, res = _run("fig3.json", tmp=tmp_path)
    ok, detail = _fig3_checks(spec, res)
    zero = all(a.mean_all == 0.0 for a in res.aggregates)
    report(capsys, "criterion 8", ok, f"100 uW, {spec.n_drops} drops: {detail}; every drop infeasible: {zero}")
    assert ok


def test_criterion_8_supplementary_1nW(capsys):
    spec, res = _run("fig3_1nW.json", n_drops=DIAG_DROPS)
    ok, detail = _fig3_checks(spec, res)
    note(capsys, "criterion 8 supplementary", f"{'holds' if ok else 'violated'} at 1 nW, {DIAG_DROPS} drops: {detail}")
    assert all(a.n_feasible > 0 for a in res.aggregates if a.scheme == "proposed")


# ----------------------------------------------------------------------------- 9

def test_criterion_9_reproducible(capsys, tmp_path):
    spec = ExperimentSpec.load(CONFIGS / "fig2_1nW.json")
    spec.values = [8]
    run_experiment(spec, threads=1, n_drops=2, out_dir=tmp_path / "a")
    run_experiment(spec, threads=THREADS, n_drops=2, out_dir=tmp_path / "b")
    a = (tmp_path / "a" / "results.csv").read_bytes()
    b = (tmp_path / "b" / "results.csv").read_bytes()
    ok = a == b and len(a.splitlines()) == 2 + 2 * len(spec.schemes)
    report(capsys, "criterion 9", ok, f"two runs, same master seed: results.csv byte-identical {a == b} ({len(a)} bytes)")
    assert ok
