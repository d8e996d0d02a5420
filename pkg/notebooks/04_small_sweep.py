"""
A small sweep over the number of APs
====================================

Two drops per point keep this quick; the shipped configs use 25.
"""

from pathlib import Path

from cfswipt.experiments import ExperimentSpec, run_experiment

spec = ExperimentSpec.load(Path(__file__).resolve().parents[1] / "configs" / "fig2_1nW.json")
spec.values = [8, 12]
result = run_experiment(spec, n_drops=2, out_dir="out/notebook_sweep")

for scheme in result.schemes():
    print(scheme, [(a.sweep_value, round(a.mean, 5), f"{a.n_feasible}/{a.n_drops}") for a in result.series(scheme)])
print("see out/notebook_sweep/plot.svg")
