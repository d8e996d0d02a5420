"""Independent KKT residuals for a candidate solution of a cone program."""
from __future__ import annotations

import numpy as np

from .program import ConicProgram, ConicSolution


def _cone_violation(kind: str, v: np.ndarray, dual: bool) -> float:
    if kind == "nonneg":
        return float(max(0.0, -v.min(initial=0.0)))
    if kind == "soc":
        return float(max(0.0, np.linalg.norm(v[1:]) - v[0]))
    if kind == "rsoc":
        u, w, rest = v[0], v[1], v[2:]
        neg = max(0.0, -u, -w)
        return float(max(neg, np.linalg.norm(rest) - np.sqrt(max(2.0 * u * w, 0.0))))
    # exponential cone and its dual
    a, b, c = v
    if not dual:
        if b > 0:
            with np.errstate(over="ignore"):
                return float(max(0.0, -c, b * np.exp(a / b) - c))
        return float(max(0.0, -b, a, -c))
    if a < 0:
        with np.errstate(over="ignore"):
            return float(max(0.0, -c, -a * np.exp(b / a) - np.e * c))
    return float(max(0.0, a, -b, -c))


def check_kkt(prog: ConicProgram, solution: ConicSolution) -> tuple[float, float, float]:
    """Recompute (primal, dual, complementarity) residuals from scratch.

    Each value is relative to the size of the data it is measured against.
    Cone memberships of ``s = h - G x`` and of ``z`` count towards the primal and
    dual residual respectively.
    """
    full = prog.with_bounds_as_cones()
    x = np.asarray(solution.x, dtype=float)
    y = np.zeros(full.b.size) if solution.y is None else np.asarray(solution.y, dtype=float)
    z = np.asarray(solution.z, dtype=float)
    s = full.h - full.G @ x

    bnorm = 1.0 + max(np.abs(full.b).max(initial=0.0), np.abs(full.h).max(initial=0.0))
    cnorm = 1.0 + np.abs(full.c).max(initial=0.0)
    primal = np.abs(full.A @ x - full.b).max(initial=0.0) / bnorm
    dual = np.abs(full.A.T @ y + full.G.T @ z + full.c).max(initial=0.0) / cnorm

    row = 0
    pv = dv = 0.0
    for cone in full.cones:
        sl = slice(row, row + cone.dim)
        pv = max(pv, _cone_violation(cone.kind, s[sl], dual=False))
        dv = max(dv, _cone_violation(cone.kind, z[sl], dual=True))
        row += cone.dim
    primal = max(primal, pv / bnorm)
    dual = max(dual, dv / cnorm)

    pobj = float(full.c @ x)
    dobj = float(-full.b @ y - full.h @ z)
    scale = 1.0 + min(abs(pobj), abs(dobj))
    comp = max(abs(float(s @ z)), abs(pobj - dobj)) / scale
    return float(primal), float(dual), float(comp)
