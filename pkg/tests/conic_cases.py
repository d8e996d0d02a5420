"""Cone programs with optima known in closed form or by vertex enumeration."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from cfswipt.conic import ConicProgram


@dataclass
class Case:
    name: str
    prog: ConicProgram
    optimum: float
    family: str


def _prog(c, G, h, cones, A=None, b=None, bounds=None):
    G = sp.csr_matrix(np.atleast_2d(np.asarray(G, dtype=float)))
    if A is not None:
        A = sp.csr_matrix(np.atleast_2d(np.asarray(A, dtype=float)))
        b = np.atleast_1d(np.asarray(b, dtype=float))
    return ConicProgram(c=np.asarray(c, float), G=G, h=np.asarray(h, float), cones=cones, A=A, b=b,
                        var_bounds=bounds)


def _vertex_optimum(c, Gin, hin):
    """Brute-force LP optimum over all vertices of ``Gin x <= hin``."""
    n = c.size
    best = np.inf
    for rows in itertools.combinations(range(len(hin)), n):
        M = Gin[list(rows)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        v = np.linalg.solve(M, hin[list(rows)])
        if np.all(Gin @ v <= hin + 1e-9):
            best = min(best, float(c @ v))
    return best


def lp_cases():
    out = []
    # two-constraint polytope in the positive quadrant, vertex (1.6, 1.2)
    G = [[1, 2], [3, 1], [-1, 0], [0, -1]]
    out.append(Case("lp_quadrant_vertex", _prog([-1, -1], G, [4, 6, 0, 0], [("nonneg", 4)]), -2.8, "lp"))
    # simplex with an equality row
    out.append(Case("lp_simplex_equality",
                    _prog([2, 3, 5], -np.eye(3), np.zeros(3), [("nonneg", 3)], A=[[1, 1, 1]], b=[1]), 2.0, "lp"))
    # pure box through variable bounds
    c = np.array([1.0, -2.0, 0.5])
    out.append(Case("lp_box_bounds", _prog(c, np.zeros((1, 3)), [1.0], [("nonneg", 1)],
                                           bounds=(-np.ones(3), 2 * np.ones(3))),
                    float(np.sum(np.where(c > 0, -c, 2 * c))), "lp"))
    # degenerate vertex: three constraints active at the origin in 2-D
    G = [[-1, 0], [0, -1], [-1, -1], [1, 1]]
    out.append(Case("lp_degenerate_vertex", _prog([1, 1], G, [0, 0, 0, 3], [("nonneg", 4)]), 0.0, "lp"))
    rng = np.random.default_rng(11)
    for k in range(5):
        n = 3
        Gin = np.vstack([rng.normal(size=(6, n)), np.eye(n), -np.eye(n)])
        hin = np.concatenate([rng.uniform(0.5, 2.0, 6), 5 * np.ones(n), 5 * np.ones(n)])
        c = rng.normal(size=n)
        out.append(Case(f"lp_random_{k}", _prog(c, Gin, hin, [("nonneg", len(hin))]),
                        _vertex_optimum(c, Gin, hin), "lp"))
    return out


def soc_cases():
    out = []
    c = np.array([3.0, -4.0])
    # min c.x over the unit ball: (t=1, x) in soc with t fixed through h
    G = np.vstack([np.zeros(2), -np.eye(2)])
    out.append(Case("soc_unit_ball", _prog(c, G, [1, 0, 0], [("soc", 3)]), -5.0, "soc"))
    # ellipsoid |Lx| <= 1
    L = np.array([[2.0, 0.5], [0.0, 1.0]])
    G = np.vstack([np.zeros(2), -L])
    out.append(Case("soc_ellipsoid", _prog(c, G, [1, 0, 0], [("soc", 3)]),
                    -float(np.linalg.norm(np.linalg.solve(L.T, c))), "soc"))
    # distance from a point to a hyperplane: min t, |x - p| <= t, a.x = b
    rng = np.random.default_rng(5)
    for k in range(3):
        n = 3
        p = rng.normal(size=n)
        a = rng.normal(size=n)
        b = 1.0
        G = np.zeros((n + 1, n + 1))
        G[0, 0] = -1.0
        G[1:, 1:] = -np.eye(n)
        h = np.concatenate([[0.0], -p])
        A = np.concatenate([[0.0], a])[None, :]
        out.append(Case(f"soc_hyperplane_distance_{k}",
                        _prog(np.eye(n + 1)[0], G, h, [("soc", n + 1)], A=A, b=[b]),
                        abs(a @ p - b) / np.linalg.norm(a), "soc"))
    # rotated cone: min t with 2 t * 1 >= x^2 and x = 3
    G = np.array([[-1.0, 0.0], [0.0, 0.0], [0.0, -1.0]])
    out.append(Case("rsoc_square_epigraph", _prog([1, 0], G, [0, 1, 0], [("rsoc", 3)], A=[[0, 1]], b=[3]),
                    4.5, "soc"))
    # hyperbola: min x + y with x y >= 1, i.e. (x, y, sqrt 2) in rsoc
    G = np.array([[-1.0, 0.0], [0.0, -1.0], [0.0, 0.0]])
    out.append(Case("rsoc_hyperbola", _prog([1, 1], G, [0, 0, np.sqrt(2)], [("rsoc", 3)]), 2.0, "soc"))
    # minimum norm point of a.x = 1 through an rsoc epigraph of |x|^2
    a = np.array([1.0, 2.0, 2.0])
    G = np.zeros((5, 4))
    G[0, 0] = -1.0
    G[2:, 1:] = -np.eye(3)
    h = np.array([0.0, 0.5, 0, 0, 0])
    out.append(Case("rsoc_min_norm", _prog([1, 0, 0, 0], G, h, [("rsoc", 5)], A=[np.r_[0.0, a]], b=[1]),
                    1.0 / (a @ a), "soc"))
    # geometric mean: max sqrt(x y) with x + y = 2 -> 1
    G = np.array([[-1.0, 0, 0], [0, -1.0, 0], [0, 0, -np.sqrt(2)]])
    out.append(Case("rsoc_geometric_mean", _prog([0, 0, -1], G, [0, 0, 0], [("rsoc", 3)], A=[[1, 1, 0]], b=[2]),
                    -1.0, "soc"))
    return out


def exp_cases():
    out = []
    # min z with (1, 1, z) in K_exp -> e
    out.append(Case("exp_boundary_e", _prog([1], [[0], [0], [-1]], [1, 1, 0], [("exp", 3)]), np.e, "exp"))
    # max x with (x, 1, 2) in K_exp -> ln 2
    out.append(Case("exp_log_two", _prog([-1], [[-1], [0], [0]], [0, 1, 2], [("exp", 3)]), -np.log(2), "exp"))
    # (2, y, z): min z + y, z >= y e^{2/y}; optimum where e^{2/y}(1 - 2/y) = -1
    from scipy.optimize import brentq
    y = brentq(lambda y: np.exp(2 / y) * (1 - 2 / y) + 1, 0.5, 10)
    out.append(Case("exp_perspective", _prog([1, 1], [[0, 0], [-1, 0], [0, -1]], [2, 0, 0], [("exp", 3)]),
                    y + y * np.exp(2 / y), "exp"))
    # cosh: min e^x + e^-x -> 2
    G = np.zeros((6, 3))
    G[0, 0], G[2, 1], G[3, 0], G[5, 2] = -1, -1, 1, -1
    out.append(Case("exp_cosh", _prog([0, 1, 1], G, [0, 1, 0, 0, 1, 0], [("exp", 3), ("exp", 3)]), 2.0, "exp"))
    # entropy over the 4-simplex: max sum -p log p -> ln 4; variables (t, p)
    n = 4
    G = np.zeros((3 * n, 2 * n))
    h = np.zeros(3 * n)
    for i in range(n):
        G[3 * i, i] = -1.0
        G[3 * i + 1, n + i] = -1.0
        h[3 * i + 2] = 1.0
    A = np.r_[np.zeros(n), np.ones(n)][None, :]
    out.append(Case("exp_entropy_simplex", _prog(np.r_[-np.ones(n), np.zeros(n)], G, h, [("exp", 3)] * n,
                                                 A=A, b=[1]), -np.log(n), "exp"))
    # log-sum-exp of (0, ln 3) -> ln 4; variables (t, u1, u2)
    x = np.array([0.0, np.log(3)])
    G = np.zeros((7, 3))
    h = np.zeros(7)
    for i in range(2):
        G[3 * i, 0] = 1.0
        h[3 * i] = x[i]
        h[3 * i + 1] = 1.0
        G[3 * i + 2, 1 + i] = -1.0
    G[6] = [0, 1, 1]
    h[6] = 1.0
    out.append(Case("exp_log_sum_exp", _prog([1, 0, 0], G, h, [("exp", 3), ("exp", 3), ("nonneg", 1)]),
                    np.log(4), "exp"))
    return out


def all_cases():
    return lp_cases() + soc_cases() + exp_cases()
