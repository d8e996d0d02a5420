"""
The interior-point solver on small cone programs
================================================
"""

import numpy as np
import scipy.sparse as sp

from cfswipt.conic import ConicProgram, check_kkt, solve

# minimum distance from p to the unit ball, as an SOC program in (t, x)
p = np.array([3.0, 4.0])
G = np.zeros((6, 3))
G[0, 0] = -1.0
G[1:3, 1:] = -np.eye(2)
G[4:, 1:] = -np.eye(2)
h = np.r_[0.0, -p, 1.0, 0.0, 0.0]
prog = ConicProgram(c=[1.0, 0.0, 0.0], G=sp.csr_matrix(G), h=h, cones=[("soc", 3), ("soc", 3)])
sol = solve(prog)
print(sol.status, sol.objective_value, "expected", np.linalg.norm(p) - 1)
print("KKT residuals (primal, dual, gap):", check_kkt(prog, sol))

# %% entropy over the simplex needs exponential cones; the barrier path handles them
n = 4
G = np.zeros((3 * n, 2 * n))
h = np.zeros(3 * n)
for i in range(n):
    G[3 * i, i] = -1.0
    G[3 * i + 1, n + i] = -1.0
    h[3 * i + 2] = 1.0
A = np.r_[np.zeros(n), np.ones(n)][None, :]
ent = ConicProgram(c=np.r_[-np.ones(n), np.zeros(n)], G=sp.csr_matrix(G), h=h, cones=[("exp", 3)] * n,
                   A=sp.csr_matrix(A), b=[1.0])
sol = solve(ent)
print(sol.status, -sol.objective_value, "expected", np.log(n), "iterations", sol.iterations)
print(ent.dump().splitlines()[:4])
