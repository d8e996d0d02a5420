"""Primal-dual interior-point solver on the homogeneous self-dual embedding.

The embedding keeps ``(x, y, z, s, tau, kappa)`` and drives the residuals of

    A^T y + G^T z + c tau = 0
    -A x + b tau          = 0
    -G x + h tau - s      = 0
    -c^T x - b^T y - h^T z - kappa = 0

to zero along the central path ``z + mu grad F(s) = 0``, ``tau kappa = mu``,
where ``F`` is the logarithmic barrier of ``K``.  Exponential cones have no
self-scaled barrier, so every cone is linearised with the primal barrier
Hessian and iterates are kept inside a proximity neighbourhood of the path.
Each iteration takes an affine predictor to pick the centring weight and then
one combined step, falling back to pure centring when the neighbourhood
line search stalls.
"""
from __future__ import annotations

import logging
import time

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from . import nt
from .cones import ExpBlock, NonnegBlock, SocBlock
from .program import ConicProgram, ConicSolution

log = logging.getLogger(__name__)

SQRT_HALF = np.sqrt(0.5)
INACCURATE_FACTOR = 100.0  # stalls within this multiple of tol are reported as optimal_inaccurate


class _Compiled:
    """Row-permuted, equilibrated copy of a program with cones grouped by type."""

    def __init__(self, prog: ConicProgram, equilibrate: bool = True):
        prog = prog.with_bounds_as_cones()
        self.n = prog.n_vars
        self.p = prog.A.shape[0]
        G = prog.G.tocsr().astype(float)
        h = prog.h.copy()

        # rotated cones -> ordinary cones via the orthogonal map
        # (u, v, w) -> ((u+v)/sqrt2, (u-v)/sqrt2, w), which is its own inverse
        m = h.size
        T = sp.identity(m, format="lil")
        groups: dict[tuple[str, int], list[int]] = {}
        row = 0
        for cone in prog.cones:
            idx = list(range(row, row + cone.dim))
            if cone.kind == "rsoc":
                u, v = idx[0], idx[1]
                T[u, u] = SQRT_HALF
                T[u, v] = SQRT_HALF
                T[v, u] = SQRT_HALF
                T[v, v] = -SQRT_HALF
                key = ("soc", cone.dim)
            elif cone.kind == "soc":
                key = ("soc", cone.dim)
            else:
                key = (cone.kind, 1 if cone.kind == "nonneg" else 3)
            groups.setdefault(key, []).append(idx)
            row += cone.dim
        T = T.tocsr()
        self.T = T
        G = (T @ G).tocsr()
        h = T @ h

        order: list[int] = []
        self.blocks: list = []
        start = 0
        nonneg = [i for idx in groups.get(("nonneg", 1), []) for i in idx]
        if nonneg:
            order += nonneg
            self.blocks.append(NonnegBlock(start, len(nonneg)))
            start += len(nonneg)
        for key in sorted(k for k in groups if k[0] == "soc"):
            rows = groups[key]
            order += [i for idx in rows for i in idx]
            self.blocks.append(SocBlock(start, key[1], len(rows)))
            start += key[1] * len(rows)
        if ("exp", 3) in groups:
            rows = groups[("exp", 3)]
            order += [i for idx in rows for i in idx]
            self.blocks.append(ExpBlock(start, len(rows)))
            start += 3 * len(rows)
        self.perm = np.array(order, dtype=int)
        self.m = len(order)
        G = G[self.perm]
        h = h[self.perm]
        A = prog.A.tocsr().astype(float)
        b = prog.b.copy()
        c = prog.c.copy()

        # Ruiz equilibration; cone blocks other than nonneg share one row scale
        self.col_scale = np.ones(self.n)
        self.row_scale_G = np.ones(self.m)
        self.row_scale_A = np.ones(self.p)
        if equilibrate and self.n:
            for _ in range(12):
                Gabs = abs(G)
                Aabs = abs(A)
                cmax = np.zeros(self.n)
                if self.m:
                    cmax = np.maximum(cmax, Gabs.max(axis=0).toarray().ravel())
                if self.p:
                    cmax = np.maximum(cmax, Aabs.max(axis=0).toarray().ravel())
                cs = 1.0 / np.sqrt(np.where(cmax > 0, cmax, 1.0))
                rg = Gabs.max(axis=1).toarray().ravel() if self.m else np.zeros(0)
                for blk in self.blocks:
                    if not isinstance(blk, NonnegBlock):
                        d = blk.d if isinstance(blk, SocBlock) else 3
                        seg = rg[blk.sl].reshape(-1, d)
                        rg[blk.sl] = np.repeat(seg.max(axis=1), d)
                rs_g = 1.0 / np.sqrt(np.where(rg > 0, rg, 1.0))
                ra = Aabs.max(axis=1).toarray().ravel() if self.p else np.zeros(0)
                rs_a = 1.0 / np.sqrt(np.where(ra > 0, ra, 1.0))
                G = sp.diags(rs_g) @ G @ sp.diags(cs)
                A = sp.diags(rs_a) @ A @ sp.diags(cs)
                self.col_scale *= cs
                self.row_scale_G *= rs_g
                self.row_scale_A *= rs_a
                if max(abs(1 - cs).max(initial=0), abs(1 - rs_g).max(initial=0), abs(1 - rs_a).max(initial=0)) < 1e-3:
                    break
        c = c * self.col_scale
        h = h * self.row_scale_G
        b = b * self.row_scale_A
        # overall data scaling keeps c and (b, h) at unit size
        self.obj_scale = 1.0 / max(np.abs(c).max(initial=0.0), 1e-12) if np.any(c) else 1.0
        rhs_max = max(np.abs(h).max(initial=0.0), np.abs(b).max(initial=0.0))
        self.rhs_scale = 1.0 / rhs_max if rhs_max > 0 else 1.0
        self.c = c * self.obj_scale
        self.h = h * self.rhs_scale
        self.b = b * self.rhs_scale
        self.G = G.tocsr()
        self.A = A.tocsr()
        self.GT = self.G.T.tocsr()
        self.AT = self.A.T.tocsr()
        self.nu = sum(blk.nu for blk in self.blocks)
        self._hess_pattern()

    def _hess_pattern(self):
        rows, cols = [], []
        for blk in self.blocks:
            if isinstance(blk, NonnegBlock):
                i = np.arange(blk.start, blk.start + blk.dim)
                rows.append(i)
                cols.append(i)
            else:
                d = blk.d if isinstance(blk, SocBlock) else 3
                base = blk.start + d * np.arange(blk.k)
                r = base[:, None, None] + np.arange(d)[None, :, None] + 0 * np.arange(d)[None, None, :]
                cc = base[:, None, None] + 0 * np.arange(d)[None, :, None] + np.arange(d)[None, None, :]
                rows.append(r.ravel())
                cols.append(cc.ravel())
        self.h_rows = np.concatenate(rows) if rows else np.zeros(0, dtype=int)
        self.h_cols = np.concatenate(cols) if cols else np.zeros(0, dtype=int)

    def hessian(self, s: np.ndarray) -> sp.csr_matrix:
        data = [np.ravel(blk.hess_matrices(s[blk.sl])) for blk in self.blocks]
        vals = np.concatenate(data) if data else np.zeros(0)
        return sp.csr_matrix((vals, (self.h_rows, self.h_cols)), shape=(self.m, self.m))

    def grad(self, s):
        g = np.empty(self.m)
        for blk in self.blocks:
            g[blk.sl] = blk.grad(s[blk.sl])
        return g

    def central(self):
        s = np.empty(self.m)
        for blk in self.blocks:
            s[blk.sl] = blk.central()
        return s

    def in_cones(self, s, z) -> bool:
        return all(blk.in_primal(s[blk.sl]) and blk.in_dual(z[blk.sl]) for blk in self.blocks)

    def max_prox(self, s, z, mu) -> float:
        out = 0.0
        for blk in self.blocks:
            p = blk.prox(s[blk.sl], z[blk.sl], mu)
            if p.size:
                out = max(out, float(np.max(p)))
        return out

    def max_step(self, v, dv) -> float:
        return min((blk.max_step(v[blk.sl], dv[blk.sl]) for blk in self.blocks), default=np.inf)

    def unscale(self, x, y, z, s):
        x0 = self.col_scale * x / self.rhs_scale
        y0 = self.row_scale_A * y / self.obj_scale
        z0 = self.row_scale_G * z / self.obj_scale
        s0 = s / self.row_scale_G / self.rhs_scale
        # undo the row permutation and the rotated-cone map
        z_full = np.empty(self.m)
        s_full = np.empty(self.m)
        z_full[self.perm] = z0
        s_full[self.perm] = s0
        return x0, y0, self.T @ z_full, self.T @ s_full


def _residual_norms(prog: ConicProgram, x, y, z, s):
    """Relative primal / dual residuals and gap of a candidate in original data."""
    pr = np.concatenate([prog.A @ x - prog.b, prog.G @ x + s - prog.h])
    dr = prog.A.T @ y + prog.G.T @ z + prog.c
    pres = _inf(pr) / (1.0 + max(np.abs(prog.b).max(initial=0), np.abs(prog.h).max(initial=0)))
    dres = _inf(dr) / (1.0 + np.abs(prog.c).max(initial=0))
    pobj = float(prog.c @ x)
    dobj = float(-prog.b @ y - prog.h @ z)
    gap = abs(pobj - dobj) / (1.0 + min(abs(pobj), abs(dobj)))
    return pres, dres, gap, pobj


def solve(
    prog: ConicProgram,
    tol: float = 1e-8,
    max_iter: int = 200,
    equilibrate: bool = True,
    nbhd: float = 0.9,
    verbose: bool = False,
    method: str = "auto",
) -> ConicSolution:
    """Solve ``prog``; see :class:`~cfswipt.conic.program.ConicSolution` for statuses.

    ``method`` is ``"nt"`` (symmetric cones only), ``"barrier"`` or ``"auto"``,
    which picks NT scaling unless an exponential cone is present.
    """
    t0 = time.perf_counter()
    full = prog.with_bounds_as_cones()
    C = _Compiled(prog, equilibrate=equilibrate)
    n, p, m = C.n, C.p, C.m
    A, AT, G, GT, b, c, h = C.A, C.AT, C.G, C.GT, C.b, C.c, C.h

    if method == "auto":
        method = "barrier" if any(isinstance(blk, ExpBlock) for blk in C.blocks) else "nt"
    if method == "nt":
        return _solve_nt(C, full, tol, max_iter, verbose, t0)

    x = np.zeros(n)
    y = np.zeros(p)
    s = C.central()
    z = s.copy() if m else np.zeros(0)
    # central points satisfy z = -grad F(s) with mu = 1
    z = -C.grad(s) if m else z
    tau = kappa = 1.0
    nu1 = C.nu + 1

    best = None
    status = "max_iter"
    it = 0
    stall = 0
    prev_mu = np.inf

    for it in range(max_iter + 1):
        mu = (s @ z + tau * kappa) / nu1
        rx = AT @ y + GT @ z + c * tau
        ry = -(A @ x) + b * tau
        rz = -(G @ x) + h * tau - s
        rt = -(c @ x) - (b @ y) - (h @ z) - kappa

        merit, found = _check(C, full, x, y, z, s, tau, kappa, tol, verbose, it, mu)
        if best is None or merit < best[0]:
            best = (merit, x.copy(), y.copy(), z.copy(), s.copy(), tau, kappa)
        if found:
            status = found
            break
        if it == max_iter:
            status = "max_iter"
            break
        if mu < 1e-300 or not np.isfinite(mu):
            status = "numerical"
            break

        # Newton system at the current point
        Hs = C.hessian(s) * mu if m else sp.csr_matrix((0, 0))
        HG = (Hs @ G).tocsr()
        Hh = Hs @ h
        K = np.zeros((n + p + 1, n + p + 1))
        K[:n, :n] = (GT @ HG).toarray()
        if p:
            K[:n, n:n + p] = AT.toarray()
            K[n:n + p, :n] = -A.toarray()
            K[n:n + p, n + p] = b
            K[n + p, n:n + p] = -b
        GtHh = GT @ Hh
        K[:n, n + p] = c - GtHh
        K[n + p, :n] = -(c + GtHh)
        K[n + p, n + p] = h @ Hh + kappa / tau
        reg = 1e-14 * max(1.0, np.abs(np.diag(K)).max(initial=0.0))
        Kreg = K.copy()
        Kreg[np.diag_indices(n)] += reg
        if p:
            Kreg[np.arange(n, n + p), np.arange(n, n + p)] -= reg
        try:
            with np.errstate(all="ignore"):
                lu = la.lu_factor(Kreg, check_finite=True)
        except (ValueError, la.LinAlgError):
            status = "numerical"
            break

        def direction(q1, q2, q3, q4, q5, q6):
            t5 = q5 + Hs @ q3
            rhs = np.concatenate([q1 - GT @ t5, q2, [q4 + h @ t5 + q6 / tau]])
            sol = la.lu_solve(lu, rhs)
            for _ in range(2):  # iterative refinement against the unregularised matrix
                res = rhs - K @ sol
                if _inf(res) <= 1e-15 * (1 + _inf(rhs)):
                    break
                sol = sol + la.lu_solve(lu, res)
            dx, dy, dtau = sol[:n], sol[n:n + p], sol[n + p]
            ds = -(G @ dx) + h * dtau - q3
            dz = q5 - Hs @ ds
            dkap = (q6 - kappa * dtau) / tau
            return dx, dy, dz, ds, dtau, dkap

        g = C.grad(s) if m else np.zeros(0)
        # affine-scaling predictor
        d_aff = direction(-rx, -ry, -rz, -rt, -z, -tau * kappa)
        a_aff = _max_step(C, s, z, tau, kappa, d_aff)
        sigma = min(1.0, max(1e-3, (1.0 - min(a_aff, 1.0)) ** 3))
        if not np.all(np.isfinite(d_aff[0])):
            status = "numerical"
            break

        stepped = False
        for sig in (sigma, max(sigma, 0.3), 1.0):
            q = 1.0 - sig
            d = direction(-q * rx, -q * ry, -q * rz, -q * rt, -z - sig * mu * g, -tau * kappa + sig * mu)
            amax = _max_step(C, s, z, tau, kappa, d)
            alpha = min(1.0, 0.99 * amax)
            while alpha > 1e-10:
                cand = _advance(x, y, z, s, tau, kappa, d, alpha)
                if _in_nbhd(C, cand, nu1, nbhd):
                    break
                alpha *= 0.7
            else:
                continue
            x, y, z, s, tau, kappa = cand
            stepped = True
            break
        if not stepped:
            status = "numerical"
            break
        # rescale the homogeneous point to keep tau + kappa near 1
        scale = 1.0 / max(tau + kappa, 1e-300)
        if scale > 1e6 or scale < 1e-6:
            x, y, z, s, tau, kappa = (v * scale for v in (x, y, z, s, tau, kappa))
        new_mu = (s @ z + tau * kappa) / nu1
        stall = stall + 1 if new_mu > 0.99 * prev_mu else 0
        prev_mu = new_mu
        if stall > 15:
            status = "numerical"
            break

    return _finish(C, full, status, best, (x, y, z, s, tau, kappa), tol, it, t0)


def _solve_nt(C, full, tol, max_iter, verbose, t0):
    """Mehrotra predictor-corrector on the embedding with NT scaling."""
    n, p, m = C.n, C.p, C.m
    A, AT, G, GT, b, c, h = C.A, C.AT, C.G, C.GT, C.b, C.c, C.h
    blocks = C.blocks
    e = nt.identity(blocks, m)
    nu1 = nt.degree(blocks) + 1
    x, y = np.zeros(n), np.zeros(p)
    s, z = e.copy(), e.copy()
    tau = kappa = 1.0
    best = None
    status = "max_iter"
    it = 0
    stall = 0
    prev_merit = np.inf
    for it in range(max_iter + 1):
        mu = (s @ z + tau * kappa) / nu1
        merit, found = _check(C, full, x, y, z, s, tau, kappa, tol, verbose, it, mu)
        if best is None or merit < best[0]:
            best = (merit, x.copy(), y.copy(), z.copy(), s.copy(), tau, kappa)
        if found:
            status = found
            break
        if it == max_iter:
            break
        stall = stall + 1 if merit > 0.95 * prev_merit else 0
        prev_merit = min(prev_merit, merit)
        if stall > 10 or not np.isfinite(mu) or mu < 1e-300:
            status = "numerical"
            break
        rx = AT @ y + GT @ z + c * tau
        ry = -(A @ x) + b * tau
        rz = -(G @ x) + h * tau - s
        rt = -(c @ x) - (b @ y) - (h @ z) - kappa
        try:
            with np.errstate(all="ignore"):
                sc = nt._Scaling(blocks, s, z)
                kkt = nt.KktSolver(A, G, sc)
                u2 = kkt.solve(-c, b, h)
        except (ValueError, la.LinAlgError, FloatingPointError):
            status = "numerical"
            break
        lam = sc.lam

        def direction(q, ds_rhs, dk_rhs):
            # ds_rhs is the complementarity target lam o (W dz + W^-T ds)
            v = nt.jordan_div(blocks, lam, ds_rhs)
            u1 = kkt.solve(-q * rx, q * ry, q * rz - sc.W.T @ v)
            den = -(c @ u2[0]) - (b @ u2[1]) - (h @ u2[2]) + kappa / tau
            num = -q * rt + dk_rhs / tau + c @ u1[0] + b @ u1[1] + h @ u1[2]
            dtau = num / den
            dx = u1[0] + dtau * u2[0]
            dy = u1[1] + dtau * u2[1]
            dz = u1[2] + dtau * u2[2]
            ds = sc.W.T @ (v - sc.W @ dz)
            dkap = (dk_rhs - kappa * dtau) / tau
            return dx, dy, dz, ds, dtau, dkap

        def step_len(d):
            dx, dy, dz, ds, dtau, dkap = d
            a = min(nt.max_step(blocks, s, ds), nt.max_step(blocks, z, dz))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkap < 0:
                a = min(a, -kappa / dkap)
            return a

        try:
            with np.errstate(all="ignore"):
                d_aff = direction(1.0, -nt.jordan_prod(blocks, lam, lam), -tau * kappa)
                a_aff = min(1.0, step_len(d_aff))
                sigma = (1.0 - a_aff) ** 3
                # second-order correction in the scaled variables
                ws = sc.Wi.T @ d_aff[3]
                wz = sc.W @ d_aff[2]
                corr = nt.jordan_prod(blocks, ws, wz)
                d = direction(1.0 - sigma,
                              -nt.jordan_prod(blocks, lam, lam) - corr + sigma * mu * e,
                              -tau * kappa - d_aff[4] * d_aff[5] + sigma * mu)
        except (ValueError, la.LinAlgError):
            status = "numerical"
            break
        if not all(np.all(np.isfinite(v)) for v in d[:4]) or not np.isfinite(d[4]):
            status = "numerical"
            break
        alpha = min(1.0, 0.99 * step_len(d))
        x, y, z, s, tau, kappa = _advance(x, y, z, s, tau, kappa, d, alpha)
        scale = 1.0 / max(tau + kappa, 1e-300)
        if scale > 1e6 or scale < 1e-6:
            x, y, z, s, tau, kappa = (v * scale for v in (x, y, z, s, tau, kappa))

    return _finish(C, full, status, best, (x, y, z, s, tau, kappa), tol, it, t0)


def _check(C, full, x, y, z, s, tau, kappa, tol, verbose, it, mu):
    """Merit of the current point and a terminal status, if one is reached."""
    A, AT, G, GT, b, c, h = C.A, C.AT, C.G, C.GT, C.b, C.c, C.h
    # convergence in the original data
    xx, yy, zz, ss = C.unscale(x / tau, y / tau, z / tau, s / tau)
    pres, dres, gap, pobj = _residual_norms(full, xx, yy, zz, ss)
    if verbose:
        log.info("it %3d mu %.2e tau %.2e kap %.2e pres %.1e dres %.1e gap %.1e obj %.8g",
                 it, mu, tau, kappa, pres, dres, gap, pobj)
    merit = max(pres, dres, gap)
    if pres <= tol and dres <= tol and gap <= tol:
        return merit, "optimal"
    # infeasibility certificates, normalised by the certificate size
    bz = b @ y + h @ z
    if bz < 0:
        nrm = _inf(AT @ y + GT @ z) / -bz
        if nrm <= tol * max(1.0, np.abs(c).max(initial=0)) and tau < kappa:
            return merit, "primal_infeasible"
    cx = c @ x
    if cx < 0:
        nrm = max(_inf(A @ x), _inf(G @ x + s)) / -cx
        if nrm <= tol * max(1.0, np.abs(h).max(initial=0), np.abs(b).max(initial=0)) and tau < kappa:
            return merit, "dual_infeasible"
    return merit, None


def _finish(C, full, status, best, last, tol, it, t0):
    x, y, z, s, tau, kappa = last
    if status in ("primal_infeasible", "dual_infeasible"):
        # return the certificate: for primal infeasibility (y, z) normalised so b'y + h'z = -1
        xx, yy, zz, ss = C.unscale(x, y, z, s)
        if status == "primal_infeasible":
            k = -(full.b @ yy + full.h @ zz)
            yy, zz = yy / k, zz / k
        else:
            k = -(full.c @ xx)
            xx, ss = xx / k, ss / k
        return ConicSolution(status, xx, np.nan, np.nan, np.nan, np.nan, it, yy, zz, ss,
                             time.perf_counter() - t0)
    if status != "optimal" and best is not None:
        merit, x, y, z, s, tau, kappa = best
        if status in ("numerical", "max_iter") and merit <= INACCURATE_FACTOR * tol:
            status = "optimal_inaccurate"
    xx, yy, zz, ss = C.unscale(x / tau, y / tau, z / tau, s / tau)
    pres, dres, gap, pobj = _residual_norms(full, xx, yy, zz, ss)
    return ConicSolution(status, xx, pobj, pres, dres, gap, it, yy, zz, ss, time.perf_counter() - t0)


def _inf(v) -> float:
    return float(np.abs(v).max(initial=0.0))


def _advance(x, y, z, s, tau, kappa, d, a):
    dx, dy, dz, ds, dtau, dkap = d
    return x + a * dx, y + a * dy, z + a * dz, s + a * ds, tau + a * dtau, kappa + a * dkap


def _max_step(C, s, z, tau, kappa, d):
    dx, dy, dz, ds, dtau, dkap = d
    a = min(C.max_step(s, ds), _dual_max_step(C, z, dz))
    if dtau < 0:
        a = min(a, -tau / dtau)
    if dkap < 0:
        a = min(a, -kappa / dkap)
    return a


def _dual_max_step(C, z, dz):
    out = np.inf
    for blk in C.blocks:
        if isinstance(blk, ExpBlock):
            # dual exp cone: bisection on membership
            zz, dd = z[blk.sl], dz[blk.sl]
            lo, hi = 0.0, 1.0
            if blk.in_dual(zz + 1e6 * dd):
                continue
            while blk.in_dual(zz + hi * dd) and hi < 1e6:
                lo, hi = hi, 2 * hi
            for _ in range(50):
                mid = 0.5 * (lo + hi)
                if blk.in_dual(zz + mid * dd):
                    lo = mid
                else:
                    hi = mid
            out = min(out, lo)
        else:
            out = min(out, blk.max_step(z[blk.sl], dz[blk.sl]))
    return out


def _in_nbhd(C, cand, nu1, beta) -> bool:
    x, y, z, s, tau, kappa = cand
    if tau <= 0 or kappa <= 0:
        return False
    if not C.in_cones(s, z):
        return False
    mu = (s @ z + tau * kappa) / nu1
    if not (mu > 0 and np.isfinite(mu)):
        return False
    if abs(tau * kappa / mu - 1.0) > beta:
        return False
    return C.max_prox(s, z, mu) <= beta
