"""Nesterov-Todd scaled predictor-corrector for programs over symmetric cones.

Used when every cone is non-negative or second-order.  The scaling ``W``
satisfies ``W z = W^{-T} s = lam`` blockwise, so the linearised
complementarity ``lam o (W dz + W^{-T} ds) = r`` is exact in the Jordan
algebra of the cone and the step needs no neighbourhood line search.
"""
from __future__ import annotations

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .cones import NonnegBlock, SocBlock


class _Scaling:
    """Blockwise NT scaling at ``(s, z)``; stores ``W``, ``W^{-1}`` and ``lam``."""

    def __init__(self, blocks, s, z):
        self.blocks = blocks
        m = s.size
        self.lam = np.empty(m)
        w_parts, wi_parts = [], []
        for blk in blocks:
            ss, zz = s[blk.sl], z[blk.sl]
            if isinstance(blk, NonnegBlock):
                d = np.sqrt(ss / zz)
                w_parts.append(sp.diags(d))
                wi_parts.append(sp.diags(1.0 / d))
                self.lam[blk.sl] = np.sqrt(ss * zz)
                continue
            S = ss.reshape(blk.k, blk.d)
            Z = zz.reshape(blk.k, blk.d)
            Ws, Wis = [], []
            lam = np.empty_like(S)
            for i in range(blk.k):
                W, Wi = _soc_nt(S[i], Z[i])
                Ws.append(W)
                Wis.append(Wi)
                lam[i] = W @ Z[i]
            w_parts.append(sp.block_diag(Ws))
            wi_parts.append(sp.block_diag(Wis))
            self.lam[blk.sl] = lam.ravel()
        self.W = sp.block_diag(w_parts, format="csr") if w_parts else sp.csr_matrix((0, 0))
        self.Wi = sp.block_diag(wi_parts, format="csr") if wi_parts else sp.csr_matrix((0, 0))


def _soc_nt(s, z):
    d = s.size
    J = np.ones(d)
    J[1:] = -1.0
    sn = np.sqrt(max(s[0] ** 2 - s[1:] @ s[1:], 1e-300))
    zn = np.sqrt(max(z[0] ** 2 - z[1:] @ z[1:], 1e-300))
    sb, zb = s / sn, z / zn
    gamma = np.sqrt(max((1.0 + sb @ zb) / 2.0, 1e-300))
    w = (sb + J * zb) / (2.0 * gamma)
    eta = np.sqrt(sn / zn)
    Wb = np.empty((d, d))
    Wb[0, 0] = w[0]
    Wb[0, 1:] = w[1:]
    Wb[1:, 0] = w[1:]
    Wb[1:, 1:] = np.eye(d - 1) + np.outer(w[1:], w[1:]) / (1.0 + w[0])
    Wi = (J[:, None] * Wb * J[None, :]) / eta
    return eta * Wb, Wi


def jordan_prod(blocks, u, v):
    out = np.empty_like(u)
    for blk in blocks:
        a, b = u[blk.sl], v[blk.sl]
        if isinstance(blk, NonnegBlock):
            out[blk.sl] = a * b
            continue
        A, B = a.reshape(blk.k, blk.d), b.reshape(blk.k, blk.d)
        R = np.empty_like(A)
        R[:, 0] = np.sum(A * B, axis=1)
        R[:, 1:] = A[:, :1] * B[:, 1:] + B[:, :1] * A[:, 1:]
        out[blk.sl] = R.ravel()
    return out


def jordan_div(blocks, lam, v):
    """``x`` with ``lam o x = v``."""
    out = np.empty_like(v)
    for blk in blocks:
        a, b = lam[blk.sl], v[blk.sl]
        if isinstance(blk, NonnegBlock):
            out[blk.sl] = b / a
            continue
        L, V = a.reshape(blk.k, blk.d), b.reshape(blk.k, blk.d)
        det = L[:, 0] ** 2 - np.sum(L[:, 1:] ** 2, axis=1)
        x0 = (L[:, 0] * V[:, 0] - np.sum(L[:, 1:] * V[:, 1:], axis=1)) / det
        X = np.empty_like(L)
        X[:, 0] = x0
        X[:, 1:] = (V[:, 1:] - x0[:, None] * L[:, 1:]) / L[:, :1]
        out[blk.sl] = X.ravel()
    return out


def identity(blocks, m):
    e = np.zeros(m)
    for blk in blocks:
        if isinstance(blk, NonnegBlock):
            e[blk.sl] = 1.0
        else:
            e[blk.start:blk.start + blk.dim:blk.d] = 1.0
    return e


def degree(blocks) -> int:
    return sum(blk.dim if isinstance(blk, NonnegBlock) else blk.k for blk in blocks)


def max_step(blocks, v, dv) -> float:
    """Largest ``a`` keeping ``v + a dv`` in the cone (``inf`` if unbounded)."""
    out = np.inf
    for blk in blocks:
        a, d = v[blk.sl], dv[blk.sl]
        if isinstance(blk, NonnegBlock):
            neg = d < 0
            if np.any(neg):
                out = min(out, float(np.min(-a[neg] / d[neg])))
            continue
        out = min(out, SocBlock.max_step(blk, a, d))
    return out


class KktSolver:
    """Factorises ``[[G^T W^{-2} G, A^T], [A, 0]]`` once per scaling."""

    def __init__(self, A, G, scaling: _Scaling, reg: float = 1e-13):
        self.A, self.G, self.sc = A, G, scaling
        n, p = G.shape[1], A.shape[0]
        self.n, self.p = n, p
        WiG = (scaling.Wi.T @ G)  # W^{-T} G; W is symmetric
        H = (WiG.T @ WiG).toarray() if sp.issparse(WiG) else WiG.T @ WiG
        K = np.zeros((n + p, n + p))
        K[:n, :n] = H
        if p:
            Ad = A.toarray()
            K[:n, n:] = Ad.T
            K[n:, :n] = Ad
        self.K = K
        delta = reg * max(1.0, np.abs(np.diag(H)).max(initial=0.0))
        Kr = K.copy()
        Kr[np.diag_indices(n)] += delta
        if p:
            Kr[np.arange(n, n + p), np.arange(n, n + p)] -= delta
        self.lu = la.lu_factor(Kr, check_finite=True)
        self.WiG = WiG

    def _reduced(self, bx, by, bz):
        Wi = self.sc.Wi
        wbz = Wi @ bz
        rhs = np.concatenate([bx + self.WiG.T @ wbz, by])
        sol = la.lu_solve(self.lu, rhs)
        ux, uy = sol[:self.n], sol[self.n:]
        uz = Wi.T @ (self.WiG @ ux - wbz)
        return ux, uy, uz

    def solve(self, bx, by, bz, refine: int = 3):
        """``A^T uy + G^T uz = bx``, ``A ux = by``, ``G ux - W^2 uz = bz``."""
        ux, uy, uz = self._reduced(bx, by, bz)
        W = self.sc.W
        scale = 1.0 + max(np.abs(bx).max(initial=0.0), np.abs(by).max(initial=0.0), np.abs(bz).max(initial=0.0))
        for _ in range(refine):
            # residuals of the unreduced system
            r1 = bx - self.A.T @ uy - self.G.T @ uz
            r2 = by - self.A @ ux
            r3 = bz - self.G @ ux + W.T @ (W @ uz)
            if max(np.abs(r1).max(initial=0.0), np.abs(r2).max(initial=0.0),
                   np.abs(r3).max(initial=0.0)) <= 1e-15 * scale:
                break
            cx, cy, cz = self._reduced(r1, r2, r3)
            ux, uy, uz = ux + cx, uy + cy, uz + cz
        return ux, uy, uz
