"""Barrier oracles for the cones the interior-point solver handles.

Each block stores a contiguous slice of the slack vector and evaluates the
primal barrier gradient and Hessian for every cone it holds at once.
Rotated second-order cones are mapped onto ordinary ones before they get
here (see :mod:`cfswipt.conic.program`).
"""
from __future__ import annotations

import numpy as np

EXP_CENTRAL: np.ndarray  # filled at import, see _exp_central_point


class NonnegBlock:
    nu_per_cone = 1

    def __init__(self, start: int, dim: int):
        self.start, self.dim = start, dim
        self.sl = slice(start, start + dim)
        self.nu = dim

    def central(self) -> np.ndarray:
        return np.ones(self.dim)

    def in_primal(self, s: np.ndarray) -> bool:
        return bool(np.all(s > 0))

    in_dual = in_primal

    def grad(self, s):
        return -1.0 / s

    def hess_matrices(self, s):
        return 1.0 / s**2  # diagonal

    def prox(self, s, z, mu):
        # per-coordinate cones; infinity-norm neighbourhood
        return np.abs(s * z / mu - 1.0)

    def max_step(self, s, ds):
        neg = ds < 0
        if not np.any(neg):
            return np.inf
        return float(np.min(-s[neg] / ds[neg]))


class SocBlock:
    """``k`` second-order cones of equal dimension ``d``: ``s0 >= ||s[1:]||``."""

    nu_per_cone = 2

    def __init__(self, start: int, d: int, k: int):
        self.start, self.d, self.k = start, d, k
        self.dim = d * k
        self.sl = slice(start, start + self.dim)
        self.nu = 2 * k

    def _r(self, v):
        return v.reshape(self.k, self.d)

    def central(self):
        c = np.zeros((self.k, self.d))
        c[:, 0] = np.sqrt(2.0)
        return c.ravel()

    def _det(self, S):
        return S[:, 0] ** 2 - np.sum(S[:, 1:] ** 2, axis=1)

    def in_primal(self, s) -> bool:
        S = self._r(s)
        return bool(np.all(S[:, 0] > 0) and np.all(self._det(S) > 0))

    in_dual = in_primal

    def grad(self, s):
        S = self._r(s)
        JS = S.copy()
        JS[:, 1:] *= -1
        return (-2.0 * JS / self._det(S)[:, None]).ravel()

    def hess_matrices(self, s):
        S = self._r(s)
        det = self._det(S)
        JS = S.copy()
        JS[:, 1:] *= -1
        J = -np.eye(self.d)
        J[0, 0] = 1.0
        H = 4.0 * JS[:, :, None] * JS[:, None, :] / det[:, None, None] ** 2
        H -= 2.0 * J[None] / det[:, None, None]
        return H

    def prox(self, s, z, mu):
        S, Z = self._r(s), self._r(z)
        v = Z / mu + self._r(self.grad(s))
        # inverse Hessian of -ln(s^T J s) is s s^T - (det / 2) J
        det = self._det(S)
        Jv = v.copy()
        Jv[:, 1:] *= -1
        sv = np.sum(S * v, axis=1)
        Hinv_v = S * sv[:, None] - 0.5 * det[:, None] * Jv
        q = np.sum(v * Hinv_v, axis=1)
        return np.sqrt(np.clip(q, 0.0, None))

    def max_step(self, s, ds):
        # smallest positive root of det(s + a ds) = 0, vectorised over cones
        S, D = self._r(s), self._r(ds)
        qa = D[:, 0] ** 2 - np.sum(D[:, 1:] ** 2, axis=1)
        qb = 2.0 * (S[:, 0] * D[:, 0] - np.sum(S[:, 1:] * D[:, 1:], axis=1))
        qc = self._det(S)
        disc = qb**2 - 4.0 * qa * qc
        out = np.full(self.k, np.inf)
        real = disc >= 0
        sq = np.sqrt(np.where(real, disc, 0.0))
        qq = -0.5 * (qb + np.where(qb >= 0, sq, -sq))
        with np.errstate(divide="ignore", invalid="ignore"):
            r1 = np.where(real & (qa != 0), qq / qa, np.inf)
            r2 = np.where(real & (qq != 0), qc / qq, np.inf)
        for r in (r1, r2):
            out = np.where((r > 0) & (r < out), r, out)
        with np.errstate(divide="ignore", invalid="ignore"):
            r0 = np.where(D[:, 0] < 0, -S[:, 0] / D[:, 0], np.inf)
        out = np.minimum(out, r0)
        return float(np.min(out)) if self.k else np.inf


class ExpBlock:
    """``k`` exponential cones ``{(x, y, z): y > 0, y exp(x/y) <= z}``."""

    nu_per_cone = 3

    def __init__(self, start: int, k: int):
        self.start, self.k = start, k
        self.dim = 3 * k
        self.sl = slice(start, start + self.dim)
        self.nu = 3 * k

    def central(self):
        return np.tile(EXP_CENTRAL, self.k)

    @staticmethod
    def _psi(S):
        x, y, z = S[:, 0], S[:, 1], S[:, 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            return y * np.log(z / y) - x

    def in_primal(self, s) -> bool:
        S = s.reshape(self.k, 3)
        if not (np.all(S[:, 1] > 0) and np.all(S[:, 2] > 0)):
            return False
        return bool(np.all(self._psi(S) > 0))

    def in_dual(self, z) -> bool:
        Z = z.reshape(self.k, 3)
        u, v, w = Z[:, 0], Z[:, 1], Z[:, 2]
        if not (np.all(u < 0) and np.all(w > 0)):
            return False
        return bool(np.all(np.log(-u) + v / u < 1.0 + np.log(w)))

    def grad(self, s):
        S = s.reshape(self.k, 3)
        x, y, z = S.T
        psi = self._psi(S)
        g = np.empty_like(S)
        g[:, 0] = 1.0 / psi
        g[:, 1] = -(np.log(z / y) - 1.0) / psi - 1.0 / y
        g[:, 2] = -(y / z) / psi - 1.0 / z
        return g.ravel()

    def hess_matrices(self, s):
        S = s.reshape(self.k, 3)
        x, y, z = S.T
        psi = self._psi(S)
        dpsi = np.stack([-np.ones_like(x), np.log(z / y) - 1.0, y / z], axis=1)
        H = dpsi[:, :, None] * dpsi[:, None, :] / psi[:, None, None] ** 2
        d2 = np.zeros((self.k, 3, 3))
        d2[:, 1, 1] = -1.0 / y
        d2[:, 1, 2] = d2[:, 2, 1] = 1.0 / z
        d2[:, 2, 2] = -y / z**2
        H -= d2 / psi[:, None, None]
        H[:, 1, 1] += 1.0 / y**2
        H[:, 2, 2] += 1.0 / z**2
        return H

    def prox(self, s, z, mu):
        v = (z / mu + self.grad(s)).reshape(self.k, 3)
        H = self.hess_matrices(s)
        try:
            w = np.linalg.solve(H, v[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            return np.full(self.k, np.inf)
        q = np.sum(v * w, axis=1)
        return np.sqrt(np.where(np.isfinite(q), np.clip(q, 0.0, None), np.inf))

    def max_step(self, s, ds):
        # vectorised bisection on membership; feasible steps form an interval
        S, D = s.reshape(self.k, 3), ds.reshape(self.k, 3)
        if self.k == 0:
            return np.inf

        def inside(a):
            P = S + a[:, None] * D
            ok = (P[:, 1] > 0) & (P[:, 2] > 0)
            with np.errstate(divide="ignore", invalid="ignore"):
                psi = P[:, 1] * np.log(P[:, 2] / P[:, 1]) - P[:, 0]
            return ok & (psi > 0)

        far = inside(np.full(self.k, 1e6))
        lo = np.zeros(self.k)
        hi = np.ones(self.k)
        grow = inside(hi) & ~far
        while np.any(grow):
            lo = np.where(grow, hi, lo)
            hi = np.where(grow, hi * 2.0, hi)
            grow = inside(hi) & ~far & (hi < 1e6)
        for _ in range(55):
            mid = 0.5 * (lo + hi)
            ok = inside(mid)
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        lo = np.where(far, np.inf, lo)
        return float(np.min(lo))


def _exp_central_point() -> np.ndarray:
    # s = -grad F(s) for F(x,y,z) = -ln(y ln(z/y) - x) - ln y - ln z,
    # i.e. the minimiser of F(s) + |s|^2 / 2; Newton from a nearby start.
    blk = ExpBlock(0, 1)
    s = np.array([-1.05, 0.556, 1.259])
    for _ in range(50):
        g = s + blk.grad(s)
        H = np.eye(3) + blk.hess_matrices(s)[0]
        step = np.linalg.solve(H, g)
        s = s - step
        if np.linalg.norm(step) < 1e-15:
            break
    return s


EXP_CENTRAL = _exp_central_point()
