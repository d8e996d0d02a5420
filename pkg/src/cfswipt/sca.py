"""Joint AP mode selection and power control by successive convex approximation.

Every subproblem is a cone program over ``(a, eta_i, eta_e, delta)`` plus
epigraph auxiliaries.  ``delta`` is the harvested-energy variable expressed in
received-energy units, ``omega = phi*Omega + kappa*delta``, so that the
objective, the bounds and the energy constraints all live on comparable scales.
"""
from __future__ import annotations

import csv
import io
import itertools
import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .conic import Cone, ConicProgram, solve
from .metrics import (
    Allocation,
    EhModel,
    MetricsReport,
    evaluate,
    evaluate_benchmark3,
    harvested_energy_phi,
    received_energy_terms,
    benchmark3_energy_terms,
)
from .network import NetworkRealization
from .params import SystemParams

log = logging.getLogger(__name__)

MAX_ITER = 100
EPS_PHI_REL = 1e-6
PHASE1_ACCEPT = 1e-7
PHASE1_MARGIN = 1e-6
BRUTE_FORCE_MAX_M = 12
SOLVER_TOL = 1e-8
_SE_TOL = 1e-6
_HE_RTOL = 1e-6


# --------------------------------------------------------------------------- EH scales

@dataclass(frozen=True)
class _EhScales:
    """Constants linking ``delta`` (noise units of Q) to harvested watts."""

    c0: float  # (tau_c - tau) sigma^2 xi
    omega: float  # logistic floor constant
    kappa: float  # watts of omega per unit delta
    phi: float
    d_max: float

    @classmethod
    def of(cls, params: SystemParams, time_share: float = 1.0) -> "_EhScales":
        m = EhModel.from_params(params)
        c0 = time_share * params.dl_symbols * params.noise_power * params.xi
        om = m.omega
        kappa = c0 * params.phi * om * (1.0 - om)
        eps_phi = EPS_PHI_REL * params.phi
        return cls(c0, om, kappa, params.phi, (params.phi * (1.0 - om) - eps_phi) / kappa)

    @property
    def c1(self) -> float:
        return self.omega * self.c0

    def F(self, d):
        """Received energy (noise units) needed for excess ``delta``; exact inverse logistic."""
        d = np.asarray(d, dtype=float)
        return (-np.log1p(-self.c1 * d) + np.log1p((1.0 - self.omega) * self.c0 * d)) / self.c0

    def concave_part(self, d):
        return np.log1p((1.0 - self.omega) * self.c0 * np.asarray(d, dtype=float)) / self.c0

    def concave_slope(self, d):
        return (1.0 - self.omega) / (1.0 + (1.0 - self.omega) * self.c0 * np.asarray(d, dtype=float))

    def log_gap(self, u):
        """``h(u) = u + u^2/(2(1-u)) + log(1-u)``, convex on ``[0, 1)``; series form for small ``u``."""
        u = np.asarray(u, dtype=float)
        n = np.arange(3, 16)
        series = np.sum(u[..., None] ** n * (0.5 - 1.0 / n), axis=-1)
        direct = u + u**2 / (2.0 * (1.0 - u)) + np.log1p(-u)
        return np.where(u < 1e-2, series, direct)

    @staticmethod
    def log_gap_slope(u):
        u = np.asarray(u, dtype=float)
        return u**2 / (2.0 * (1.0 - u) ** 2)

    def delta_reaching(self, t):
        """Largest ``delta`` (capped at ``d_max``) with ``F(delta) <= t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty_like(t)
        for i, ti in enumerate(t):
            if self.F(self.d_max) <= ti:
                out[i] = self.d_max
            else:
                out[i] = brentq(lambda d: float(self.F(d)) - ti, 0.0, self.d_max, xtol=1e-12, rtol=1e-13)
        return out

    def delta_of_phi(self, phi_w):
        # Phi = kappa * delta / (1 - Omega)
        return np.asarray(phi_w, dtype=float) * (1.0 - self.omega) / self.kappa

    def phi_of_delta(self, d):
        return np.asarray(d, dtype=float) * self.kappa / (1.0 - self.omega)

    def omega_of_delta(self, d):
        return self.phi * self.omega + self.kappa * np.asarray(d, dtype=float)


def _delta_min(params: SystemParams, sc: _EhScales) -> np.ndarray:
    return np.minimum(sc.delta_of_phi(np.asarray(params.he_targets, dtype=float)), sc.d_max)


def _se_threshold(params: SystemParams, time_share: float = 1.0) -> float:
    """SINR needed for the SE target when the downlink lasts ``time_share`` of its length."""
    return 2.0 ** (params.se_target / (time_share * params.dl_fraction)) - 1.0


# --------------------------------------------------------------------------- state

@dataclass
class ScaState:
    """Current SCA iterate.

    ``phi_w`` is the true harvested power at the iterate, from which
    ``omega`` and the linearisation point of the inverse logistic follow.
    """

    iterate: Allocation
    phi_w: np.ndarray
    objective: float  # sum of harvested power, watts
    iteration: int = 0
    params: SystemParams | None = field(default=None, repr=False)
    net: NetworkRealization | None = field(default=None, repr=False)

    @property
    def omega(self) -> np.ndarray:
        m = EhModel.from_params(self.params)
        return self.params.phi * m.omega + self.phi_w * (1.0 - m.omega)

    @property
    def u(self) -> np.ndarray:
        """Expression holder ``u[m, l]`` at the iterate (without the rho factor)."""
        return _u_matrix(self.iterate, self.net, self.params)

    @property
    def q(self) -> np.ndarray:
        al = self.iterate
        return np.sum(np.sqrt(self.net.gamma_iu * al.a[:, None] * al.eta_i), axis=0)

    @property
    def z(self) -> np.ndarray:
        al = self.iterate
        return al.a + al.eta_i.sum(axis=1) - al.eta_e.sum(axis=1)


def _u_matrix(al: Allocation, net: NetworkRealization, params: SystemParams) -> np.ndarray:
    gain = params.N - params.K_d + 1
    ee = al.eta_e
    return (net.beta_eu * al.eta_i.sum(axis=1)[:, None]
            - gain * net.gamma_eu * ee
            - net.beta_eu * (ee.sum(axis=1)[:, None] - ee))


def make_state(alloc: Allocation, net: NetworkRealization, params: SystemParams, iteration: int = 0) -> ScaState:
    rep = evaluate(alloc, net, params)
    return ScaState(alloc, rep.phi_per_eu, rep.sum_phi, iteration, params, net)


# --------------------------------------------------------------------------- assembly

class _Aff:
    """Affine expression ``const + sum(val * x[idx])``."""

    __slots__ = ("idx", "val", "const")

    def __init__(self, idx=(), val=(), const=0.0):
        self.idx = np.asarray(idx, dtype=int).ravel()
        self.val = np.broadcast_to(np.asarray(val, dtype=float), self.idx.shape).copy() if self.idx.size else np.zeros(0)
        self.const = float(const)

    def __add__(self, o):
        if isinstance(o, _Aff):
            return _Aff(np.concatenate([self.idx, o.idx]), np.concatenate([self.val, o.val]), self.const + o.const)
        return _Aff(self.idx, self.val, self.const + float(o))

    __radd__ = __add__

    def __mul__(self, k):
        return _Aff(self.idx, self.val * float(k), self.const * float(k))

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, o):
        return self + (-o)

    def __rsub__(self, o):
        return (-self) + o


def _lin(idx, val, const=0.0) -> _Aff:
    idx = np.asarray(idx, dtype=int).ravel()
    val = np.broadcast_to(np.asarray(val, dtype=float), np.shape(idx)).ravel()
    keep = idx >= 0
    return _Aff(idx[keep], val[keep], const)


class _Assembler:
    def __init__(self):
        self.n = 0
        self.lo: list[float] = []
        self.hi: list[float] = []
        self.names: list[str] = []
        self.cones: list[Cone] = []
        self.rows: list[_Aff] = []

    def var(self, name: str, shape, lo=0.0, hi=np.inf) -> np.ndarray:
        count = int(np.prod(shape))
        idx = np.arange(self.n, self.n + count).reshape(shape)
        self.n += count
        self.lo += list(np.broadcast_to(lo, count).astype(float))
        self.hi += list(np.broadcast_to(hi, count).astype(float))
        self.names += [f"{name}[{i}]" for i in range(count)]
        return idx

    def cone(self, kind: str, exprs: list[_Aff]) -> None:
        self.cones.append(Cone(kind, len(exprs)))
        self.rows += exprs

    def nonneg(self, expr: _Aff) -> None:
        self.cone("nonneg", [expr])

    def program(self, objective: _Aff) -> ConicProgram:
        m = len(self.rows)
        r, c, v = [], [], []
        h = np.empty(m)
        for i, e in enumerate(self.rows):
            h[i] = e.const
            r.append(np.full(e.idx.size, i))
            c.append(e.idx)
            v.append(-e.val)
        import scipy.sparse as sp

        G = sp.csr_matrix(
            (np.concatenate(v) if v else np.zeros(0),
             (np.concatenate(r) if r else np.zeros(0, int), np.concatenate(c) if c else np.zeros(0, int))),
            shape=(m, self.n),
        )
        cvec = np.zeros(self.n)
        np.add.at(cvec, objective.idx, objective.val)
        return ConicProgram(cvec, G, h, self.cones, var_bounds=(np.array(self.lo), np.array(self.hi)),
                            var_names=self.names)


@dataclass
class _Layout:
    kind: str
    a: np.ndarray | None  # variable indices, or None when modes are fixed
    a_fixed: np.ndarray | None
    eta_i: np.ndarray  # [M, K] indices, -1 where removed
    eta_e: np.ndarray  # [M, L]
    delta: np.ndarray | None = None  # [L]
    delta_scale: np.ndarray | None = None
    slack_se: np.ndarray | None = None
    slack_he: np.ndarray | None = None


def _aff_sum(parts: list[_Aff]) -> _Aff:
    if not parts:
        return _Aff()
    return _Aff(np.concatenate([p.idx for p in parts]), np.concatenate([p.val for p in parts]),
                sum(p.const for p in parts))


def _assemble(
    kind: str,
    alloc: Allocation,
    phi_w: np.ndarray | None,
    net: NetworkRealization,
    params: SystemParams,
    fixed_modes=None,
    phase1: bool = False,
):
    """Build one convex surrogate.

    ``kind`` is ``"joint"`` (proposed scheme and, with ``fixed_modes``, the
    fixed-mode power control), ``"energy"`` (time-split energy phase) or
    ``"info"`` (time-split information phase, always a slack problem).
    """
    M, N, K, L = params.M, params.N, params.K_d, params.L
    rho = params.rho
    asm = _Assembler()
    share = 0.5 if kind in ("energy", "info") else 1.0
    sc = _EhScales.of(params, share)

    fixed = None if fixed_modes is None else np.asarray(fixed_modes, dtype=float)
    if kind == "joint":
        if fixed is None:
            a_idx = asm.var("a", (M,), 0.0, 1.0)
            info_ap = np.ones(M, bool)
            energy_ap = np.ones(M, bool)
        else:
            a_idx = None
            info_ap = fixed > 0.5
            energy_ap = ~info_ap
    elif kind == "energy":
        a_idx, info_ap, energy_ap = None, np.zeros(M, bool), np.ones(M, bool)
    else:
        a_idx, info_ap, energy_ap = None, np.ones(M, bool), np.zeros(M, bool)

    eta_i = -np.ones((M, K), dtype=int)
    eta_e = -np.ones((M, L), dtype=int)
    if K and info_ap.any():
        eta_i[info_ap] = asm.var("eta_i", (int(info_ap.sum()), K))
    if L and energy_ap.any():
        eta_e[energy_ap] = asm.var("eta_e", (int(energy_ap.sum()), L))
    lay = _Layout(kind, a_idx, fixed, eta_i, eta_e)

    # per-AP power couplings
    for m in range(M):
        if info_ap[m] and K:
            cap = _lin([a_idx[m]], [1.0]) if a_idx is not None else _Aff(const=1.0)
            asm.nonneg(cap - _lin(eta_i[m], 1.0))
        if energy_ap[m] and L:
            cap = (1.0 - _lin([a_idx[m]], [1.0])) if a_idx is not None else _Aff(const=1.0)
            asm.nonneg(cap - _lin(eta_e[m], 1.0))

    objective = _Aff()
    slacks_se: list[int] = []
    slacks_he: list[int] = []

    # ---------------------------------------------------------------- energy users
    do_energy = kind in ("joint", "energy") and L > 0
    if do_energy:
        d_min = np.minimum(sc.delta_of_phi(np.asarray(params.he_targets)), sc.d_max)
        if kind == "energy":
            t_now = benchmark3_energy_terms(alloc.eta_e, net, params)
        else:
            t_now = received_energy_terms(alloc, net, params)
        need = sc.F(d_min)
        scale = np.maximum.reduce([t_now, need, np.ones(L)])
        # no allocation can exceed every AP pointing its full power at one EU
        gain_max = (N + 1) if kind == "energy" else (N - K + 1)
        t_max = 1.0 + rho * np.sum(np.maximum(gain_max * net.gamma_eu, net.beta_eu), axis=0)
        d_hi = sc.delta_reaching(t_max)
        lay.delta_scale = scale
        if not phase1:
            d_now = np.clip(sc.delta_of_phi(phi_w), 0.0, sc.d_max)
            dvar = asm.var("delta", (L,), d_min / scale, np.maximum(d_hi, d_min) / scale)
            wvar = asm.var("w", (L,))
            lay.delta = dvar
            # maximise sum delta; normalised so the largest coefficient is one
            objective = _lin(dvar, -scale / scale.max())
        gain = (N + 1) if kind == "energy" else (N - K + 1)
        g_e = rho * gain * net.gamma_eu
        b_e = rho * net.beta_eu
        for l in range(L):
            S = scale[l]
            parts = [_Aff(const=1.0)]
            # energy-mode terms: own coherent beam and leakage of the other beams
            for m in np.flatnonzero(energy_ap):
                coef = np.full(L, b_e[m, l])
                coef[l] = g_e[m, l]
                parts.append(_lin(eta_e[m], coef))
            if kind == "joint" and fixed is not None:
                for m in np.flatnonzero(info_ap):
                    parts.append(_lin(eta_i[m], b_e[m, l]))
            lhs = _aff_sum(parts)
            if kind == "joint" and fixed is None:
                # a*u split as ((c a + u/c)^2 - (c a - u/c)^2) / 4 with c^2 = rho*beta
                a_now = alloc.a
                u_now = rho * _u_matrix(alloc, net, params)[:, l]
                cm = np.sqrt(b_e[:, l])
                x_now = cm * a_now + u_now / cm
                ys = []
                minor = []
                for m in range(M):
                    coef = np.full(L, -b_e[m, l])
                    coef[l] = -g_e[m, l]
                    u_aff = _lin(eta_i[m], b_e[m, l]) + _lin(eta_e[m], coef)
                    xa = _lin([a_idx[m]], [cm[m]]) + u_aff * (1.0 / cm[m])
                    ya = _lin([a_idx[m]], [cm[m]]) - u_aff * (1.0 / cm[m])
                    minor.append(xa * (0.5 * x_now[m]) + (-0.25 * x_now[m] ** 2))
                    ys.append(ya * (1.0 / np.sqrt(S)))
                sv = asm.var("dc_epi", (1,))[0]
                asm.cone("rsoc", [_lin([sv], [1.0]), _Aff(const=0.5)] + ys)
                lhs = lhs + _aff_sum(minor) - _lin([sv], [0.25 * S])
            if phase1:
                req = need[l] * (1.0 + PHASE1_MARGIN) + PHASE1_MARGIN
                sl = asm.var("slack_he", (1,))[0]
                slacks_he.append(sl)
                asm.nonneg((lhs - req) * (1.0 / S) + _lin([sl], [1.0]))
                objective = objective + _lin([sl], [1.0])
            else:
                d0 = d_now[l]
                slope = sc.concave_slope(d0)
                # -ln(1-u) = u + u^2/(2(1-u)) - h(u) with h convex; h is linearised at u0
                c1 = sc.c1
                u0 = c1 * d0
                h0 = sc.log_gap(u0) / c1
                hs = sc.log_gap_slope(u0)
                convex = (_lin([dvar[l]], [S * (1.0 - hs)]) + _lin([wvar[l]], [0.5 * S])
                          + (hs * d0 - h0))
                rhs = (convex * sc.omega
                       + _lin([dvar[l]], [slope * S])
                       + (sc.concave_part(d0) - slope * d0))
                asm.nonneg((lhs - rhs) * (1.0 / S))
                # w (1 - c1 delta) >= c1 S (delta / S)^2
                asm.cone("rsoc", [_lin([wvar[l]], [1.0]), _lin([dvar[l]], [-0.5 * c1 * S], 0.5),
                                  _lin([dvar[l]], [np.sqrt(c1 * S)])])

    # ---------------------------------------------------------------- information users
    do_info = kind in ("joint", "info") and K > 0 and params.se_target > 0
    if do_info:
        theta = _se_threshold(params, share)
        A = (N - K) / theta
        nu = rho * np.clip(net.beta_iu - net.gamma_iu, 0.0, None)
        sg = np.sqrt(rho * net.gamma_iu)
        a_now = alloc.a if kind == "joint" else np.ones(M)
        if kind == "joint" and fixed is not None:
            a_now = fixed
        ei_now = alloc.eta_i.sum(axis=1)
        ee_now = alloc.eta_e.sum(axis=1) if kind == "joint" else np.zeros(M)
        q_now = np.sum(sg * np.sqrt(np.clip(a_now[:, None] * alloc.eta_i, 0.0, None)), axis=0)
        y_now = a_now - ei_now + ee_now
        tvar = -np.ones((M, K), dtype=int)
        for m in np.flatnonzero(info_ap):
            tvar[m] = asm.var(f"t{m}_", (K,), 0.0, 1.0)
            for k in range(K):
                first = _lin([a_idx[m]], [1.0]) if a_idx is not None else _lin([eta_i[m, k]], [1.0])
                second = _lin([eta_i[m, k]], [0.5]) if a_idx is not None else _Aff(const=0.5)
                asm.cone("rsoc", [first, second, _lin([tvar[m, k]], [1.0])])
        for k in range(K):
            interf = nu[:, k] * (a_now * ei_now + (1.0 - a_now) * ee_now)
            # row scale: the larger of the two sides at the iterate
            R = max(1.0 + float(interf.sum()), A * q_now[k] ** 2)
            lhs = _lin(tvar[:, k], 2.0 * A * q_now[k] * sg[:, k]) + (-A * q_now[k] ** 2)
            if kind == "joint" and fixed is None:
                # a(eta_i - eta_e) = ((a + w)^2 - (a - w)^2) / 4
                zparts, yparts = [], []
                for m in range(M):
                    w = _lin(eta_i[m], 1.0) - _lin(eta_e[m], 1.0)
                    za = _lin([a_idx[m]], [1.0]) + w
                    ya = _lin([a_idx[m]], [1.0]) - w
                    # convex square kept as epigraph, the concave one is linearised
                    zparts.append(za * (0.5 * np.sqrt(nu[m, k] / R)))
                    yparts.append((ya * (2.0 * y_now[m]) + (-y_now[m] ** 2)) * (0.25 * nu[m, k]))
                ev = asm.var("se_epi", (1,))[0]
                asm.cone("rsoc", [_lin([ev], [1.0]), _Aff(const=0.5)] + zparts)
                rhs = (_lin([ev], [R]) + _aff_sum([_lin(eta_e[m], nu[m, k]) for m in range(M)]) + 1.0)
                lhs = lhs + _aff_sum(yparts)
            else:
                parts = [_lin(eta_i[m], nu[m, k]) for m in np.flatnonzero(info_ap)]
                if kind == "joint":
                    parts += [_lin(eta_e[m], nu[m, k]) for m in np.flatnonzero(energy_ap)]
                rhs = _aff_sum(parts) + 1.0
            row = (lhs - rhs) * (1.0 / R)
            if phase1 or kind == "info":
                row = row + (-PHASE1_MARGIN)
                sl = asm.var("slack_se", (1,))[0]
                slacks_se.append(sl)
                row = row + _lin([sl], [1.0])
                objective = objective + _lin([sl], [1.0])
            asm.nonneg(row)

    lay.slack_se = np.array(slacks_se, dtype=int)
    lay.slack_he = np.array(slacks_he, dtype=int)
    return asm.program(objective), lay


def build_subproblem(state: ScaState, net: NetworkRealization, params: SystemParams,
                     fixed_modes=None, phase1: bool = False) -> ConicProgram:
    """Convex surrogate around ``state``; ``fixed_modes`` freezes ``a`` and drops unused powers."""
    prog, _ = _assemble("joint", state.iterate, state.phi_w, net, params, fixed_modes, phase1)
    return prog


def core_variable_count(params: SystemParams) -> int:
    return params.M * (params.K_d + params.L + 1) + params.L


# --------------------------------------------------------------------------- iterate extraction

def _extract(lay: _Layout, x: np.ndarray, params: SystemParams, base: Allocation) -> Allocation:
    M, K, L = params.M, params.K_d, params.L
    if lay.a is not None:
        a = np.clip(x[lay.a], 0.0, 1.0)
    elif lay.a_fixed is not None:
        a = lay.a_fixed.copy()
    else:
        a = base.a.copy()
    ei = np.where(lay.eta_i >= 0, x[np.maximum(lay.eta_i, 0)], 0.0) if K else np.zeros((M, 0))
    ee = np.where(lay.eta_e >= 0, x[np.maximum(lay.eta_e, 0)], 0.0) if L else np.zeros((M, 0))
    if lay.kind == "energy":
        ei = base.eta_i.copy()
    if lay.kind == "info":
        ee = base.eta_e.copy()
    ei = np.clip(ei, 0.0, None)
    ee = np.clip(ee, 0.0, None)
    cap_i = a if lay.kind == "joint" else np.ones(M)
    cap_e = (1.0 - a) if lay.kind == "joint" else np.ones(M)
    # remove round-off excess so the power couplings hold exactly
    si, se = ei.sum(axis=1), ee.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ei *= np.where(si > cap_i, cap_i / np.where(si > 0, si, 1.0), 1.0)[:, None]
        ee *= np.where(se > cap_e, cap_e / np.where(se > 0, se, 1.0), 1.0)[:, None]
    return Allocation(a, ei, ee)


# --------------------------------------------------------------------------- outcomes

@dataclass
class SolveOutcome:
    allocation: Allocation
    relaxed_allocation: Allocation
    omega: np.ndarray
    objective_sum_he: float  # watts
    history: list[float]
    status: str  # converged | max_iter | infeasible | numerical
    wall_time: float
    scheme: str = "proposed"
    report: MetricsReport | None = None
    relaxed_objective: float = float("nan")
    iterations: int = 0
    flips: list[int] = field(default_factory=list)
    log_lines: list[str] = field(default_factory=list)
    violated: str = ""  # "se" / "he" when infeasible and the class is known

    @property
    def feasible(self) -> bool:
        return self.status in ("converged", "max_iter") and self.report is not None and self.report.feasible

    CSV_FIELDS = ("scheme", "status", "feasible", "sum_phi_uW", "relaxed_sum_phi_uW", "min_se_bpsHz",
                  "iterations", "flips", "wall_time_s", "modes")

    def csv_row(self) -> str:
        buf = io.StringIO()
        rep = self.report
        min_se = float(np.min(rep.se_per_iu, initial=np.inf)) if rep is not None else float("nan")
        csv.writer(buf, lineterminator="").writerow([
            self.scheme, self.status, int(self.feasible), f"{self.objective_sum_he * 1e6:.9g}",
            f"{self.relaxed_objective * 1e6:.9g}", f"{min_se:.9g}", self.iterations, len(self.flips),
            f"{self.wall_time:.3f}", "".join(str(int(round(v))) for v in self.allocation.a),
        ])
        return buf.getvalue()

    def log_text(self) -> str:
        lines = [f"scheme {self.scheme} status {self.status} iterations {self.iterations}"]
        lines += [f"iter {i} sum_phi_W {v!r}" for i, v in enumerate(self.history)]
        lines += [f"flip ap {m}" for m in self.flips]
        lines += self.log_lines
        return "\n".join(lines) + "\n"


def _outcome(scheme, alloc, relaxed, net, params, history, status, t0, iterations=0, lines=None,
             violated="", bench3=False) -> SolveOutcome:
    if bench3:
        rep = evaluate_benchmark3(alloc.eta_i, alloc.eta_e, net, params, _SE_TOL, _HE_RTOL)
    else:
        rep = evaluate(alloc, net, params, _SE_TOL, _HE_RTOL)
    m = EhModel.from_params(params)
    omega = params.phi * m.omega + rep.phi_per_eu * (1.0 - m.omega)
    rel = evaluate(relaxed, net, params).sum_phi if not bench3 else rep.sum_phi
    return SolveOutcome(alloc, relaxed, omega, rep.sum_phi, list(history), status, time.perf_counter() - t0,
                        scheme, rep, rel, iterations, [], list(lines or []), violated)


# --------------------------------------------------------------------------- precheck

def _upper_bounds_ok(net: NetworkRealization, params: SystemParams, info_ap, energy_ap, share: float = 1.0,
                     energy_gain: int | None = None) -> tuple[bool, str]:
    """Cheap necessary conditions: each QoS target alone at its most favourable power split."""
    rho = params.rho
    K, L = params.K_d, params.L
    if K and params.se_target > 0:
        theta = _se_threshold(params, share)
        best = rho * (params.N - K) * np.sum(np.sqrt(net.gamma_iu[info_ap]), axis=0) ** 2
        if np.any(best < theta * (1.0 - 1e-12)):
            return False, "se"
    if L and np.any(np.asarray(params.he_targets) > 0):
        sc = _EhScales.of(params, share)
        need = sc.F(_delta_min(params, sc))
        gain = energy_gain if energy_gain is not None else params.N - K + 1
        per_ap = np.zeros_like(net.beta_eu)
        per_ap[energy_ap] = np.maximum(gain * net.gamma_eu[energy_ap], net.beta_eu[energy_ap])
        only_info = info_ap & ~energy_ap
        per_ap[only_info] = net.beta_eu[only_info]
        best = 1.0 + rho * per_ap.sum(axis=0)
        if np.any(best < need * (1.0 - 1e-12)):
            return False, "he"
    return True, ""


# --------------------------------------------------------------------------- SCA loops

def _solve_prog(prog):
    sol = solve(prog, tol=SOLVER_TOL, max_iter=200)
    if not sol.usable:
        # the barrier path is slower but tolerates badly scaled iterates better
        alt = solve(prog, tol=SOLVER_TOL, max_iter=200, method="barrier")
        if alt.usable:
            return alt
    return sol


def _true_phi(kind, alloc, net, params):
    if kind == "energy":
        return evaluate_benchmark3(alloc.eta_i, alloc.eta_e, net, params).phi_per_eu
    return evaluate(alloc, net, params).phi_per_eu


def _phase1(kind, alloc, net, params, fixed, lines, max_iter=MAX_ITER):
    """Slack SCA driving every QoS violation to zero; returns (alloc or None, violated class)."""
    prev = np.inf
    fails = 0
    worst = ""
    for it in range(max_iter):
        prog, lay = _assemble(kind, alloc, None, net, params, fixed, phase1=True)
        sol = _solve_prog(prog)
        if not sol.usable:
            fails += 1
            lines.append(f"phase1 iter {it} solver {sol.status}")
            if fails >= 2:
                return None, worst
            continue
        fails = 0
        alloc = _extract(lay, sol.x, params, alloc)
        s_se = sol.x[lay.slack_se] if lay.slack_se.size else np.zeros(0)
        s_he = sol.x[lay.slack_he] if lay.slack_he.size else np.zeros(0)
        total = float(s_se.sum() + s_he.sum())
        worst = "se" if s_se.max(initial=0.0) >= s_he.max(initial=0.0) else "he"
        lines.append(f"phase1 iter {it} slack {total:.3e}")
        if max(s_se.max(initial=0.0), s_he.max(initial=0.0)) <= PHASE1_ACCEPT or _meets_qos(kind, alloc, net, params):
            return alloc, ""
        if np.isfinite(prev) and abs(prev - total) <= params.sca_tol * max(abs(prev), 1e-300):
            return None, worst
        prev = total
    return None, worst


def _main_loop(kind, alloc, net, params, fixed, lines):
    """Objective SCA from a feasible ``alloc``; returns (alloc, history, status, iterations)."""
    phi = _true_phi(kind, alloc, net, params)
    history = [float(phi.sum())]
    best = (history[0], alloc)
    fails = 0
    status = "max_iter"
    it = 0
    for it in range(1, MAX_ITER + 1):
        prog, lay = _assemble(kind, alloc, phi, net, params, fixed)
        sol = _solve_prog(prog)
        if not sol.usable:
            fails += 1
            lines.append(f"iter {it} solver {sol.status}")
            if fails >= 2:
                status = "numerical"
                break
            continue
        fails = 0
        alloc = _extract(lay, sol.x, params, alloc)
        phi = _true_phi(kind, alloc, net, params)
        obj = float(phi.sum())
        history.append(obj)
        if obj >= best[0]:
            best = (obj, alloc)
        lines.append(f"iter {it} sum_phi_W {obj!r} solver_iters {sol.iterations}")
        prev = history[-2]
        if abs(obj - prev) <= params.sca_tol * max(abs(prev), 1e-300):
            status = "converged"
            break
    return best[1], history, status, it


def _meets_qos(kind, alloc, net, params) -> bool:
    """Strict QoS test; the surrogate bounds sit exactly at the targets."""
    if kind == "joint":
        return evaluate(alloc, net, params, 0.0, 0.0).feasible
    rep = evaluate_benchmark3(alloc.eta_i, alloc.eta_e, net, params, 0.0, 0.0)
    return bool(np.all(rep.feasible_he if kind == "energy" else rep.feasible_se))


def _feasible_start(kind, alloc, net, params, fixed, lines):
    """Start point meeting every QoS constraint, or ``None`` with the violated class."""
    if _meets_qos(kind, alloc, net, params):
        return alloc, ""
    # the first surrogate around an infeasible start may still contain feasible points
    prog, lay = _assemble(kind, alloc, _true_phi(kind, alloc, net, params), net, params, fixed)
    sol = _solve_prog(prog)
    if sol.usable:
        lines.append("first surrogate feasible")
        return _extract(lay, sol.x, params, alloc), ""
    lines.append(f"first surrogate {sol.status}; phase 1")
    return _phase1(kind, alloc, net, params, fixed, lines)


# --------------------------------------------------------------------------- proposed scheme

def initialize(net: NetworkRealization, params: SystemParams, seed: int = 0) -> ScaState:
    """Heuristic interior start: lean each AP towards the user class it hears best."""
    M, K, L = params.M, params.K_d, params.L
    if K and L:
        lean = net.beta_iu.max(axis=1) >= net.beta_eu.max(axis=1)
    else:
        lean = np.full(M, K > 0)
    a = np.where(lean, 0.75, 0.25)
    eta_i = np.repeat((a / max(K, 1))[:, None], K, axis=1)
    eta_e = np.repeat(((1.0 - a) / max(L, 1))[:, None], L, axis=1)
    return make_state(Allocation(a, eta_i, eta_e), net, params)


def sca_solve(net: NetworkRealization, params: SystemParams, seed: int = 0) -> SolveOutcome:
    """Relaxed proposed scheme: continuous ``a`` and power control by SCA."""
    t0 = time.perf_counter()
    lines: list[str] = []
    state = initialize(net, params, seed)
    ok, why = _upper_bounds_ok(net, params, np.ones(params.M, bool), np.ones(params.M, bool))
    if not ok:
        lines.append(f"precheck: {why} target above its upper bound")
        return _outcome("proposed", state.iterate, state.iterate, net, params, [], "infeasible", t0,
                        lines=lines, violated=why)
    start, why = _feasible_start("joint", state.iterate, net, params, None, lines)
    if start is None:
        return _outcome("proposed", state.iterate, state.iterate, net, params, [], "infeasible", t0,
                        lines=lines, violated=why)
    alloc, history, status, its = _main_loop("joint", start, net, params, None, lines)
    out = _outcome("proposed", alloc, alloc, net, params, history, status, t0, its, lines)
    return out


def benchmark2_solve(net: NetworkRealization, params: SystemParams, a_fixed, start: Allocation | None = None,
                     scheme: str = "benchmark2") -> SolveOutcome:
    """Power control by SCA for fixed binary modes."""
    t0 = time.perf_counter()
    a = np.asarray(a_fixed, dtype=float)
    if not np.all((a == 0.0) | (a == 1.0)):
        raise ValueError("a_fixed must be binary")
    M, K, L = params.M, params.K_d, params.L
    info_ap = a > 0.5
    lines: list[str] = []
    if start is None:
        ei = np.repeat(a[:, None], K, axis=1) / max(K, 1)
        ee = np.repeat((1.0 - a)[:, None], L, axis=1) / max(L, 1)
    else:
        ei = start.eta_i * info_ap[:, None]
        ee = start.eta_e * (~info_ap)[:, None]
        si, se = ei.sum(axis=1), ee.sum(axis=1)
        ei = ei / np.maximum(si, 1.0)[:, None]
        ee = ee / np.maximum(se, 1.0)[:, None]
    alloc = Allocation(a.copy(), ei, ee)
    ok, why = _upper_bounds_ok(net, params, info_ap, ~info_ap)
    if not ok:
        lines.append(f"precheck: {why} target above its upper bound")
        return _outcome(scheme, alloc, alloc, net, params, [], "infeasible", t0, lines=lines, violated=why)
    feas, why = _feasible_start("joint", alloc, net, params, a, lines)
    if feas is None:
        return _outcome(scheme, alloc, alloc, net, params, [], "infeasible", t0, lines=lines, violated=why)
    alloc, history, status, its = _main_loop("joint", feas, net, params, a, lines)
    return _outcome(scheme, alloc, alloc, net, params, history, status, t0, its, lines)


def round_modes(relaxed: SolveOutcome, net: NetworkRealization, params: SystemParams) -> SolveOutcome:
    """Threshold ``a`` at one half, re-solve the powers and repair by greedy flips."""
    t0 = time.perf_counter()
    if relaxed.status not in ("converged", "max_iter"):
        out = SolveOutcome(relaxed.allocation, relaxed.relaxed_allocation, relaxed.omega, relaxed.objective_sum_he,
                           list(relaxed.history), relaxed.status, relaxed.wall_time, "proposed", relaxed.report,
                           relaxed.relaxed_objective, relaxed.iterations, [], list(relaxed.log_lines),
                           relaxed.violated)
        return out
    ra = relaxed.relaxed_allocation.a
    a = (ra >= 0.5).astype(float)
    flips: list[int] = []
    out = benchmark2_solve(net, params, a, start=relaxed.relaxed_allocation, scheme="proposed")
    for _ in range(params.M):
        if out.status in ("converged", "max_iter") and out.report.feasible:
            break
        # move one AP towards the class whose constraint is violated
        target = 1.0 if out.violated == "se" else 0.0
        cand = [m for m in range(params.M) if a[m] != target and m not in flips]
        if not cand:
            break
        m = min(cand, key=lambda j: (abs(ra[j] - 0.5), j))
        a[m] = target
        flips.append(m)
        out = benchmark2_solve(net, params, a, start=relaxed.relaxed_allocation, scheme="proposed")
    feasible = out.status in ("converged", "max_iter") and out.report.feasible
    status = out.status if feasible else "infeasible"
    res = SolveOutcome(out.allocation, relaxed.relaxed_allocation, out.omega, out.objective_sum_he,
                       list(relaxed.history), status, relaxed.wall_time + time.perf_counter() - t0,
                       "proposed", out.report, relaxed.objective_sum_he, relaxed.iterations + out.iterations,
                       flips, list(relaxed.log_lines) + ["rounding"] + list(out.log_lines), out.violated)
    return res


def solve_proposed(net: NetworkRealization, params: SystemParams, seed: int = 0) -> SolveOutcome:
    return round_modes(sca_solve(net, params, seed), net, params)


# --------------------------------------------------------------------------- benchmarks

def _random_modes(M: int, K: int, L: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.integers(0, 2, size=M).astype(float)
    if K > 0 and L > 0 and M > 1 and (a.sum() == 0 or a.sum() == M):
        a[rng.integers(M)] = 1.0 - a[0]
    return a


def benchmark1(net: NetworkRealization, params: SystemParams, seed: int = 0) -> SolveOutcome:
    """Random modes, full power split equally over the served users."""
    t0 = time.perf_counter()
    M, K, L = params.M, params.K_d, params.L
    a = _random_modes(M, K, L, np.random.default_rng([int(seed) & 0xFFFFFFFF, 11]))
    ei = np.repeat(a[:, None], K, axis=1) / max(K, 1)
    ee = np.repeat((1.0 - a)[:, None], L, axis=1) / max(L, 1)
    alloc = Allocation(a, ei, ee)
    out = _outcome("benchmark1", alloc, alloc, net, params, [], "converged", t0)
    if not out.report.feasible:
        out.status = "infeasible"
    out.history = [out.objective_sum_he]
    return out


def benchmark2(net: NetworkRealization, params: SystemParams, seed: int = 0) -> SolveOutcome:
    """Random modes (same draw as benchmark 1) with SCA power control."""
    a = _random_modes(params.M, params.K_d, params.L, np.random.default_rng([int(seed) & 0xFFFFFFFF, 11]))
    return benchmark2_solve(net, params, a)


def benchmark3_solve(net: NetworkRealization, params: SystemParams, seed: int = 0) -> SolveOutcome:
    """Time-split SWIPT: energy phase and information phase solved separately."""
    t0 = time.perf_counter()
    M, K, L = params.M, params.K_d, params.L
    lines: list[str] = []
    alloc = Allocation(np.ones(M), np.full((M, K), 1.0 / max(K, 1)), np.full((M, L), 1.0 / max(L, 1)))
    everyone = np.ones(M, bool)
    ok, why = _upper_bounds_ok(net, params, everyone, everyone, share=0.5, energy_gain=params.N + 1)
    if not ok:
        lines.append(f"precheck: {why} target above its upper bound")
        return _outcome("benchmark3", alloc, alloc, net, params, [], "infeasible", t0, lines=lines,
                        violated=why, bench3=True)
    # information phase: feasibility only
    if K and params.se_target > 0:
        rep = evaluate_benchmark3(alloc.eta_i, alloc.eta_e, net, params)
        if not np.all(rep.feasible_se):
            info, why = _phase1("info", alloc, net, params, None, lines)
            if info is None:
                return _outcome("benchmark3", alloc, alloc, net, params, [], "infeasible", t0, lines=lines,
                                violated="se", bench3=True)
            alloc = Allocation(alloc.a, info.eta_i, alloc.eta_e)
    history: list[float] = []
    status, its = "converged", 0
    if L:
        start, why = _feasible_start("energy", alloc, net, params, None, lines)
        if start is None:
            return _outcome("benchmark3", alloc, alloc, net, params, [], "infeasible", t0, lines=lines,
                            violated="he", bench3=True)
        alloc, history, status, its = _main_loop("energy", start, net, params, None, lines)
    return _outcome("benchmark3", alloc, alloc, net, params, history, status, t0, its, lines, bench3=True)


def _mode_vectors(M: int, K: int, L: int):
    for bits in itertools.product((0.0, 1.0), repeat=M):
        a = np.array(bits)
        if K > 0 and L > 0 and (a.sum() == 0 or a.sum() == M):
            continue
        yield a


def brute_force_oracle(net: NetworkRealization, params: SystemParams) -> SolveOutcome:
    """Best fixed-mode power control over every binary mode vector."""
    if params.M > BRUTE_FORCE_MAX_M:
        raise ValueError(f"brute force refused for M={params.M} > {BRUTE_FORCE_MAX_M}")
    t0 = time.perf_counter()
    best = None
    tried = 0
    for a in _mode_vectors(params.M, params.K_d, params.L):
        tried += 1
        out = benchmark2_solve(net, params, a, scheme="oracle")
        if out.feasible and (best is None or out.objective_sum_he > best.objective_sum_he):
            best = out
    if best is None:
        a = np.zeros(params.M)
        alloc = Allocation(a, np.zeros((params.M, params.K_d)), np.zeros((params.M, params.L)))
        best = _outcome("oracle", alloc, alloc, net, params, [], "infeasible", t0)
    best.wall_time = time.perf_counter() - t0
    best.log_lines.append(f"enumerated {tried} mode vectors")
    return best


SCHEMES = {
    "proposed": solve_proposed,
    "benchmark1": benchmark1,
    "benchmark2": benchmark2,
    "benchmark3": benchmark3_solve,
    "oracle": lambda net, params, seed=0: brute_force_oracle(net, params),
}
