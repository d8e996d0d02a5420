"""Closed-form SE, received energy and the non-linear harvesting model."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .network import NetworkRealization
from .params import SystemParams

POWER_TOL = 1e-8


@dataclass
class Allocation:
    """Mode vector ``a`` (1 = information AP) and normalised power fractions."""

    a: np.ndarray
    eta_i: np.ndarray  # [M, K_d]
    eta_e: np.ndarray  # [M, L]

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.eta_i = np.asarray(self.eta_i, dtype=float).reshape(len(self.a), -1)
        self.eta_e = np.asarray(self.eta_e, dtype=float).reshape(len(self.a), -1)

    def power_violation(self) -> float:
        """Largest violation of the per-AP power couplings and of the box/sign constraints."""
        v = [
            self.eta_i.sum(axis=1) - self.a,
            self.eta_e.sum(axis=1) - (1.0 - self.a),
            -self.a,
            self.a - 1.0,
            -self.eta_i.ravel(),
            -self.eta_e.ravel(),
        ]
        return float(max(np.max(x, initial=0.0) for x in v))

    def is_valid(self, tol: float = POWER_TOL) -> bool:
        return self.power_violation() <= tol

    @property
    def is_binary(self) -> bool:
        return bool(np.all((self.a == 0.0) | (self.a == 1.0)))

    def copy(self) -> "Allocation":
        return Allocation(self.a.copy(), self.eta_i.copy(), self.eta_e.copy())


@dataclass(frozen=True)
class EhModel:
    xi: float
    chi: float
    phi: float

    @property
    def omega(self) -> float:
        return 1.0 / (1.0 + np.exp(self.xi * self.chi))

    @classmethod
    def from_params(cls, params: SystemParams) -> "EhModel":
        return cls(params.xi, params.chi, params.phi)


def _check_alloc(alloc: Allocation, tol: float = POWER_TOL) -> None:
    if np.any(alloc.a < -tol) or np.any(alloc.a > 1 + tol):
        raise ValueError("mode indicators must lie in [0, 1]")
    if np.any(alloc.eta_i < -tol) or np.any(alloc.eta_e < -tol):
        raise ValueError("power coefficients must be non-negative")


def sinr_closed_form(alloc: Allocation, net: NetworkRealization, params: SystemParams) -> np.ndarray:
    """Effective SINR of every IU under PZF at I-APs and PMRT at E-APs."""
    _check_alloc(alloc)
    rho = params.rho
    a = np.clip(alloc.a, 0.0, 1.0)
    eta_i = np.clip(alloc.eta_i, 0.0, None)
    eta_e = np.clip(alloc.eta_e, 0.0, None)
    coherent = np.sum(np.sqrt(a[:, None] * eta_i * net.gamma_iu), axis=0)
    num = rho * (params.N - params.K_d) * coherent**2
    err = net.beta_iu - net.gamma_iu  # [M, K]
    p_info = a * eta_i.sum(axis=1)  # per-AP information power
    p_energy = (1.0 - a) * eta_e.sum(axis=1)
    den = rho * (p_info @ err) + rho * (p_energy @ err) + 1.0
    return num / den


def se_per_iu(sinr, params: SystemParams) -> np.ndarray:
    sinr = np.asarray(sinr, dtype=float)
    if np.any(sinr < 0):
        raise ValueError("SINR must be non-negative")
    return params.dl_fraction * np.log2(1.0 + sinr)


def received_energy_terms(alloc: Allocation, net: NetworkRealization, params: SystemParams) -> np.ndarray:
    """Bracketed term of Q, in units of noise power (``Q / ((tau_c - tau) sigma^2)``)."""
    _check_alloc(alloc)
    rho = params.rho
    a = np.clip(alloc.a, 0.0, 1.0)
    eta_i = np.clip(alloc.eta_i, 0.0, None)
    eta_e = np.clip(alloc.eta_e, 0.0, None)
    ge = (1.0 - a)[:, None] * eta_e  # [M, L] energy-mode power per EU
    coherent = (params.N - params.K_d + 1) * np.sum(ge * net.gamma_eu, axis=0)
    # non-coherent leakage from every other EU's beam
    leak_e = ge.sum(axis=1) @ net.beta_eu - np.sum(ge * net.beta_eu, axis=0)
    leak_i = (a * eta_i.sum(axis=1)) @ net.beta_eu
    return rho * coherent + rho * leak_e + rho * leak_i + 1.0


def q_closed_form(alloc: Allocation, net: NetworkRealization, params: SystemParams) -> np.ndarray:
    """Average received energy ``Q_l`` per EU (watt-symbols)."""
    return params.dl_symbols * params.noise_power * received_energy_terms(alloc, net, params)


def logistic_psi(q, model: EhModel):
    q = np.asarray(q, dtype=float)
    out = model.phi / (1.0 + np.exp(-model.xi * (q - model.chi)))
    return float(out) if out.ndim == 0 else out


def harvested_energy_phi(q, model: EhModel):
    """Harvested DC power; zero input gives zero output, saturates at ``phi``."""
    q = np.asarray(q, dtype=float)
    om = model.omega
    # Psi(q) - phi*Omega written without cancellation
    e = np.exp(-model.xi * (q - model.chi))
    e0 = np.exp(model.xi * model.chi)
    diff = model.phi * (e0 - e) / ((1.0 + e) * (1.0 + e0))
    out = np.clip(diff / (1.0 - om), 0.0, None)
    return float(out) if out.ndim == 0 else out


def inverse_logistic_f(psi, model: EhModel):
    psi = np.asarray(psi, dtype=float)
    if np.any(psi <= 0) or np.any(psi >= model.phi):
        raise ValueError("psi must lie strictly inside (0, phi)")
    out = model.chi - np.log((model.phi - psi) / psi) / model.xi
    return float(out) if out.ndim == 0 else out


def benchmark3_se(eta_i, net: NetworkRealization, params: SystemParams) -> np.ndarray:
    """SE of time-split SWIPT where every AP sends data for half the downlink."""
    eta_i = np.clip(np.asarray(eta_i, dtype=float), 0.0, None)
    rho = params.rho
    coherent = np.sum(np.sqrt(eta_i * net.gamma_iu), axis=0)
    num = rho * (params.N - params.K_d) * coherent**2
    den = rho * (eta_i.sum(axis=1) @ (net.beta_iu - net.gamma_iu)) + 1.0
    return 0.5 * params.dl_fraction * np.log2(1.0 + num / den)


def benchmark3_energy_terms(eta_e, net: NetworkRealization, params: SystemParams) -> np.ndarray:
    eta_e = np.clip(np.asarray(eta_e, dtype=float), 0.0, None)
    rho = params.rho
    coherent = (params.N + 1) * np.sum(eta_e * net.gamma_eu, axis=0)
    leak = eta_e.sum(axis=1) @ net.beta_eu - np.sum(eta_e * net.beta_eu, axis=0)
    return rho * coherent + rho * leak + 1.0


def benchmark3_q(eta_e, net: NetworkRealization, params: SystemParams) -> np.ndarray:
    """Received energy when every AP sends MRT energy beams for half the downlink."""
    return 0.5 * params.dl_symbols * params.noise_power * benchmark3_energy_terms(eta_e, net, params)


@dataclass
class MetricsReport:
    se_per_iu: np.ndarray
    q_per_eu: np.ndarray
    phi_per_eu: np.ndarray
    feasible_se: np.ndarray
    feasible_he: np.ndarray

    @property
    def sum_phi(self) -> float:
        return float(np.sum(self.phi_per_eu))

    @property
    def feasible(self) -> bool:
        return bool(np.all(self.feasible_se) and np.all(self.feasible_he))

    CSV_FIELDS = ("drop", "scheme", "point", "sum_phi_W", "min_se_bpsHz", "feasible", "se_bpsHz", "phi_W")

    def csv_row(self, drop: int, scheme: str, point) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="").writerow([
            drop, scheme, point, repr(self.sum_phi), repr(float(np.min(self.se_per_iu, initial=np.inf))),
            int(self.feasible),
            ";".join(repr(float(v)) for v in self.se_per_iu),
            ";".join(repr(float(v)) for v in self.phi_per_eu),
        ])
        return buf.getvalue()


def evaluate(
    alloc: Allocation,
    net: NetworkRealization,
    params: SystemParams,
    se_tol: float = 1e-6,
    he_rtol: float = 1e-6,
) -> MetricsReport:
    """Closed-form metrics of an allocation plus per-user QoS flags.

    ``se_tol`` is absolute (bit/s/Hz); ``he_rtol`` is relative to each harvesting target.
    """
    model = EhModel.from_params(params)
    se = se_per_iu(sinr_closed_form(alloc, net, params), params)
    q = q_closed_form(alloc, net, params)
    phi = harvested_energy_phi(q, model)
    return MetricsReport(
        se_per_iu=se,
        q_per_eu=q,
        phi_per_eu=np.atleast_1d(phi),
        feasible_se=se >= params.se_target - se_tol,
        feasible_he=np.atleast_1d(phi) >= np.asarray(params.he_targets) * (1.0 - he_rtol),
    )


def evaluate_benchmark3(eta_i, eta_e, net: NetworkRealization, params: SystemParams,
                        se_tol: float = 1e-6, he_rtol: float = 1e-6) -> MetricsReport:
    model = EhModel.from_params(params)
    se = benchmark3_se(eta_i, net, params)
    q = benchmark3_q(eta_e, net, params)
    phi = np.atleast_1d(harvested_energy_phi(q, model))
    return MetricsReport(se, q, phi, se >= params.se_target - se_tol,
                         phi >= np.asarray(params.he_targets) * (1.0 - he_rtol))
