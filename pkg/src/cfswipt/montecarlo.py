"""Small-scale fading simulation with explicit PZF/PMRT precoders.

Channel estimates and errors are sampled from their MMSE marginals
(``g_hat ~ CN(0, gamma I)``, ``g_err ~ CN(0, (beta - gamma) I)``), which is
equivalent to running the orthogonal pilot phase.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .metrics import Allocation, q_closed_form, se_per_iu, sinr_closed_form
from .network import NetworkRealization
from .params import SystemParams

N_JACKKNIFE = 20
_MC_STREAM = 7


@dataclass
class ChannelDraw:
    """One fading realisation. Arrays are indexed ``[M, N, users]``."""

    g_hat_iu: np.ndarray
    g_err_iu: np.ndarray
    g_hat_eu: np.ndarray
    g_err_eu: np.ndarray
    seed: int

    @property
    def g_iu(self) -> np.ndarray:
        return self.g_hat_iu + self.g_err_iu

    @property
    def g_eu(self) -> np.ndarray:
        return self.g_hat_eu + self.g_err_eu


@dataclass
class PrecoderSet:
    w_i: np.ndarray  # [M, N, K_d]
    w_e: np.ndarray  # [M, N, L]
    alpha_pzf: np.ndarray  # [M, K_d]
    alpha_pmrt: np.ndarray  # [M, L]


def _cn(rng: np.random.Generator, var: np.ndarray, n: int) -> np.ndarray:
    # var [M, U] -> samples [M, n, U]; real/imag parts each carry half the variance
    sd = np.sqrt(0.5 * var)[:, None, :]
    shape = (var.shape[0], n, var.shape[1])
    return sd * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def trial_rng(net_seed: int, trial_seed: int) -> np.random.Generator:
    return np.random.default_rng([int(net_seed) & 0xFFFFFFFF, _MC_STREAM, int(trial_seed)])


def draw_channels(net: NetworkRealization, trial_seed: int, n_antennas: int) -> ChannelDraw:
    """Draw one fading trial; deterministic in ``(net.seed, trial_seed)``."""
    if net.beta_iu is None or net.gamma_iu is None:
        raise ValueError("network realisation lacks large-scale coefficients")
    rng = trial_rng(net.seed, trial_seed)
    err_iu = np.clip(net.beta_iu - net.gamma_iu, 0.0, None)
    err_eu = np.clip(net.beta_eu - net.gamma_eu, 0.0, None)
    return ChannelDraw(
        g_hat_iu=_cn(rng, net.gamma_iu, n_antennas),
        g_err_iu=_cn(rng, err_iu, n_antennas),
        g_hat_eu=_cn(rng, net.gamma_eu, n_antennas),
        g_err_eu=_cn(rng, err_eu, n_antennas),
        seed=int(trial_seed),
    )


def _gram_inverse(G: np.ndarray) -> np.ndarray | None:
    """``(G^H G)^{-1}`` by Cholesky; jitter on failure, ``None`` if still singular."""
    K = G.shape[1]
    gram = G.conj().T @ G
    for jitter in (0.0, 1e-12 * np.real(np.trace(gram)) / K):
        try:
            L = np.linalg.cholesky(gram + jitter * np.eye(K))
        except np.linalg.LinAlgError:
            continue
        Linv = np.linalg.inv(L)
        return Linv.conj().T @ Linv
    return None


def build_pzf(g_hat_iu_m: np.ndarray, gamma_row: np.ndarray) -> np.ndarray | None:
    """PZF columns ``alpha * G (G^H G)^{-1} e_k`` for one AP, or ``None`` when rank deficient."""
    N, K = g_hat_iu_m.shape
    if K == 0:
        return np.zeros((N, 0), dtype=complex)
    inv = _gram_inverse(g_hat_iu_m)
    if inv is None:
        return None
    alpha = np.sqrt((N - K) * np.asarray(gamma_row))
    return (g_hat_iu_m @ inv) * alpha[None, :]


def projection_matrix(g_hat_iu_m: np.ndarray) -> np.ndarray | None:
    N, K = g_hat_iu_m.shape
    if K == 0:
        return np.eye(N, dtype=complex)
    inv = _gram_inverse(g_hat_iu_m)
    if inv is None:
        return None
    return np.eye(N) - g_hat_iu_m @ inv @ g_hat_iu_m.conj().T


def build_pmrt(g_hat_eu_m: np.ndarray, g_hat_iu_m: np.ndarray, gamma_row: np.ndarray) -> np.ndarray | None:
    """PMRT columns ``B_m g_hat / sqrt((N - K_d) gamma)`` for one AP."""
    N, K = g_hat_iu_m.shape
    B = projection_matrix(g_hat_iu_m)
    if B is None:
        return None
    alpha = 1.0 / np.sqrt((N - K) * np.asarray(gamma_row))
    return (B @ g_hat_eu_m) * alpha[None, :]


def build_precoders(draw: ChannelDraw, net: NetworkRealization) -> PrecoderSet | None:
    M, N, K = draw.g_hat_iu.shape
    L = draw.g_hat_eu.shape[2]
    w_i = np.empty((M, N, K), dtype=complex)
    w_e = np.empty((M, N, L), dtype=complex)
    for m in range(M):
        wi = build_pzf(draw.g_hat_iu[m], net.gamma_iu[m])
        we = build_pmrt(draw.g_hat_eu[m], draw.g_hat_iu[m], net.gamma_eu[m])
        if wi is None or we is None:
            return None
        w_i[m], w_e[m] = wi, we
    return PrecoderSet(w_i, w_e, np.sqrt((N - K) * net.gamma_iu), 1.0 / np.sqrt((N - K) * net.gamma_eu))


@dataclass
class TrialGains:
    """Per-trial effective scalar gains, stacked over trials.

    ``b[t, k, j] = sum_m sqrt(rho a_m eta_mj) g_mk^H w_I,mj`` (IU k, stream j),
    ``e[t, k, l] = sum_m sqrt(rho (1 - a_m) eta_ml) g_mk^H w_E,ml``, and
    ``energy[t, l]`` is the received energy term at EU l in noise units.
    """

    b: np.ndarray
    e: np.ndarray
    energy: np.ndarray
    leak_ratio: np.ndarray  # worst |g_hat_k^H w_E|^2 / (|g_hat_k|^2 |w_E|^2) per trial


def _trial_gains(draw: ChannelDraw, pre: PrecoderSet, alloc: Allocation, rho: float):
    a = np.clip(alloc.a, 0.0, 1.0)
    ci = np.sqrt(rho * a[:, None] * np.clip(alloc.eta_i, 0.0, None))  # [M, K]
    ce = np.sqrt(rho * (1.0 - a)[:, None] * np.clip(alloc.eta_e, 0.0, None))  # [M, L]
    g_iu, g_eu = draw.g_iu, draw.g_eu
    # inner products per AP: [M, users, streams]
    hi_i = np.einsum("mnk,mnj->mkj", g_iu.conj(), pre.w_i)
    hi_e = np.einsum("mnk,mnl->mkl", g_iu.conj(), pre.w_e)
    he_i = np.einsum("mnl,mnk->mlk", g_eu.conj(), pre.w_i)
    he_e = np.einsum("mnl,mnj->mlj", g_eu.conj(), pre.w_e)
    b = np.einsum("mkj,mj->kj", hi_i, ci)
    e = np.einsum("mkl,ml->kl", hi_e, ce)
    energy = (
        np.einsum("mlj,mj->l", np.abs(he_e) ** 2, ce**2)
        + np.einsum("mlk,mk->l", np.abs(he_i) ** 2, ci**2)
        + 1.0
    )
    hat_leak = np.abs(np.einsum("mnk,mnl->mkl", draw.g_hat_iu.conj(), pre.w_e)) ** 2
    norms = (np.sum(np.abs(draw.g_hat_iu) ** 2, axis=1)[:, :, None]
             * np.sum(np.abs(pre.w_e) ** 2, axis=1)[:, None, :])
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(norms > 0, hat_leak / norms, 0.0)
    return b, e, energy, float(ratio.max(initial=0.0))


def simulate_gains(
    alloc: Allocation,
    net: NetworkRealization,
    params: SystemParams,
    n_trials: int,
    base_seed: int = 0,
) -> TrialGains:
    """Run ``n_trials`` independent trials; trial ``t`` uses sub-seed ``(base_seed, t)``."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    K, L = params.K_d, params.L
    b = np.empty((n_trials, K, K), dtype=complex)
    e = np.empty((n_trials, K, L), dtype=complex)
    energy = np.empty((n_trials, L))
    leak = np.empty(n_trials)
    for t in range(n_trials):
        attempt = 0
        while True:
            sub = (int(base_seed) << 32) + (t << 4) + attempt
            draw = draw_channels(net, sub, params.N)
            pre = build_precoders(draw, net)
            if pre is not None:
                break
            attempt += 1  # rank-deficient estimate: redraw this trial
            if attempt > 8:
                raise RuntimeError("repeated rank-deficient channel draws")
        b[t], e[t], energy[t], leak[t] = _trial_gains(draw, pre, alloc, params.rho)
    return TrialGains(b, e, energy, leak)


def _sinr_from_gains(b: np.ndarray, e: np.ndarray) -> np.ndarray:
    K = b.shape[1]
    diag = b[:, np.arange(K), np.arange(K)]  # [T, K]
    ds = diag.mean(axis=0)
    bu = np.mean(np.abs(diag - ds) ** 2, axis=0)
    iui = np.mean(np.abs(b) ** 2, axis=0)  # [K, K]
    iui_sum = iui.sum(axis=1) - np.diag(iui)
    eui_sum = np.mean(np.abs(e) ** 2, axis=0).sum(axis=1)
    return np.abs(ds) ** 2 / (bu + iui_sum + eui_sum + 1.0)


def _jackknife(stat, n: int, groups: int = N_JACKKNIFE):
    """Delete-a-group jackknife standard error of ``stat(index_array)``."""
    idx = np.arange(n)
    g = min(groups, n)
    if g < 2:
        return np.full_like(np.asarray(stat(idx), dtype=float), np.inf)
    parts = np.array_split(idx, g)
    loo = np.array([stat(np.concatenate(parts[:i] + parts[i + 1:])) for i in range(g)])
    return np.sqrt((g - 1) / g * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))


@dataclass
class SeEstimate:
    se: np.ndarray
    se_stderr: np.ndarray
    sinr: np.ndarray
    ds: np.ndarray  # |DS_k|^2
    bu: np.ndarray  # Var(BU_k)
    iui: np.ndarray  # sum_k' E|IUI_kk'|^2
    eui: np.ndarray  # sum_l E|EUI_kl|^2
    eui_max_ratio: float


@dataclass
class EnergyEstimate:
    q: np.ndarray
    q_stderr: np.ndarray


def empirical_se_from(gains: TrialGains, params: SystemParams) -> SeEstimate:
    b, e = gains.b, gains.e
    K = b.shape[1]
    n = b.shape[0]
    sinr = _sinr_from_gains(b, e)
    se = se_per_iu(sinr, params)
    err = _jackknife(lambda ix: se_per_iu(_sinr_from_gains(b[ix], e[ix]), params), n)
    diag = b[:, np.arange(K), np.arange(K)]
    ds = diag.mean(axis=0)
    iui = np.mean(np.abs(b) ** 2, axis=0)
    return SeEstimate(
        se=se,
        se_stderr=err,
        sinr=sinr,
        ds=np.abs(ds) ** 2,
        bu=np.mean(np.abs(diag - ds) ** 2, axis=0),
        iui=iui.sum(axis=1) - np.diag(iui),
        eui=np.mean(np.abs(e) ** 2, axis=0).sum(axis=1),
        eui_max_ratio=float(gains.leak_ratio.max(initial=0.0)),
    )


def empirical_energy_from(gains: TrialGains, params: SystemParams) -> EnergyEstimate:
    scale = params.dl_symbols * params.noise_power
    n = gains.energy.shape[0]
    q = scale * gains.energy.mean(axis=0)
    if n > 1:
        err = scale * gains.energy.std(axis=0, ddof=1) / np.sqrt(n)
    else:
        err = np.full_like(q, np.inf)
    return EnergyEstimate(q, err)


def empirical_se(alloc, net, params, n_trials: int, base_seed: int = 0) -> SeEstimate:
    return empirical_se_from(simulate_gains(alloc, net, params, n_trials, base_seed), params)


def empirical_energy(alloc, net, params, n_trials: int, base_seed: int = 0) -> EnergyEstimate:
    return empirical_energy_from(simulate_gains(alloc, net, params, n_trials, base_seed), params)


@dataclass
class ValidationRow:
    config: str
    quantity: str
    index: int
    n_trials: int
    closed_form: float
    empirical: float
    stderr: float

    @property
    def rel_error(self) -> float:
        if self.closed_form == 0.0:
            return abs(self.empirical)
        return abs(self.empirical - self.closed_form) / abs(self.closed_form)


VALIDATION_HEADER = "# validation csv v1"
VALIDATION_FIELDS = ("config", "quantity", "index", "n_trials", "closed_form", "empirical", "stderr", "rel_error")


def compare(alloc, net, params, n_trials: int, base_seed: int = 0, config: str = "reference") -> list[ValidationRow]:
    """Closed forms versus simulation for every IU SE, EU energy and the EU leakage term."""
    gains = simulate_gains(alloc, net, params, n_trials, base_seed)
    se_mc = empirical_se_from(gains, params)
    q_mc = empirical_energy_from(gains, params)
    se_cf = se_per_iu(sinr_closed_form(alloc, net, params), params)
    q_cf = q_closed_form(alloc, net, params)
    rows = [ValidationRow(config, "se_bpsHz", k, n_trials, float(se_cf[k]), float(se_mc.se[k]), float(se_mc.se_stderr[k]))
            for k in range(params.K_d)]
    rows += [ValidationRow(config, "q_Wsym", l, n_trials, float(q_cf[l]), float(q_mc.q[l]), float(q_mc.q_stderr[l]))
             for l in range(params.L)]
    rows += [ValidationRow(config, "eui_max_ratio", -1, n_trials, 0.0, se_mc.eui_max_ratio, 0.0)]
    return rows


def write_validation_csv(rows: list[ValidationRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(VALIDATION_HEADER + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(VALIDATION_FIELDS)
        for r in rows:
            w.writerow([r.config, r.quantity, r.index, r.n_trials, repr(r.closed_form), repr(r.empirical),
                        repr(r.stderr), repr(r.rel_error)])
