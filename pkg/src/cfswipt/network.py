"""Random network drops and large-scale channel statistics."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .params import SystemParams

D_MIN = 1.0  # metres; path-loss reference distance, used as the clamp
SHADOW_DECORR_M = 9.0
SHADOW_AP_SHARE = 0.5


@dataclass(frozen=True)
class NetworkRealization:
    ap_positions: np.ndarray
    iu_positions: np.ndarray
    eu_positions: np.ndarray
    seed: int
    area_side: float
    beta_iu: np.ndarray | None = None
    beta_eu: np.ndarray | None = None
    gamma_iu: np.ndarray | None = None
    gamma_eu: np.ndarray | None = None

    @property
    def M(self) -> int:
        return len(self.ap_positions)

    @property
    def K_d(self) -> int:
        return len(self.iu_positions)

    @property
    def L(self) -> int:
        return len(self.eu_positions)

    @property
    def ue_positions(self) -> np.ndarray:
        return np.vstack([self.iu_positions, self.eu_positions])

    def with_perfect_csi(self) -> "NetworkRealization":
        """Copy with gamma forced equal to beta (zero estimation error)."""
        return replace(self, gamma_iu=self.beta_iu.copy(), gamma_eu=self.beta_eu.copy())

    def to_json(self) -> str:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        payload = {
            "seed": int(self.seed),
            "area_side": float(self.area_side),
            "ap_positions": arr(self.ap_positions),
            "iu_positions": arr(self.iu_positions),
            "eu_positions": arr(self.eu_positions),
            "beta_iu": arr(self.beta_iu),
            "beta_eu": arr(self.beta_eu),
            "gamma_iu": arr(self.gamma_iu),
            "gamma_eu": arr(self.gamma_eu),
        }
        return json.dumps(payload, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "NetworkRealization":
        d = json.loads(text)

        def arr(key, ncol=None):
            v = d[key]
            if v is None:
                return None
            a = np.asarray(v, dtype=float)
            if a.size == 0 and ncol is not None:
                a = a.reshape(0, ncol)
            return a

        return cls(
            ap_positions=arr("ap_positions", 2),
            iu_positions=arr("iu_positions", 2),
            eu_positions=arr("eu_positions", 2),
            seed=int(d["seed"]),
            area_side=float(d["area_side"]),
            beta_iu=arr("beta_iu"),
            beta_eu=arr("beta_eu"),
            gamma_iu=arr("gamma_iu"),
            gamma_eu=arr("gamma_eu"),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "NetworkRealization":
        return cls.from_json(Path(path).read_text())


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), stream])


def generate_topology(params: SystemParams, seed: int) -> NetworkRealization:
    """Uniform AP, IU and EU positions over the square ``[0, area_side)^2``."""
    rng = _rng(seed, 0)
    side = params.area_side

    def draw(n):
        # uniform on [0, side); the modulo guards the measure-zero endpoint
        return np.mod(rng.uniform(0.0, side, size=(n, 2)), side)

    return NetworkRealization(
        ap_positions=draw(params.M),
        iu_positions=draw(params.K_d),
        eu_positions=draw(params.L),
        seed=int(seed),
        area_side=float(side),
    )


def torus_distance(p: np.ndarray, q: np.ndarray, side: float) -> np.ndarray:
    """Pairwise wrap-around distances between point sets ``p`` [n,2] and ``q`` [m,2]."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    diff = np.abs(p[:, None, :] - q[None, :, :])
    diff = np.minimum(diff, side - diff)
    return np.sqrt(np.sum(diff**2, axis=-1))


def path_loss_db(distance):
    """Path loss ``-30.5 - 36.7 log10(d / 1 m)``; distances below 1 m are clamped."""
    d = np.maximum(np.asarray(distance, dtype=float), D_MIN)
    out = -30.5 - 36.7 * np.log10(d / 1.0)
    return float(out) if out.ndim == 0 else out


def _exp2_cov(points: np.ndarray, side: float, sigma: float) -> np.ndarray:
    d = torus_distance(points, points, side)
    return sigma**2 * 2.0 ** (-d / SHADOW_DECORR_M)


def _gauss_field(cov: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # eigh tolerates the near-singular covariances of clustered points
    w, v = np.linalg.eigh(cov)
    return v @ (np.sqrt(np.clip(w, 0.0, None)) * rng.standard_normal(len(w)))


def draw_shadowing(topology: NetworkRealization, params: SystemParams, seed: int) -> np.ndarray:
    """Shadowing in dB, shape ``[M, K_d + L]`` (IU columns first).

    ``shadow_mode="independent"`` gives i.i.d. ``N(0, sigma^2)`` entries.
    ``"correlated"`` mixes an AP field and a UE field,
    ``F_mk = sqrt(d) a_m + sqrt(1-d) b_k``, each with covariance
    ``sigma^2 2^(-dist / 9 m)``.
    """
    rng = _rng(seed, 1)
    M = topology.M
    K = topology.K_d + topology.L
    sigma = params.shadow_sigma_db
    if sigma == 0.0:
        return np.zeros((M, K))
    if params.shadow_mode == "independent":
        return rng.normal(0.0, sigma, size=(M, K))
    side = topology.area_side
    a = _gauss_field(_exp2_cov(topology.ap_positions, side, sigma), rng)
    b = _gauss_field(_exp2_cov(topology.ue_positions, side, sigma), rng)
    return np.sqrt(SHADOW_AP_SHARE) * a[:, None] + np.sqrt(1.0 - SHADOW_AP_SHARE) * b[None, :]


def compute_large_scale(
    topology: NetworkRealization, shadowing: np.ndarray, params: SystemParams
) -> NetworkRealization:
    K_d = topology.K_d
    shadowing = np.asarray(shadowing, dtype=float)
    expected = (topology.M, K_d + topology.L)
    if shadowing.shape != expected:
        raise ValueError(f"shadowing shape {shadowing.shape} != {expected}")
    d = torus_distance(topology.ap_positions, topology.ue_positions, topology.area_side)
    beta = 10.0 ** (path_loss_db(d) / 10.0) * 10.0 ** (shadowing / 10.0)
    beta = np.atleast_2d(beta).reshape(expected)
    return replace(topology, beta_iu=beta[:, :K_d], beta_eu=beta[:, K_d:])


def mmse_variance(beta, tau: int, rho_t: float):
    """MMSE estimate variance ``tau rho_t beta^2 / (tau rho_t beta + 1)``."""
    beta = np.asarray(beta, dtype=float)
    snr = tau * rho_t
    return snr * beta**2 / (snr * beta + 1.0)


def estimation_variances(realization: NetworkRealization, params: SystemParams) -> NetworkRealization:
    return replace(
        realization,
        gamma_iu=mmse_variance(realization.beta_iu, params.tau, params.rho_t),
        gamma_eu=mmse_variance(realization.beta_eu, params.tau, params.rho_t),
    )


def generate_network(params: SystemParams, seed: int) -> NetworkRealization:
    """One full drop: topology, shadowing, beta and gamma."""
    topo = generate_topology(params, seed)
    shadow = draw_shadowing(topo, params, seed)
    return estimation_variances(compute_large_scale(topo, shadow, params), params)
