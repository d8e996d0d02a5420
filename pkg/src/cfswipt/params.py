"""System constants and their validation.

All powers are in watts; SNRs used by the formulas are normalized by the
noise power (``rho = p_ap / noise_power``).
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


NOISE_POWER_W = dbm_to_watt(-92.0)


@dataclass(frozen=True)
class SystemParams:
    """Scalar constants for one simulated network.

    ``tau`` defaults to ``K_d + L`` (the shortest orthogonal pilot length) and
    ``he_targets`` to 100 uW for every energy user.
    """

    M: int = 16
    N: int = 10
    K_d: int = 3
    L: int = 5
    tau_c: int = 200
    tau: int | None = None
    p_ap: float = 1.0
    p_pilot: float = 0.2
    noise_power: float = NOISE_POWER_W
    area_side: float = 500.0
    xi: float = 150.0
    chi: float = 0.014
    phi: float = 0.024
    se_target: float = 1.0
    he_targets: tuple[float, ...] | float = 100e-6
    sca_tol: float = 1e-5
    shadow_sigma_db: float = 4.0
    shadow_mode: str = "independent"

    def __post_init__(self) -> None:
        if self.tau is None:
            object.__setattr__(self, "tau", self.K_d + self.L)
        he = self.he_targets
        if isinstance(he, (int, float)):
            he = (float(he),) * self.L
        object.__setattr__(self, "he_targets", tuple(float(v) for v in he))
        self.validate()

    def validate(self) -> None:
        for name in ("M", "N", "tau_c", "tau"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.K_d < 0 or self.L < 0:
            raise ValueError("K_d and L must be non-negative")
        if self.tau < self.K_d + self.L:
            raise ValueError("tau must be >= K_d + L for orthogonal pilots")
        if self.tau >= self.tau_c:
            raise ValueError("tau must be < tau_c")
        if self.N <= self.K_d:
            raise ValueError("N must exceed K_d for partial zero-forcing")
        for name in ("p_ap", "p_pilot", "noise_power", "area_side", "xi", "chi", "phi", "sca_tol"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0")
        if self.se_target < 0 or self.shadow_sigma_db < 0:
            raise ValueError("se_target and shadow_sigma_db must be >= 0")
        if len(self.he_targets) != self.L:
            raise ValueError(f"he_targets must have length L={self.L}")
        if any(g < 0 for g in self.he_targets):
            raise ValueError("he_targets must be >= 0")
        if self.shadow_mode not in ("independent", "correlated"):
            raise ValueError("shadow_mode must be 'independent' or 'correlated'")
        if not (math.isfinite(self.rho) and math.isfinite(self.rho_t)):
            raise ValueError("normalized SNRs must be finite")

    @property
    def rho(self) -> float:
        """Normalized downlink SNR."""
        return self.p_ap / self.noise_power

    @property
    def rho_t(self) -> float:
        """Normalized pilot SNR."""
        return self.p_pilot / self.noise_power

    @property
    def dl_fraction(self) -> float:
        """Share of the coherence block used for downlink, ``1 - tau/tau_c``."""
        return 1.0 - self.tau / self.tau_c

    @property
    def dl_symbols(self) -> int:
        return self.tau_c - self.tau

    def replace(self, **changes: Any) -> "SystemParams":
        # tau and he_targets follow K_d/L unless given explicitly
        if ("K_d" in changes or "L" in changes) and "tau" not in changes:
            changes["tau"] = changes.get("K_d", self.K_d) + changes.get("L", self.L)
        if "L" in changes and "he_targets" not in changes:
            uniform = set(self.he_targets)
            if len(uniform) > 1:
                raise ValueError("cannot resize non-uniform he_targets implicitly")
            changes["he_targets"] = uniform.pop() if uniform else 100e-6
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["he_targets"] = list(self.he_targets)
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SystemParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown SystemParams keys: {sorted(unknown)}")
        data = dict(data)
        if isinstance(data.get("he_targets"), list):
            data["he_targets"] = tuple(data["he_targets"])
        return cls(**data)


def load_params(path: str | Path) -> SystemParams:
    """Read a JSON config whose keys mirror :class:`SystemParams` fields."""
    with open(path) as fh:
        return SystemParams.from_dict(json.load(fh))
