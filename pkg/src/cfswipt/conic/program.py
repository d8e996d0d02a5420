"""Canonical cone program and its solution record.

The primal problem is::

    minimize    c^T x
    subject to  A x = b
                s = h - G x  in  K = K_1 x ... x K_r

where each ``K_i`` is one of ``nonneg(d)``, ``soc(d)`` (``s0 >= |s[1:]|``),
``rsoc(d)`` (``2 s0 s1 >= |s[2:]|^2``, ``s0, s1 >= 0``) or ``exp``
(``closure{(x, y, z): y > 0, y exp(x/y) <= z}``), laid out consecutively
over the rows of ``G``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

CONE_KINDS = ("nonneg", "soc", "rsoc", "exp")
MIN_DIM = {"nonneg": 1, "soc": 2, "rsoc": 3, "exp": 3}


@dataclass(frozen=True)
class Cone:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in CONE_KINDS:
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.dim < MIN_DIM[self.kind] or (self.kind == "exp" and self.dim != 3):
            raise ValueError(f"bad dimension {self.dim} for {self.kind} cone")


@dataclass
class ConicProgram:
    c: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    cones: list[Cone]
    A: sp.csr_matrix | None = None
    b: np.ndarray | None = None
    var_bounds: tuple[np.ndarray, np.ndarray] | None = None
    var_names: list[str] | None = field(default=None, compare=False)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        self.G = sp.csr_matrix(self.G, shape=(len(self.h), n)) if self.G is not None else sp.csr_matrix((0, n))
        self.h = np.asarray(self.h, dtype=float)
        if self.A is None:
            self.A = sp.csr_matrix((0, n))
            self.b = np.zeros(0)
        else:
            self.A = sp.csr_matrix(self.A)
            self.b = np.asarray(self.b, dtype=float)
        self.cones = [c if isinstance(c, Cone) else Cone(*c) for c in self.cones]
        self.validate()

    @property
    def n_vars(self) -> int:
        return self.c.size

    def validate(self) -> None:
        n = self.n_vars
        if self.G.shape[1] != n or self.A.shape[1] != n:
            raise ValueError("constraint matrices must have n_vars columns")
        if self.G.shape[0] != self.h.size or self.A.shape[0] != self.b.size:
            raise ValueError("row counts of G/h or A/b differ")
        if sum(c.dim for c in self.cones) != self.h.size:
            raise ValueError("cone dimensions must cover the rows of G exactly")
        if self.var_bounds is not None:
            lo, hi = (np.asarray(v, dtype=float) for v in self.var_bounds)
            if lo.shape != (n,) or hi.shape != (n,) or np.any(lo > hi):
                raise ValueError("var_bounds must be two length-n arrays with lo <= hi")
            self.var_bounds = (lo, hi)
        for arr in (self.c, self.h, self.b, self.G.data, self.A.data):
            if not np.all(np.isfinite(arr)):
                raise ValueError("program data must be finite")

    def with_bounds_as_cones(self) -> "ConicProgram":
        """Equivalent program with ``var_bounds`` moved into nonneg rows."""
        if self.var_bounds is None:
            return self
        lo, hi = self.var_bounds
        n = self.n_vars
        rows, rhs = [], []
        eye = sp.identity(n, format="csr")
        fin_lo = np.flatnonzero(np.isfinite(lo))
        fin_hi = np.flatnonzero(np.isfinite(hi))
        # x >= lo  <=>  -x + s = -lo ;  x <= hi  <=>  x + s = hi
        if fin_lo.size:
            rows.append(-eye[fin_lo])
            rhs.append(-lo[fin_lo])
        if fin_hi.size:
            rows.append(eye[fin_hi])
            rhs.append(hi[fin_hi])
        if not rows:
            return ConicProgram(self.c, self.G, self.h, list(self.cones), self.A, self.b, None, self.var_names)
        extra = sp.vstack(rows, format="csr")
        return ConicProgram(
            self.c,
            sp.vstack([self.G, extra], format="csr"),
            np.concatenate([self.h] + rhs),
            list(self.cones) + [Cone("nonneg", extra.shape[0])],
            self.A,
            self.b,
            None,
            self.var_names,
        )

    def dump(self, path: str | Path | None = None) -> str:
        """Sparse triplet text dump (0-based indices, ``repr`` floats)."""
        lines = ["# conic program triplet v1", f"n {self.n_vars} p {self.A.shape[0]} m {self.G.shape[0]}"]
        lines += [f"c {i} {v!r}" for i, v in enumerate(self.c.tolist()) if v != 0.0]
        for tag, mat in (("A", self.A), ("G", self.G)):
            coo = mat.tocoo()
            order = np.lexsort((coo.col, coo.row))
            lines += [f"{tag} {coo.row[k]} {coo.col[k]} {float(coo.data[k])!r}" for k in order]
        lines += [f"b {i} {v!r}" for i, v in enumerate(self.b.tolist()) if v != 0.0]
        lines += [f"h {i} {v!r}" for i, v in enumerate(self.h.tolist()) if v != 0.0]
        lines += [f"cone {c.kind} {c.dim}" for c in self.cones]
        if self.var_bounds is not None:
            lo, hi = self.var_bounds
            lines += [f"bound {j} {lo[j]!r} {hi[j]!r}" for j in range(self.n_vars)]
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def load(cls, text_or_path: str | Path) -> "ConicProgram":
        text = str(text_or_path)
        if "\n" not in text:
            text = Path(text).read_text()
        n = p = m = 0
        c = b = h = None
        trip = {"A": ([], [], []), "G": ([], [], [])}
        cones, bounds = [], {}
        for raw in text.splitlines():
            parts = raw.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            if tag == "n":
                n, p, m = int(parts[1]), int(parts[3]), int(parts[5])
                c, b, h = np.zeros(n), np.zeros(p), np.zeros(m)
            elif tag in ("c", "b", "h"):
                {"c": c, "b": b, "h": h}[tag][int(parts[1])] = float(parts[2])
            elif tag in trip:
                r, cc, v = trip[tag]
                r.append(int(parts[1]))
                cc.append(int(parts[2]))
                v.append(float(parts[3]))
            elif tag == "cone":
                cones.append(Cone(parts[1], int(parts[2])))
            elif tag == "bound":
                bounds[int(parts[1])] = (float(parts[2]), float(parts[3]))
            else:
                raise ValueError(f"unrecognised line: {raw!r}")
        A = sp.csr_matrix((trip["A"][2], (trip["A"][0], trip["A"][1])), shape=(p, n))
        G = sp.csr_matrix((trip["G"][2], (trip["G"][0], trip["G"][1])), shape=(m, n))
        vb = None
        if bounds:
            lo = np.array([bounds[j][0] for j in range(n)])
            hi = np.array([bounds[j][1] for j in range(n)])
            vb = (lo, hi)
        return cls(c, G, h, cones, A if p else None, b if p else None, vb)


@dataclass
class ConicSolution:
    status: str  # optimal | primal_infeasible | dual_infeasible | max_iter | numerical
    x: np.ndarray
    objective_value: float
    primal_residual: float
    dual_residual: float
    duality_gap: float
    iterations: int
    y: np.ndarray | None = None
    z: np.ndarray | None = None
    s: np.ndarray | None = None
    solve_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == "optimal"

    @property
    def usable(self) -> bool:
        """Optimal, or stalled within a hundred times the requested tolerance."""
        return self.status in ("optimal", "optimal_inaccurate")
