"""Exponential-penalty primitives shared by the online solvers.

The solvers never touch the true worst-case packing violation directly.
They work with a smooth log-sum-exp estimate of it,

    smooth_max(P, x) = ln sum_k exp((P x)_k),

which sits within ln m of the exact maximum, and with its gradient, the
per-variable growth rates that drive the multiplicative updates.  Both are
evaluated with the usual shift trick (subtract the largest exponent) so
they stay finite right up to the solvers' failure boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PackingSystem",
    "CoveringRow",
    "smooth_max",
    "smooth_max_and_rates",
    "rates",
    "step_size",
    "violation",
]


@dataclass(frozen=True)
class PackingSystem:
    """Offline packing constraints ``P x <= lambda``, coefficients >= 0."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        p = np.ascontiguousarray(np.asarray(self.matrix, dtype=np.float64))
        if p.ndim != 2 or p.size == 0:
            raise ValueError("packing matrix must be a nonempty 2-d array")
        if not np.all(np.isfinite(p)):
            raise ValueError("packing coefficients must be finite")
        if np.any(p < 0):
            raise ValueError("packing coefficients must be nonnegative")
        if not np.any(p > 0):
            raise ValueError("packing matrix needs at least one positive entry")
        object.__setattr__(self, "matrix", p)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    @property
    def d(self) -> int:
        """Largest number of nonzeros in any packing row."""
        return int(np.count_nonzero(self.matrix, axis=1).max())

    @property
    def rho(self) -> float:
        """Ratio of the largest to the smallest strictly positive coefficient."""
        pos = self.matrix[self.matrix > 0]
        return float(pos.max() / pos.min())

    def column_nonzeros(self) -> np.ndarray:
        return np.count_nonzero(self.matrix, axis=0)

    def scaled(self, gamma: float) -> np.ndarray:
        if gamma <= 0:
            raise ValueError("scaling parameter must be positive")
        return self.matrix / gamma


@dataclass(frozen=True)
class CoveringRow:
    """One online covering constraint ``sum_j c_j x_j >= 1`` (sparse, c_j > 0)."""

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        val = np.asarray(self.values, dtype=np.float64).ravel()
        if idx.size == 0:
            raise ValueError("covering row must have at least one entry")
        if idx.size != val.size:
            raise ValueError("covering row indices/values length mismatch")
        if np.unique(idx).size != idx.size:
            raise ValueError("covering row has duplicate column indices")
        if np.any(idx < 0):
            raise ValueError("covering row indices must be nonnegative")
        if not np.all(np.isfinite(val)) or np.any(val <= 0):
            raise ValueError("covering coefficients must be finite and positive")
        order = np.argsort(idx)
        object.__setattr__(self, "indices", np.ascontiguousarray(idx[order]))
        object.__setattr__(self, "values", np.ascontiguousarray(val[order]))

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    @property
    def max_coeff(self) -> float:
        return float(self.values.max())

    @property
    def min_coeff(self) -> float:
        return float(self.values.min())

    def coverage(self, x: np.ndarray) -> float:
        """Value of the row at ``x``."""
        return float(self.values @ np.asarray(x, dtype=np.float64)[self.indices])


def _as_matrix(p: PackingSystem | np.ndarray) -> np.ndarray:
    return p.matrix if isinstance(p, PackingSystem) else np.asarray(p, dtype=np.float64)


def _check_dims(pt: np.ndarray, x: np.ndarray) -> None:
    if pt.ndim != 2 or x.ndim != 1 or pt.shape[1] != x.shape[0]:
        raise ValueError(
            f"dimension mismatch: matrix {pt.shape} vs vector {x.shape}"
        )


def smooth_max(pt: PackingSystem | np.ndarray, x: np.ndarray) -> float:
    """Log-sum-exp over the rows of ``pt @ x``.

    Bounded below by the exact row maximum and above by it plus ln m.
    """
    pt = _as_matrix(pt)
    x = np.asarray(x, dtype=np.float64)
    _check_dims(pt, x)
    v = pt @ x
    hi = v.max()
    return float(hi + np.log(np.exp(v - hi).sum()))


def smooth_max_and_rates(
    pt: PackingSystem | np.ndarray, x: np.ndarray
) -> tuple[float, np.ndarray]:
    """One-pass smooth max and its gradient, sharing the shifted normalizer."""
    pt = _as_matrix(pt)
    x = np.asarray(x, dtype=np.float64)
    _check_dims(pt, x)
    v = pt @ x
    hi = v.max()
    w = np.exp(v - hi)
    s = w.sum()
    return float(hi + np.log(s)), (w @ pt) / s


def rates(pt: PackingSystem | np.ndarray, x: np.ndarray) -> np.ndarray:
    """Growth rate of ``smooth_max`` per variable: softmax-weighted column sums."""
    return smooth_max_and_rates(pt, x)[1]


def step_size(row: CoveringRow, rate_vec: np.ndarray, mu: float) -> float:
    """Update scale for one covering row.

    Chosen so the multiplier ``1 + eps * c_j / rate_j`` never exceeds ``mu``
    over the row, with equality at the argmin.  Variables carrying no packing
    weight (rate 0) are excluded; they are incremented directly elsewhere.
    """
    rate_vec = np.asarray(rate_vec, dtype=np.float64)
    r = rate_vec[row.indices]
    mask = r > 0
    if not mask.any():
        raise ValueError("covering row has no overlap with any packing constraint")
    return float((mu - 1.0) * np.min(r[mask] / row.values[mask]))


def violation(p: PackingSystem | np.ndarray, x: np.ndarray) -> float:
    """Exact worst packing row value ``max_k (P x)_k``."""
    pm = _as_matrix(p)
    x = np.asarray(x, dtype=np.float64)
    _check_dims(pm, x)
    return float((pm @ x).max())
