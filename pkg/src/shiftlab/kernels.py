"""Two-sample distribution-gap statistics.

RBF kernel, the biased and unbiased squared-MMD estimators, the
median-heuristic bandwidth, and the first/second raw-moment distance
used by moment-matching adaptation. All estimators cast inputs to
float64 and reduce in a fixed order, so a given backend is bitwise
reproducible run to run.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _mmd_numpy
from .backend import BACKEND

if BACKEND == "numba":
    from . import _mmd_numba as _impl
else:
    _impl = _mmd_numpy

MODALITIES = ("image_high", "image_low", "question_semantic", "question_syntax", "generic")


@dataclass(frozen=True)
class KernelConfig:
    """RBF kernel with an explicit bandwidth or the "median" sentinel."""

    kind: str = "rbf"
    bandwidth: float | str = "median"

    def __post_init__(self):
        if self.kind != "rbf":
            raise ValueError(f"unsupported kernel kind {self.kind!r}")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "median":
                raise ValueError(f"bandwidth must be positive or 'median', got {self.bandwidth!r}")
        elif not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")


@dataclass(frozen=True)
class FeatureMatrix:
    """n x d matrix of per-sample embeddings with a modality tag."""

    values: np.ndarray
    modality: str = "generic"
    provenance: str = ""

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise ValueError(f"values must be 2-D (n, d), got shape {v.shape}")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"need n >= 1 and d >= 1, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        if self.modality not in MODALITIES:
            raise ValueError(f"unknown modality {self.modality!r}")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def _as_f64(X) -> np.ndarray:
    v = X.values if isinstance(X, FeatureMatrix) else np.asarray(X)
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    if v.ndim != 2:
        raise ValueError(f"expected a sample matrix, got shape {v.shape}")
    return np.ascontiguousarray(v)


def _check_dims(A: np.ndarray, B: np.ndarray) -> None:
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")


def rbf_kernel(x, y, sigma: float) -> float:
    """exp(-|x-y|^2 / (2 sigma^2)) for two same-dimension vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    diff = x - y
    return float(np.exp(-float(diff @ diff) / (2.0 * sigma * sigma)))


def median_bandwidth(X, Y) -> float:
    """Median pairwise Euclidean distance over the pooled samples.

    Self-distances (exact zeros on the diagonal) are excluded; if the
    median is still 0 (all points identical) returns 1.0.
    """
    A, B = _as_f64(X), _as_f64(Y)
    _check_dims(A, B)
    pooled = np.concatenate([A, B], axis=0)
    if pooled.shape[0] < 2:
        raise ValueError("need at least 2 pooled samples")
    dists = _impl.pairwise_distances_condensed(pooled)
    med = float(np.median(dists))
    return med if med > 0 else 1.0


def _resolve_sigma(A: np.ndarray, B: np.ndarray, k: KernelConfig | None) -> float:
    if k is None:
        k = KernelConfig()
    if isinstance(k.bandwidth, str):
        return median_bandwidth(A, B)
    return float(k.bandwidth)


def mmd_squared_biased(X, Y, k: KernelConfig | None = None) -> float:
    """Biased squared-MMD estimate (the V-statistic expansion).

    (1/ns^2) sum k(xi,xj) + (1/nt^2) sum k(yi,yj) - (2/(ns nt)) sum k(xi,yj);
    negative values within 1e-12 of zero (rounding) are clamped to 0.
    """
    A, B = _as_f64(X), _as_f64(Y)
    _check_dims(A, B)
    sigma = _resolve_sigma(A, B, k)
    ns, nt = A.shape[0], B.shape[0]
    sxx, syy, sxy = _impl.kernel_sums(A, B, sigma)
    val = sxx / (ns * ns) + syy / (nt * nt) - 2.0 * sxy / (ns * nt)
    if -1e-12 < val < 0.0:
        val = 0.0
    return float(val)


def mmd_squared_unbiased(X, Y, k: KernelConfig | None = None) -> float:
    """Unbiased squared-MMD estimate (U-statistic, diagonals removed).

    May be slightly negative. Diagonal kernel values are exactly 1 for
    the RBF kernel, so they are removed by subtracting the sample count.
    """
    A, B = _as_f64(X), _as_f64(Y)
    _check_dims(A, B)
    ns, nt = A.shape[0], B.shape[0]
    if ns < 2 or nt < 2:
        raise ValueError(f"need at least 2 samples per set, got {ns} and {nt}")
    sigma = _resolve_sigma(A, B, k)
    sxx, syy, sxy = _impl.kernel_sums(A, B, sigma)
    return float(
        (sxx - ns) / (ns * (ns - 1))
        + (syy - nt) / (nt * (nt - 1))
        - 2.0 * sxy / (ns * nt)
    )


def moment_distance(X, Y) -> float:
    """|m1(X)-m1(Y)|_2^2 + |m2(X)-m2(Y)|_F^2 over first/second raw moments."""
    A, B = _as_f64(X), _as_f64(Y)
    _check_dims(A, B)
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise ValueError("empty input")
    dmu = A.mean(axis=0) - B.mean(axis=0)
    dm2 = A.T @ A / A.shape[0] - B.T @ B / B.shape[0]
    return float(dmu @ dmu + np.sum(dm2 * dm2))


def zscore(X: FeatureMatrix) -> FeatureMatrix:
    """Per-dimension z-score; constant dimensions map to 0.

    Optional preprocessing for the gap reports — MMD itself applies no
    normalization by default.
    """
    v = np.asarray(X.values, dtype=np.float64)
    mu = v.mean(axis=0)
    sd = v.std(axis=0)
    sd[sd == 0] = 1.0
    return FeatureMatrix((v - mu) / sd, modality=X.modality, provenance=X.provenance)
