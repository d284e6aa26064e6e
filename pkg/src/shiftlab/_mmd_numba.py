"""Numba kernels for the pairwise-kernel hot loops.

Scalar accumulation in row-major order; sequential (no prange) so the
summation order is fixed and results are bitwise reproducible.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _grid_sum(A, B, gamma):
    total = 0.0
    for i in range(A.shape[0]):
        for j in range(B.shape[0]):
            d2 = 0.0
            for k in range(A.shape[1]):
                t = A[i, k] - B[j, k]
                d2 += t * t
            total += np.exp(-gamma * d2)
    return total


def kernel_sums(A: np.ndarray, B: np.ndarray, sigma: float):
    """Full-grid RBF kernel sums (S_AA, S_BB, S_AB) at bandwidth sigma."""
    gamma = 1.0 / (2.0 * sigma * sigma)
    return (
        float(_grid_sum(A, A, gamma)),
        float(_grid_sum(B, B, gamma)),
        float(_grid_sum(A, B, gamma)),
    )


@njit(cache=True)
def _condensed(Z):
    m = Z.shape[0]
    out = np.empty(m * (m - 1) // 2)
    idx = 0
    for i in range(m):
        for j in range(i + 1, m):
            d2 = 0.0
            for k in range(Z.shape[1]):
                t = Z[i, k] - Z[j, k]
                d2 += t * t
            out[idx] = np.sqrt(d2)
            idx += 1
    return out


def pairwise_distances_condensed(Z: np.ndarray) -> np.ndarray:
    """Euclidean distances for all i<j pairs, row-major upper-triangle order."""
    if Z.shape[0] < 2:
        return np.empty(0)
    return _condensed(Z)
