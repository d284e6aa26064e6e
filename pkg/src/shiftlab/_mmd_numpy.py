"""Pure-numpy fallback for the pairwise-kernel hot loops.

Row blocks of the kernel grid are evaluated with the usual
|x|^2 + |y|^2 - 2xy expansion and reduced in a fixed row-major block
order, so repeated runs are bitwise reproducible.
"""
import numpy as np

_BLOCK = 256


def _grid_sum(A: np.ndarray, B: np.ndarray, gamma: float) -> float:
    # sum over the full n_a x n_b RBF kernel grid, diagonal included
    bn = np.einsum("ij,ij->i", B, B)
    bt = B.T
    total = 0.0
    for i0 in range(0, A.shape[0], _BLOCK):
        blk = A[i0 : i0 + _BLOCK]
        d2 = np.einsum("ij,ij->i", blk, blk)[:, None] + bn[None, :] - 2.0 * (blk @ bt)
        np.maximum(d2, 0.0, out=d2)
        total += float(np.exp(-gamma * d2).sum())
    return total


def kernel_sums(A: np.ndarray, B: np.ndarray, sigma: float):
    """Full-grid RBF kernel sums (S_AA, S_BB, S_AB) at bandwidth sigma."""
    gamma = 1.0 / (2.0 * sigma * sigma)
    return _grid_sum(A, A, gamma), _grid_sum(B, B, gamma), _grid_sum(A, B, gamma)


def pairwise_distances_condensed(Z: np.ndarray) -> np.ndarray:
    """Euclidean distances for all i<j pairs, row-major upper-triangle order."""
    m = Z.shape[0]
    zn = np.einsum("ij,ij->i", Z, Z)
    zt = Z.T
    chunks = []
    for i0 in range(0, m, _BLOCK):
        i1 = min(i0 + _BLOCK, m)
        blk = Z[i0:i1]
        d2 = zn[i0:i1, None] + zn[None, :] - 2.0 * (blk @ zt)
        np.maximum(d2, 0.0, out=d2)
        d = np.sqrt(d2)
        for r, i in enumerate(range(i0, i1)):
            chunks.append(d[r, i + 1 :])
    if not chunks:
        return np.empty(0)
    return np.concatenate(chunks)
