"""Small dense symmetric eigenproblems via cyclic Jacobi rotations.

The intrinsic Hessians here are at most a few rows, so a short
textbook Jacobi sweep is plenty and keeps the decomposition
deterministic across platforms.
"""

import math

import numpy as np


def jacobi_eigh(matrix, off_tol=1e-12, max_sweeps=64):
    """Eigen-decomposition of a symmetric matrix.

    Returns (w, V) with eigenvalues `w` ascending and eigenvectors in the
    columns of `V`. Sweeps stop once the off-diagonal Frobenius norm falls
    below `off_tol`. Eigenvector signs are fixed so the entry of largest
    magnitude is positive.
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if not np.allclose(a, a.T, atol=1e-10 * max(1.0, np.abs(a).max())):
        raise ValueError("matrix must be symmetric")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    off_mask = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = math.sqrt((a[off_mask] ** 2).sum())
        if off <= off_tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= off_tol / (n * n):
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (
                    abs(theta) + math.sqrt(theta * theta + 1.0)
                )
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    w = w[order]
    v = v[:, order]
    for j in range(n):
        k = int(np.argmax(np.abs(v[:, j])))
        if v[k, j] < 0.0:
            v[:, j] = -v[:, j]
    return w, v


def sym_inverse_sqrt(gram, floor=1e-14):
    """G^{-1/2} for a symmetric positive definite matrix."""
    w, v = jacobi_eigh(gram)
    if w[0] <= floor:
        raise ValueError("matrix is not positive definite")
    return (v * (1.0 / np.sqrt(w))) @ v.T


def operator_norm(matrix):
    """Spectral norm of a small dense matrix."""
    return float(np.linalg.norm(np.asarray(matrix, dtype=float), 2))
