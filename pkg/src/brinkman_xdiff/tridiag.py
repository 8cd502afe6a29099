"""Thomas algorithm for tridiagonal systems.

The factorization is split from the solve so constant operators are factored
once.  For M-matrices (nonpositive off-diagonals, positive pivots) every
arithmetic step combines nonnegative quantities, so nonnegative right-hand
sides give nonnegative solutions in floating point as well.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _factor(lower, diag, upper):
    m = diag.shape[0]
    cp = np.empty(max(m - 1, 0))
    den = np.empty(m)
    den[0] = diag[0]
    for k in range(m - 1):
        cp[k] = upper[k] / den[k]
        den[k + 1] = diag[k + 1] - lower[k] * cp[k]
    return cp, den


@njit(cache=True)
def _solve(lower, cp, den, rhs):
    m, ncol = rhs.shape
    x = np.empty_like(rhs)
    for j in range(ncol):
        x[0, j] = rhs[0, j] / den[0]
        for k in range(1, m):
            x[k, j] = (rhs[k, j] - lower[k - 1] * x[k - 1, j]) / den[k]
        for k in range(m - 2, -1, -1):
            x[k, j] -= cp[k] * x[k + 1, j]
    return x


class TridiagonalFactor:
    """Cached Thomas factorization of a tridiagonal matrix.

    ``lower[k] = A[k+1, k]`` and ``upper[k] = A[k, k+1]``.
    """

    def __init__(self, lower, diag, upper):
        self.lower = np.ascontiguousarray(lower, dtype=float)
        self.diag = np.ascontiguousarray(diag, dtype=float)
        self.upper = np.ascontiguousarray(upper, dtype=float)
        m = self.diag.shape[0]
        if self.lower.shape != (m - 1,) or self.upper.shape != (m - 1,):
            raise ValueError("off-diagonals must have one entry fewer than the diagonal")
        self.cp, self.den = _factor(self.lower, self.diag, self.upper)
        if np.any(self.den == 0.0) or not np.all(np.isfinite(self.den)):
            raise ZeroDivisionError("zero pivot in tridiagonal factorization")

    @property
    def size(self):
        return self.diag.shape[0]

    def solve(self, rhs):
        """Solve along the last axis of ``rhs`` (shape ``(M,)`` or ``(k, M)``)."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[-1] != self.size:
            raise ValueError(f"rhs length {rhs.shape[-1]} != {self.size}")
        flat = np.ascontiguousarray(rhs.reshape(-1, self.size).T)
        return _solve(self.lower, self.cp, self.den, flat).T.reshape(rhs.shape)

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        y = self.diag * x
        y[..., :-1] += self.upper * x[..., 1:]
        y[..., 1:] += self.lower * x[..., :-1]
        return y

    def dense(self):
        return np.diag(self.diag) + np.diag(self.upper, 1) + np.diag(self.lower, -1)


def solve_tridiagonal(lower, diag, upper, rhs):
    return TridiagonalFactor(lower, diag, upper).solve(rhs)
