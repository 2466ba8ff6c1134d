"""Tridiagonal solves: compiled Thomas sweep with a pivoting fallback."""

import numpy as np
from numba import njit
from scipy.linalg import solve_banded

from .errors import SingularSystemError

__all__ = ["thomas", "solve_tridiagonal"]

_PIVOT_EPS = 1e-13


@njit(cache=True)
def _thomas_kernel(lower, diag, upper, rhs, out, eps):
    # lower[i] couples row i to i-1 (lower[0] unused); upper[i] couples i to i+1.
    n = diag.shape[0]
    cp = np.empty(n)
    dp = np.empty(n)
    scale = 0.0
    for i in range(n):
        s = abs(diag[i]) + abs(lower[i]) + abs(upper[i])
        if s > scale:
            scale = s
    piv = diag[0]
    if abs(piv) <= eps * scale:
        return False
    cp[0] = upper[0] / piv
    dp[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - lower[i] * cp[i - 1]
        if abs(piv) <= eps * scale:
            return False
        cp[i] = upper[i] / piv
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / piv
    out[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]
    return True


def thomas(lower, diag, upper, rhs):
    """Solve a tridiagonal system with the Thomas algorithm.

    ``lower[i]`` multiplies ``x[i-1]`` and ``upper[i]`` multiplies ``x[i+1]``
    in row ``i``; ``lower[0]`` and ``upper[-1]`` are ignored.  Returns
    ``None`` when a pivot collapses below the relative threshold.
    """
    lower = np.ascontiguousarray(lower, dtype=float)
    diag = np.ascontiguousarray(diag, dtype=float)
    upper = np.ascontiguousarray(upper, dtype=float)
    rhs = np.ascontiguousarray(rhs, dtype=float)
    lo = lower.copy()
    up = upper.copy()
    lo[0] = 0.0
    up[-1] = 0.0
    out = np.empty_like(diag)
    if not _thomas_kernel(lo, diag, up, rhs, out, _PIVOT_EPS):
        return None
    return out


def _banded(lower, diag, upper):
    n = diag.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    return ab


def tridiagonal_residual(lower, diag, upper, x, rhs):
    ax = diag * x
    ax[1:] += lower[1:] * x[:-1]
    ax[:-1] += upper[:-1] * x[1:]
    return ax - rhs


def solve_tridiagonal(lower, diag, upper, rhs, rtol=1e-12, check=True):
    """Thomas solve, falling back to partial-pivot LU; checks the residual.

    ``check=False`` skips the residual test, for hot loops that verify
    their own fixed point.
    """
    lower = np.asarray(lower, dtype=float)
    diag = np.asarray(diag, dtype=float)
    upper = np.asarray(upper, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    x = thomas(lower, diag, upper, rhs)
    if x is None or not np.all(np.isfinite(x)):
        try:
            x = solve_banded((1, 1), _banded(lower, diag, upper), rhs)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SingularSystemError(f"tridiagonal system is singular: {exc}") from exc
        if not np.all(np.isfinite(x)):
            raise SingularSystemError("tridiagonal solve produced non-finite values")
    if not check:
        return x
    lo = lower.copy()
    up = upper.copy()
    lo[0] = 0.0
    up[-1] = 0.0
    res = tridiagonal_residual(lo, diag, up, x, rhs)
    a_norm = np.max(np.abs(diag) + np.abs(lo) + np.abs(up))
    scale = a_norm * np.max(np.abs(x)) + np.max(np.abs(rhs))
    if scale > 0 and np.max(np.abs(res)) > rtol * scale:
        raise SingularSystemError(
            f"tridiagonal residual {np.max(np.abs(res)):.3e} exceeds {rtol:g} relative"
        )
    return x
