"""Small numerical kernels: segment-average factors, periodic grids, monotone inversion."""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceFailure, NonMonotone

_TAYLOR_RADIUS = 1.0
_TAYLOR_TERMS = 30


def phi1(theta, order: int = 0):
    """``d^order/dtheta^order`` of ``int_0^1 exp(i theta t) dt = (e^{i theta} - 1)/(i theta)``.

    Closed forms lose digits near ``theta = 0`` (the second derivative
    cancels like ``theta**-3``), so a Taylor series takes over for
    ``|theta| < 1``.
    """
    theta = np.asarray(theta, dtype=float)
    out = np.empty(theta.shape, dtype=complex)
    small = np.abs(theta) < _TAYLOR_RADIUS
    if np.any(small):
        ts = theta[small]
        acc = np.zeros(ts.shape, dtype=complex)
        term = np.ones(ts.shape, dtype=complex)  # (i theta)^n / n!
        for n in range(_TAYLOR_TERMS):
            acc += term / (n + order + 1)
            term = term * (1j * ts) / (n + 1)
        out[small] = (1j ** order) * acc
    big = ~small
    if np.any(big):
        t = theta[big]
        e = np.exp(1j * t)
        if order == 0:
            out[big] = (e - 1) / (1j * t)
        elif order == 1:
            out[big] = e / t + 1j * (e - 1) / t**2
        elif order == 2:
            out[big] = 1j * e / t - 2 * e / t**2 - 2j * (e - 1) / t**3
        else:
            raise ValueError("order must be 0, 1 or 2")
    return out if out.ndim else complex(out)


def periodic_grid(n: int) -> np.ndarray:
    """Uniform nodes ``j/n``, ``j = 0..n-1``, of the unit period."""
    return np.arange(n) / n


def invert_monotone(f, fprime, targets, lo, hi, tol: float = 1e-13,
                    maxiter: int = 100) -> np.ndarray:
    """Solve ``f(s) = target`` elementwise for increasing ``f`` by safeguarded Newton.

    ``lo`` and ``hi`` must bracket every root.  A Newton step that leaves
    the current bracket is replaced by bisection, so the iteration always
    converges; ``tol`` bounds ``|f(s) - target|``.
    """
    targets = np.asarray(targets, dtype=float)
    lo = np.broadcast_to(np.asarray(lo, dtype=float), targets.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), targets.shape).copy()
    flo = f(lo) - targets
    fhi = f(hi) - targets
    if np.any(flo > tol) or np.any(fhi < -tol):
        raise NonMonotone("initial interval does not bracket the inverse")
    s = 0.5 * (lo + hi)
    for _ in range(maxiter):
        r = f(s) - targets
        if np.all(np.abs(r) <= tol):
            return s
        lo = np.where(r < 0, s, lo)
        hi = np.where(r > 0, s, hi)
        dr = fprime(s)
        if np.any(dr <= 0):
            raise NonMonotone(f"derivative {float(dr.min()):.3e} <= 0 during inversion")
        step = s - r / dr
        inside = (step > lo) & (step < hi)
        s = np.where(inside, step, 0.5 * (lo + hi))
    r = f(s) - targets
    if np.all(np.abs(r) <= 10 * tol):
        return s
    raise ConvergenceFailure(
        f"monotone inversion stalled, residual {float(np.abs(r).max()):.3e}"
    )


def trapezoid_periodic(values, axis: int = -1):
    """Mean over uniform periodic samples: the trapezoid rule on one period."""
    return np.mean(values, axis=axis)


def gauss_legendre_unit(n: int):
    """Gauss-Legendre nodes and weights mapped to ``[0, 1]``."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def chebyshev_t(k: int, x):
    """``T_k(x) = cos(k arccos x)`` via the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    t0, t1 = np.ones_like(x), x
    if k == 0:
        return t0
    for _ in range(k - 1):
        t0, t1 = t1, 2 * x * t1 - t0
    return t1
