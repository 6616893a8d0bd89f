"""Small numerical helpers shared by the transformation stages."""
from __future__ import annotations

import math

import numba


class FixedPointError(ArithmeticError):
    pass


def fixed_point(update, x0, norm, tol: float = 1e-13, maxiter: int = 50, what: str = "fixed point"):
    """Iterate x <- update(x) until the step is below tol * norm(x).

    The iteration also stops once the step no longer decreases while already
    at the 1e-10 level, which is where float64 roundoff takes over.  With
    tol=0 it therefore runs to the roundoff floor.  Returns (x, iterations).
    """
    x = x0
    prev = math.inf
    first = None
    for it in range(1, maxiter + 1):
        x_new = update(x)
        step = norm(_diff(x_new, x))
        x = x_new
        scale = norm(x)
        if first is None:
            first = step
        if step == 0.0 or step <= tol * scale:
            return x, it
        if step >= prev and step <= 1e-10 * max(scale, 1e-300):
            return x, it
        if not math.isfinite(step) or (first > 0 and step > 1e6 * first):
            raise FixedPointError(f"{what}: iteration diverges (step {step:.3e} at iteration {it})")
        prev = step
    raise FixedPointError(f"{what}: no convergence in {maxiter} iterations (last step {prev:.3e})")


def _diff(a, b):
    if isinstance(a, tuple):
        return tuple(x - y for x, y in zip(a, b))
    return a - b


@numba.njit(cache=True)
def phi_inverse(y):
    """x >= 0 with x sqrt(1 + 2x) = y, for y >= 0.

    Newton on 2x^3 + x^2 - y^2 from x0 = y; the polynomial is convex and
    increasing on x > 0 and phi(y) <= y, so the iterates decrease
    monotonically to the root.  Bisection on [0, max(1, y)] is the fallback.
    """
    if y <= 0.0:
        return 0.0
    x = y
    for _ in range(100):
        g = 2.0 * x * x * x + x * x - y * y
        dg = 6.0 * x * x + 2.0 * x
        step = g / dg
        x_new = x - step
        if x_new <= 0.0 or not math.isfinite(x_new):
            break
        if abs(step) <= 1e-15 * x_new:
            return x_new
        if x_new >= x:  # monotone decrease exhausted: roundoff floor
            return x
        x = x_new
    lo, hi = 0.0, max(1.0, y)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid * math.sqrt(1.0 + 2.0 * mid) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@numba.njit(cache=True)
def rho_of(x):
    """rho(x) = -x / (1 + x + sqrt(1 + 2x))."""
    return -x / (1.0 + x + math.sqrt(1.0 + 2.0 * x))
