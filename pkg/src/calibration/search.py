"""One-dimensional derivative-free minimization."""

import math
from collections.abc import Callable

import numpy as np

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2  # 1 / phi^2


def golden_section(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-6,
    max_iterations: int = 200,
) -> tuple[float, float, int]:
    """Golden-section search for a minimum of a unimodal f on [a, b].

    Stops once the bracket is no wider than `tol` or after `max_iterations`
    shrink steps. Returns (x, f(x), iterations) where x is the best evaluated
    interior point.
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    if h <= tol:
        x = (a + b) / 2
        return x, f(x), 0

    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc = f(c)
    yd = f(d)

    iterations = 0
    while h > tol and iterations < max_iterations:
        if yc < yd:
            b = d
            d = c
            yd = yc
            h = INV_PHI * h
            c = a + INV_PHI_SQUARE * h
            yc = f(c)
        else:
            a = c
            c = d
            yc = yd
            h = INV_PHI * h
            d = a + INV_PHI * h
            yd = f(d)
        iterations += 1

    if yc < yd:
        return c, yc, iterations
    return d, yd, iterations


def grid_bracket(
    f: Callable[[float], float],
    lower: float,
    upper: float,
    points: int,
) -> tuple[float, float, float, float]:
    """Evaluate f on an even grid and bracket its best point by its neighbours.

    Returns (bracket_lo, bracket_hi, best_x, best_f). Ties keep the smallest x.
    """
    xs = np.linspace(lower, upper, points)
    values = [f(float(x)) for x in xs]
    best = int(np.argmin(values))
    lo = xs[max(best - 1, 0)]
    hi = xs[min(best + 1, points - 1)]
    return float(lo), float(hi), float(xs[best]), float(values[best])
