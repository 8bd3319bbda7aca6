"""
Deterministic one-dimensional search routines.

Golden-section maximisation backs the settings optimizer's refinement passes;
bisection backs the blind-spot threshold search. Both are pure functions of
their inputs, so repeated runs give identical results.
"""

from typing import Callable, Tuple

import numpy as np
import scipy.optimize

from src import config
from src.core_utils import NoRootError, NumericalError

INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0      # 1/phi
INV_PHI_SQ = (3.0 - np.sqrt(5.0)) / 2.0   # 1/phi^2


def golden_section_max(obj: Callable[[float], float], a: float, b: float,
                       tol: float = config.GOLDEN_TOL) -> Tuple[float, float]:
    """Golden-section search for a maximum of obj on [a, b].

    Args:
        obj: 1d function to maximise.
        a: Lower end of the bracket.
        b: Upper end of the bracket.
        tol: Bracket width at which the search stops.

    Returns:
        (x, obj(x)) for the best point visited, including the bracket ends.
    """
    best_x, best_y = a, obj(a)
    yb = obj(b)
    if yb > best_y:
        best_x, best_y = b, yb

    dist = b - a
    if dist <= tol:
        return best_x, best_y

    n = int(np.ceil(np.log(tol / dist) / np.log(INV_PHI)))

    c = a + INV_PHI_SQ * dist
    d = a + INV_PHI * dist
    yc = obj(c)
    yd = obj(d)

    for _ in range(n - 1):
        if yc > yd:
            b = d
            d, yd = c, yc
            dist = INV_PHI * dist
            c = a + INV_PHI_SQ * dist
            yc = obj(c)
        else:
            a = c
            c, yc = d, yd
            dist = INV_PHI * dist
            d = a + INV_PHI * dist
            yd = obj(d)

    for x, y in ((c, yc), (d, yd)):
        if y > best_y:
            best_x, best_y = x, y
    return best_x, best_y


def bisect(func: Callable[[float], float], lo: float, hi: float,
           tol: float = config.BISECTION_TOL, max_iter: int = config.BISECTION_MAX_ITER) -> float:
    """Root of func on [lo, hi] by bisection (scipy.optimize.bisect).

    Raises:
        NoRootError: If func(lo) and func(hi) share a sign.
        NumericalError: If the bracket does not shrink to tol within max_iter steps.
    """
    f_lo, f_hi = func(lo), func(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi):
        raise NoRootError(f"no sign change on [{lo}, {hi}] (f = {f_lo:.3e}, {f_hi:.3e})")

    try:
        return float(scipy.optimize.bisect(func, lo, hi, xtol=tol, maxiter=max_iter))
    except RuntimeError as exc:
        raise NumericalError(f"bisection on [{lo}, {hi}] did not converge: {exc}") from exc
