"""Adaptive Gauss-Legendre quadrature, in linear and in log space.

Panels use a 15-point Gauss-Legendre rule and are bisected until the
whole-panel estimate agrees with the sum of its two half-panel estimates
(a Richardson-style error check; the rule's order is high enough that
agreement of the two levels certifies convergence for analytic
integrands).

The log-space variant computes ``log(integral of exp(log_f))`` with each
panel's maximum factored out before exponentiating, so integrands whose
logarithm spans thousands of units (reciprocal mollified densities grow
like exp((x-a)^2 / 2 delta)) never overflow.
"""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(15)

NEG_INF = float("-inf")


def _panel(f: Callable[[np.ndarray], np.ndarray], a: float, b: float) -> float:
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    vals = np.asarray(f(mid + half * _GL_NODES), dtype=float)
    return half * float(np.dot(_GL_WEIGHTS, vals))


def adaptive_quad(
    f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    rel_tol: float = 1e-12,
    max_depth: int = 60,
) -> float:
    """Integral of ``f`` over ``[lo, hi]`` by adaptive panel bisection.

    ``f`` must accept a 1-D ndarray of abscissae.
    """
    if lo == hi:
        return 0.0
    if lo > hi:
        return -adaptive_quad(f, hi, lo, rel_tol, max_depth)
    total = 0.0
    stack = [(lo, hi, _panel(f, lo, hi), 0)]
    while stack:
        a, b, whole, depth = stack.pop()
        mid = 0.5 * (a + b)
        left = _panel(f, a, mid)
        right = _panel(f, mid, b)
        refined = left + right
        if depth >= max_depth or abs(refined - whole) <= rel_tol * max(abs(refined), 1e-300):
            total += refined
        else:
            stack.append((a, mid, left, depth + 1))
            stack.append((mid, b, right, depth + 1))
    return total


def _panel_log(log_f: Callable[[np.ndarray], np.ndarray], a: float, b: float) -> float:
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    vals = np.asarray(log_f(mid + half * _GL_NODES), dtype=float)
    m = float(np.max(vals))
    if m == NEG_INF or half == 0.0:
        return NEG_INF
    return m + math.log(half * float(np.dot(_GL_WEIGHTS, np.exp(vals - m))))


def log_adaptive_quad(
    log_f: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    rel_tol: float = 1e-10,
    max_depth: int = 60,
    seed_points: Sequence[float] | None = None,
) -> float:
    """``log(integral of exp(log_f))`` over ``[lo, hi]``, never overflowing.

    A log-space discrepancy of ``rel_tol`` between refinement levels is
    (to first order) a relative error of ``rel_tol`` on the integral.
    ``seed_points`` force an initial partition; they guard against the
    classic adaptive-quadrature failure where a spike narrower than the
    first panel's node spacing goes unseen.
    """
    if lo == hi:
        return NEG_INF
    if lo > hi:
        raise ValueError("log_adaptive_quad requires lo <= hi")

    cuts = [lo, hi]
    if seed_points is not None:
        cuts.extend(p for p in seed_points if lo < p < hi)
    cuts = sorted(set(cuts))

    parts: list[float] = []
    stack = [(a, b, _panel_log(log_f, a, b), 0) for a, b in zip(cuts[:-1], cuts[1:])]
    # panels this far (in log) below the largest one seen cannot move the
    # total at double precision; accept them without refinement
    floor_gap = 46.0
    best = max((w for _, _, w, _ in stack), default=NEG_INF)
    while stack:
        a, b, whole, depth = stack.pop()
        if whole <= best - floor_gap:
            if whole > NEG_INF:
                parts.append(float(whole))
            continue
        mid = 0.5 * (a + b)
        left = _panel_log(log_f, a, mid)
        right = _panel_log(log_f, mid, b)
        refined = np.logaddexp(left, right)
        if refined == NEG_INF:
            continue
        best = max(best, float(refined))
        if depth >= max_depth or (
            whole > NEG_INF and abs(refined - whole) <= rel_tol
        ):
            parts.append(float(refined))
        else:
            stack.append((a, mid, left, depth + 1))
            stack.append((mid, b, right, depth + 1))
    if not parts:
        return NEG_INF
    return float(logsumexp(parts))


def geometric_seeds(center: float, scale: float, lo: float, hi: float) -> list[float]:
    """Partition points clustering geometrically around ``center``.

    Used to pre-split integrals whose mass sits in a boundary layer of
    width ``scale`` around ``center`` (peaks of 1/p, Gaussian kernels far
    from the support, ...).
    """
    if not (lo <= hi) or scale <= 0.0:
        return []
    pts: list[float] = []
    span = hi - lo
    step = scale
    while step < span:
        for p in (center - step, center + step):
            if lo < p < hi:
                pts.append(p)
        step *= 2.0
    if lo < center < hi:
        pts.append(center)
    return pts
