"""Compactly supported probability measures on the real line.

A measure is a finite list of atoms plus a finite list of density pieces,
each piece a polynomial ``sum c_k t^k`` (degree at most 6) on an interval.
The class is closed under the exact integrations the rest of the package
needs, and expressive enough for every measure exercised here: point
masses, two-point mixtures, uniforms, unions of uniforms.

Also defined here: the entropy functional

    Ent(f) = integral of f log f  -  (integral of f) log(integral of f)

(against the measure, with 0 log 0 = 0), the log-Sobolev defect

    Ent(g^2) - 2 c integral of (g')^2,

and the disconnected-support witness that shows a measure with a mass
gap cannot satisfy a log-Sobolev inequality at any constant: a smooth g
that is 0 on the left component and 1 on the right has positive entropy
but zero energy.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    GapHasMass,
    MassMismatch,
    NegativeDensity,
    NegativeInput,
    NonIntegrable,
    NonPositiveConstant,
    OverlappingPieces,
    ValidationError,
)
from .quadrature import adaptive_quad

MAX_POLY_DEGREE = 6
MASS_RESCALE_TOL = 1e-9
_DENSITY_SIGN_TOL = 1e-12


def _polyval(coeffs: Sequence[float], t):
    return np.polynomial.polynomial.polyval(t, np.asarray(coeffs, dtype=float))


@dataclass(frozen=True)
class Piece:
    """Polynomial density ``sum c_k t^k`` on ``[lo, hi]``."""

    lo: float
    hi: float
    coeffs: tuple[float, ...]

    def density(self, t):
        return _polyval(self.coeffs, t)

    def mass_below(self, x: float) -> float:
        """Exact integral of the density over ``[lo, min(x, hi)]``."""
        top = min(x, self.hi)
        if top <= self.lo:
            return 0.0
        anti = np.polynomial.polynomial.polyint(np.asarray(self.coeffs, dtype=float))
        return float(_polyval(anti, top) - _polyval(anti, self.lo))

    @property
    def mass(self) -> float:
        return self.mass_below(self.hi)


@dataclass(frozen=True)
class Measure1D:
    """Validated compactly supported probability measure (atoms + pieces)."""

    atoms: tuple[tuple[float, float], ...]
    pieces: tuple[Piece, ...]
    support_lo: float
    support_hi: float

    @property
    def atom_locations(self) -> np.ndarray:
        return np.array([x for x, _ in self.atoms], dtype=float)

    @property
    def atom_weights(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms], dtype=float)


def _check_piece_nonnegative(piece: Piece) -> None:
    """Sign test on a refinement grid plus root analysis of the polynomial."""
    grid = np.linspace(piece.lo, piece.hi, 513)
    candidates = [grid]
    coeffs = np.asarray(piece.coeffs, dtype=float)
    if np.count_nonzero(coeffs) > 1:
        for c in (coeffs, np.polynomial.polynomial.polyder(coeffs)):
            if len(c) > 1 and np.any(c[1:] != 0.0):
                roots = np.polynomial.polynomial.polyroots(c)
                real = roots[np.abs(roots.imag) < 1e-9].real
                inside = real[(real >= piece.lo) & (real <= piece.hi)]
                if inside.size:
                    candidates.append(inside)
    vals = piece.density(np.concatenate(candidates))
    scale = max(1.0, float(np.max(np.abs(coeffs))))
    if float(np.min(vals)) < -_DENSITY_SIGN_TOL * scale:
        raise NegativeDensity(
            f"piece on [{piece.lo}, {piece.hi}] takes negative values"
        )


def build_measure(spec: dict) -> Measure1D:
    """Validate and normalize a structured measure description.

    ``spec`` has the JSON shape
    ``{"atoms": [{"x": ..., "w": ...}], "pieces": [{"lo": ..., "hi": ..., "coeffs": [...]}]}``.
    Unknown keys are rejected.  Total mass must be within 1e-9 of 1 and is
    rescaled to exactly 1.
    """
    if not isinstance(spec, dict):
        raise ValidationError("measure spec must be a mapping")
    unknown = set(spec) - {"atoms", "pieces"}
    if unknown:
        raise ValidationError(f"unknown measure spec keys: {sorted(unknown)}")

    atoms: list[tuple[float, float]] = []
    for entry in spec.get("atoms", []) or []:
        extra = set(entry) - {"x", "w"}
        if extra:
            raise ValidationError(f"unknown atom keys: {sorted(extra)}")
        x, w = float(entry["x"]), float(entry["w"])
        if not (math.isfinite(x) and math.isfinite(w)):
            raise ValidationError("atom location/weight must be finite")
        if w < 0.0:
            raise NegativeDensity(f"atom at {x} has negative weight {w}")
        atoms.append((x, w))

    pieces: list[Piece] = []
    for entry in spec.get("pieces", []) or []:
        extra = set(entry) - {"lo", "hi", "coeffs"}
        if extra:
            raise ValidationError(f"unknown piece keys: {sorted(extra)}")
        lo, hi = float(entry["lo"]), float(entry["hi"])
        coeffs = tuple(float(c) for c in entry["coeffs"])
        if not coeffs or len(coeffs) > MAX_POLY_DEGREE + 1:
            raise ValidationError(
                f"piece coeffs must have 1..{MAX_POLY_DEGREE + 1} entries"
            )
        if not all(math.isfinite(c) for c in coeffs):
            raise ValidationError("piece coefficients must be finite")
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValidationError(f"piece needs finite lo < hi, got [{lo}, {hi}]")
        piece = Piece(lo, hi, coeffs)
        _check_piece_nonnegative(piece)
        pieces.append(piece)

    if not atoms and not pieces:
        raise ValidationError("measure needs at least one atom or piece")

    pieces.sort(key=lambda p: p.lo)
    for prev, nxt in zip(pieces[:-1], pieces[1:]):
        if nxt.lo < prev.hi:
            raise OverlappingPieces(
                f"pieces [{prev.lo}, {prev.hi}] and [{nxt.lo}, {nxt.hi}] overlap"
            )

    mass = sum(w for _, w in atoms) + sum(p.mass for p in pieces)
    if abs(mass - 1.0) > MASS_RESCALE_TOL:
        raise MassMismatch(f"total mass {mass!r} differs from 1 by more than 1e-9")
    atoms = [(x, w / mass) for x, w in atoms]
    pieces = [Piece(p.lo, p.hi, tuple(c / mass for c in p.coeffs)) for p in pieces]

    points = [x for x, _ in atoms] + [p.lo for p in pieces] + [p.hi for p in pieces]
    return Measure1D(
        atoms=tuple(atoms),
        pieces=tuple(pieces),
        support_lo=min(points),
        support_hi=max(points),
    )


def measure_from_json(text: str) -> Measure1D:
    return build_measure(json.loads(text))


# -- convenience constructors -------------------------------------------

def point_mass(x: float = 0.0) -> Measure1D:
    return build_measure({"atoms": [{"x": x, "w": 1.0}]})


def two_point(a: float = -1.0, b: float = 1.0, weight_a: float = 0.5) -> Measure1D:
    return build_measure(
        {"atoms": [{"x": a, "w": weight_a}, {"x": b, "w": 1.0 - weight_a}]}
    )


def uniform(lo: float = 0.0, hi: float = 1.0) -> Measure1D:
    return build_measure({"pieces": [{"lo": lo, "hi": hi, "coeffs": [1.0 / (hi - lo)]}]})


# -- CDF / quantile ------------------------------------------------------

def cdf(m: Measure1D, x) -> float | np.ndarray:
    """Right-continuous distribution function F(x) = mu((-inf, x])."""
    xs = np.asarray(x, dtype=float)
    out = np.zeros_like(xs, dtype=float)
    for loc, w in m.atoms:
        out = out + w * (xs >= loc)
    for p in m.pieces:
        anti = np.polynomial.polynomial.polyint(np.asarray(p.coeffs, dtype=float))
        top = np.clip(xs, p.lo, p.hi)
        out = out + (_polyval(anti, top) - _polyval(anti, p.lo))
    if np.ndim(x) == 0:
        return float(out)
    return out


def quantile(m: Measure1D, q) -> float | np.ndarray:
    """Generalized inverse of the CDF: smallest x with F(x) >= q."""
    qs = np.atleast_1d(np.asarray(q, dtype=float))
    if np.any((qs < 0.0) | (qs > 1.0)):
        raise ValidationError("quantile levels must lie in [0, 1]")
    lo = np.full_like(qs, m.support_lo - 1.0)
    hi = np.full_like(qs, m.support_hi + 1.0)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        below = cdf(m, mid) < qs
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out = hi
    if np.ndim(q) == 0:
        return float(out[0])
    return out


def support_components(m: Measure1D) -> list[tuple[float, float]]:
    """Maximal closed intervals of positive mass, sorted left to right."""
    intervals = [(x, x) for x, w in m.atoms if w > 0.0]
    intervals += [(p.lo, p.hi) for p in m.pieces if p.mass > 0.0]
    intervals.sort()
    merged: list[list[float]] = []
    for lo, hi in intervals:
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return [(lo, hi) for lo, hi in merged]


def mass_in_open_interval(m: Measure1D, lo: float, hi: float) -> float:
    """Mass strictly inside (lo, hi)."""
    total = sum(w for x, w in m.atoms if lo < x < hi)
    for p in m.pieces:
        a, b = max(p.lo, lo), min(p.hi, hi)
        if a < b:
            total += p.mass_below(b) - p.mass_below(a)
    return total


# -- test functions ------------------------------------------------------

PIECEWISE_LINEAR = "piecewise_linear"
PIECEWISE_CUBIC = "piecewise_cubic_smooth"


@dataclass(frozen=True)
class TestFunction:
    """Continuous test function defined by knots ``(x, value, slope)``.

    ``piecewise_linear`` interpolates values linearly between knots; the
    stored slope is only the convention used when the derivative is
    requested exactly at a knot (it is undefined there in the classical
    sense).  ``piecewise_cubic_smooth`` is the C^1 cubic Hermite
    interpolant matching value and slope at every knot.  Outside the knot
    range both kinds extend with the boundary value (linear kind, slope 0)
    or the boundary tangent line (cubic kind).
    """

    kind: str
    knots: tuple[tuple[float, float, float], ...]

    __test__ = False  # keep pytest from collecting this as a test class

    def __post_init__(self):
        if self.kind not in (PIECEWISE_LINEAR, PIECEWISE_CUBIC):
            raise ValidationError(f"unknown test function kind {self.kind!r}")
        if not self.knots:
            raise ValidationError("test function needs at least one knot")
        xs = [k[0] for k in self.knots]
        if any(b <= a for a, b in zip(xs[:-1], xs[1:])):
            raise ValidationError("knot abscissae must be strictly increasing")

    def _arrays(self):
        k = np.asarray(self.knots, dtype=float)
        return k[:, 0], k[:, 1], k[:, 2]

    def __call__(self, x):
        xs, vals, slopes = self._arrays()
        t = np.asarray(x, dtype=float)
        if self.kind == PIECEWISE_LINEAR:
            out = np.interp(t, xs, vals)
        else:
            out = self._hermite(t, xs, vals, slopes, derivative=False)
        if np.ndim(x) == 0:
            return float(np.atleast_1d(out)[0])
        return np.reshape(out, np.shape(x))

    def deriv(self, x):
        xs, vals, slopes = self._arrays()
        t = np.atleast_1d(np.asarray(x, dtype=float))
        if self.kind == PIECEWISE_LINEAR:
            if len(xs) == 1:
                out = np.zeros_like(t)
            else:
                sec = np.diff(vals) / np.diff(xs)
                idx = np.clip(np.searchsorted(xs, t, side="right") - 1, 0, len(sec) - 1)
                out = sec[idx]
                out = np.where((t < xs[0]) | (t > xs[-1]), 0.0, out)
            for (kx, _, ks) in self.knots:
                out = np.where(t == kx, ks, out)
        else:
            out = self._hermite(t, xs, vals, slopes, derivative=True)
        if np.ndim(x) == 0:
            return float(out[0])
        return out

    @staticmethod
    def _hermite(t, xs, vals, slopes, derivative: bool):
        t = np.atleast_1d(t)
        if len(xs) == 1:
            if derivative:
                return np.full_like(t, slopes[0])
            return vals[0] + slopes[0] * (t - xs[0])
        idx = np.clip(np.searchsorted(xs, t, side="right") - 1, 0, len(xs) - 2)
        x0, x1 = xs[idx], xs[idx + 1]
        v0, v1 = vals[idx], vals[idx + 1]
        s0, s1 = slopes[idx], slopes[idx + 1]
        h = x1 - x0
        u = np.clip((t - x0) / h, 0.0, 1.0)
        if derivative:
            out = (
                (6 * u * u - 6 * u) * v0 / h
                + (3 * u * u - 4 * u + 1) * s0
                + (-6 * u * u + 6 * u) * v1 / h
                + (3 * u * u - 2 * u) * s1
            )
            out = np.where(t < xs[0], slopes[0], out)
            out = np.where(t > xs[-1], slopes[-1], out)
        else:
            out = (
                (2 * u**3 - 3 * u * u + 1) * v0
                + (u**3 - 2 * u * u + u) * h * s0
                + (-2 * u**3 + 3 * u * u) * v1
                + (u**3 - u * u) * h * s1
            )
            out = np.where(t < xs[0], vals[0] + slopes[0] * (t - xs[0]), out)
            out = np.where(t > xs[-1], vals[-1] + slopes[-1] * (t - xs[-1]), out)
        return out

    def squared(self) -> Callable:
        return lambda x: np.square(self(x))


# -- entropy / LSI functionals -------------------------------------------

_LOG_CLAMP = 1e-300


def _integrate_against(m: Measure1D, f: Callable, rel_tol: float = 1e-12) -> float:
    """integral of f d mu: exact sum on atoms, adaptive quadrature on pieces."""
    total = 0.0
    if m.atoms:
        total += float(np.dot(m.atom_weights, np.asarray(f(m.atom_locations), dtype=float)))
    for p in m.pieces:
        total += adaptive_quad(lambda t, p=p: p.density(t) * np.asarray(f(t), dtype=float),
                               p.lo, p.hi, rel_tol=rel_tol)
    return total


def entropy_functional(m: Measure1D, f: Callable) -> float:
    """Ent(f) against ``m`` for nonnegative ``f``, with 0 log 0 = 0.

    ``f`` is any vectorized callable (a TestFunction composed with a
    square, a plain lambda, ...).  Raises NegativeInput if ``f`` is seen
    to go below -1e-12, NonIntegrable if moments are nonfinite or the
    mean is nonpositive.
    """
    probe = []
    if m.atoms:
        probe.append(np.asarray(f(m.atom_locations), dtype=float))
    for p in m.pieces:
        probe.append(np.asarray(f(np.linspace(p.lo, p.hi, 257)), dtype=float))
    probe_vals = np.concatenate([np.atleast_1d(v) for v in probe])
    if not np.all(np.isfinite(probe_vals)):
        raise NonIntegrable("test integrand is not finite on the support")
    if float(np.min(probe_vals)) < -1e-12:
        raise NegativeInput("entropy functional requires a nonnegative integrand")

    def f_log_f(t):
        v = np.maximum(np.asarray(f(t), dtype=float), 0.0)
        return v * np.log(np.maximum(v, _LOG_CLAMP))

    mean = _integrate_against(m, f)
    if not math.isfinite(mean) or mean <= 0.0:
        raise NonIntegrable(f"integral of f is {mean!r}; entropy undefined")
    moment = _integrate_against(m, f_log_f)
    ent = moment - mean * math.log(mean)
    if ent < -1e-12:
        raise ArithmeticError(
            f"entropy {ent!r} violates Jensen beyond quadrature tolerance"
        )
    return ent


def lsi_defect(m: Measure1D, g: TestFunction, c: float) -> float:
    """Ent(g^2) - 2 c integral of (g')^2; positive means c fails for this witness."""
    if not (c > 0.0):
        raise NonPositiveConstant("log-Sobolev constant must be positive")
    ent = entropy_functional(m, g.squared())
    energy = _integrate_against(m, lambda t: np.square(g.deriv(t)))
    return ent - 2.0 * c * energy


def disconnected_witness(m: Measure1D, gap: tuple[float, float]) -> tuple[float, float]:
    """Entropy/energy pair of the 0-left, 1-right witness across a mass gap.

    Returns ``(q log(1/q), 0.0)`` where ``q`` is the mass right of the
    gap; a positive entropy with zero energy rules out every LSI constant.
    """
    lo, hi = float(gap[0]), float(gap[1])
    if not lo < hi:
        raise ValidationError("gap must be a nonempty open interval (b, c)")
    inside = mass_in_open_interval(m, lo, hi)
    if inside > 1e-15:
        raise GapHasMass(f"open interval ({lo}, {hi}) carries mass {inside!r}")
    left = float(cdf(m, lo))
    right = 1.0 - left
    if left <= 0.0 or right <= 0.0:
        raise ValidationError("witness needs positive mass on both sides of the gap")
    return right * math.log(1.0 / right), 0.0
