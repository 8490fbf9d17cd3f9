"""Curvature certificates for mollified atom clouds in R^n.

For an atomic measure mu (finite weighted point cloud inside a ball of
radius R) mollified by an isotropic Gaussian of variance delta, the
negative log-density has the exact Hessian

    Hess(-log p)(x) = I/delta - Cov_{nu_x}(y) / delta^2,

where nu_x reweights the atoms by the Gaussian kernel at x.  This is the
covariance form of the second-derivative displays for p; it is
algebraically identical and numerically stabler (the cancellations are
absorbed by centering), and it is cross-checked against finite
differences of log p in the tests.

A uniform eigenvalue bound Hess(-log p) >= (1/c) I certifies a
log-Sobolev inequality with constant c.  Certificates here are probe
based (grid plus seeded random points) and therefore heuristic; the
analytic floor (delta - 2 R^2 n) / delta^2, valid whenever
delta > 2 R^2 n, is reported alongside.  Entries of
delta * Hess(-log p) - I are bounded by 2 R^2 / delta everywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
import numpy as np
from scipy.special import logsumexp

from .errors import NonPositiveDelta, ValidationError


@dataclass(frozen=True)
class MeasureND:
    """Finite atom cloud: points (k, n), weights (k,), enclosing ball (center, R)."""

    dimension: int
    points: np.ndarray
    weights: np.ndarray
    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.points.setflags(write=False)
        self.weights.setflags(write=False)
        self.center.setflags(write=False)


def build_measure_nd(points, weights, center=None, radius=None) -> MeasureND:
    """Validate an atom cloud; default center/radius from the cloud itself."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ws = np.asarray(weights, dtype=float)
    if pts.ndim != 2 or pts.shape[0] != ws.shape[0]:
        raise ValidationError("points and weights must have matching leading size")
    if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(ws)):
        raise ValidationError("points and weights must be finite")
    if np.any(ws < 0.0):
        raise ValidationError("weights must be nonnegative")
    total = float(np.sum(ws))
    if abs(total - 1.0) > 1e-9:
        raise ValidationError(f"weights sum to {total!r}, not 1")
    ws = ws / total
    n = pts.shape[1]
    ctr = (np.asarray(center, dtype=float) if center is not None
           else np.average(pts, axis=0, weights=ws))
    dists = np.linalg.norm(pts - ctr, axis=1)
    r = float(radius) if radius is not None else float(np.max(dists))
    if float(np.max(dists)) > r + 1e-12:
        raise ValidationError("an atom lies outside the stated ball")
    return MeasureND(dimension=n, points=pts, weights=ws, center=ctr, radius=r)


def measure_nd_from_dict(raw: dict) -> MeasureND:
    extra = set(raw) - {"dimension", "atoms", "center", "radius"}
    if extra:
        raise ValidationError(f"unknown measure keys: {sorted(extra)}")
    atoms = raw.get("atoms", [])
    if not atoms:
        raise ValidationError("measure needs at least one atom")
    pts, ws = [], []
    for entry in atoms:
        bad = set(entry) - {"point", "w"}
        if bad:
            raise ValidationError(f"unknown atom keys: {sorted(bad)}")
        pts.append([float(v) for v in entry["point"]])
        ws.append(float(entry["w"]))
    dim = raw.get("dimension")
    if dim is not None and int(dim) != len(pts[0]):
        raise ValidationError("stated dimension disagrees with atom points")
    return build_measure_nd(pts, ws, raw.get("center"), raw.get("radius"))


def _log_weights_at(m: MeasureND, delta: float, x: np.ndarray) -> np.ndarray:
    """Unnormalized log kernel weights of every atom at x."""
    sq = np.sum((x[None, :] - m.points) ** 2, axis=1)
    with np.errstate(divide="ignore"):
        logw = np.where(m.weights > 0.0, np.log(np.maximum(m.weights, 1e-300)),
                        -np.inf)
    return logw - sq / (2.0 * delta)


def log_density_nd(m: MeasureND, delta: float, x) -> float:
    """log p(x) for p = mu * gamma_delta, by log-sum-exp over the atoms."""
    if not delta > 0.0:
        raise NonPositiveDelta(f"delta must be positive, got {delta}")
    x = np.asarray(x, dtype=float)
    norm_const = 0.5 * m.dimension * math.log(2.0 * math.pi * delta)
    return float(logsumexp(_log_weights_at(m, delta, x))) - norm_const


def hessian_neg_log_p(m: MeasureND, delta: float, x) -> np.ndarray:
    """Hess(-log p)(x) = I/delta - Cov(y)/delta^2 under the tilted atom weights."""
    if not delta > 0.0:
        raise NonPositiveDelta(f"delta must be positive, got {delta}")
    x = np.asarray(x, dtype=float)
    logw = _log_weights_at(m, delta, x)
    w = np.exp(logw - logsumexp(logw))
    mean = w @ m.points
    centered = m.points - mean
    cov = (centered * w[:, None]).T @ centered
    hess = np.eye(m.dimension) / delta - cov / (delta * delta)
    return 0.5 * (hess + hess.T)


def threshold_check(radius: float, n: int, delta: float) -> bool:
    """delta > 2 R^2 n, the large-variance regime where the certificate is guaranteed."""
    if radius < 0.0 or n < 1:
        raise ValidationError("threshold_check needs radius >= 0 and n >= 1")
    return delta > 2.0 * radius * radius * n


def gross_compose(c1: float, c2: float) -> float:
    """LSI constant of a product measure: the max of the factors' constants."""
    if not (c1 > 0.0 and c2 > 0.0):
        raise ValidationError("gross_compose needs positive constants")
    return max(c1, c2)


@dataclass(frozen=True)
class ProbeSpec:
    """Deterministic probe set: a grid over the inflated support box plus
    seeded random points."""

    grid_points_per_axis: int = 7
    random_points: int = 200
    seed: int = 0

    def generate(self, m: MeasureND, delta: float) -> np.ndarray:
        half = m.radius + 6.0 * math.sqrt(delta)
        lo = m.center - half
        hi = m.center + half
        axes = [np.linspace(lo[i], hi[i], self.grid_points_per_axis)
                for i in range(m.dimension)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m.dimension)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([self.seed])))
        rand = lo + (hi - lo) * rng.random((self.random_points, m.dimension))
        return np.vstack([grid, rand]) if self.random_points else grid


@dataclass(frozen=True)
class HessianCertificate:
    """Probe-based curvature certificate (heuristic, never a proof)."""

    delta: float
    radius: float
    dimension: int
    min_eigenvalue: float
    min_eig_location: tuple[float, ...]
    c_candidate: float | None
    threshold_satisfied: bool
    perturbation_bound: float
    analytic_floor: float
    probes_evaluated: int

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "R": self.radius,
            "n": self.dimension,
            "min_eig": self.min_eigenvalue,
            "min_eig_location": list(self.min_eig_location),
            "c_candidate": self.c_candidate,
            "threshold_ok": self.threshold_satisfied,
            "perturbation_bound": self.perturbation_bound,
            "analytic_floor": self.analytic_floor,
            "probes_evaluated": self.probes_evaluated,
        }


def bakry_emery_certificate(m: MeasureND, delta: float,
                            probes: ProbeSpec | None = None) -> HessianCertificate:
    """Minimum Hessian eigenvalue over the probe set and the implied constant.

    ``c_candidate = 1/min_eig`` when the minimum is positive, else None.
    The analytic floor (delta - 2 R^2 n)/delta^2 lower-bounds the true
    minimum whenever the delta > 2 R^2 n threshold holds.
    """
    if not delta > 0.0:
        raise NonPositiveDelta(f"delta must be positive, got {delta}")
    spec = probes if probes is not None else ProbeSpec()
    pts = spec.generate(m, delta)
    min_eig = math.inf
    min_loc = pts[0]
    for x in pts:
        eig = float(np.linalg.eigvalsh(hessian_neg_log_p(m, delta, x))[0])
        if eig < min_eig:
            min_eig = eig
            min_loc = x
    n = m.dimension
    r = m.radius
    return HessianCertificate(
        delta=delta,
        radius=r,
        dimension=n,
        min_eigenvalue=min_eig,
        min_eig_location=tuple(float(v) for v in min_loc),
        c_candidate=(1.0 / min_eig) if min_eig > 0.0 else None,
        threshold_satisfied=threshold_check(r, n, delta),
        perturbation_bound=2.0 * r * r / delta,
        analytic_floor=(delta - 2.0 * r * r * n) / (delta * delta),
        probes_evaluated=len(pts),
    )
