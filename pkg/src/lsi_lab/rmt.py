"""Random-matrix concentration laboratory.

Pipeline: draw a symmetric matrix Y with i.i.d. upper-triangle entries
(diagonal included) from an entry law nu, normalize X = Y / sqrt(n), and
study how the empirical spectral integral (1/n) sum f(lambda_i)
concentrates around its mean.  When nu has no log-Sobolev inequality of
its own, the entries are mollified: Y~ = Y + sqrt(delta) G with G an
independent symmetric Gaussian matrix, so the entry law becomes
nu * gamma_delta and the `bg` bracket supplies a constant.

The deviation probability splits into three parts, mirrored by the
per-cell diagnostics of the experiment report:

  term 1:  P(|int f dmu_X - int f dmu_X~| >= eps/3)  <=  9 lip^2 delta / eps^2,
  term 2:  2 exp(-n^2 eps^2 / (36 c lip^2))          (Guionnet, eps/3 form),
  term 3:  |E int f dmu_X~ - E int f dmu_X|          <=  lip sqrt(delta).

Randomness is counter-based: every (seed, batch, trial, role) tuple keys
an independent Philox stream, and each matrix entry consumes exactly one
uniform from its stream in a fixed order, so results are bit-identical
regardless of worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from . import bg as _bg
from .errors import (
    DimensionMismatch,
    NegativeDelta,
    NoFeasibleDelta,
    NonPositiveArg,
    UnknownFunction,
    UnknownLaw,
    ValidationError,
)
from .measure import Measure1D, quantile
from .mollify import MollifiedDensity

# role tags for stream derivation
_ROLE_ENTRIES = 1
_ROLE_GAUSS = 2


def _uniforms(key: Sequence[int], count: int) -> np.ndarray:
    """`count` uniforms on (0,1) from the Philox stream keyed by `key`.

    Each value is the midpoint (k + 1/2) / 2^53 of a 53-bit draw, so the
    transforms applied downstream (ndtri, log1p) never see 0 or 1 and a
    two-point split at 1/2 is exactly unbiased.
    """
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))
    k = gen.integers(0, 1 << 53, size=count, dtype=np.int64)
    return (k.astype(np.float64) + 0.5) * 2.0 ** -53


def _as_key(seed) -> tuple[int, ...]:
    if isinstance(seed, (tuple, list)):
        key = tuple(int(s) for s in seed)
    else:
        key = (int(seed),)
    if any(s < 0 for s in key):
        raise ValidationError("seeds must be nonnegative integers")
    return key


# ---------------------------------------------------------------------------
# entry laws
# ---------------------------------------------------------------------------

LAW_KINDS = ("two_point", "uniform", "gaussian", "exponential", "atom_mixture")


@dataclass(frozen=True)
class EntryLaw:
    """Entry distribution plus its inverse-CDF sampler."""

    kind: str
    params: tuple[float, ...] = ()
    measure: Measure1D | None = None

    def __post_init__(self):
        if self.kind not in LAW_KINDS:
            raise UnknownLaw(f"unknown entry law {self.kind!r}")
        if self.kind == "atom_mixture" and self.measure is None:
            raise UnknownLaw("atom_mixture law needs a Measure1D")

    def transform(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "two_point":
            a, b, wa = self.params
            return np.where(u < wa, a, b)
        if self.kind == "uniform":
            a, b = self.params
            return a + (b - a) * u
        if self.kind == "gaussian":
            mean, var = self.params
            return mean + math.sqrt(var) * ndtri(u)
        if self.kind == "exponential":
            (rate,) = self.params
            return -np.log1p(-u) / rate
        return np.asarray(quantile(self.measure, u), dtype=float)

    @property
    def lsi_constant(self) -> float | None:
        """Known LSI constant of the raw law, if any (Gaussian: its variance)."""
        if self.kind == "gaussian":
            return self.params[1]
        return None

    def as_measure(self) -> Measure1D:
        """Compactly supported laws as a Measure1D, for the bg bracket."""
        from .measure import build_measure

        if self.kind == "two_point":
            a, b, wa = self.params
            return build_measure({"atoms": [{"x": a, "w": wa}, {"x": b, "w": 1.0 - wa}]})
        if self.kind == "uniform":
            a, b = self.params
            return build_measure({"pieces": [{"lo": a, "hi": b, "coeffs": [1.0 / (b - a)]}]})
        if self.kind == "atom_mixture":
            return self.measure
        raise ValidationError(f"law {self.kind!r} is not compactly supported")


def two_point_law(a: float = -1.0, b: float = 1.0, weight_a: float = 0.5) -> EntryLaw:
    return EntryLaw("two_point", (a, b, weight_a))


def uniform_law(a: float, b: float) -> EntryLaw:
    if not b > a:
        raise ValidationError("uniform law needs a < b")
    return EntryLaw("uniform", (a, b))


def gaussian_law(mean: float = 0.0, var: float = 1.0) -> EntryLaw:
    if not var > 0.0:
        raise ValidationError("gaussian law needs var > 0")
    return EntryLaw("gaussian", (mean, var))


def exponential_law(rate: float = 1.0) -> EntryLaw:
    if not rate > 0.0:
        raise ValidationError("exponential law needs rate > 0")
    return EntryLaw("exponential", (rate,))


def atom_mixture_law(measure: Measure1D) -> EntryLaw:
    return EntryLaw("atom_mixture", (), measure)


def law_from_spec(spec) -> EntryLaw:
    """Parse the JSON form: a bare kind string or {"kind": ..., params}."""
    if isinstance(spec, str):
        name, args = spec, {}
    elif isinstance(spec, dict):
        extra = set(spec) - {"kind", "a", "b", "weight_a", "mean", "var", "rate", "measure"}
        if extra:
            raise ValidationError(f"unknown law keys: {sorted(extra)}")
        name, args = spec.get("kind"), spec
    else:
        raise UnknownLaw(f"cannot parse law spec {spec!r}")
    if name == "two_point":
        return two_point_law(args.get("a", -1.0), args.get("b", 1.0),
                             args.get("weight_a", 0.5))
    if name == "uniform":
        return uniform_law(args.get("a", 0.0), args.get("b", 1.0))
    if name == "gaussian":
        return gaussian_law(args.get("mean", 0.0), args.get("var", 1.0))
    if name == "exponential":
        return exponential_law(args.get("rate", 1.0))
    if name == "atom_mixture":
        from .measure import build_measure

        return atom_mixture_law(build_measure(args.get("measure", {})))
    raise UnknownLaw(f"unknown entry law {name!r}")


# ---------------------------------------------------------------------------
# Lipschitz test functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FSpec:
    """Lipschitz statistic with its constant attached."""

    kind: str
    knots: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("identity", "abs", "arctan", "piecewise_linear"):
            raise UnknownFunction(f"unknown test function {self.kind!r}")
        if self.kind == "piecewise_linear" and len(self.knots) < 2:
            raise UnknownFunction("piecewise_linear needs >= 2 knots")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "identity":
            return x
        if self.kind == "abs":
            return np.abs(x)
        if self.kind == "arctan":
            return np.arctan(x)
        xs = np.array([k[0] for k in self.knots])
        ys = np.array([k[1] for k in self.knots])
        return np.interp(x, xs, ys)

    @property
    def lip(self) -> float:
        if self.kind in ("identity", "abs", "arctan"):
            return 1.0
        xs = np.array([k[0] for k in self.knots])
        ys = np.array([k[1] for k in self.knots])
        return float(np.max(np.abs(np.diff(ys) / np.diff(xs))))


def f_from_spec(spec) -> FSpec:
    if isinstance(spec, str):
        return FSpec(spec)
    if isinstance(spec, dict):
        extra = set(spec) - {"kind", "knots"}
        if extra:
            raise ValidationError(f"unknown f keys: {sorted(extra)}")
        knots = tuple((float(a), float(b)) for a, b in spec.get("knots", ()))
        return FSpec(spec.get("kind"), knots)
    raise UnknownFunction(f"cannot parse f spec {spec!r}")


# ---------------------------------------------------------------------------
# symmetric matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetricMatrix:
    """Symmetric matrix stored as its row-major upper triangle (diagonal included)."""

    n: int
    upper: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("matrix size must be >= 1")
        expected = self.n * (self.n + 1) // 2
        if self.upper.shape != (expected,):
            raise ValidationError(
                f"upper triangle of an n={self.n} matrix needs {expected} entries"
            )
        self.upper.setflags(write=False)

    def dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        iu = np.triu_indices(self.n)
        out[iu] = self.upper
        out.T[iu] = self.upper
        return out

    @classmethod
    def from_dense(cls, mat: np.ndarray) -> "SymmetricMatrix":
        mat = np.asarray(mat, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValidationError("from_dense needs a square matrix")
        n = mat.shape[0]
        return cls(n, mat[np.triu_indices(n)].copy())

    def scaled(self, factor: float) -> "SymmetricMatrix":
        return SymmetricMatrix(self.n, self.upper * factor)


def sample_wigner(n: int, law: EntryLaw, seed) -> SymmetricMatrix:
    """Symmetric matrix with i.i.d. upper-triangle entries (diagonal included).

    Entry (i, j) with i <= j consumes exactly the k-th uniform of the
    stream keyed by (seed..., role), k the row-major upper-triangle rank,
    so the draw is reproducible entry by entry.
    """
    if n < 1:
        raise ValidationError("matrix size must be >= 1")
    count = n * (n + 1) // 2
    u = _uniforms(_as_key(seed) + (_ROLE_ENTRIES,), count)
    return SymmetricMatrix(n, np.asarray(law.transform(u), dtype=float))


def mollify_ensemble(y: SymmetricMatrix, delta: float, seed) -> SymmetricMatrix:
    """Y + sqrt(delta) G with G an independent standard-Gaussian symmetric matrix."""
    if delta < 0.0:
        raise NegativeDelta(f"delta must be >= 0, got {delta}")
    if delta == 0.0:
        return y
    u = _uniforms(_as_key(seed) + (_ROLE_GAUSS,), y.upper.size)
    return SymmetricMatrix(y.n, y.upper + math.sqrt(delta) * ndtri(u))


def spectrum(a: SymmetricMatrix) -> np.ndarray:
    """Eigenvalues, ascending.  Checks the trace identity as a cheap guard."""
    dense = a.dense()
    w = np.linalg.eigvalsh(dense)
    frob = float(np.linalg.norm(dense))
    trace = float(np.trace(dense))
    if abs(float(np.sum(w)) - trace) > 1e-9 * frob + 1e-12:
        raise ArithmeticError("eigenvalue sum disagrees with trace")
    return w


def empirical_law_integral(eigenvalues: np.ndarray, f: FSpec) -> float:
    """(1/n) sum f(lambda_i)."""
    return float(np.mean(f(np.asarray(eigenvalues, dtype=float))))


@dataclass(frozen=True)
class SpectralSample:
    """One trial's spectrum of X = Y/sqrt(n) with its f-statistic."""

    eigenvalues: np.ndarray
    f_integral: float
    seed: int
    n: int

    def __post_init__(self):
        if self.eigenvalues.shape != (self.n,):
            raise ValidationError("eigenvalue count must equal n")
        if np.any(np.diff(self.eigenvalues) < 0):
            raise ValidationError("eigenvalues must be sorted ascending")
        self.eigenvalues.setflags(write=False)


def spectral_sample(n: int, law: EntryLaw, seed: int, f: FSpec,
                    delta: float = 0.0) -> SpectralSample:
    """Draw Y, optionally mollify, normalize by sqrt(n), take the spectrum."""
    y = sample_wigner(n, law, seed)
    if delta > 0.0:
        y = mollify_ensemble(y, delta, seed)
    eigs = spectrum(y.scaled(1.0 / math.sqrt(n)))
    return SpectralSample(eigs, empirical_law_integral(eigs, f), int(seed), n)


def hoffman_wielandt_gap(a: SymmetricMatrix, b: SymmetricMatrix) -> tuple[float, float]:
    """(sum of squared sorted-eigenvalue gaps, Tr[(A-B)^2]); lhs <= rhs always."""
    if a.n != b.n:
        raise DimensionMismatch(f"sizes differ: {a.n} vs {b.n}")
    lhs = float(np.sum((spectrum(a) - spectrum(b)) ** 2))
    diff = a.dense() - b.dense()
    rhs = float(np.sum(diff * diff))
    return lhs, rhs


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------

def guionnet_bound(n: int, epsilon: float, c: float, lip: float,
                   eps_over_3: bool = False) -> float:
    """2 exp(-n^2 eps^2 / (4 c lip^2)); the eps/3 split variant uses 36."""
    if not (n >= 1 and epsilon > 0.0 and c > 0.0 and lip > 0.0):
        raise NonPositiveArg("guionnet_bound needs positive arguments")
    denom = 36.0 if eps_over_3 else 4.0
    return min(2.0, 2.0 * math.exp(-(n * n * epsilon * epsilon) / (denom * c * lip * lip)))


def term1_bound(epsilon: float, lip: float, delta: float) -> float:
    """9 lip^2 delta / eps^2, clamped to 1 (it bounds a probability)."""
    if not (epsilon > 0.0 and lip > 0.0 and delta >= 0.0):
        raise NonPositiveArg("term1_bound needs eps, lip > 0 and delta >= 0")
    return min(1.0, 9.0 * lip * lip * delta / (epsilon * epsilon))


def term3_check(n: int, epsilon: float, f: FSpec, delta: float, trials: int,
                seed) -> tuple[float, float]:
    """Monte Carlo gap |E int f dmu_X~ - E int f dmu_X| vs its bound.

    Uses the two-point entry law (the canonical no-LSI example).  Raises
    if the estimate exceeds lip sqrt(delta) + 3 stderr; returns
    (gap estimate, eps/3 threshold).
    """
    if not (n >= 1 and epsilon > 0.0 and delta >= 0.0 and trials >= 1):
        raise NonPositiveArg("term3_check needs positive arguments")
    law = two_point_law()
    key = _as_key(seed)
    gaps = np.empty(trials)
    root_n = math.sqrt(n)
    for t in range(trials):
        y = sample_wigner(n, law, key + (3, t))
        y_moll = mollify_ensemble(y, delta, key + (3, t))
        s = empirical_law_integral(spectrum(y.scaled(1.0 / root_n)), f)
        s_moll = empirical_law_integral(spectrum(y_moll.scaled(1.0 / root_n)), f)
        gaps[t] = s_moll - s
    gap = abs(float(np.mean(gaps)))
    stderr = float(np.std(gaps, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    bound = f.lip * math.sqrt(delta)
    if gap > bound + 3.0 * stderr:
        raise ArithmeticError(
            f"term-3 gap {gap:.6g} exceeds lip*sqrt(delta)+3se = {bound + 3 * stderr:.6g}"
        )
    return gap, epsilon / 3.0


# ---------------------------------------------------------------------------
# cutoff
# ---------------------------------------------------------------------------

def cutoff(y: SymmetricMatrix, level: float) -> SymmetricMatrix:
    """Zero every entry with |entry| >= level (strict keep below the level)."""
    if level < 0.0:
        raise ValidationError("cutoff level must be >= 0")
    kept = np.where(np.abs(y.upper) < level, y.upper, 0.0)
    return SymmetricMatrix(y.n, kept)


def exponential_cutoff_level(rate: float, target: float) -> float:
    """Smallest C with E[Y^2; Y >= C] < target for Y ~ exponential(rate).

    Closed form: E[Y^2; Y >= C] = exp(-rate C) (C^2 + 2C/rate + 2/rate^2).
    """
    if not (rate > 0.0 and target > 0.0):
        raise NonPositiveArg("exponential_cutoff_level needs positive arguments")

    def excess(c: float) -> float:
        return math.exp(-rate * c) * (c * c + 2.0 * c / rate + 2.0 / (rate * rate))

    lo, hi = 0.0, 1.0
    while excess(hi) >= target:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) >= target:
            lo = mid
        else:
            hi = mid
    return hi


# ---------------------------------------------------------------------------
# delta schedule
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeltaSchedule:
    """Rows (n, delta(n), c(delta(n))), delta(n) nonincreasing by construction."""

    rows: tuple[tuple[int, float, float], ...]

    def delta_for(self, n: int) -> float:
        for row_n, dl, _ in self.rows:
            if row_n == n:
                return dl
        raise KeyError(f"n={n} not in schedule")

    def to_dict(self) -> dict:
        return {"rows": [{"n": n, "delta": dl, "c_of_delta": c} for n, dl, c in self.rows]}


def delta_schedule(c_table: Sequence[tuple[float, float]], ns: Sequence[int]) -> DeltaSchedule:
    """For each requested n, the smallest tabulated delta with c(delta) <= n.

    ``c_table`` holds (delta, c_upper) pairs from compute_bg runs.  The
    smallest-feasible rule makes delta(n) automatically nonincreasing in
    n.  Raises NoFeasibleDelta when a requested n admits no row.
    """
    table = [(float(d), float(c)) for d, c in c_table]
    if not table or any(d <= 0.0 for d, _ in table):
        raise ValidationError("c_table needs positive deltas")
    if len({d for d, _ in table}) != len(table):
        raise ValidationError("c_table deltas must be distinct")
    rows = []
    for n in ns:
        feasible = [(d, c) for d, c in table if c <= n]
        if not feasible:
            raise NoFeasibleDelta(f"no tabulated delta has c(delta) <= {n}")
        d, c = min(feasible)
        rows.append((int(n), d, c))
    return DeltaSchedule(tuple(rows))


# ---------------------------------------------------------------------------
# the concentration experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    law: EntryLaw
    f: FSpec
    n_list: tuple[int, ...]
    eps_list: tuple[float, ...]
    trials: int
    seed: int
    delta_mode: str = "none"            # "none" | "fixed" | "schedule"
    delta_value: float = 0.0
    c_table: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.delta_mode not in ("none", "fixed", "schedule"):
            raise ValidationError(f"unknown delta mode {self.delta_mode!r}")
        if self.trials < 0:
            raise ValidationError("trials must be >= 0")
        if any(n < 1 for n in self.n_list):
            raise ValidationError("matrix sizes must be >= 1")
        if any(e <= 0.0 for e in self.eps_list):
            raise ValidationError("eps values must be positive")


def config_from_dict(raw: dict) -> ExperimentConfig:
    extra = set(raw) - {"law", "f", "n", "eps", "trials", "seed", "delta"}
    if extra:
        raise ValidationError(f"unknown config keys: {sorted(extra)}")
    delta = raw.get("delta", {"mode": "none"})
    extra_d = set(delta) - {"mode", "value", "table"}
    if extra_d:
        raise ValidationError(f"unknown delta keys: {sorted(extra_d)}")
    return ExperimentConfig(
        law=law_from_spec(raw["law"]),
        f=f_from_spec(raw["f"]),
        n_list=tuple(int(n) for n in raw["n"]),
        eps_list=tuple(float(e) for e in raw["eps"]),
        trials=int(raw.get("trials", 0)),
        seed=int(raw.get("seed", 0)),
        delta_mode=delta.get("mode", "none"),
        delta_value=float(delta.get("value", 0.0)),
        c_table=tuple((float(d), float(c)) for d, c in delta.get("table", ())),
    )


@dataclass(frozen=True)
class Cell:
    n: int
    eps: float
    trials: int
    empirical_freq: float
    mc_stderr: float
    guionnet_bound: float
    term1_bound: float
    term1_freq: float
    term2_bound: float
    term3_gap: float
    term3_stderr: float
    term3_bound: float
    term3_indicator: float
    envelope_ok: bool
    delta_used: float
    c_used: float
    f_lip: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "n", "eps", "trials", "empirical_freq", "mc_stderr", "guionnet_bound",
            "term1_bound", "term1_freq", "term2_bound", "term3_gap", "term3_stderr",
            "term3_bound", "term3_indicator", "envelope_ok", "delta_used", "c_used",
            "f_lip")}

    def to_csv_row(self) -> str:
        cols = (self.n, self.eps, self.trials, self.empirical_freq, self.mc_stderr,
                self.guionnet_bound, self.term1_bound, self.term3_gap,
                self.delta_used, self.c_used)
        return ",".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in cols)


@dataclass(frozen=True)
class ConcentrationReport:
    law_kind: str
    f_kind: str
    f_lip: float
    trials: int
    seed: int
    cells: tuple[Cell, ...]

    CSV_HEADER = "n,eps,trials,freq,stderr,bound,term1,term3,delta,c_upper"

    def to_dict(self) -> dict:
        return {
            "law": self.law_kind,
            "f": self.f_kind,
            "f_lip": self.f_lip,
            "trials": self.trials,
            "seed": self.seed,
            "cells": [c.to_dict() for c in self.cells],
        }

    def to_csv(self) -> str:
        return "\n".join([self.CSV_HEADER] + [c.to_csv_row() for c in self.cells]) + "\n"


def _resolve_delta_c(config: ExperimentConfig, n: int,
                     c_cache: dict) -> tuple[float, float]:
    """Mollification variance and LSI constant for one matrix size."""
    if config.delta_mode == "none":
        c = config.law.lsi_constant
        if c is None:
            raise ValidationError(
                f"law {config.law.kind!r} has no LSI constant; use a delta mode"
            )
        return 0.0, c
    if config.delta_mode == "fixed":
        dl = config.delta_value
    else:
        schedule = delta_schedule(config.c_table, [n])
        _, dl, c = schedule.rows[0]
        return dl, c
    if dl not in c_cache:
        known = config.law.lsi_constant
        if known is not None:
            # Gaussian * Gaussian is Gaussian: constant is the summed variance
            c_cache[dl] = known + dl
        else:
            report = _bg.compute_bg(MollifiedDensity(config.law.as_measure(), dl))
            c_cache[dl] = report.c_upper
    return dl, c_cache[dl]


def _trial_stats(config: ExperimentConfig, n: int, delta: float, batch: int,
                 trial: int) -> tuple[float, float]:
    """(int f dmu_X, int f dmu_X~) for one trial."""
    key = (config.seed, batch, trial)
    y = sample_wigner(n, config.law, key)
    inv_root = 1.0 / math.sqrt(n)
    s = empirical_law_integral(spectrum(y.scaled(inv_root)), config.f)
    if delta == 0.0:
        return s, s
    y_moll = mollify_ensemble(y, delta, key)
    s_moll = empirical_law_integral(spectrum(y_moll.scaled(inv_root)), config.f)
    return s, s_moll


def concentration_experiment(config: ExperimentConfig, workers: int = 1) -> ConcentrationReport:
    """Estimate deviation frequencies over the (n, eps) grid.

    The mean of int f dmu_X is estimated from an independent pilot batch
    of the same size, so the deviation count is not correlated with its
    own centering.  Per cell the report carries the three decomposition
    diagnostics and the envelope check

        empirical_freq <= term1_bound + term2_bound + term3_indicator + 5 stderr.

    Output is bit-identical for any worker count: streams are keyed by
    (seed, batch, trial) and reductions run over index-ordered arrays.
    """
    lip = config.f.lip
    cells: list[Cell] = []
    if config.trials == 0:
        return ConcentrationReport(config.law.kind, config.f.kind, lip, 0,
                                   config.seed, ())
    c_cache: dict = {}
    for n in config.n_list:
        delta, c_used = _resolve_delta_c(config, n, c_cache)
        trials = config.trials

        def run_batch(batch: int) -> tuple[np.ndarray, np.ndarray]:
            s = np.empty(trials)
            s_moll = np.empty(trials)
            if workers > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    results = list(pool.map(
                        lambda t: _trial_stats(config, n, delta, batch, t),
                        range(trials)))
            else:
                results = [_trial_stats(config, n, delta, batch, t)
                           for t in range(trials)]
            for t, (a, b) in enumerate(results):
                s[t] = a
                s_moll[t] = b
            return s, s_moll

        pilot, _ = run_batch(0)
        pilot_mean = float(np.mean(pilot))
        s, s_moll = run_batch(1)
        diffs = s_moll - s
        term3_gap = abs(float(np.mean(diffs)))
        term3_stderr = (float(np.std(diffs, ddof=1) / math.sqrt(trials))
                        if trials > 1 else 0.0)

        for eps in config.eps_list:
            dev = np.abs(s - pilot_mean) >= eps
            freq = float(np.mean(dev))
            stderr = math.sqrt(freq * (1.0 - freq) / trials)
            t1_freq = float(np.mean(np.abs(s - s_moll) >= eps / 3.0))
            t1_bound = term1_bound(eps, lip, delta) if delta > 0.0 else 0.0
            t2 = guionnet_bound(n, eps, c_used, lip, eps_over_3=True)
            gb = guionnet_bound(n, eps, c_used, lip)
            t3_bound = lip * math.sqrt(delta)
            t3_ind = 0.0 if term3_gap < eps / 3.0 else 1.0
            cells.append(Cell(
                n=n, eps=eps, trials=trials,
                empirical_freq=freq, mc_stderr=stderr,
                guionnet_bound=gb,
                term1_bound=t1_bound, term1_freq=t1_freq,
                term2_bound=t2,
                term3_gap=term3_gap, term3_stderr=term3_stderr,
                term3_bound=t3_bound, term3_indicator=t3_ind,
                envelope_ok=freq <= t1_bound + t2 + t3_ind + 5.0 * stderr,
                delta_used=delta, c_used=c_used, f_lip=lip,
            ))
    return ConcentrationReport(config.law.kind, config.f.kind, lip,
                               config.trials, config.seed, tuple(cells))
