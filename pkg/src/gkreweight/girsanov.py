"""Girsanov weights and the second moment of the weighted estimator.

The simulation layer stores, per replica, the raw sums entering the
exponential weight: x = -sum u(q_n)^T dW_n and qv = sum |u(q_n)|^2 dt.  How
those combine depends on which dynamics generated the path, and mixing the
two forms up is the classic implementation bug, so every sample carries its
provenance:

* biased paths carry the importance weight  exp(alpha x - alpha^2/2 qv),
  which multiplies the correlation integral in the weighted estimator;
* reference paths carry the change-of-measure factor
  exp(alpha x + alpha^2/2 qv), which re-expresses the second moment of the
  weighted estimator as an average over unbiased paths.

The second form makes the whole alpha-dependence of the estimator's second
moment available from one reference campaign: scans over alpha, the
derivatives at zero, and the near-optimal bias -F'(0)/F''(0) are all plain
reductions over cached statistics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .output import write_csv
from .sde import Ensemble, ReplicaRecord

__all__ = [
    "REFERENCE",
    "BIASED",
    "WeightedSample",
    "SampleSet",
    "SecondMomentScan",
    "SecondMomentDerivatives",
    "AlphaEstimate",
    "WeightOverflowError",
    "DegenerateCurvatureError",
    "log_weight",
    "weight",
    "weight_statistics",
    "second_moment_scan",
    "second_moment_derivatives",
    "optimal_alpha",
]

REFERENCE = "reference"
BIASED = "biased"

# exp() overflows just above 709; weights beyond this are a failure mode,
# not data.
MAX_LOG_WEIGHT = 700.0


class WeightOverflowError(OverflowError):
    """A log-weight exceeded the representable exponent range."""


class DegenerateCurvatureError(RuntimeError):
    """The curvature estimate is statistically indistinguishable from zero."""


@dataclass(frozen=True)
class WeightedSample:
    """Weight statistics of one replica, tagged with its provenance."""

    gk_integral: float
    x_sum: float
    qv_sum: float
    origin: str = BIASED
    sim_alpha: float | None = None

    def __post_init__(self):
        if self.origin not in (REFERENCE, BIASED):
            raise ValueError(f"origin must be {REFERENCE!r} or {BIASED!r}")

    @classmethod
    def from_record(cls, record: ReplicaRecord, origin: str, sim_alpha: float | None = None):
        return cls(record.gk_integral, record.x_sum, record.qv_sum, origin, sim_alpha)


@dataclass(frozen=True)
class SampleSet:
    """Array-backed batch of weighted samples sharing one provenance."""

    gk: np.ndarray
    x: np.ndarray
    qv: np.ndarray
    origin: str
    sim_alpha: float | None = None

    def __len__(self):
        return self.gk.size

    def __getitem__(self, i: int) -> WeightedSample:
        return WeightedSample(
            float(self.gk[i]), float(self.x[i]), float(self.qv[i]), self.origin, self.sim_alpha
        )

    @classmethod
    def from_ensemble(cls, ensemble: Ensemble, step: int | None = None) -> "SampleSet":
        """Extract samples from an ensemble, optionally at a checkpoint step."""
        gk, x, qv = ensemble.stats_at(ensemble.n_steps if step is None else step)
        origin = REFERENCE if ensemble.alpha == 0.0 else BIASED
        return cls(gk, x, qv, origin, ensemble.alpha)


def _as_arrays(samples) -> SampleSet:
    if isinstance(samples, SampleSet):
        return samples
    seq: Sequence[WeightedSample] = list(samples)
    if not seq:
        raise ValueError("empty sample collection")
    origin = seq[0].origin
    sim_alpha = seq[0].sim_alpha
    if any(s.origin != origin for s in seq):
        raise ValueError("samples mix reference and biased provenance")
    return SampleSet(
        np.array([s.gk_integral for s in seq]),
        np.array([s.x_sum for s in seq]),
        np.array([s.qv_sum for s in seq]),
        origin,
        sim_alpha,
    )


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    """Mean and standard error with exact (compensated) accumulation."""
    n = values.size
    mean = math.fsum(values) / n
    if n < 2:
        return mean, math.nan
    var = math.fsum((values - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def log_weight(sample: WeightedSample, alpha: float) -> float:
    """Log of the weight attached to a sample when evaluated at alpha."""
    half = 0.5 * alpha * alpha * sample.qv_sum
    if sample.origin == BIASED:
        return alpha * sample.x_sum - half
    return alpha * sample.x_sum + half


def weight(sample: WeightedSample, alpha: float) -> float:
    """exp(log_weight); exactly 1 at alpha = 0."""
    lw = log_weight(sample, alpha)
    if lw > MAX_LOG_WEIGHT:
        raise WeightOverflowError(
            f"log-weight {lw:.1f} exceeds {MAX_LOG_WEIGHT} at alpha={alpha}"
        )
    return math.exp(lw)


def _log_weights(ss: SampleSet, alpha: float) -> np.ndarray:
    half = 0.5 * alpha * alpha * ss.qv
    lw = alpha * ss.x - half if ss.origin == BIASED else alpha * ss.x + half
    peak = float(lw.max()) if lw.size else 0.0
    if peak > MAX_LOG_WEIGHT:
        raise WeightOverflowError(
            f"log-weight {peak:.1f} exceeds {MAX_LOG_WEIGHT} at alpha={alpha}"
        )
    return lw

def weights(samples, alpha: float) -> np.ndarray:
    """Vectorized weights for a batch of samples."""
    return np.exp(_log_weights(_as_arrays(samples), alpha))


def weight_statistics(samples, alpha: float) -> tuple[float, float]:
    """Mean Girsanov weight and its standard error (martingale check)."""
    return _mean_se(weights(samples, alpha))


@dataclass(frozen=True)
class SecondMomentScan:
    """Second moment of the weighted estimator over a grid of alphas."""

    alphas: np.ndarray
    values: np.ndarray
    std_errors: np.ndarray
    count: int

    def write_csv(self, path) -> None:
        rows = zip(
            (float(a) for a in self.alphas),
            (float(v) for v in self.values),
            (float(e) for e in self.std_errors),
        )
        write_csv(path, ["alpha", "f_value", "std_error"], rows)


def second_moment_scan(samples, alphas) -> SecondMomentScan:
    """Estimate the second moment of the weighted estimator on an alpha grid.

    Uses the reference-path representation, so the entire grid costs one
    pass over cached statistics and no re-simulation.  Samples must come
    from the unbiased dynamics.
    """
    ss = _as_arrays(samples)
    if ss.origin != REFERENCE:
        raise ValueError("second_moment_scan requires samples from the reference dynamics")
    alphas = np.asarray(list(alphas), dtype=float)
    if alphas.size == 0:
        raise ValueError("empty alpha grid")
    if not np.all(np.isfinite(alphas)) or np.any(np.diff(alphas) <= 0):
        raise ValueError("alphas must be finite and strictly increasing")
    phi = ss.gk**2
    values = np.empty(alphas.size)
    errors = np.empty(alphas.size)
    for i, a in enumerate(alphas):
        try:
            w = np.exp(_log_weights(ss, float(a)))
        except WeightOverflowError as exc:
            raise WeightOverflowError(f"{exc} (scan entry {i})") from None
        values[i], errors[i] = _mean_se(phi * w)
    return SecondMomentScan(alphas, values, errors, len(ss))


class SecondMomentDerivatives(NamedTuple):
    """Derivatives of the weighted second moment at alpha = 0."""

    first: float
    second: float
    se_first: float
    se_second: float
    third: float | None = None


def second_moment_derivatives(samples, include_third: bool = False) -> SecondMomentDerivatives:
    """First and second derivatives at alpha = 0, from reference samples.

    first  = E[gk^2 x],
    second = E[gk^2 (qv + x^2)],
    and optionally the diagnostic third derivative E[gk^2 (x^3 + 3 qv x)].
    """
    ss = _as_arrays(samples)
    if ss.origin != REFERENCE:
        raise ValueError("derivatives at zero require samples from the reference dynamics")
    if len(ss) < 2:
        raise ValueError("need at least two samples")
    phi = ss.gk**2
    f1, se1 = _mean_se(phi * ss.x)
    f2, se2 = _mean_se(phi * (ss.qv + ss.x**2))
    third = None
    if include_third:
        third = math.fsum(phi * (ss.x**3 + 3.0 * ss.qv * ss.x)) / len(ss)
    return SecondMomentDerivatives(f1, f2, se1, se2, third)


class AlphaEstimate(NamedTuple):
    alpha: float
    se: float


def optimal_alpha(samples) -> AlphaEstimate:
    """Near-optimal bias magnitude -F'(0)/F''(0) with a delta-method error.

    Raises DegenerateCurvatureError when the curvature estimate is not
    significantly positive (e.g. a vanishing bias field), in which case the
    ratio carries no information.
    """
    ss = _as_arrays(samples)
    if ss.origin != REFERENCE:
        raise ValueError("optimal_alpha requires samples from the reference dynamics")
    n = len(ss)
    if n < 2:
        raise ValueError("need at least two samples")
    phi = ss.gk**2
    va = phi * ss.x
    vb = phi * (ss.qv + ss.x**2)
    a, se_a = _mean_se(va)
    b, se_b = _mean_se(vb)
    if b <= 3.0 * se_b:
        raise DegenerateCurvatureError(
            f"curvature estimate {b:.3e} is within 3 standard errors ({se_b:.3e}) of zero"
        )
    cov = math.fsum((va - a) * (vb - b)) / (n - 1)
    var = (se_a * se_a) + (a * a / (b * b)) * (se_b * se_b) - 2.0 * (a / b) * (cov / n)
    var /= b * b
    return AlphaEstimate(-a / b, math.sqrt(max(var, 0.0)))
