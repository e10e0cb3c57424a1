"""Green-Kubo estimators, ensemble statistics, and curve fits.

All reductions accumulate with math.fsum (exact compensated summation) in
fixed replica order, so ensemble statistics are reproducible to the bit for
a given sample order and accurate at any ensemble size.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import girsanov
from .girsanov import REFERENCE, SampleSet
from .sde import Ensemble, ReplicaRecord

__all__ = [
    "EnsembleStats",
    "FitResult",
    "gk_plain",
    "gk_weighted",
    "second_moment_reduction",
    "variance_reduction",
    "fit_affine",
    "fit_quadratic",
    "fit_loglog_slope",
    "autocorrelation_curve",
]


@dataclass(frozen=True)
class EnsembleStats:
    """Count, mean, variance and 95% confidence halfwidth of an ensemble."""

    count: int
    mean: float
    variance: float
    ci95_halfwidth: float
    raw_second_moment: float

    @classmethod
    def from_values(cls, values: np.ndarray) -> "EnsembleStats":
        values = np.asarray(values, dtype=float)
        n = values.size
        if n < 2:
            raise ValueError("need at least two values")
        mean = math.fsum(values) / n
        var = math.fsum((values - mean) ** 2) / (n - 1)
        m2 = math.fsum(values**2) / n
        return cls(n, mean, var, 1.96 * math.sqrt(var / n), m2)


def _gk_values(samples) -> np.ndarray:
    if isinstance(samples, Ensemble):
        return samples.gk
    if isinstance(samples, SampleSet):
        return samples.gk
    return np.array([s.gk_integral for s in samples])


def gk_plain(samples) -> EnsembleStats:
    """Statistics of the unweighted truncated Green-Kubo estimator."""
    return EnsembleStats.from_values(_gk_values(samples))


def gk_weighted(samples, alpha: float) -> EnsembleStats:
    """Statistics of the Girsanov-weighted estimator at the simulated alpha.

    Samples must come from the biased dynamics run at this same alpha; a
    reference-tagged batch is only accepted at alpha = 0, where the weight
    is identically one and the result is bit-identical to gk_plain.
    """
    ss = samples if isinstance(samples, SampleSet) else girsanov._as_arrays(samples)
    if ss.origin == REFERENCE and alpha != 0.0:
        raise ValueError(
            "samples were generated by the reference dynamics; gk_weighted "
            "applies the importance weight of biased paths"
        )
    if ss.sim_alpha is not None and ss.sim_alpha != alpha:
        raise ValueError(
            f"samples were simulated at alpha={ss.sim_alpha}, not alpha={alpha}"
        )
    w = girsanov.weights(ss, alpha)
    return EnsembleStats.from_values(w * ss.gk)


def second_moment_reduction(reference: EnsembleStats, weighted: EnsembleStats) -> float:
    """Relative reduction of the raw second moment (the headline metric)."""
    if reference.raw_second_moment <= 0.0:
        raise ValueError("reference raw second moment must be positive")
    return (reference.raw_second_moment - weighted.raw_second_moment) / reference.raw_second_moment


def variance_reduction(reference: EnsembleStats, weighted: EnsembleStats) -> float:
    """Relative reduction of the variance (secondary, for comparison)."""
    if reference.variance <= 0.0:
        raise ValueError("reference variance must be positive")
    return (reference.variance - weighted.variance) / reference.variance


@dataclass(frozen=True)
class FitResult:
    """Least-squares coefficients (ascending degree) with fit diagnostics."""

    coefficients: tuple[float, ...]
    residual_norm: float
    r_squared: float


def _lstsq(design: np.ndarray, ys: np.ndarray) -> FitResult:
    coef, _, rank, _ = np.linalg.lstsq(design, ys, rcond=None)
    if rank < design.shape[1]:
        raise ValueError("rank-deficient design matrix")
    resid = ys - design @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res <= 1e-28 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return FitResult(tuple(float(c) for c in coef), math.sqrt(ss_res), r2)


def fit_affine(xs, ys) -> FitResult:
    """Least squares fit ys ~ c0 + c1 xs."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if xs.size < 2:
        raise ValueError("affine fit needs at least 2 points")
    return _lstsq(np.stack([np.ones_like(xs), xs], axis=1), ys)


def fit_quadratic(xs, ys) -> FitResult:
    """Least squares fit ys ~ c0 + c1 xs + c2 xs^2."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if xs.size < 3:
        raise ValueError("quadratic fit needs at least 3 points")
    return _lstsq(np.stack([np.ones_like(xs), xs, xs**2], axis=1), ys)


def fit_loglog_slope(xs, ys) -> FitResult:
    """Affine fit of log|ys| against log xs; the slope is the power law."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if xs.size < 3:
        raise ValueError("log-log fit needs at least 3 points")
    if np.any(xs <= 0):
        raise ValueError("log-log fit needs strictly positive xs")
    if not (np.all(ys > 0) or np.all(ys < 0)):
        raise ValueError("log-log fit needs ys of one strict sign")
    return fit_affine(np.log(xs), np.log(np.abs(ys)))


def autocorrelation_curve(source, dt: float | None = None) -> list[tuple[float, float, float]]:
    """Ensemble mean of R(q_t) S(q_0) at every checkpoint time.

    Accepts a merged Ensemble or a sequence of ReplicaRecord sharing one
    checkpoint grid.  Values are plain (unweighted) means under whichever
    dynamics generated the samples.
    """
    if isinstance(source, Ensemble):
        steps = source.checkpoint_steps
        if source.r_at is None:
            raise ValueError("ensemble was simulated without checkpoints")
        r_at, s0, dt = source.r_at, source.s0, source.dt
    else:
        records: list[ReplicaRecord] = list(source)
        if not records:
            raise ValueError("empty sample collection")
        if dt is None:
            raise ValueError("dt is required with record input")
        steps = np.asarray(records[0].checkpoint_steps, dtype=np.int64)
        for rec in records:
            if tuple(rec.checkpoint_steps) != tuple(steps):
                raise ValueError("records have mismatched checkpoint grids")
        r_at = np.stack([rec.r_at for rec in records], axis=1)
        s0 = np.array([rec.s0 for rec in records])
    curve = []
    for k, step in enumerate(steps):
        vals = r_at[k] * s0
        n = vals.size
        mean = math.fsum(vals) / n
        var = math.fsum((vals - mean) ** 2) / (n - 1)
        curve.append((float(step) * dt, mean, math.sqrt(var / n)))
    return curve
