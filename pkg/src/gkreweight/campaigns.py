"""Config-driven experiment campaigns with deterministic scheduling.

A campaign simulates J replicas once to the largest requested horizon and
harvests every shorter truncation time from checkpointed partial sums.
Replicas are partitioned into fixed contiguous blocks; per-replica seeding
makes the partitioning and the worker count irrelevant to the results, so
output CSVs are byte-identical for equal (config, master seed).
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .estimators import (
    EnsembleStats,
    autocorrelation_curve,
    fit_affine,
    fit_loglog_slope,
    fit_quadratic,
    gk_weighted,
    second_moment_reduction,
)
from .girsanov import (
    DegenerateCurvatureError,
    MAX_LOG_WEIGHT,
    SampleSet,
    SecondMomentScan,
    WeightOverflowError,
    optimal_alpha,
    second_moment_derivatives,
    second_moment_scan,
)
from .models import DEFAULT_GRID, Model, make_model
from .output import write_csv, write_json
from .poisson import compute_constants, gk_reference_value
from .sde import Ensemble, IntegratorConfig, SeedPolicy, sample_initial, simulate_block

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "run_reference_campaign",
    "run_biased_campaign",
    "run_oracle",
    "reproduce",
    "FIGURES",
    "simulate_ensemble",
]

# Replicas per scheduling block; fixed so block boundaries never depend on
# the worker count.
BLOCK_SIZE = 4096

GRID_RTOL = 1e-12


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one experiment run."""

    model_name: str
    beta: float
    dt: float
    t_grid: tuple[float, ...]
    alphas: tuple[float, ...] = ()
    replicas: int = 2
    master_seed: int = 0
    checkpoints: tuple[float, ...] = ()
    workers: int = 0
    output_dir: str = "out"
    grid_size: int = DEFAULT_GRID

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.replicas < 2:
            raise ConfigError(f"replicas must be >= 2, got {self.replicas}")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be nonnegative")
        if not self.t_grid:
            raise ConfigError("t_grid must not be empty")
        if any(t2 <= t1 for t1, t2 in zip(self.t_grid, self.t_grid[1:])):
            raise ConfigError("t_grid must be strictly increasing")
        for t in self.t_grid:
            if t <= 0:
                raise ConfigError(f"t_grid entries must be positive, got {t}")
            self._steps_checked(t, "t_grid")
        for t in self.checkpoints:
            if t < 0 or t > self.t_grid[-1]:
                raise ConfigError(f"checkpoint {t} outside [0, {self.t_grid[-1]}]")
            self._steps_checked(t, "checkpoints")
        if any(not math.isfinite(a) for a in self.alphas):
            raise ConfigError("alphas must be finite")
        if self.workers < 0:
            raise ConfigError("workers must be >= 0 (0 means auto)")
        if self.grid_size < 16:
            raise ConfigError("grid_size must be >= 16")

    def _steps_checked(self, t: float, label: str) -> int:
        steps = round(t / self.dt)
        if abs(steps * self.dt - t) > GRID_RTOL * max(1.0, abs(t)):
            raise ConfigError(f"{label} entry {t} is not a multiple of dt={self.dt}")
        return steps

    def steps_for(self, t: float) -> int:
        return round(t / self.dt)

    @property
    def t_max(self) -> float:
        return self.t_grid[-1]

    def model(self) -> Model:
        return make_model(self.model_name, self.beta)

    def to_dict(self) -> dict:
        return {
            "model": {"name": self.model_name, "beta": self.beta},
            "dt": self.dt,
            "t_grid": list(self.t_grid),
            "alphas": list(self.alphas),
            "replicas": self.replicas,
            "master_seed": self.master_seed,
            "checkpoints": list(self.checkpoints),
            "workers": self.workers,
            "output_dir": str(self.output_dir),
            "grid_size": self.grid_size,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            model = d["model"]
            return cls(
                model_name=model["name"],
                beta=float(model["beta"]),
                dt=float(d["dt"]),
                t_grid=tuple(float(t) for t in d["t_grid"]),
                alphas=tuple(float(a) for a in d.get("alphas", ())),
                replicas=int(d.get("replicas", 2)),
                master_seed=int(d.get("master_seed", 0)),
                checkpoints=tuple(float(t) for t in d.get("checkpoints", ())),
                workers=int(d.get("workers", 0)),
                output_dir=str(d.get("output_dir", "out")),
                grid_size=int(d.get("grid_size", DEFAULT_GRID)),
            )
        except KeyError as exc:
            raise ConfigError(f"config is missing required key {exc}") from None

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(canon).hexdigest()


def resolve_workers(requested: int) -> int:
    env = os.environ.get("GK_WORKERS")
    if env:
        return max(1, int(env))
    if requested > 0:
        return requested
    return max(1, os.cpu_count() or 1)


def _block_task(payload):
    model, dt, n_steps, alpha, master_seed, lo, hi, ck_steps = payload
    cfg = IntegratorConfig(dt=dt, n_steps=n_steps, alpha=alpha)
    initials = np.stack(
        [sample_initial(model, SeedPolicy(master_seed, i)) for i in range(lo, hi)]
    )
    return simulate_block(model, cfg, master_seed, range(lo, hi), initials, ck_steps)


def simulate_ensemble(
    model: Model,
    dt: float,
    n_steps: int,
    alpha: float,
    master_seed: int,
    replicas: int,
    checkpoint_steps=(),
    workers: int = 1,
) -> Ensemble:
    """Simulate J replicas in fixed blocks, optionally across processes."""
    ck = tuple(int(s) for s in checkpoint_steps)
    payloads = [
        (model, dt, n_steps, alpha, master_seed, lo, min(lo + BLOCK_SIZE, replicas), ck)
        for lo in range(0, replicas, BLOCK_SIZE)
    ]
    if workers <= 1 or len(payloads) == 1:
        parts = [_block_task(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(payloads))) as pool:
            parts = list(pool.map(_block_task, payloads))
    return Ensemble.concat(parts)


class _Manifest:
    def __init__(self, cfg: ExperimentConfig, out_dir: Path):
        self.cfg = cfg
        self.out_dir = out_dir
        self.t0 = time.time()
        self.stages: dict[str, float] = {}
        self.extra: dict = {}
        self._mark = self.t0

    def stage(self, name: str) -> None:
        now = time.time()
        self.stages[name] = self.stages.get(name, 0.0) + (now - self._mark)
        self._mark = now

    def write(self, outputs: list[Path]) -> Path:
        inventory = {}
        for p in outputs:
            data = p.read_bytes()
            inventory[p.name] = {
                "bytes": len(data),
                "sha256": hashlib.sha256(data).hexdigest(),
            }
        payload = {
            "config": self.cfg.to_dict(),
            "config_hash": self.cfg.hash(),
            "code_version": __version__,
            "master_seed": self.cfg.master_seed,
            "wall_time_s": time.time() - self.t0,
            "stage_time_s": self.stages,
            "outputs": inventory,
        }
        payload.update(self.extra)
        path = self.out_dir / "manifest.json"
        write_json(path, payload)
        return path


def _prepare(cfg: ExperimentConfig, out_dir) -> tuple[Model, Path, _Manifest]:
    out = Path(out_dir) if out_dir is not None else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return cfg.model(), out, _Manifest(cfg, out)


def _harvest_steps(cfg: ExperimentConfig) -> list[int]:
    steps = {cfg.steps_for(t) for t in cfg.t_grid}
    steps.update(cfg.steps_for(t) for t in cfg.checkpoints)
    return sorted(steps)


@dataclass
class ReferenceCampaign:
    config: ExperimentConfig
    ensemble: Ensemble
    gk_stats: dict[float, EnsembleStats]
    derivatives: dict
    alpha_estimates: dict
    scan: SecondMomentScan | None
    outputs: list[Path] = field(default_factory=list)


def run_reference_campaign(cfg: ExperimentConfig, out_dir=None) -> ReferenceCampaign:
    """Simulate the unbiased dynamics once and harvest every T in t_grid.

    Emits gk.csv, fderiv.csv, alpha_hat.csv and (if alphas are configured)
    fscan.csv at the largest T.
    """
    model, out, manifest = _prepare(cfg, out_dir)
    workers = resolve_workers(cfg.workers)
    n_max = cfg.steps_for(cfg.t_max)
    ensemble = simulate_ensemble(
        model, cfg.dt, n_max, 0.0, cfg.master_seed, cfg.replicas,
        _harvest_steps(cfg), workers,
    )
    manifest.stage("simulate")

    gk_stats: dict[float, EnsembleStats] = {}
    derivs = {}
    alphas_at = {}
    for t in cfg.t_grid:
        samples = SampleSet.from_ensemble(ensemble, cfg.steps_for(t))
        gk_stats[t] = EnsembleStats.from_values(samples.gk)
        derivs[t] = second_moment_derivatives(samples)
        try:
            alphas_at[t] = optimal_alpha(samples)
        except DegenerateCurvatureError:
            alphas_at[t] = None
    scan = None
    if cfg.alphas:
        scan_grid = sorted(set(cfg.alphas))
        scan = second_moment_scan(SampleSet.from_ensemble(ensemble), scan_grid)
    manifest.stage("reduce")

    outputs = []
    gk_path = out / "gk.csv"
    write_csv(
        gk_path,
        ["T", "mean", "var", "ci"],
        (
            (t, s.mean, s.variance, s.ci95_halfwidth)
            for t, s in ((t, gk_stats[t]) for t in cfg.t_grid)
        ),
    )
    outputs.append(gk_path)

    fderiv_path = out / "fderiv.csv"
    write_csv(
        fderiv_path,
        ["T", "f1", "se1", "f2", "se2"],
        (
            (t, d.first, d.se_first, d.second, d.se_second)
            for t, d in ((t, derivs[t]) for t in cfg.t_grid)
        ),
    )
    outputs.append(fderiv_path)

    ah_path = out / "alpha_hat.csv"
    write_csv(
        ah_path,
        ["T", "alpha", "se"],
        (
            (t, est.alpha if est else math.nan, est.se if est else math.nan)
            for t, est in ((t, alphas_at[t]) for t in cfg.t_grid)
        ),
    )
    outputs.append(ah_path)

    if scan is not None:
        fscan_path = out / "fscan.csv"
        scan.write_csv(fscan_path)
        outputs.append(fscan_path)
    manifest.stage("io")
    manifest.write(outputs)

    return ReferenceCampaign(cfg, ensemble, gk_stats, derivs, alphas_at, scan, outputs)


@dataclass
class BiasedCampaign:
    config: ExperimentConfig
    reference: Ensemble
    ensembles: dict[float, Ensemble]
    weighted_stats: dict
    reductions: dict
    autocorr: dict
    aborted: dict
    outputs: list[Path] = field(default_factory=list)


def run_biased_campaign(cfg: ExperimentConfig, out_dir=None) -> BiasedCampaign:
    """Simulate each configured alpha and report weighted statistics.

    The unbiased ensemble is always simulated as the baseline of the
    second-moment reduction column.  An alpha of exactly 0 reuses it, so
    its weighted.csv rows duplicate the reference campaign's bitwise.
    Alphas whose weights overflow are aborted with a diagnostic count; the
    others proceed.
    """
    model, out, manifest = _prepare(cfg, out_dir)
    workers = resolve_workers(cfg.workers)
    n_max = cfg.steps_for(cfg.t_max)
    harvest = _harvest_steps(cfg)

    def run(alpha: float) -> Ensemble:
        return simulate_ensemble(
            model, cfg.dt, n_max, alpha, cfg.master_seed, cfg.replicas, harvest, workers
        )

    reference = run(0.0)
    ensembles = {a: (reference if a == 0.0 else run(a)) for a in cfg.alphas}
    manifest.stage("simulate")

    ref_stats = {
        t: EnsembleStats.from_values(
            SampleSet.from_ensemble(reference, cfg.steps_for(t)).gk
        )
        for t in cfg.t_grid
    }
    weighted_rows = []
    weighted_stats: dict = {}
    reductions: dict = {}
    aborted: dict = {}
    for a in cfg.alphas:
        ens = ensembles[a]
        try:
            for t in cfg.t_grid:
                samples = SampleSet.from_ensemble(ens, cfg.steps_for(t))
                stats = gk_weighted(samples, a)
                red = second_moment_reduction(ref_stats[t], stats)
                weighted_stats[(a, t)] = stats
                reductions[(a, t)] = red
                weighted_rows.append(
                    (a, t, stats.mean, stats.variance, stats.raw_second_moment, red)
                )
        except WeightOverflowError:
            samples = SampleSet.from_ensemble(ens)
            lw = a * samples.x - 0.5 * a * a * samples.qv
            count = int(np.sum(lw > MAX_LOG_WEIGHT))
            aborted[a] = count
            weighted_rows = [row for row in weighted_rows if row[0] != a]
            for key in [k for k in weighted_stats if k[0] == a]:
                weighted_stats.pop(key)
                reductions.pop(key, None)
            print(
                f"warning: alpha={a} aborted, {count} replica weights overflow",
                file=sys.stderr,
            )

    autocorr: dict = {}
    autocorr_rows = []
    if cfg.checkpoints:
        for a in cfg.alphas:
            if a in aborted:
                continue
            curve = autocorrelation_curve(ensembles[a])
            wanted = {cfg.steps_for(t) for t in cfg.checkpoints}
            curve = [
                (t, v, se)
                for (t, v, se), step in zip(curve, ensembles[a].checkpoint_steps)
                if int(step) in wanted
            ]
            autocorr[a] = curve
            autocorr_rows.extend((a, t, v, se) for t, v, se in curve)
    manifest.stage("reduce")

    outputs = []
    weighted_path = out / "weighted.csv"
    write_csv(
        weighted_path,
        ["alpha", "T", "mean", "var", "raw_m2", "reduction_vs_ref"],
        weighted_rows,
    )
    outputs.append(weighted_path)
    if cfg.checkpoints:
        autocorr_path = out / "autocorr.csv"
        write_csv(autocorr_path, ["alpha", "t", "value", "se"], autocorr_rows)
        outputs.append(autocorr_path)
    manifest.stage("io")
    if aborted:
        manifest.extra["aborted_alphas"] = {repr(a): c for a, c in aborted.items()}
    manifest.write(outputs)

    return BiasedCampaign(
        cfg, reference, ensembles, weighted_stats, reductions, autocorr, aborted, outputs
    )


def run_oracle(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Deterministic quadrature predictions; emits oracle.json."""
    model, out, manifest = _prepare(cfg, out_dir)
    constants = compute_constants(model, cfg.grid_size)
    rho_ref = gk_reference_value(model, math.inf, cfg.grid_size)
    payload = {
        "d1": constants.d1,
        "d2": constants.d2,
        "sigma2_gk": constants.sigma2_gk,
        "gain": constants.gain,
        "alpha_slope": constants.alpha_slope,
        "degenerate": constants.degenerate,
        "rho_ref": rho_ref,
        "rho_t": {repr(t): gk_reference_value(model, t, cfg.grid_size) for t in cfg.t_grid},
        "predicted_alpha_star": {
            repr(t): (constants.alpha_slope / t if not constants.degenerate else math.nan)
            for t in cfg.t_grid
        },
        "predicted_reduction": {
            repr(t): (
                constants.gain / (constants.sigma2_gk * t)
                if constants.sigma2_gk > 0
                else math.nan
            )
            for t in cfg.t_grid
        },
    }
    manifest.stage("oracle")
    path = out / "oracle.json"
    write_json(path, payload)
    manifest.write([path])
    return payload


# ----------------------------------------------------------------------
# Figure reproduction: desk-scale configs with pass/fail comparisons.

SEED_DEFAULT = 1234567890

# Headline values reproduced by the desk-scale runs.
TARGET_1D_D1 = 11.6
TARGET_1D_D2 = 116.6
TARGET_1D_ALPHA = -0.240
TARGET_1D_REDUCTION = 0.07
TARGET_2D_D1 = -67.2
TARGET_2D_D2 = 6.78e3


def _check(name, value, target, tolerance, passed) -> dict:
    return {
        "name": name,
        "value": value,
        "target": target,
        "tolerance": tolerance,
        "passed": passed,
    }


def _cfg_1d(seed, replicas, workers, out, **kw) -> ExperimentConfig:
    base = dict(
        model_name="cosine1d",
        beta=3.0,
        dt=1e-4,
        t_grid=(0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0),
        replicas=replicas or 100_000,
        master_seed=SEED_DEFAULT if seed is None else seed,
        workers=workers or 0,
        output_dir=str(out),
    )
    base.update(kw)
    return ExperimentConfig(**base)


def _cfg_2d(seed, replicas, workers, out, **kw) -> ExperimentConfig:
    base = dict(
        model_name="double-well-2d",
        beta=2.0,
        dt=4e-4,
        t_grid=(1.0, 2.0, 3.0, 4.0, 5.0),
        replicas=replicas or 10_000,
        master_seed=SEED_DEFAULT if seed is None else seed,
        workers=workers or 0,
        output_dir=str(out),
    )
    base.update(kw)
    return ExperimentConfig(**base)


def _fit_window(ts: tuple[float, ...]) -> list[float]:
    # Asymptotic fits use the upper half of the simulated range.
    cut = ts[-1] / 2.0
    return [t for t in ts if t >= cut]


def _fig_1d_derivatives(seed, replicas, workers, out):
    cfg = _cfg_1d(seed, replicas, workers, out)
    ref = run_reference_campaign(cfg)
    oracle = compute_constants(cfg.model(), cfg.grid_size)
    window = _fit_window(cfg.t_grid)
    f1 = [ref.derivatives[t].first for t in window]
    f2 = [ref.derivatives[t].second for t in window]
    d1_fit = fit_affine(window, f1).coefficients[1]
    d2_fit = 2.0 * fit_quadratic(window, f2).coefficients[2]
    err1 = abs(d1_fit - oracle.d1) / abs(oracle.d1)
    err2 = abs(d2_fit - oracle.d2) / abs(oracle.d2)
    checks = [
        _check("d1_fit_vs_oracle_rel_err", err1, 0.0, 0.10, err1 < 0.10),
        _check("d2_fit_vs_oracle_rel_err", err2, 0.0, 0.10, err2 < 0.10),
        _check("d1_oracle_vs_paper_rel_err",
               abs(oracle.d1 - TARGET_1D_D1) / abs(TARGET_1D_D1), 0.0, 0.01,
               abs(oracle.d1 - TARGET_1D_D1) / abs(TARGET_1D_D1) < 0.01),
        _check("d2_oracle_vs_paper_rel_err",
               abs(oracle.d2 - TARGET_1D_D2) / abs(TARGET_1D_D2), 0.0, 0.01,
               abs(oracle.d2 - TARGET_1D_D2) / abs(TARGET_1D_D2) < 0.01),
    ]
    extra = {"d1_fit": d1_fit, "d2_fit": d2_fit, "d1_oracle": oracle.d1, "d2_oracle": oracle.d2}
    return cfg, checks, extra


def _fig_1d_alpha_scaling(seed, replicas, workers, out):
    cfg = _cfg_1d(seed, replicas, workers, out, t_grid=(1.0, 1.25, 1.5, 1.75, 2.0))
    ref = run_reference_campaign(cfg)
    oracle = compute_constants(cfg.model(), cfg.grid_size)
    ts = list(cfg.t_grid)
    alphas = [ref.alpha_estimates[t].alpha for t in ts]
    slope = fit_loglog_slope(ts, alphas).coefficients[1]
    est2 = ref.alpha_estimates[2.0]
    predicted = oracle.alpha_slope / 2.0
    gap = abs(est2.alpha - predicted)
    checks = [
        _check("loglog_slope", slope, -1.0, 0.15, -1.15 <= slope <= -0.85),
        _check("alpha_at_T2_vs_prediction_gap_over_se", gap / est2.se, 0.0, 3.0,
               gap <= 3.0 * est2.se),
    ]
    extra = {"alphas": dict(zip(map(repr, ts), alphas)), "predicted_at_T2": predicted}
    return cfg, checks, extra


def _fig_1d_reduction(seed, replicas, workers, out):
    cfg = _cfg_1d(seed, replicas, workers, out, t_grid=(0.2,))
    ref = run_reference_campaign(cfg, Path(out) / "reference")
    est = ref.alpha_estimates[0.2]
    biased_cfg = replace(cfg, alphas=(est.alpha,))
    biased = run_biased_campaign(biased_cfg, Path(out) / "biased")
    reduction = biased.reductions[(est.alpha, 0.2)]
    checks = [
        _check("alpha_hat_T0.2", est.alpha, TARGET_1D_ALPHA, 0.05,
               abs(est.alpha - TARGET_1D_ALPHA) <= 0.05),
        _check("m2_reduction_T0.2", reduction, TARGET_1D_REDUCTION, 0.03,
               abs(reduction - TARGET_1D_REDUCTION) <= 0.03),
    ]
    return cfg, checks, {"alpha_se": est.se}


def _paired_autocorr_gap(ens_lo: Ensemble, ens_hi: Ensemble, step: int) -> tuple[float, float]:
    """Mean and SE of the per-replica difference of R(q_t)S(q_0) values."""
    k_lo = ens_lo.checkpoint_index(step)
    k_hi = ens_hi.checkpoint_index(step)
    diff = ens_hi.r_at[k_hi] * ens_hi.s0 - ens_lo.r_at[k_lo] * ens_lo.s0
    mean = float(diff.mean())
    se = float(diff.std(ddof=1) / math.sqrt(diff.size))
    return mean, se


def _fig_2d_autocorr(seed, replicas, workers, out):
    cfg = _cfg_2d(
        seed, replicas, workers, out,
        t_grid=(1.0,),
        alphas=(-0.4, 0.0, 0.4),
        checkpoints=tuple(round(0.1 * k, 10) for k in range(11)),
    )
    biased = run_biased_campaign(cfg)
    step = cfg.steps_for(1.0)
    gap_neg, se_neg = _paired_autocorr_gap(biased.ensembles[-0.4], biased.ensembles[0.0], step)
    gap_pos, se_pos = _paired_autocorr_gap(biased.ensembles[0.0], biased.ensembles[0.4], step)
    checks = [
        _check("ordering_alpha_neg_below_zero_z", gap_neg / se_neg, 3.0, math.inf,
               gap_neg > 3.0 * se_neg),
        _check("ordering_alpha_zero_below_pos_z", gap_pos / se_pos, 3.0, math.inf,
               gap_pos > 3.0 * se_pos),
    ]
    extra = {"curves": {repr(a): biased.autocorr[a] for a in cfg.alphas}}
    return cfg, checks, extra


def _fig_2d_derivatives(seed, replicas, workers, out):
    cfg = _cfg_2d(seed, replicas, workers, out)
    oracle = compute_constants(cfg.model(), cfg.grid_size)
    err1 = abs(oracle.d1 - TARGET_2D_D1) / abs(TARGET_2D_D1)
    err2 = abs(oracle.d2 - TARGET_2D_D2) / abs(TARGET_2D_D2)
    ref = run_reference_campaign(cfg)
    window = _fit_window(cfg.t_grid)
    d1_fit = fit_affine(window, [ref.derivatives[t].first for t in window]).coefficients[1]
    d2_fit = 2.0 * fit_quadratic(window, [ref.derivatives[t].second for t in window]).coefficients[2]
    checks = [
        _check("d1_oracle_vs_paper_rel_err", err1, 0.0, 0.02, err1 < 0.02),
        _check("d2_oracle_vs_paper_rel_err", err2, 0.0, 0.03, err2 < 0.03),
        # The paper-scale 2D campaign is far beyond desk scale; the MC fits
        # are reported for inspection without a pass threshold.
        _check("d1_fit_desk_scale", d1_fit, oracle.d1, math.nan, None),
        _check("d2_fit_desk_scale", d2_fit, oracle.d2, math.nan, None),
    ]
    return cfg, checks, {"d1_oracle": oracle.d1, "d2_oracle": oracle.d2}


def _fig_2d_alpha(seed, replicas, workers, out):
    cfg = _cfg_2d(seed, replicas, workers, out, t_grid=(2.0, 3.0, 4.0, 5.0))
    ref = run_reference_campaign(cfg)
    estimates = [ref.alpha_estimates[t] for t in cfg.t_grid]
    finite = all(e is not None and math.isfinite(e.alpha) for e in estimates)
    mags = [abs(e.alpha) for e in estimates if e is not None]
    decreasing = all(b < a for a, b in zip(mags, mags[1:]))
    checks = [
        _check("alpha_hat_finite", finite, True, 0, finite),
        _check("alpha_hat_magnitude_decreasing", decreasing, True, 0, decreasing),
    ]
    extra = {"alphas": dict(zip(map(repr, cfg.t_grid), [e.alpha for e in estimates]))}
    return cfg, checks, extra


FIGURES = {
    "fig-1d-derivatives": _fig_1d_derivatives,
    "fig-1d-alpha-scaling": _fig_1d_alpha_scaling,
    "fig-1d-reduction": _fig_1d_reduction,
    "fig-2d-autocorr": _fig_2d_autocorr,
    "fig-2d-derivatives": _fig_2d_derivatives,
    "fig-2d-alpha": _fig_2d_alpha,
}


def reproduce(figure: str, seed=None, replicas=None, workers=None, out="out") -> dict:
    """Run the desk-scale config matching one of the study figures.

    Emits the campaign CSVs plus comparison.json holding target values with
    pass/fail flags.  Checks whose threshold is informational carry a null
    pass flag and do not affect the overall verdict.
    """
    try:
        builder = FIGURES[figure]
    except KeyError:
        raise ValueError(f"unknown figure {figure!r}; available: {sorted(FIGURES)}") from None
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg, checks, extra = builder(seed, replicas, workers, out_dir)
    overall = all(c["passed"] for c in checks if c["passed"] is not None)
    payload = {
        "figure": figure,
        "config": cfg.to_dict(),
        "checks": checks,
        "passed": overall,
        "details": extra,
    }
    write_json(out_dir / "comparison.json", payload)
    return payload
