"""Green-Kubo transport coefficients with Girsanov reweighting.

Monte Carlo estimation of transport coefficients of overdamped Langevin
dynamics on the torus, with an optimally tuned scalar drift bias corrected
by Girsanov weights, plus a quadrature oracle that predicts the achievable
variance reduction.
"""
__version__ = "0.1.0"

from .models import (
    Cosine1D,
    CustomModel,
    DoubleWell2D,
    Model,
    StationaryMeasure,
    make_model,
    quadrature_expectation,
)
from .poisson import (
    AsymptoticConstants,
    PoissonSolution,
    compute_constants,
    generator_residual,
    gk_reference_value,
    solve_poisson_1d,
)
from .sde import (
    Ensemble,
    IntegratorConfig,
    ReplicaRecord,
    SeedPolicy,
    em_step,
    sample_initial,
    simulate_block,
    simulate_replica,
)
from .girsanov import (
    BIASED,
    REFERENCE,
    AlphaEstimate,
    SampleSet,
    SecondMomentScan,
    WeightedSample,
    log_weight,
    optimal_alpha,
    second_moment_derivatives,
    second_moment_scan,
    weight,
    weight_statistics,
)
from .estimators import (
    EnsembleStats,
    FitResult,
    autocorrelation_curve,
    fit_affine,
    fit_loglog_slope,
    fit_quadratic,
    gk_plain,
    gk_weighted,
    second_moment_reduction,
    variance_reduction,
)
from .campaigns import (
    ExperimentConfig,
    reproduce,
    run_biased_campaign,
    run_oracle,
    run_reference_campaign,
)
