"""Semi-analytic oracle for the 1D generator L = -V' d/dx + (1/beta) d2/dx2.

Solves Poisson equations -L phi = rhs by quadrature on the torus, evaluates
the asymptotic constants governing the optimally biased estimator, and
computes deterministic reference values for the truncated Green-Kubo
integral via an eigendecomposition of the symmetrized generator.

Separable 2D models whose bias and observables depend on x only reduce to a
1D problem (`Model.reduced_x`), so the same machinery covers both built-in
experiments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .models import DEFAULT_GRID, Model

__all__ = [
    "PoissonSolution",
    "AsymptoticConstants",
    "solve_poisson_1d",
    "compute_constants",
    "gk_reference_value",
    "generator_residual",
]

TWO_PI = 2.0 * math.pi

# |E_mu[rhs]| above this (relative to the rhs scale) is rejected: the
# periodic Poisson problem is only solvable for centered right-hand sides.
CENTERED_RTOL = 1e-8


@dataclass(frozen=True)
class PoissonSolution:
    """Grid representation of a centered solution of -L phi = rhs.

    grid holds n uniform points on [0, 1); phi and dphi are the solution and
    its derivative at those points.  kappa is the integration constant that
    makes the primitive periodic; period_defect is the residual gap
    phi~(1) - phi~(0) of the uncentered primitive (zero up to quadrature
    error).
    """

    grid: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    kappa: float
    period_defect: float


@dataclass(frozen=True)
class AsymptoticConstants:
    """Long-time constants of the bias-optimized estimator.

    d1 and d2 are the linear/quadratic growth rates of the first and second
    derivatives of the weighted second moment at zero bias; sigma2_gk is the
    asymptotic variance rate of the plain estimator; gain = d1^2/(2 d2) is
    the limiting absolute second-moment reduction and alpha_slope = -d1/d2
    the coefficient of the 1/T law for the optimal bias.
    """

    d1: float
    d2: float
    sigma2_gk: float
    gain: float
    alpha_slope: float
    degenerate: bool = False


def _periodic_antiderivative(values: np.ndarray) -> tuple[np.ndarray, float]:
    """Spectral antiderivative of a smooth periodic grid function.

    Returns (F, m) with m the mean of `values`; the full primitive at grid
    point x_i is F[i] + m * x_i and satisfies F[0] = 0.  Fourier inversion
    of the derivative is spectrally accurate, unlike cumulative trapezoid
    sums whose O(h^2) drift is too large for the residual tolerances used
    by the test suite.
    """
    n = values.size
    m = float(values.mean())
    coef = np.fft.rfft(values - m)
    k = np.arange(coef.size)
    denom = TWO_PI * 1j * k
    denom[0] = 1.0
    anti = coef / denom
    anti[0] = 0.0
    f = np.fft.irfft(anti, n)
    return f - f[0], m


def _check_1d(model: Model) -> None:
    if model.dimension != 1:
        raise ValueError(
            "solve_poisson_1d requires a 1D model; reduce separable 2D models "
            "with Model.reduced_x() first"
        )


class _Grid1D:
    """Shared grid data for quadrature against one model."""

    def __init__(self, model: Model, grid_size: int):
        _check_1d(model)
        if grid_size < 16:
            raise ValueError(f"grid_size must be >= 16, got {grid_size}")
        self.n = int(grid_size)
        self.x = np.arange(self.n) / self.n
        self.pts = self.x[:, None]
        self.beta = model.beta
        v = model.potential(self.pts)
        self.vshift = float(v.min())
        self.wm = np.exp(-self.beta * (v - self.vshift))
        self.wp = np.exp(self.beta * (v - self.vshift))
        self.wsum = float(np.sum(self.wm))

    def expect(self, values: np.ndarray) -> float:
        return float(np.sum(values * self.wm) / self.wsum)

    def ip(self, f: np.ndarray, g: np.ndarray) -> float:
        return self.expect(f * g)


def _solve_on_grid(grid: _Grid1D, phi_vals: np.ndarray) -> PoissonSolution:
    mean_mu = grid.expect(phi_vals)
    scale = max(1.0, float(np.max(np.abs(phi_vals))))
    if abs(mean_mu) > CENTERED_RTOL * scale:
        raise ValueError(
            f"rhs is not centered under the stationary measure: E_mu[rhs] = {mean_mu:.3e}"
        )
    beta, x = grid.beta, grid.x
    inner_per, inner_mean = _periodic_antiderivative(grid.wm * phi_vals)
    inner = inner_per + inner_mean * x
    kappa = beta * float(np.mean(grid.wp * inner)) / float(np.mean(grid.wp))
    dphi = grid.wp * (kappa - beta * inner)

    tilde_per, defect = _periodic_antiderivative(dphi)
    phi_tilde = tilde_per + defect * x
    phi = phi_tilde - grid.expect(phi_tilde)

    # Report kappa in the unshifted convention e^{beta V} * (kappa - ...).
    return PoissonSolution(
        grid=x,
        phi=phi,
        dphi=dphi,
        kappa=kappa * math.exp(-beta * grid.vshift),
        period_defect=defect,
    )


def solve_poisson_1d(rhs, model: Model, grid_size: int = DEFAULT_GRID) -> PoissonSolution:
    """Solve -L phi = rhs on the torus for a centered right-hand side.

    The derivative has the closed form
        phi'(x) = e^{beta V(x)} (kappa - beta * int_0^x e^{-beta V} rhs),
    and kappa is fixed by requiring the primitive to be periodic, i.e. the
    mean of phi' over one period must vanish.  The solution is centered to
    zero mean under the stationary measure.

    rhs is a scalar field evaluated like an observable, on arrays of shape
    (..., 1).
    """
    grid = _Grid1D(model, grid_size)
    phi_vals = np.asarray(rhs(grid.pts), dtype=float)
    if phi_vals.shape != (grid.n,):
        raise ValueError(f"rhs must evaluate to shape ({grid.n},), got {phi_vals.shape}")
    return _solve_on_grid(grid, phi_vals)


def generator_residual(solution: PoissonSolution, model: Model, rhs) -> float:
    """Max-norm residual |L phi + rhs| on the grid, by centered differences.

    Fourth-order centered stencils keep the differentiation error below the
    quadrature error of the solution itself.
    """
    _check_1d(model)
    x = solution.grid
    n = x.size
    h = 1.0 / n
    phi = solution.phi
    p1, m1 = np.roll(phi, -1), np.roll(phi, 1)
    p2, m2 = np.roll(phi, -2), np.roll(phi, 2)
    d1 = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h)
    d2 = (-p2 + 16.0 * p1 - 30.0 * phi + 16.0 * m1 - m2) / (12.0 * h * h)
    dv = model.grad_potential(x[:, None])[:, 0]
    phi_vals = np.asarray(rhs(x[:, None]), dtype=float)
    residual = -dv * d1 + d2 / model.beta + phi_vals
    return float(np.max(np.abs(residual)))


def _reduce_1d(model: Model) -> Model:
    if model.dimension == 1:
        return model
    reduced = getattr(model, "reduced_x", None)
    if reduced is None:
        raise ValueError(
            f"model {model.name!r} is 2D and does not expose a separable "
            "x-reduction; the quadrature oracle only covers 1D and separable "
            "2D models"
        )
    return reduced()


def compute_constants(model: Model, grid_size: int = DEFAULT_GRID) -> AsymptoticConstants:
    """Asymptotic constants from three Poisson solves.

    With cR the solution of -L cR = R and sR = sigma * cR', the constants
    are assembled as

        d1 = -2 <S^2, cR> <u, sR> - |S|^2 (2 <sigma F', sR> + <sigma G', u>),
        d2 = 2 |S|^2 (|sR|^2 |u|^2 + <sR, u>^2),
        sigma2_gk = 2 |S|^2 <R, cR>,

    where -L F and -L G equal the centered parts of u*sR and sR^2.  The
    inverse generator applied to a centered f equals minus the solution of
    -L phi = f, which fixes the signs above.  All inner products are under
    the stationary measure, by trapezoid quadrature.
    """
    m = _reduce_1d(model)
    grid = _Grid1D(m, grid_size)
    pts = grid.pts

    r_vals = m.observable_R(pts)
    s_vals = m.observable_S(pts)
    u_vals = m.bias(pts)[:, 0]
    sigma = m.sigma

    sol_r = _solve_on_grid(grid, np.asarray(r_vals, dtype=float))
    c_r = sol_r.phi
    s_r = sigma * sol_r.dphi

    f_raw = u_vals * s_r
    g_raw = s_r * s_r
    sol_f = _solve_on_grid(grid, f_raw - grid.expect(f_raw))
    sol_g = _solve_on_grid(grid, g_raw - grid.expect(g_raw))

    s_norm2 = grid.ip(s_vals, s_vals)
    d1 = -2.0 * grid.ip(s_vals * s_vals, c_r) * grid.ip(u_vals, s_r) - s_norm2 * (
        2.0 * grid.ip(sigma * sol_f.dphi, s_r) + grid.ip(sigma * sol_g.dphi, u_vals)
    )
    d2 = 2.0 * s_norm2 * (grid.ip(s_r, s_r) * grid.ip(u_vals, u_vals) + grid.ip(s_r, u_vals) ** 2)
    sigma2_gk = 2.0 * s_norm2 * grid.ip(r_vals, c_r)

    if d2 <= 0.0:
        return AsymptoticConstants(
            d1=d1, d2=d2, sigma2_gk=sigma2_gk, gain=0.0,
            alpha_slope=math.nan, degenerate=True,
        )
    return AsymptoticConstants(
        d1=d1,
        d2=d2,
        sigma2_gk=sigma2_gk,
        gain=d1 * d1 / (2.0 * d2),
        alpha_slope=-d1 / d2,
    )


class _SpectralCorrelation:
    """Eigendata of the symmetrized 1D generator, for finite-T references.

    The generator is conjugated by the square root of the stationary density
    into the self-adjoint form (1/beta) d2/dx2 - W with
    W = (beta/4) V'^2 - V''/2, and diagonalized in a truncated Fourier
    basis.  For the trigonometric-polynomial potentials used here W has
    finite bandwidth, so the truncation error is negligible.
    """

    def __init__(self, model: Model, grid_size: int, n_modes: int):
        n = int(grid_size)
        x = np.arange(n) / n
        pts = x[:, None]
        beta = model.beta
        v = model.potential(pts)
        vshift = float(v.min())
        dv = model.grad_potential(pts)[:, 0]
        # Spectral second derivative of V from the gradient values.
        dv_hat = np.fft.rfft(dv)
        d2v = np.fft.irfft(dv_hat * (TWO_PI * 1j * np.arange(dv_hat.size)), n)
        w_pot = 0.25 * beta * dv * dv - 0.5 * d2v
        w_hat = np.fft.fft(w_pot) / n

        ks = np.arange(-n_modes, n_modes + 1)
        diff = (ks[:, None] - ks[None, :]) % n
        h = -np.diag(((TWO_PI * ks) ** 2 / beta).astype(complex))
        h -= w_hat[diff]
        eigvals, eigvecs = np.linalg.eigh(h)

        sqrt_mu = np.exp(-0.5 * beta * (v - vshift))
        z = float(np.mean(sqrt_mu**2))
        f = model.observable_R(pts) * sqrt_mu / math.sqrt(z)
        g = model.observable_S(pts) * sqrt_mu / math.sqrt(z)
        f_hat = (np.fft.fft(f) / n)[ks % n]
        g_hat = (np.fft.fft(g) / n)[ks % n]
        a = eigvecs.conj().T @ f_hat
        b = eigvecs.conj().T @ g_hat

        self.eigvals = eigvals
        self.weights = np.real(np.conj(a) * b)

    def rho(self, t: float) -> float:
        lam = self.eigvals
        safe = np.where(lam == 0.0, 1.0, lam)
        integral = np.where(lam == 0.0, t, np.expm1(lam * t) / safe)
        return float(np.sum(self.weights * integral))

    def rho_inf(self) -> float:
        lam = self.eigvals
        mask = lam < -1e-9
        return float(np.sum(self.weights[mask] * (-1.0 / lam[mask])))


def _rho_inf_poisson(model: Model, grid_size: int) -> float:
    grid = _Grid1D(model, grid_size)
    sol = _solve_on_grid(grid, np.asarray(model.observable_R(grid.pts), dtype=float))
    return grid.ip(model.observable_S(grid.pts), sol.phi)


def _spectral_data(model: Model, grid_size: int) -> _SpectralCorrelation:
    n_modes = max(32, min(grid_size // 16, 256))
    cache = model.__dict__.setdefault("_spectral_cache", {})
    key = (grid_size, n_modes)
    if key not in cache:
        data = _SpectralCorrelation(model, grid_size, n_modes)
        # Cross-check against the Poisson route before trusting the grid.
        rho_poisson = _rho_inf_poisson(model, grid_size)
        if abs(data.rho_inf() - rho_poisson) > 1e-6 * max(1.0, abs(rho_poisson)):
            raise RuntimeError(
                "eigen-residual check failed: spectral and Poisson routes "
                f"disagree ({data.rho_inf():.6e} vs {rho_poisson:.6e}); "
                "grid too coarse"
            )
        cache[key] = data
    return cache[key]


def gk_reference_value(model: Model, t: float, grid_size: int = DEFAULT_GRID) -> float:
    """Deterministic value of the Green-Kubo integral truncated at time t.

    For t = inf this is <S, cR> with cR the Poisson solution for R; for
    finite t the correlation integral is evaluated from the spectrum of the
    symmetrized generator.
    """
    m = _reduce_1d(model)
    if math.isinf(t):
        return _rho_inf_poisson(m, grid_size)
    if t < 0:
        raise ValueError(f"t must be nonnegative or inf, got {t}")
    return _spectral_data(m, grid_size).rho(float(t))
