"""Dynamical models on the torus: potentials, observables, bias fields.

Positions live on the d-torus (d = 1 or 2) but are stored as unconstrained
reals; every field defined here wraps its argument into [0, 1)^d before
evaluating, so values are exactly 1-periodic in each coordinate.  The
diffusion coefficient is the constant scalar sigma = sqrt(2/beta).
"""
from __future__ import annotations

import abc
import math

import numpy as np

__all__ = [
    "Model",
    "Cosine1D",
    "DoubleWell2D",
    "CustomModel",
    "StationaryMeasure",
    "make_model",
    "quadrature_expectation",
    "DEFAULT_GRID",
]

TWO_PI = 2.0 * math.pi

# 2**12 points per axis; plenty for the smooth periodic potentials used here.
DEFAULT_GRID = 4096

# Row block for tensor-grid quadrature in 2D.  Fixed so that chunking never
# changes the floating-point result between calls.
_QUAD_CHUNK = 256


def _wrap(q: np.ndarray) -> np.ndarray:
    """Map positions onto [0, 1)^d (exact for dyadic rationals)."""
    return np.mod(q, 1.0)


class Model(abc.ABC):
    """An overdamped Langevin model with bias field and observables.

    Subclasses provide the potential V, its gradient, the biasing vector
    field u, and the two observables R and S, all 1-periodic and vectorized
    over trailing-dimension-d position arrays of shape (..., d).
    """

    dimension: int
    beta: float
    name: str = "custom"

    def __init__(self, beta: float):
        if not beta > 0:
            raise ValueError(f"beta must be positive, got {beta}")
        self.beta = float(beta)
        self._v_min: float | None = None

    @property
    def sigma(self) -> float:
        """Constant diffusion coefficient, sigma = sqrt(2/beta)."""
        return math.sqrt(2.0 / self.beta)

    @abc.abstractmethod
    def potential(self, q: np.ndarray) -> np.ndarray:
        """V(q); shape (..., d) -> (...,)."""

    @abc.abstractmethod
    def grad_potential(self, q: np.ndarray) -> np.ndarray:
        """grad V(q); shape (..., d) -> (..., d)."""

    @abc.abstractmethod
    def bias(self, q: np.ndarray) -> np.ndarray:
        """Biasing vector field u(q); shape (..., d) -> (..., d)."""

    @abc.abstractmethod
    def observable_R(self, q: np.ndarray) -> np.ndarray:
        """Observable R(q); shape (..., d) -> (...,)."""

    @abc.abstractmethod
    def observable_S(self, q: np.ndarray) -> np.ndarray:
        """Observable S(q); shape (..., d) -> (...,)."""

    def step_fields(self, q: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (grad V, u, R) at q in one call.

        The integrator needs all three every step; built-in models override
        this to share trigonometric evaluations.  Overrides must return the
        same floating-point values as the three individual methods.
        """
        return self.grad_potential(q), self.bias(q), self.observable_R(q)

    def potential_min(self, grid_size: int = DEFAULT_GRID) -> float:
        """Minimum of V over the torus, from a grid scan (cached)."""
        if self._v_min is None:
            self._v_min = self._scan_min(grid_size)
        return self._v_min

    def _scan_min(self, grid_size: int) -> float:
        xs = np.arange(grid_size) / grid_size
        if self.dimension == 1:
            return float(self.potential(xs[:, None]).min())
        vmin = math.inf
        for lo in range(0, grid_size, _QUAD_CHUNK):
            block = xs[lo : lo + _QUAD_CHUNK]
            pts = np.stack(np.meshgrid(block, xs, indexing="ij"), axis=-1)
            vmin = min(vmin, float(self.potential(pts).min()))
        return vmin

    def stationary_measure(self, grid_size: int = DEFAULT_GRID) -> "StationaryMeasure":
        return StationaryMeasure.of(self, grid_size)

    def __getstate__(self):
        # Oracle eigendata can be large and is rebuilt on demand; keep it
        # out of worker pickles.
        state = self.__dict__.copy()
        state.pop("_spectral_cache", None)
        return state


class Cosine1D(Model):
    """1D model: V(q) = (1 + cos(2 pi q))/2, u = -V', R = V', S = beta R."""

    dimension = 1
    name = "cosine1d"

    def potential(self, q):
        x = _wrap(np.asarray(q, dtype=float))[..., 0]
        return 0.5 * (1.0 + np.cos(TWO_PI * x))

    def _dv(self, x):
        return -math.pi * np.sin(TWO_PI * x)

    def grad_potential(self, q):
        x = _wrap(np.asarray(q, dtype=float))[..., 0]
        return self._dv(x)[..., None]

    def bias(self, q):
        x = _wrap(np.asarray(q, dtype=float))[..., 0]
        return -self._dv(x)[..., None]

    def observable_R(self, q):
        x = _wrap(np.asarray(q, dtype=float))[..., 0]
        return self._dv(x)

    def observable_S(self, q):
        return self.beta * self.observable_R(q)

    def step_fields(self, q):
        x = _wrap(np.asarray(q, dtype=float))[..., 0]
        dv = self._dv(x)
        return dv[..., None], -dv[..., None], dv


def _dw2d_a(x):
    xs = x + 0.15
    return np.sin(4.0 * math.pi * xs) * (2.0 + (2.0 / 3.0) * np.sin(TWO_PI * xs))


def _dw2d_da(x):
    xs = x + 0.15
    s2, c2 = np.sin(TWO_PI * xs), np.cos(TWO_PI * xs)
    s4, c4 = np.sin(4.0 * math.pi * xs), np.cos(4.0 * math.pi * xs)
    return 4.0 * math.pi * c4 * (2.0 + (2.0 / 3.0) * s2) + s4 * (2.0 / 3.0) * TWO_PI * c2


def _dw2d_b(y):
    return 4.0 * np.cos(TWO_PI * y)


def _dw2d_db(y):
    return -4.0 * TWO_PI * np.sin(TWO_PI * y)


class DoubleWell2D(Model):
    """2D separable model with a metastable x-marginal.

    V(x, y) = A(x) + B(y) with
        A(x) = sin(4 pi (x+0.15)) (2 + (2/3) sin(2 pi (x+0.15))),
        B(y) = 4 cos(2 pi y).
    The bias acts along x only, u = -A'(x) e1 (the x-free-energy gradient:
    separability gives F' = A').  R(x, y) = sin(2 pi x) - c with the centering
    constant c = E_mu[sin(2 pi x)] pre-computed by quadrature; S = beta R.
    """

    dimension = 2
    name = "double-well-2d"

    def __init__(self, beta: float, grid_size: int = DEFAULT_GRID):
        super().__init__(beta)
        xs = np.arange(grid_size) / grid_size
        wx = np.exp(-self.beta * (_dw2d_a(xs) - _dw2d_a(xs).min()))
        # Separability reduces E_mu[sin(2 pi x)] to a 1D ratio of integrals.
        self.r_center = float(np.sum(np.sin(TWO_PI * xs) * wx) / np.sum(wx))

    def potential(self, q):
        q = _wrap(np.asarray(q, dtype=float))
        return _dw2d_a(q[..., 0]) + _dw2d_b(q[..., 1])

    def grad_potential(self, q):
        q = _wrap(np.asarray(q, dtype=float))
        return np.stack([_dw2d_da(q[..., 0]), _dw2d_db(q[..., 1])], axis=-1)

    def bias(self, q):
        q = _wrap(np.asarray(q, dtype=float))
        u = np.zeros(q.shape, dtype=float)
        u[..., 0] = -_dw2d_da(q[..., 0])
        return u

    def observable_R(self, q):
        q = _wrap(np.asarray(q, dtype=float))
        return np.sin(TWO_PI * q[..., 0]) - self.r_center

    def observable_S(self, q):
        return self.beta * self.observable_R(q)

    def step_fields(self, q):
        q = _wrap(np.asarray(q, dtype=float))
        x, y = q[..., 0], q[..., 1]
        da = _dw2d_da(x)
        grad = np.stack([da, _dw2d_db(y)], axis=-1)
        u = np.zeros(q.shape, dtype=float)
        u[..., 0] = -da
        return grad, u, np.sin(TWO_PI * x) - self.r_center

    def _scan_min(self, grid_size):
        xs = np.arange(grid_size) / grid_size
        return float(_dw2d_a(xs).min() + _dw2d_b(xs).min())

    def reduced_x(self) -> "CustomModel":
        """The autonomous 1D dynamics of the x coordinate.

        Because V is separable and u, R, S depend on x only, every quadrature
        computation for this model reduces to the 1D generator with
        potential A.
        """
        c = self.r_center

        def pot(q):
            return _dw2d_a(_wrap(np.asarray(q, dtype=float))[..., 0])

        def grad(q):
            return _dw2d_da(_wrap(np.asarray(q, dtype=float))[..., 0])[..., None]

        def bias(q):
            return -_dw2d_da(_wrap(np.asarray(q, dtype=float))[..., 0])[..., None]

        def obs_r(q):
            return np.sin(TWO_PI * _wrap(np.asarray(q, dtype=float))[..., 0]) - c

        beta = self.beta

        def obs_s(q):
            return beta * obs_r(q)

        return CustomModel(
            dimension=1,
            beta=self.beta,
            potential=pot,
            grad_potential=grad,
            bias=bias,
            observable_R=obs_r,
            observable_S=obs_s,
            name="double-well-2d/x",
        )


class CustomModel(Model):
    """A model assembled from user-supplied periodic callables."""

    def __init__(
        self,
        dimension: int,
        beta: float,
        potential,
        grad_potential,
        bias,
        observable_R,
        observable_S,
        name: str = "custom",
    ):
        if dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {dimension}")
        super().__init__(beta)
        self.dimension = dimension
        self.name = name
        self._potential = potential
        self._grad = grad_potential
        self._bias = bias
        self._obs_r = observable_R
        self._obs_s = observable_S

    def potential(self, q):
        return self._potential(np.asarray(q, dtype=float))

    def grad_potential(self, q):
        return self._grad(np.asarray(q, dtype=float))

    def bias(self, q):
        return self._bias(np.asarray(q, dtype=float))

    def observable_R(self, q):
        return self._obs_r(np.asarray(q, dtype=float))

    def observable_S(self, q):
        return self._obs_s(np.asarray(q, dtype=float))


_REGISTRY = {
    "cosine1d": Cosine1D,
    "double-well-2d": DoubleWell2D,
}


def make_model(name: str, beta: float) -> Model:
    """Build a named model; configs reference models by these names."""
    try:
        cls = _REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"unknown model {name!r}; available: {sorted(_REGISTRY)}"
        ) from None
    return cls(beta)


class StationaryMeasure:
    """The Gibbs measure exp(-beta V)/Z of a model, Z from quadrature."""

    def __init__(self, beta: float, potential, dimension: int, z: float):
        self.beta = beta
        self.potential = potential
        self.dimension = dimension
        self.z = z

    @classmethod
    def of(cls, model: Model, grid_size: int = DEFAULT_GRID) -> "StationaryMeasure":
        z = _normalization(model.potential, model.beta, model.dimension, grid_size)
        return cls(model.beta, model.potential, model.dimension, z)

    def density(self, q: np.ndarray) -> np.ndarray:
        return np.exp(-self.beta * self.potential(q)) / self.z


def _normalization(potential, beta, dimension, grid_size) -> float:
    xs = np.arange(grid_size) / grid_size
    if dimension == 1:
        return float(np.mean(np.exp(-beta * potential(xs[:, None]))))
    total = 0.0
    for lo in range(0, grid_size, _QUAD_CHUNK):
        block = xs[lo : lo + _QUAD_CHUNK]
        pts = np.stack(np.meshgrid(block, xs, indexing="ij"), axis=-1)
        total += float(np.sum(np.exp(-beta * potential(pts))))
    return total / grid_size**2


def quadrature_expectation(f, measure: StationaryMeasure, grid_size: int = DEFAULT_GRID) -> float:
    """Integrate f against the stationary measure with the trapezoid rule.

    On a uniform periodic grid the composite trapezoid rule coincides with
    the rectangle rule and is spectrally accurate for smooth integrands.
    The result is self-normalizing, so a shifted potential is used
    internally to avoid underflow at large beta.
    """
    if grid_size < 2:
        raise ValueError(f"grid_size must be >= 2, got {grid_size}")
    xs = np.arange(grid_size) / grid_size
    if measure.dimension == 1:
        pts = xs[:, None]
        w = np.exp(-measure.beta * measure.potential(pts))
        return float(np.sum(f(pts) * w) / np.sum(w))
    # Coarse pre-scan for a potential shift; exact value is irrelevant.
    coarse = np.arange(256) / 256.0
    cpts = np.stack(np.meshgrid(coarse, coarse, indexing="ij"), axis=-1)
    vref = float(measure.potential(cpts).min())
    total_w = 0.0
    total_fw = 0.0
    for lo in range(0, grid_size, _QUAD_CHUNK):
        block = xs[lo : lo + _QUAD_CHUNK]
        pts = np.stack(np.meshgrid(block, xs, indexing="ij"), axis=-1)
        w = np.exp(-measure.beta * (measure.potential(pts) - vref))
        total_w += float(np.sum(w))
        total_fw += float(np.sum(f(pts) * w))
    return total_fw / total_w
