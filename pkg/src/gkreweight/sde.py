"""Euler-Maruyama integration of the reference and biased dynamics.

Each replica streams one trajectory and keeps only sufficient statistics:
the discretized correlation integral, the stochastic-integral sum of the
bias against the Brownian increments, and its quadratic variation.  Partial
sums can be recorded at checkpoint steps so one long simulation serves
every truncation time of interest.

Randomness is counter-based and per replica: replica i of a run with master
seed s draws from Philox streams keyed by SeedSequence(s, spawn_key=(i, k))
with k = 0 for the initial-condition sampler and k = 1 for the Brownian
increments.  Gaussians come from numpy's Generator.standard_normal
(ziggurat), so results are bit-reproducible for a fixed numpy build
regardless of how replicas are scheduled or batched.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .models import Model

__all__ = [
    "IntegratorConfig",
    "SeedPolicy",
    "ReplicaRecord",
    "Ensemble",
    "SimulationDiverged",
    "RejectionCapExceeded",
    "em_step",
    "sample_initial",
    "simulate_replica",
    "simulate_block",
]

# Brownian increments are drawn in time chunks sized to roughly this many
# array elements; chunking never affects results, only peak memory and the
# number of generator calls.
_CHUNK_ELEMENTS = 16 << 20

# Cadence of the non-finite state guard.
_CHECK_EVERY = 1024

_INIT_STREAM = 0
_PATH_STREAM = 1


class SimulationDiverged(RuntimeError):
    """The integrator state became non-finite (overflow or NaN)."""


class RejectionCapExceeded(RuntimeError):
    """Rejection sampling exceeded its cap of consecutive rejections."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Time step, horizon and bias magnitude of one integration run."""

    dt: float
    n_steps: int
    alpha: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if not math.isfinite(self.alpha):
            raise ValueError(f"alpha must be finite, got {self.alpha}")

    @property
    def t_final(self) -> float:
        return self.dt * self.n_steps


@dataclass(frozen=True)
class SeedPolicy:
    """Deterministic per-replica stream addressing under one master seed."""

    master_seed: int
    replica_index: int

    def __post_init__(self):
        if self.master_seed < 0 or self.replica_index < 0:
            raise ValueError("master_seed and replica_index must be nonnegative")

    def generator(self, stream: str) -> np.random.Generator:
        key = {"init": _INIT_STREAM, "path": _PATH_STREAM}[stream]
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.replica_index, key))
        return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class ReplicaRecord:
    """Sufficient statistics of one trajectory.

    gk_integral is dt * S(q_0) * sum_{n=0..N} R(q_n); x_sum is the discrete
    stochastic integral -sum_{n=0..N-1} u(q_n)^T dW_n and qv_sum its
    quadratic variation sum_{n=0..N-1} |u(q_n)|^2 dt.  Partial sums at the
    requested checkpoint steps use the same index conventions, so the entry
    for step m is bit-identical to a run with n_steps = m.
    """

    gk_integral: float
    x_sum: float
    qv_sum: float
    s0: float
    checkpoint_steps: tuple[int, ...] = ()
    partial_gk: np.ndarray | None = None
    partial_x: np.ndarray | None = None
    partial_qv: np.ndarray | None = None
    r_at: np.ndarray | None = None


@dataclass
class Ensemble:
    """Merged per-replica statistics of a simulation campaign.

    Columns are ordered by replica index; merging concatenates in index
    order so results never depend on how replicas were batched.
    """

    dt: float
    n_steps: int
    alpha: float
    master_seed: int
    replica_indices: np.ndarray
    s0: np.ndarray
    gk: np.ndarray
    x: np.ndarray
    qv: np.ndarray
    checkpoint_steps: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    gk_at: np.ndarray | None = None
    x_at: np.ndarray | None = None
    qv_at: np.ndarray | None = None
    r_at: np.ndarray | None = None

    def __len__(self) -> int:
        return self.s0.size

    @classmethod
    def concat(cls, parts: list["Ensemble"]) -> "Ensemble":
        first = parts[0]
        for p in parts[1:]:
            if (p.dt, p.n_steps, p.alpha, p.master_seed) != (
                first.dt, first.n_steps, first.alpha, first.master_seed,
            ) or not np.array_equal(p.checkpoint_steps, first.checkpoint_steps):
                raise ValueError("cannot merge ensembles with different run parameters")
        cat = np.concatenate
        has_ck = first.gk_at is not None
        return cls(
            dt=first.dt,
            n_steps=first.n_steps,
            alpha=first.alpha,
            master_seed=first.master_seed,
            replica_indices=cat([p.replica_indices for p in parts]),
            s0=cat([p.s0 for p in parts]),
            gk=cat([p.gk for p in parts]),
            x=cat([p.x for p in parts]),
            qv=cat([p.qv for p in parts]),
            checkpoint_steps=first.checkpoint_steps,
            gk_at=cat([p.gk_at for p in parts], axis=1) if has_ck else None,
            x_at=cat([p.x_at for p in parts], axis=1) if has_ck else None,
            qv_at=cat([p.qv_at for p in parts], axis=1) if has_ck else None,
            r_at=cat([p.r_at for p in parts], axis=1) if has_ck else None,
        )

    def checkpoint_index(self, step: int) -> int:
        hits = np.where(self.checkpoint_steps == step)[0]
        if hits.size == 0:
            raise KeyError(f"step {step} is not a checkpoint of this ensemble")
        return int(hits[0])

    def stats_at(self, step: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(gk, x, qv) arrays truncated at a checkpoint step."""
        if step == self.n_steps:
            return self.gk, self.x, self.qv
        k = self.checkpoint_index(step)
        return self.gk_at[k], self.x_at[k], self.qv_at[k]

    def record(self, column: int) -> ReplicaRecord:
        has_ck = self.gk_at is not None
        return ReplicaRecord(
            gk_integral=float(self.gk[column]),
            x_sum=float(self.x[column]),
            qv_sum=float(self.qv[column]),
            s0=float(self.s0[column]),
            checkpoint_steps=tuple(int(s) for s in self.checkpoint_steps),
            partial_gk=self.gk_at[:, column].copy() if has_ck else None,
            partial_x=self.x_at[:, column].copy() if has_ck else None,
            partial_qv=self.qv_at[:, column].copy() if has_ck else None,
            r_at=self.r_at[:, column].copy() if has_ck else None,
        )

    def records(self) -> list[ReplicaRecord]:
        return [self.record(i) for i in range(len(self))]


def em_step(q: np.ndarray, model: Model, cfg: IntegratorConfig, dw: np.ndarray) -> np.ndarray:
    """One Euler-Maruyama step q + (-grad V + alpha sigma u) dt + sigma dw."""
    q = np.asarray(q, dtype=float)
    a_sig = cfg.alpha * model.sigma
    grad, u, _ = model.step_fields(q)
    return q + (a_sig * u - grad) * cfg.dt + model.sigma * np.asarray(dw, dtype=float)


def _rejection_sample(
    model: Model, rng: np.random.Generator, max_rejections: int
) -> tuple[np.ndarray, int]:
    """Draw from the stationary measure; returns (position, attempts)."""
    beta = model.beta
    vmin = model.potential_min()
    for attempt in range(1, max_rejections + 1):
        x = rng.random(model.dimension)
        accept = rng.random()
        if accept <= math.exp(-beta * (float(model.potential(x)) - vmin)):
            return x, attempt
    raise RejectionCapExceeded(
        f"no acceptance after {max_rejections} proposals (beta={beta}, model={model.name})"
    )


def sample_initial(model: Model, seeds: SeedPolicy, max_rejections: int = 10**6) -> np.ndarray:
    """Sample the initial condition from the stationary measure.

    Rejection sampling with uniform proposals on [0, 1)^d and acceptance
    probability exp(-beta (V(q) - V_min)), V_min from a grid scan.
    """
    pos, _ = _rejection_sample(model, seeds.generator("init"), max_rejections)
    return pos


def simulate_block(
    model: Model,
    cfg: IntegratorConfig,
    master_seed: int,
    replica_indices,
    initials: np.ndarray,
    checkpoint_steps=(),
) -> Ensemble:
    """Integrate a batch of replicas, vectorized across the batch.

    Every replica consumes its own Brownian stream, so the result for
    replica i is independent of which batch it lands in.  Checkpoint steps
    must be strictly increasing integers in [0, n_steps].
    """
    indices = [int(i) for i in replica_indices]
    b = len(indices)
    n = cfg.n_steps
    dt = cfg.dt
    q = np.array(initials, dtype=float)
    if q.shape != (b, model.dimension):
        raise ValueError(f"initials must have shape ({b}, {model.dimension}), got {q.shape}")
    ck = [int(s) for s in checkpoint_steps]
    if any(s2 <= s1 for s1, s2 in zip(ck, ck[1:])) or any(s < 0 or s > n for s in ck):
        raise ValueError(f"checkpoint steps must be strictly increasing in [0, {n}]")
    ck_slot = {s: k for k, s in enumerate(ck)}

    gens = [
        SeedPolicy(master_seed, i).generator("path")
        for i in indices
    ]

    sigma = model.sigma
    a_sig = cfg.alpha * sigma
    grad, u, r = model.step_fields(q)
    s0 = np.asarray(model.observable_S(q), dtype=float)
    r_sum = np.array(r, dtype=float)
    x_acc = np.zeros(b)
    qv_acc = np.zeros(b)

    n_ck = len(ck)
    gk_at = np.empty((n_ck, b)) if n_ck else None
    x_at = np.empty((n_ck, b)) if n_ck else None
    qv_at = np.empty((n_ck, b)) if n_ck else None
    r_at = np.empty((n_ck, b)) if n_ck else None

    def snapshot(slot: int) -> None:
        gk_at[slot] = s0 * dt * r_sum
        x_at[slot] = -x_acc
        qv_at[slot] = dt * qv_acc
        r_at[slot] = r

    if 0 in ck_slot:
        snapshot(ck_slot[0])

    sqrt_dt = math.sqrt(dt)
    d = model.dimension
    flat = d == 1
    chunk = min(n, max(256, _CHUNK_ELEMENTS // (b * d)))
    inc = np.empty((chunk, b, d))
    step = 0
    while step < n:
        m = min(chunk, n - step)
        for j, g in enumerate(gens):
            inc[:m, j, :] = g.standard_normal((m, d))
        inc[:m] *= sqrt_dt
        for j in range(m):
            dw = inc[j]
            if flat:
                u1 = u[:, 0]
                dw1 = dw[:, 0]
                x_acc += u1 * dw1
                qv_acc += u1 * u1
            else:
                x_acc += (u * dw).sum(axis=1)
                qv_acc += (u * u).sum(axis=1)
            # The alpha = 0 branch produces bit-identical positions to the
            # general formula (0*u contributes a signed zero only).
            if a_sig != 0.0:
                q = q + (a_sig * u - grad) * dt + sigma * dw
            else:
                q = q + grad * (-dt) + sigma * dw
            grad, u, r = model.step_fields(q)
            r_sum = r_sum + r
            step_done = step + j + 1
            slot = ck_slot.get(step_done)
            if slot is not None:
                snapshot(slot)
            if step_done % _CHECK_EVERY == 0 and not np.isfinite(q).all():
                bad = [indices[k] for k in np.where(~np.isfinite(q).all(axis=1))[0]]
                raise SimulationDiverged(
                    f"non-finite state detected at step {step_done} in replicas {bad[:8]}"
                )
        step += m
    if not np.isfinite(q).all():
        bad = [indices[k] for k in np.where(~np.isfinite(q).all(axis=1))[0]]
        raise SimulationDiverged(
            f"non-finite state detected at step {n} in replicas {bad[:8]}"
        )

    return Ensemble(
        dt=dt,
        n_steps=n,
        alpha=cfg.alpha,
        master_seed=int(master_seed),
        replica_indices=np.asarray(indices, dtype=np.int64),
        s0=s0,
        gk=s0 * dt * r_sum,
        x=-x_acc,
        qv=dt * qv_acc,
        checkpoint_steps=np.asarray(ck, dtype=np.int64),
        gk_at=gk_at,
        x_at=x_at,
        qv_at=qv_at,
        r_at=r_at,
    )


def simulate_replica(
    model: Model,
    cfg: IntegratorConfig,
    seeds: SeedPolicy,
    initial: np.ndarray,
    checkpoints=(),
) -> ReplicaRecord:
    """Integrate a single replica and return its sufficient statistics."""
    initial = np.asarray(initial, dtype=float).reshape(1, model.dimension)
    block = simulate_block(
        model, cfg, seeds.master_seed, [seeds.replica_index], initial, checkpoints
    )
    return block.record(0)
