"""Arrival-time collections (T_k) on a finite horizon and their counting function.

Four constructions are provided: zero-delayed renewal processes, perturbed
random walks ``T_k = S_{k-1} + eta_k``, non-homogeneous Poisson processes with
mean function ``c0 * t**rho0`` and the positions of the j-th generation of a
branching random walk driven by a renewal process.

Every generator works on a batch of stream keys at once and returns ragged
rows (flat sorted times plus per-row counts). A single realisation is the
batch of one, so a replicate drawn alone is bit-identical to the same replicate
drawn inside a batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng
from .errors import ConfigurationError, DomainError, ResourceError
from .rng import Law

# steps drawn per row and per pass of the walk sampler; fixed so that the
# rounding of partial sums never depends on the horizon or the batch
WALK_BLOCK = 128

# split-tag reserved for the arrival generator of a replicate stream
ARRIVAL_TAG = 0


@dataclass(frozen=True)
class Ragged:
    """Rows of sorted values stored flat; row ``i`` is ``values[offsets[i]:offsets[i+1]]``."""

    values: np.ndarray
    counts: np.ndarray

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self.counts)))

    @property
    def rows(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.counts)), self.counts)

    @property
    def position(self) -> np.ndarray:
        """Index of each value within its own row."""
        return np.arange(len(self.values)) - np.repeat(self.offsets[:-1], self.counts)

    def row(self, i: int) -> np.ndarray:
        off = self.offsets
        return self.values[off[i]:off[i + 1]]

    @classmethod
    def from_pieces(cls, rows: np.ndarray, values: np.ndarray, nrows: int, sort=True) -> "Ragged":
        # lexsort is stable, so ties keep their input order
        order = np.lexsort((values, rows)) if sort else np.argsort(rows, kind="stable")
        return cls(values[order], np.bincount(rows, minlength=nrows))


def _walk_sums(keys, limits, law: Law, stride=1, offset=0) -> Ragged:
    """Partial sums S_1 < S_2 < ... <= limit of a walk with steps from ``law``.

    Step i (0-based) of row r uses counter ``offset + stride * i`` of ``keys[r]``.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    limits = np.broadcast_to(np.asarray(limits, dtype=float), keys.shape)
    nrows = len(keys)
    last = np.zeros(nrows)
    active = np.flatnonzero(limits >= 0)
    consumed = 0
    piece_rows, piece_vals = [], []
    steps_idx = np.arange(WALK_BLOCK, dtype=np.uint64)
    while active.size:
        counters = np.uint64(offset) + np.uint64(stride) * (np.uint64(consumed) + steps_idx)
        u = rng.uniform_at(keys[active, None], counters[None, :])
        sums = last[active, None] + np.cumsum(law.from_uniform(u), axis=1)
        inside = sums <= limits[active, None]
        n_in = inside.sum(axis=1)
        piece_rows.append(np.repeat(active, n_in))
        piece_vals.append(sums[inside])
        last[active] = sums[:, -1]
        consumed += WALK_BLOCK
        active = active[n_in == WALK_BLOCK]
    if not piece_rows:
        return Ragged(np.empty(0), np.zeros(nrows, dtype=int))
    return Ragged.from_pieces(np.concatenate(piece_rows), np.concatenate(piece_vals), nrows, sort=False)


def _check_step(law: Law, name="step"):
    if not law.mean > 0:
        raise ConfigurationError(f"{name} law must be positive with positive mean, got {law!r}")


@dataclass(frozen=True)
class Renewal:
    """Zero-delayed renewal process: T_0 = 0 and T_k = xi_1 + ... + xi_k."""

    step: Law = field(default_factory=rng.Exponential)

    def __post_init__(self):
        _check_step(self.step)

    def normalization(self) -> tuple[float, float]:
        return 1.0 / self.step.mean, 1.0

    def generate_batch(self, horizon: float, keys) -> Ragged:
        keys = np.asarray(keys, dtype=np.uint64)
        walk = _walk_sums(keys, horizon, self.step)
        rows = np.concatenate([np.arange(len(keys)), walk.rows])
        vals = np.concatenate([np.zeros(len(keys)), walk.values])
        return Ragged.from_pieces(rows, vals, len(keys), sort=False)


@dataclass(frozen=True)
class PerturbedWalk:
    """T_k = S_{k-1} + eta_k for k >= 1, with independent positive perturbations."""

    step: Law = field(default_factory=rng.Exponential)
    perturbation: Law = field(default_factory=rng.Exponential)

    def __post_init__(self):
        _check_step(self.step)
        _check_step(self.perturbation, "perturbation")

    def normalization(self) -> tuple[float, float]:
        return 1.0 / self.step.mean, 1.0

    def generate_batch(self, horizon: float, keys) -> Ragged:
        # xi_k at counter 2(k-1), eta_k at counter 2(k-1)+1. The walk runs while
        # S_{k-1} <= horizon; later points cannot land in [0, horizon] since eta > 0.
        keys = np.asarray(keys, dtype=np.uint64)
        walk = _walk_sums(keys, horizon, self.step, stride=2, offset=0)
        rows = np.concatenate([np.arange(len(keys)), walk.rows])
        base = np.concatenate([np.zeros(len(keys)), walk.values])
        bases = Ragged.from_pieces(rows, base, len(keys), sort=False)
        k_minus_1 = bases.position.astype(np.uint64)
        eta = self.perturbation.from_uniform(
            rng.uniform_at(keys[bases.rows], np.uint64(2) * k_minus_1 + np.uint64(1)))
        times = bases.values + eta
        keep = times <= horizon
        return Ragged.from_pieces(bases.rows[keep], times[keep], len(keys))


@dataclass(frozen=True)
class PoissonNH:
    """Poisson process with mean function m(t) = c0 * t**rho0."""

    c0: float = 1.0
    rho0: float = 1.0

    def __post_init__(self):
        if not (self.c0 > 0 and self.rho0 > 0):
            raise ConfigurationError(f"need c0 > 0 and rho0 > 0, got c0={self.c0}, rho0={self.rho0}")

    def normalization(self) -> tuple[float, float]:
        return float(self.c0), float(self.rho0)

    def mean_function(self, t):
        return self.c0 * np.power(np.maximum(t, 0.0), self.rho0)

    def inverse_mean(self, x):
        return np.power(np.asarray(x) / self.c0, 1.0 / self.rho0)

    def generate_batch(self, horizon: float, keys) -> Ragged:
        # K ~ Poisson(m(horizon)) at counter 0; given K the points are
        # m^{-1}(U_i m(horizon)) with U_i at counters 1..K.
        keys = np.asarray(keys, dtype=np.uint64)
        total = float(self.mean_function(horizon))
        k = rng.poisson_quantile(rng.uniform_at(keys, 0), total).astype(np.int64)
        rows = np.repeat(np.arange(len(keys)), k)
        idx = np.arange(k.sum()) - np.repeat(np.cumsum(k) - k, k)
        u = rng.uniform_at(keys[rows], idx.astype(np.uint64) + np.uint64(1))
        times = np.minimum(self.inverse_mean(u * total), horizon)
        return Ragged.from_pieces(rows, times, len(keys))


@dataclass(frozen=True)
class BrwGeneration:
    """Positions of generation ``j`` of a branching random walk.

    Every individual at position x has children at x + S_n (n >= 1), where S
    is a fresh renewal walk with steps from ``step``. The ancestor sits at 0,
    so generation 1 is the renewal process without its atom at 0.
    """

    step: Law = field(default_factory=rng.Exponential)
    generation: int = 2
    max_expected: float = 2e7

    def __post_init__(self):
        _check_step(self.step)
        if int(self.generation) != self.generation or self.generation < 2:
            raise ConfigurationError(f"generation must be an integer >= 2, got {self.generation}")

    def normalization(self) -> tuple[float, float]:
        j = int(self.generation)
        return 1.0 / (math.factorial(j) * self.step.mean ** j), float(j)

    def expected_count(self, horizon: float) -> float:
        c, rho = self.normalization()
        return c * horizon ** rho

    def generate_batch(self, horizon: float, keys) -> Ragged:
        keys = np.asarray(keys, dtype=np.uint64)
        expected = self.expected_count(horizon) * len(keys)
        if expected > self.max_expected:
            raise ResourceError(
                f"branching random walk would hold about {expected:.3g} points "
                f"(cap {self.max_expected:.3g}); lower the horizon or the replicate count")
        nrows = len(keys)
        # individual (g, i) of a replicate has key child(split(key, g), i)
        gen = Ragged(np.zeros(nrows), np.ones(nrows, dtype=int))
        for g in range(int(self.generation)):
            parent_rows = gen.rows
            parent_keys = rng.child_keys(
                rng.split_keys(keys, g + 1)[parent_rows], gen.position.astype(np.uint64))
            kids = _walk_sums(parent_keys, horizon - gen.values, self.step)
            kid_rows = parent_rows[kids.rows]
            kid_vals = gen.values[kids.rows] + kids.values
            gen = Ragged.from_pieces(kid_rows, kid_vals, nrows)
        return gen


ArrivalSpec = Renewal | PerturbedWalk | PoissonNH | BrwGeneration


@dataclass(frozen=True)
class ArrivalRealization:
    """Sorted arrival times on [0, horizon]."""

    times: np.ndarray
    horizon: float

    def __len__(self):
        return len(self.times)

    def count(self, t: float) -> int:
        """N(t): the number of arrival times <= t."""
        return int(count(self, t))

    def to_csv(self, path) -> None:
        lines = ["time"] + [repr(float(x)) for x in self.times]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def count(real: ArrivalRealization, t):
    """Counting function at ``t`` (scalar or array); right-continuous."""
    t = np.asarray(t, dtype=float)
    if np.any(t > real.horizon):
        raise DomainError(f"t={t.max()} exceeds the simulated horizon {real.horizon}")
    return np.searchsorted(real.times, t, side="right")


def arrival_keys(replicate_keys) -> np.ndarray:
    return rng.split_keys(replicate_keys, ARRIVAL_TAG)


def generate_batch(spec: ArrivalSpec, horizon: float, replicate_keys) -> Ragged:
    """Arrivals for a batch of replicate streams (given by their keys)."""
    if not horizon > 0:
        raise DomainError(f"horizon must be > 0, got {horizon}")
    return spec.generate_batch(float(horizon), arrival_keys(replicate_keys))


def generate_arrivals(spec: ArrivalSpec, horizon: float, stream: rng.Stream) -> ArrivalRealization:
    """One realisation of ``spec`` on [0, horizon] drawn from ``stream``."""
    batch = generate_batch(spec, horizon, np.array([stream.key], dtype=np.uint64))
    return ArrivalRealization(batch.values, float(horizon))


def arrival_from_dict(d: dict) -> ArrivalSpec:
    d = dict(d)
    kind = d.pop("kind", None)
    try:
        if kind == "renewal":
            return Renewal(step=rng.law_from_dict(d.pop("step")), **_no_extra(d))
        if kind == "perturbed_walk":
            return PerturbedWalk(step=rng.law_from_dict(d.pop("step")),
                                 perturbation=rng.law_from_dict(d.pop("perturbation")), **_no_extra(d))
        if kind == "poisson_nh":
            return PoissonNH(c0=float(d.pop("c0")), rho0=float(d.pop("rho0")), **_no_extra(d))
        if kind == "brw_generation":
            extra = {}
            if "max_expected" in d:
                extra["max_expected"] = float(d.pop("max_expected"))
            return BrwGeneration(step=rng.law_from_dict(d.pop("step")),
                                 generation=int(d.pop("generation")), **extra, **_no_extra(d))
    except KeyError as exc:
        raise ConfigurationError(f"arrival kind {kind!r} is missing field {exc}") from None
    raise ConfigurationError(
        f"unknown arrival kind {kind!r}; expected renewal, perturbed_walk, poisson_nh or brw_generation")


def arrival_to_dict(spec: ArrivalSpec) -> dict:
    if isinstance(spec, Renewal):
        return {"kind": "renewal", "step": rng.law_to_dict(spec.step)}
    if isinstance(spec, PerturbedWalk):
        return {"kind": "perturbed_walk", "step": rng.law_to_dict(spec.step),
                "perturbation": rng.law_to_dict(spec.perturbation)}
    if isinstance(spec, PoissonNH):
        return {"kind": "poisson_nh", "c0": spec.c0, "rho0": spec.rho0}
    return {"kind": "brw_generation", "step": rng.law_to_dict(spec.step),
            "generation": spec.generation, "max_expected": spec.max_expected}


def _no_extra(d: dict) -> dict:
    if d:
        raise ConfigurationError(f"unknown fields: {sorted(d)}")
    return {}
