"""Shot-noise aggregation Y(t) = sum_k X_{k+1}(t - T_k) and scaled Monte-Carlo ensembles.

Replicate r draws everything from ``derive(seed, [r])``: its arrivals from an
internal sub-stream, and the response attached to its k-th arrival (in
increasing time order) from ``derive(seed, [r, k])``. Replicates are computed
in fixed-size blocks; the block layout and the thread count never change any
value.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import arrivals as arr
from . import rng
from .arrivals import ArrivalRealization, ArrivalSpec
from .errors import ConfigurationError, DegenerateScaleError, DomainError
from .responses import ResponseSpec

BLOCK = 256


@dataclass(frozen=True)
class Scenario:
    arrival: ArrivalSpec
    response: ResponseSpec
    c: float
    rho: float
    grid: tuple[float, ...]
    t: float
    replicates: int = 1

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(float(u) for u in self.grid))
        check_standing_assumption(self.response.beta, self.rho)
        if not (self.c > 0 and self.rho > 0 and self.t > 0):
            raise ConfigurationError(f"need c, rho, t > 0; got c={self.c}, rho={self.rho}, t={self.t}")
        g = np.asarray(self.grid)
        if g.size == 0 or np.any(g <= 0) or np.any(np.diff(g) <= 0):
            raise ConfigurationError(f"grid must be strictly increasing and positive, got {self.grid}")
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise ConfigurationError(f"replicates must be a positive integer, got {self.replicates}")
        c_arr, rho_arr = self.arrival.normalization()
        if not (math.isclose(self.c, c_arr, rel_tol=1e-9) and math.isclose(self.rho, rho_arr, rel_tol=1e-9)):
            raise ConfigurationError(
                f"(c, rho) = ({self.c}, {self.rho}) does not match the arrival model, "
                f"which requires ({c_arr}, {rho_arr})")

    @property
    def horizon(self) -> float:
        return self.grid[-1] * self.t

    @property
    def n(self) -> int:
        return len(self.grid)

    def scale(self) -> float:
        """sqrt(c t^rho v(t)) with the exact variance v of the response."""
        v = float(self.response.variance(self.t))
        if not v > 0:
            raise DegenerateScaleError(f"response variance v(t) = {v} at t = {self.t}; cannot normalise")
        return math.sqrt(self.c * self.t ** self.rho * v)


def check_standing_assumption(beta: float, rho: float) -> None:
    bound = -min(rho, 1.0)
    if not beta > bound:
        raise ConfigurationError(
            f"beta = {beta} violates the constraint beta > -(rho ∧ 1) = {bound} (rho = {rho})")


def aggregate(arrival_batch: arr.Ragged, replicate_keys, response: ResponseSpec, times) -> np.ndarray:
    """Y at ``times`` for each replicate row of ``arrival_batch``; shape (rows, len(times))."""
    times = np.asarray(times, dtype=float)
    nrows = len(arrival_batch.counts)
    out = np.zeros((nrows, len(times)))
    if len(arrival_batch.values) == 0:
        return out
    rows = arrival_batch.rows
    path_keys = rng.child_keys(np.asarray(replicate_keys, dtype=np.uint64)[rows],
                               arrival_batch.position.astype(np.uint64))
    lags = times[None, :] - arrival_batch.values[:, None]
    x = response.path_values(path_keys, lags)
    for i in range(len(times)):
        out[:, i] = np.bincount(rows, weights=x[:, i], minlength=nrows)
    return out


def evaluate_Y(arrivals: ArrivalRealization, response: ResponseSpec, times, stream: rng.Stream) -> np.ndarray:
    """Y(s) for each query time s, using path ``stream.child(k)`` for the k-th arrival."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0) or np.any(times > arrivals.horizon):
        raise DomainError(f"query times must lie in [0, {arrivals.horizon}]")
    batch = arr.Ragged(np.asarray(arrivals.times, dtype=float), np.array([len(arrivals.times)]))
    return aggregate(batch, np.array([stream.key], dtype=np.uint64), response, times)[0]


def scaled_block(scenario: Scenario, keys) -> np.ndarray:
    """Scaled vectors Y(u_i t) / sqrt(c t^rho v(t)) for a block of replicate keys."""
    scale = scenario.scale()
    batch = arr.generate_batch(scenario.arrival, scenario.horizon, keys)
    times = np.asarray(scenario.grid) * scenario.t
    return aggregate(batch, keys, scenario.response, times) / scale


def scaled_sample(scenario: Scenario, stream: rng.Stream) -> np.ndarray:
    """One draw of the scaled vector."""
    return scaled_block(scenario, np.array([stream.key], dtype=np.uint64))[0]


def mc_ensemble(scenario: Scenario, seed: int, threads: int = 1, replicates: int | None = None) -> np.ndarray:
    """Matrix (replicates x n); row r is ``scaled_sample(scenario, derive(seed, [r]))``."""
    count = scenario.replicates if replicates is None else int(replicates)
    keys = rng.replicate_keys(seed, count)
    scenario.scale()
    blocks = [keys[i:i + BLOCK] for i in range(0, count, BLOCK)]
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda k: scaled_block(scenario, k), blocks))
    else:
        parts = [scaled_block(scenario, k) for k in blocks]
    return np.vstack(parts) if parts else np.zeros((0, scenario.n))
