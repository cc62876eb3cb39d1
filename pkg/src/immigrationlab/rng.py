"""Counter-based, splittable random streams and the variate menu.

A stream is identified by a 64-bit key. Draw ``i`` of a stream is the
SplitMix64 output for state ``key + (i + 1) * GOLDEN``, so any draw can be
computed directly from ``(key, i)`` without touching the others. Child keys are
obtained by hashing the parent key together with the child index, which makes
``derive(seed, path)`` a pure function and lets whole batches of replicates be
sampled at once, in any order, with identical results.

Two hash domains are used for children: ``child`` (the public derivation path,
e.g. ``[replicate, arrival]``) and ``split`` (internal sub-streams such as the
arrival generator of a replicate), so the two can never collide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import special

from .errors import ConfigurationError

MASK64 = (1 << 64) - 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_SEED_SALT = np.uint64(0x6A09E667F3BCC909)
_CHILD_SALT = np.uint64(0xBB67AE8584CAA73B)
_SPLIT_SALT = np.uint64(0x3C6EF372FE94F82B)
_U53 = 2.0 ** -53

_S30, _S27, _S31, _S33 = (np.uint64(s) for s in (30, 27, 31, 33))
_S11 = np.uint64(11)


def _splitmix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _S27)) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> _S31)


def _fmix(z: np.ndarray) -> np.ndarray:
    # murmur3 finaliser; a different bijection than the output function
    z = (z ^ (z >> _S33)) * np.uint64(0xFF51AFD7ED558CCD)
    z = (z ^ (z >> _S33)) * np.uint64(0xC4CEB9FE1A85EC53)
    return z ^ (z >> _S33)


def _u64(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=np.uint64))


def root_key(seed: int) -> np.uint64:
    """Key of the root stream for a master seed."""
    if not 0 <= int(seed) <= MASK64:
        raise ConfigurationError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return _fmix(_u64(seed) ^ _SEED_SALT)[0]


def child_keys(keys, index) -> np.ndarray:
    """Keys of child ``index`` of each parent key (broadcasting)."""
    return _fmix(_fmix(_u64(keys)) ^ _splitmix(_u64(index) ^ _CHILD_SALT))


def split_keys(keys, tag) -> np.ndarray:
    """Keys of internal sub-stream ``tag``; disjoint from the ``child`` domain."""
    return _fmix(_splitmix(_u64(keys) ^ _SPLIT_SALT) + _fmix(_u64(tag) + _GOLDEN))


def raw_bits(keys, counters) -> np.ndarray:
    counters = _u64(counters)
    return _splitmix(_u64(keys) + (counters + np.uint64(1)) * _GOLDEN)


def uniform_at(keys, counters) -> np.ndarray:
    """Uniform(0, 1) variates addressed by ``(key, counter)``; never 0 or 1."""
    bits = raw_bits(keys, counters)
    return ((bits >> _S11).astype(np.float64) + 0.5) * _U53


def normal_at(keys, counters) -> np.ndarray:
    return special.ndtri(uniform_at(keys, counters))


def poisson_quantile(u, mean) -> np.ndarray:
    """Smallest integer k with P{Poisson(mean) <= k} >= u, elementwise.

    Starts from a Cornish-Fisher guess and corrects with exact CDF
    evaluations, so the result is an exact inversion.
    """
    u, mean = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(mean, dtype=float))
    shape = u.shape
    u = u.ravel()
    mean = mean.ravel()
    z = special.ndtri(u)
    k = np.floor(mean + np.sqrt(mean) * z + (z * z - 1.0) / 6.0)
    k = np.where(mean > 0, np.maximum(k, 0.0), 0.0)
    cdf = special.pdtr(k, mean)
    up = np.flatnonzero(cdf < u)
    while up.size:
        k[up] += 1.0
        cdf[up] = special.pdtr(k[up], mean[up])
        up = up[cdf[up] < u[up]]
    down = np.flatnonzero(k > 0)
    while down.size:
        below = special.pdtr(k[down] - 1.0, mean[down])
        down = down[below >= u[down]]
        k[down] -= 1.0
        down = down[k[down] > 0]
    return k.reshape(shape)


# ---------------------------------------------------------------------------
# Variate laws. Each law maps one uniform to one variate by inversion, so every
# variate consumes exactly one counter slot of its stream.


@dataclass(frozen=True)
class Deterministic:
    value: float = 1.0

    def from_uniform(self, u):
        return np.full(np.shape(u), float(self.value))

    @property
    def mean(self) -> float:
        return float(self.value)

    @property
    def variance(self) -> float:
        return 0.0


@dataclass(frozen=True)
class Exponential:
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ConfigurationError(f"exponential rate must be > 0, got {self.rate}")

    def from_uniform(self, u):
        return -np.log(u) / self.rate

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    @property
    def variance(self) -> float:
        return 1.0 / self.rate ** 2


@dataclass(frozen=True)
class ParetoTail:
    """Positive law with survival function P{eta > t} = (1 + t)^beta, beta in (-1, 0)."""

    beta: float = -0.5

    def __post_init__(self):
        if not -1.0 < self.beta < 0.0:
            raise ConfigurationError(f"Pareto-type tail index must lie in (-1, 0), got {self.beta}")

    def from_uniform(self, u):
        return np.power(u, 1.0 / self.beta) - 1.0

    def survival(self, t):
        return np.power(1.0 + np.asarray(t, dtype=float), self.beta)

    @property
    def mean(self) -> float:
        return math.inf

    @property
    def variance(self) -> float:
        return math.inf


@dataclass(frozen=True)
class Normal:
    loc: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not self.sd > 0:
            raise ConfigurationError(f"normal sd must be > 0, got {self.sd}")

    def from_uniform(self, u):
        return self.loc + self.sd * special.ndtri(u)

    @property
    def mean(self) -> float:
        return float(self.loc)

    @property
    def variance(self) -> float:
        return self.sd ** 2


@dataclass(frozen=True)
class LogNormal:
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigurationError(f"lognormal sigma must be > 0, got {self.sigma}")

    def from_uniform(self, u):
        return np.exp(self.mu + self.sigma * special.ndtri(u))

    @property
    def mean(self) -> float:
        return math.exp(self.mu + self.sigma ** 2 / 2)

    @property
    def variance(self) -> float:
        return math.expm1(self.sigma ** 2) * math.exp(2 * self.mu + self.sigma ** 2)


@dataclass(frozen=True)
class TwoPoint:
    """Centred, unit-variance law on two points; the upper point has probability p."""

    p: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ConfigurationError(f"two-point probability must lie in (0, 1), got {self.p}")

    @property
    def support(self) -> tuple[float, float]:
        return math.sqrt((1 - self.p) / self.p), -math.sqrt(self.p / (1 - self.p))

    def from_uniform(self, u):
        hi, lo = self.support
        return np.where(np.asarray(u) < self.p, hi, lo)

    @property
    def mean(self) -> float:
        return 0.0

    @property
    def variance(self) -> float:
        return 1.0


Law = Deterministic | Exponential | ParetoTail | Normal | LogNormal | TwoPoint

_LAWS = {
    "deterministic": (Deterministic, {"value": "value"}),
    "exponential": (Exponential, {"rate": "rate"}),
    "pareto_tail": (ParetoTail, {"beta": "beta"}),
    "normal": (Normal, {"mean": "loc", "sd": "sd"}),
    "lognormal": (LogNormal, {"mu": "mu", "sigma": "sigma"}),
    "two_point": (TwoPoint, {"p": "p"}),
}


def law_from_dict(d: dict) -> Law:
    """Build a law from ``{"law": name, **params}``; numeric strings are accepted."""
    d = dict(d)
    name = d.pop("law", None)
    if name not in _LAWS:
        raise ConfigurationError(f"unknown law {name!r}; expected one of {sorted(_LAWS)}")
    cls, fields = _LAWS[name]
    unknown = set(d) - set(fields)
    if unknown:
        raise ConfigurationError(f"unknown parameters for law {name!r}: {sorted(unknown)}")
    try:
        kwargs = {fields[k]: float(v) for k, v in d.items()}
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"law {name!r}: {exc}") from None
    return cls(**kwargs)


def law_to_dict(law: Law) -> dict:
    for name, (cls, fields) in _LAWS.items():
        if type(law) is cls:
            return {"law": name, **{k: getattr(law, attr) for k, attr in fields.items()}}
    raise TypeError(f"not a law: {law!r}")


class Stream:
    """A random stream: a key plus a cursor for sequential draws.

    Generators that take a stream (arrivals, response paths) address its key
    directly and leave the cursor alone; the cursor only serves the
    sequential helpers below.
    """

    __slots__ = ("key", "path", "counter")

    def __init__(self, key, path: Sequence[int] = (), counter: int = 0):
        self.key = np.uint64(key)
        self.path = tuple(path)
        self.counter = counter

    def __repr__(self):
        return f"Stream(key=0x{int(self.key):016x}, path={list(self.path)}, counter={self.counter})"

    def child(self, index: int) -> "Stream":
        return Stream(child_keys(self.key, index)[0], self.path + (int(index),))

    def split(self, tag: int) -> "Stream":
        return Stream(split_keys(self.key, tag)[0], self.path)

    def _take(self, n: int) -> np.ndarray:
        counters = np.arange(self.counter, self.counter + n, dtype=np.uint64)
        self.counter += n
        return counters

    def uniforms(self, n: int) -> np.ndarray:
        return uniform_at(self.key, self._take(n))

    def normals(self, n: int) -> np.ndarray:
        return special.ndtri(self.uniforms(n))

    def draw(self, law: Law, n: int) -> np.ndarray:
        return law.from_uniform(self.uniforms(n))


def derive(seed: int, path: Iterable[int] = ()) -> Stream:
    """Stream for ``path`` below the master ``seed``; a pure function of both."""
    key = root_key(seed)
    path = tuple(int(p) for p in path)
    for p in path:
        if p < 0:
            raise ConfigurationError(f"derivation path entries must be nonnegative, got {p}")
        key = child_keys(key, p)[0]
    return Stream(key, path)


def replicate_keys(seed: int, count: int, start: int = 0) -> np.ndarray:
    """Keys of ``derive(seed, [r])`` for r = start .. start + count - 1."""
    return child_keys(root_key(seed), np.arange(start, start + count, dtype=np.uint64))


def sample(stream: Stream, law: Law) -> float:
    """One variate of ``law`` from the next slot of ``stream``."""
    return float(stream.draw(law, 1)[0])
