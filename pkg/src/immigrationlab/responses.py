"""Response processes X attached to each arrival, with exact covariance structure.

Five families are implemented:

* ``SurvivalIndicator``: X(t) = 1{eta > t} - P{eta > t} with P{eta > t} = (1+t)^beta
* ``ScaledVariable``:    X(t) = eta * (1+t)^(beta/2), eta centred with finite variance
* ``TimeChangedBM``:     X(t) = W(t^beta), W a standard Brownian motion
* ``CenteredPoisson``:   X(t) = N(t) - c0 t^rho0, N a Poisson process with that mean
* ``OUModulated``:       X(t) = (1+t)^(beta/2) Z(t), Z stationary Ornstein-Uhlenbeck, Var Z = 1/2

Each family samples paths in bulk through ``path_values(keys, times)``: row i
holds the query times of the path keyed by ``keys[i]``, sorted increasingly.
Latent draws are addressed by counter, and the j-th *new* knot of a path uses
counter j, so ``ResponsePath`` (the lazy single-path evaluator) returns the same
numbers when queried in increasing order.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from . import rng
from .errors import ConfigurationError
from .rng import Law


@dataclass(frozen=True)
class CovarianceModel:
    """Exact covariance f, variance v, limit function C and index beta of a response."""

    f: Callable
    v: Callable
    C: Callable
    beta: float
    fictitious: bool = False
    ratio: Callable | None = None

    def scaled_ratio(self, u, w, t):
        """f(ut, wt) / v(t)."""
        if self.ratio is not None:
            return self.ratio(u, w, t)
        return self.f(np.asarray(u) * t, np.asarray(w) * t) / self.v(t)


def _arr(x):
    return np.asarray(x, dtype=float)


def _wrap(values, shape):
    return float(values) if shape == () else values


class _Response:
    """Shared plumbing; subclasses define the law."""

    fictitious = False
    # does a query at time 0 create a new knot (consume a counter)?
    knot_at_zero = False

    def covariance_model(self) -> CovarianceModel:
        return CovarianceModel(self.covariance, self.variance, self.limit, self.beta,
                               self.fictitious, getattr(self, "_ratio", None))

    def variance(self, t):
        return self.covariance(t, t)

    def path_values(self, keys, times) -> np.ndarray:
        keys = np.asarray(keys, dtype=np.uint64)
        times = np.atleast_2d(_arr(times))
        out = np.zeros(times.shape)
        if times.size:
            self._fill(keys, times, out)
        return out

    def _knot_counters(self, times):
        """Per query: is it a new knot, and the counter it consumes."""
        new = times >= 0 if self.knot_at_zero else times > 0
        counters = np.cumsum(new, axis=1) - 1
        return new, np.maximum(counters, 0).astype(np.uint64)


@dataclass(frozen=True)
class SurvivalIndicator(_Response):
    beta: float = -0.5

    def __post_init__(self):
        if not -1.0 < self.beta < 0.0:
            raise ConfigurationError(f"survival-indicator response needs beta in (-1, 0), got {self.beta}")

    @property
    def eta_law(self) -> rng.ParetoTail:
        return rng.ParetoTail(self.beta)

    def tail(self, t):
        return np.power(1.0 + _arr(t), self.beta)

    def covariance(self, u, w):
        u, w = _arr(u), _arr(w)
        return self.tail(np.maximum(u, w)) - self.tail(u) * self.tail(w)

    def variance(self, t):
        p = self.tail(t)
        return p * (1.0 - p)

    def limit(self, u, w):
        return np.power(np.maximum(_arr(u), _arr(w)), self.beta)

    def _fill(self, keys, times, out):
        eta = self.eta_law.from_uniform(rng.uniform_at(keys, 0))[:, None]
        live = times >= 0
        x = (eta > times).astype(float) - self.tail(np.where(live, times, 0.0))
        out[live] = x[live]


@dataclass(frozen=True)
class ScaledVariable(_Response):
    beta: float = 0.0
    innovation: Law = field(default_factory=rng.Normal)

    def __post_init__(self):
        if not self.beta > -1.0:
            raise ConfigurationError(f"scaled-variable response needs beta > -1, got {self.beta}")
        if self.innovation.mean != 0.0 or not 0.0 < self.innovation.variance < math.inf:
            raise ConfigurationError("innovation law must be centred with finite positive variance")

    def g(self, t):
        return np.power(1.0 + _arr(t), self.beta / 2)

    def covariance(self, u, w):
        return self.innovation.variance * self.g(u) * self.g(w)

    def limit(self, u, w):
        return np.power(_arr(u) * _arr(w), self.beta / 2)

    def _ratio(self, u, w, t):
        return np.power((1.0 + _arr(u) * t) * (1.0 + _arr(w) * t), self.beta / 2) / (1.0 + t) ** self.beta

    def _fill(self, keys, times, out):
        eta = self.innovation.from_uniform(rng.uniform_at(keys, 0))[:, None]
        if self.beta == 0.0:
            np.copyto(out, np.broadcast_to(eta, out.shape))
        else:
            np.multiply(eta, self.g(np.maximum(times, 0.0)), out=out)
        out[times < 0] = 0.0


@dataclass(frozen=True)
class TimeChangedBM(_Response):
    beta: float = 1.0

    def __post_init__(self):
        if not self.beta > 0.0:
            raise ConfigurationError(f"time-changed Brownian response needs beta > 0, got {self.beta}")

    def clock(self, t):
        return np.power(np.maximum(_arr(t), 0.0), self.beta)

    def covariance(self, u, w):
        return self.clock(np.minimum(_arr(u), _arr(w)))

    def limit(self, u, w):
        return np.power(np.minimum(_arr(u), _arr(w)), self.beta)

    def _ratio(self, u, w, t):
        return self.limit(u, w)

    def _fill(self, keys, times, out):
        # knots live on the clock scale: distinct times whose clocks coincide share a knot
        tau = self.clock(times)
        prev = np.concatenate([np.zeros((len(keys), 1)), tau[:, :-1]], axis=1)
        new = tau > prev
        counters = np.maximum(np.cumsum(new, axis=1) - 1, 0).astype(np.uint64)
        level = np.zeros(len(keys))
        for j in range(times.shape[1]):
            m = new[:, j]
            if m.any():
                z = rng.normal_at(keys[m], counters[m, j])
                level[m] = level[m] + np.sqrt(tau[m, j] - prev[m, j]) * z
            out[:, j] = level


@dataclass(frozen=True)
class CenteredPoisson(_Response):
    c0: float = 1.0
    rho0: float = 1.0

    def __post_init__(self):
        if not (self.c0 > 0 and self.rho0 > 0):
            raise ConfigurationError(f"need c0 > 0 and rho0 > 0, got c0={self.c0}, rho0={self.rho0}")

    @property
    def beta(self) -> float:
        return float(self.rho0)

    def mean_function(self, t):
        return self.c0 * np.power(np.maximum(_arr(t), 0.0), self.rho0)

    def covariance(self, u, w):
        return self.mean_function(np.minimum(_arr(u), _arr(w)))

    def limit(self, u, w):
        return np.power(np.minimum(_arr(u), _arr(w)), self.rho0)

    def _ratio(self, u, w, t):
        return self.limit(u, w)

    def _fill(self, keys, times, out):
        new, counters = self._knot_counters(times)
        prev_mean = np.zeros(len(keys))
        level = np.zeros(len(keys))
        for j in range(times.shape[1]):
            m = new[:, j]
            if not m.any():
                continue
            mj = self.mean_function(times[m, j])
            jump = rng.poisson_quantile(rng.uniform_at(keys[m], counters[m, j]), mj - prev_mean[m])
            level[m] = level[m] + jump
            prev_mean[m] = mj
            out[m, j] = level[m] - mj


@dataclass(frozen=True)
class OUModulated(_Response):
    beta: float = -0.5
    fictitious = True
    knot_at_zero = True

    def __post_init__(self):
        if not -1.0 < self.beta < 0.0:
            raise ConfigurationError(f"OU-modulated response needs beta in (-1, 0), got {self.beta}")

    def envelope(self, t):
        return np.power(1.0 + _arr(t), self.beta / 2)

    def covariance(self, u, w):
        u, w = _arr(u), _arr(w)
        return 0.5 * self.envelope(u) * self.envelope(w) * np.exp(-np.abs(u - w))

    def limit(self, u, w):
        u, w = np.broadcast_arrays(_arr(u), _arr(w))
        return np.where(u == w, np.power(u, self.beta), 0.0)

    def _ratio(self, u, w, t):
        u, w = _arr(u), _arr(w)
        return (np.power((u * t + 1.0) * (w * t + 1.0), self.beta / 2) / (t + 1.0) ** self.beta
                * np.exp(-np.abs(u - w) * t))

    def _fill(self, keys, times, out):
        new, counters = self._knot_counters(times)
        prev_t = np.full(len(keys), np.nan)
        z = np.zeros(len(keys))
        for j in range(times.shape[1]):
            m = new[:, j]
            if not m.any():
                continue
            tj = times[m, j]
            xi = rng.normal_at(keys[m], counters[m, j])
            first = np.isnan(prev_t[m])
            decay = np.where(first, 0.0, np.exp(-(tj - np.where(first, 0.0, prev_t[m]))))
            sd = np.sqrt((1.0 - decay ** 2) / 2.0)
            z[m] = decay * z[m] + sd * xi
            prev_t[m] = tj
            out[m, j] = self.envelope(tj) * z[m]


ResponseSpec = SurvivalIndicator | ScaledVariable | TimeChangedBM | CenteredPoisson | OUModulated


def covariance_f(spec: ResponseSpec, u, w):
    """Cov(X(u), X(w)) in closed form."""
    shape = np.broadcast_shapes(np.shape(u), np.shape(w))
    return _wrap(spec.covariance(u, w), shape)


def limit_C(spec: ResponseSpec, u, w):
    """Limit function C(u, w) = lim f(ut, wt) / v(t)."""
    shape = np.broadcast_shapes(np.shape(u), np.shape(w))
    return _wrap(spec.limit(u, w), shape)


# ---------------------------------------------------------------------------
# Lazy single-path evaluation with a knot cache. Queries past the last knot
# extend the path forward; queries between knots are filled in with the exact
# conditional (bridge) law, so any query order yields a consistent path.


class ResponsePath:
    """One sampled response path, evaluated on demand at nonnegative times."""

    def __init__(self, spec: ResponseSpec, stream: rng.Stream):
        self.spec = spec
        self.key = np.uint64(stream.key)
        self._cache: dict[float, float] = {}
        self._knots: list[float] = []
        self._state: list[float] = []
        self._eta = None
        if isinstance(spec, (SurvivalIndicator, ScaledVariable)):
            law = spec.eta_law if isinstance(spec, SurvivalIndicator) else spec.innovation
            self._eta = float(law.from_uniform(rng.uniform_at(self.key, 0))[0])
        elif isinstance(spec, (TimeChangedBM, CenteredPoisson)):
            self._knots, self._state = [0.0], [0.0]

    @property
    def eta(self):
        return self._eta

    def _uniform(self) -> float:
        return float(rng.uniform_at(self.key, self._drawn)[0])

    @property
    def _drawn(self) -> int:
        extra = 1 if isinstance(self.spec, (TimeChangedBM, CenteredPoisson)) else 0
        return len(self._knots) - extra

    def __call__(self, t: float) -> float:
        t = float(t)
        if t < 0:
            return 0.0
        if t in self._cache:
            return self._cache[t]
        spec = self.spec
        if isinstance(spec, SurvivalIndicator):
            x = float(self._eta > t) - float(spec.tail(t))
        elif isinstance(spec, ScaledVariable):
            x = self._eta * float(spec.g(t))
        elif isinstance(spec, TimeChangedBM):
            x = self._brownian(float(spec.clock(t)))
        elif isinstance(spec, CenteredPoisson):
            x = self._poisson(t) - float(spec.mean_function(t))
        else:
            x = float(spec.envelope(t)) * self._ou(t)
        self._cache[t] = x
        return x

    def evaluate(self, times) -> np.ndarray:
        return np.array([self(t) for t in np.ravel(times)]).reshape(np.shape(times))

    def _insert(self, pos, knot, value):
        self._knots.insert(pos, knot)
        self._state.insert(pos, value)
        return value

    def _brownian(self, tau: float) -> float:
        pos = bisect.bisect_left(self._knots, tau)
        if pos < len(self._knots) and self._knots[pos] == tau:
            return self._state[pos]
        z = float(np.asarray(rng.normal_at(self.key, self._drawn))[0])
        a, wa = self._knots[pos - 1], self._state[pos - 1]
        if pos == len(self._knots):
            return self._insert(pos, tau, wa + math.sqrt(tau - a) * z)
        b, wb = self._knots[pos], self._state[pos]
        mean = wa + (tau - a) / (b - a) * (wb - wa)
        sd = math.sqrt((tau - a) * (b - tau) / (b - a))
        return self._insert(pos, tau, mean + sd * z)

    def _poisson(self, t: float) -> float:
        pos = bisect.bisect_left(self._knots, t)
        if pos < len(self._knots) and self._knots[pos] == t:
            return self._state[pos]
        u = self._uniform()
        m = self.spec.mean_function
        a, na = self._knots[pos - 1], self._state[pos - 1]
        if pos == len(self._knots):
            jump = float(rng.poisson_quantile(u, float(m(t)) - float(m(a))))
            return self._insert(pos, t, na + jump)
        b, nb = self._knots[pos], self._state[pos]
        p = (float(m(t)) - float(m(a))) / (float(m(b)) - float(m(a)))
        inner = float(stats.binom.ppf(u, int(nb - na), p))
        return self._insert(pos, t, na + inner)

    def _ou(self, t: float) -> float:
        pos = bisect.bisect_left(self._knots, t)
        xi = float(np.asarray(rng.normal_at(self.key, self._drawn))[0])
        if not self._knots:
            return self._insert(0, t, math.sqrt(0.5) * xi)
        if pos == len(self._knots) or pos == 0:
            # forward transition, or backward one by time reversibility
            ref = self._knots[-1] if pos else self._knots[0]
            zref = self._state[-1] if pos else self._state[0]
            # same numpy kernels as the batch sampler, so values agree bit for bit
            decay = np.exp(-np.abs(np.array([t - ref])))
            sd = np.sqrt((1.0 - decay ** 2) / 2.0)
            return self._insert(pos, t, float((decay * zref + sd * xi)[0]))
        a, za = self._knots[pos - 1], self._state[pos - 1]
        b, zb = self._knots[pos], self._state[pos]
        r1, r2 = math.exp(-(t - a)), math.exp(-(b - t))
        r12 = r1 * r2
        denom = 1.0 - r12 ** 2
        mean = (r1 * (1 - r2 ** 2) * za + r2 * (1 - r1 ** 2) * zb) / denom
        var = 0.5 * (1 - r1 ** 2) * (1 - r2 ** 2) / denom
        return self._insert(pos, t, mean + math.sqrt(var) * xi)


def make_response(spec: ResponseSpec, stream: rng.Stream) -> ResponsePath:
    """A fresh path of ``spec`` whose latent draws come from ``stream``."""
    return ResponsePath(spec, stream)


def response_from_dict(d: dict) -> ResponseSpec:
    d = dict(d)
    kind = d.pop("kind", None)
    classes = {
        "survival_indicator": SurvivalIndicator,
        "scaled_variable": ScaledVariable,
        "time_changed_bm": TimeChangedBM,
        "centered_poisson": CenteredPoisson,
        "ou_modulated": OUModulated,
    }
    if kind not in classes:
        raise ConfigurationError(f"unknown response kind {kind!r}; expected one of {sorted(classes)}")
    kwargs = {}
    if "innovation" in d:
        if kind != "scaled_variable":
            raise ConfigurationError("only scaled_variable responses take an innovation law")
        kwargs["innovation"] = rng.law_from_dict(d.pop("innovation"))
    allowed = {"c0", "rho0"} if kind == "centered_poisson" else {"beta"}
    unknown = set(d) - allowed
    if unknown:
        raise ConfigurationError(f"unknown fields for response {kind!r}: {sorted(unknown)}")
    try:
        kwargs.update({k: float(v) for k, v in d.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"response {kind!r}: {exc}") from None
    return classes[kind](**kwargs)


def response_to_dict(spec: ResponseSpec) -> dict:
    if isinstance(spec, CenteredPoisson):
        return {"kind": "centered_poisson", "c0": spec.c0, "rho0": spec.rho0}
    names = {SurvivalIndicator: "survival_indicator", ScaledVariable: "scaled_variable",
             TimeChangedBM: "time_changed_bm", OUModulated: "ou_modulated"}
    d = {"kind": names[type(spec)], "beta": spec.beta}
    if isinstance(spec, ScaledVariable):
        d["innovation"] = rng.law_to_dict(spec.innovation)
    return d
