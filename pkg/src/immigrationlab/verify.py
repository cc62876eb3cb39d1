"""Statistical checks of the Gaussian limit and numerical checks of its hypotheses.

Every checker is a deterministic function of its arguments and the seed:
replicate r always uses ``derive(seed, [r])``, and the same replicate streams
are reused at every scale (common random numbers), which keeps the
scale-to-scale comparisons free of independent Monte-Carlo noise.

The decision rules are conventions, not consequences of the limit theorem;
each report carries a plain-text description of the rule it applied.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from . import arrivals as arr
from . import rng
from .arrivals import ArrivalSpec
from .errors import DomainError
from .limitgauss import LimitCovariance
from .responses import ResponseSpec

MONOTONE_SLACK = 1e-12
KOLMOGOROV_TERMS = 100


@dataclass
class CheckReport:
    name: str
    scales: list
    statistic: list
    threshold: str
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class NormalityReport:
    direction: list
    ks_statistic: float
    p_value: float
    sample_size: int
    passed: bool | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def empirical_cov(ensemble):
    """Mean, unbiased covariance and entrywise standard errors of the covariance.

    The standard error of entry (i, j) is sqrt((C_ii C_jj + C_ij^2) / r), the
    Gaussian-theory value with the sample covariance plugged in.
    """
    x = np.asarray(ensemble, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DomainError("need at least two rows to estimate a covariance")
    r = x.shape[0]
    mean = x.mean(axis=0)
    centred = x - mean
    cov = centred.T @ centred / (r - 1)
    d = np.diag(cov)
    se = np.sqrt((np.outer(d, d) + cov ** 2) / r)
    return mean, cov, se


def kolmogorov_sf(lam: float) -> float:
    """P{K > lam} for the Kolmogorov distribution."""
    if lam <= 0:
        return 1.0
    if lam < 1.0:
        # theta-function form; converges fast where the alternating series does not
        k = np.arange(1, KOLMOGOROV_TERMS + 1)
        cdf = math.sqrt(2 * math.pi) / lam * np.sum(np.exp(-((2 * k - 1) ** 2) * math.pi ** 2 / (8 * lam ** 2)))
        return float(min(1.0, max(0.0, 1.0 - cdf)))
    k = np.arange(1, KOLMOGOROV_TERMS + 1)
    sf = 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k ** 2 * lam ** 2))
    return float(min(1.0, max(0.0, sf)))


def ks_statistic(sample, cdf=special.ndtr) -> float:
    """sup_x |F_n(x) - F(x)| for a continuous F."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = len(x)
    f = cdf(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_normal_test(ensemble, cov: LimitCovariance, direction, alpha: float | None = None) -> NormalityReport:
    """KS test of the projection onto ``direction`` against N(0, direction' Pi direction)."""
    a = np.asarray(direction, dtype=float)
    if not np.any(a != 0):
        raise DomainError("direction must be nonzero")
    var = float(a @ cov.matrix @ a)
    if not var > 0:
        raise DomainError(f"direction has zero limit variance ({var}); cannot standardise")
    proj = np.asarray(ensemble, dtype=float) @ a / math.sqrt(var)
    d = ks_statistic(proj)
    p = kolmogorov_sf(math.sqrt(len(proj)) * d)
    passed = None if alpha is None else bool(p > alpha)
    return NormalityReport(a.tolist(), d, p, len(proj), passed)


def _top_half(values):
    values = np.asarray(values, dtype=float)
    return values[len(values) // 2:]


def _decreasing(values, strict=True) -> bool:
    v = np.asarray(values, dtype=float)
    if strict:
        return bool(np.all(np.diff(v) < 0))
    return bool(np.all(np.diff(v) <= MONOTONE_SLACK))


def _sup_deviation(batch: arr.Ragged, t: float, c: float, rho: float, T: float) -> np.ndarray:
    """Per row: sup over y in [0, T] of |N(ty)/t^rho - c y^rho|, evaluated exactly.

    Between jumps the deviation is monotone, so the supremum is attained at a
    jump (just before or at it) or at y = T.
    """
    nrows = len(batch.counts)
    tr = t ** rho
    sup = np.abs(batch.counts - c * (t * T) ** rho) / tr
    if len(batch.values):
        y = batch.values / t
        target = c * np.power(y, rho)
        before = batch.position
        dev = np.maximum(np.abs(before / tr - target), np.abs((before + 1) / tr - target))
        np.maximum.at(sup, batch.rows, dev)
    return sup[:nrows]


def check_weak_law(spec: ArrivalSpec, c: float, rho: float, T: float, scales, replicates: int, seed: int) -> CheckReport:
    scales = [float(s) for s in scales]
    keys = rng.replicate_keys(seed, replicates)
    stat = []
    for t in scales:
        batch = arr.generate_batch(spec, t * T, keys)
        stat.append(float(np.mean(_sup_deviation(batch, t, c, rho, T))))
    limit = 0.1 * c * T ** rho
    passed = _decreasing(_top_half(stat)) and stat[-1] < limit
    return CheckReport("weak_law", scales, stat,
                       f"strictly decreasing over the top half of scales and final value < 0.1*c*T^rho = {limit:.6g}",
                       passed, {"c": c, "rho": rho, "T": T, "replicates": replicates, "seed": seed})


def check_increments(spec: ArrivalSpec, rho: float, scales, replicates: int, seed: int) -> CheckReport:
    scales = [float(s) for s in scales]
    if any(t <= 1 for t in scales):
        raise DomainError("increment check needs every scale > 1")
    keys = rng.replicate_keys(seed, replicates)
    stat = []
    for t in scales:
        batch = arr.generate_batch(spec, t, keys)
        late = batch.values > t - 1.0
        incr = np.bincount(batch.rows[late], minlength=replicates)
        stat.append(float(incr.mean() / t ** (rho - 1.0)))
    bound = 2.0 * stat[0]
    passed = bool(max(stat) <= bound)
    return CheckReport("increments", scales, stat,
                       f"every value <= 2 x value at the smallest scale = {bound:.6g}",
                       passed, {"rho": rho, "replicates": replicates, "seed": seed})


def check_lindeberg(spec: ResponseSpec, rho: float, y: float, scales, replicates: int, seed: int) -> CheckReport:
    if not y > 0:
        raise DomainError(f"y must be > 0, got {y}")
    scales = [float(s) for s in scales]
    keys = rng.replicate_keys(seed, replicates)
    stat = []
    for t in scales:
        v = float(spec.variance(t))
        x = spec.path_values(keys, np.full((replicates, 1), t))[:, 0]
        level = y * math.sqrt(t ** rho * v)
        stat.append(float(np.mean(np.where(np.abs(x) > level, x * x, 0.0)) / v))
    passed = _decreasing(_top_half(stat), strict=False) and stat[-1] < 0.05
    return CheckReport("lindeberg", scales, stat,
                       "nonincreasing over the top half of scales and final value < 0.05",
                       passed, {"rho": rho, "y": y, "replicates": replicates, "seed": seed})


def check_limit_ratio(spec: ResponseSpec, w: float, a: float, b: float, scales) -> CheckReport:
    if not (0 < a < b and w > 0):
        raise DomainError(f"need 0 < a < b and w > 0, got a={a}, b={b}, w={w}")
    scales = [float(s) for s in scales]
    model = spec.covariance_model()
    u = np.linspace(a, b, 101)
    target = model.C(u, u + w)
    stat = [float(np.max(np.abs(model.scaled_ratio(u, u + w, t) - target))) for t in scales]
    passed = _decreasing(stat, strict=False) and stat[-1] < 1e-2
    return CheckReport("limit_ratio", scales, stat,
                       f"nonincreasing (slack {MONOTONE_SLACK:g}) and final value < 1e-2",
                       passed, {"w": w, "a": a, "b": b})


def renewal_rate(spec: ArrivalSpec, rate: float, scales, tolerances, replicates: int, seed: int) -> CheckReport:
    """Mean of N(t)/t against the law-of-large-numbers rate, one tolerance per scale."""
    scales = [float(s) for s in scales]
    keys = rng.replicate_keys(seed, replicates)
    stat = []
    for t in scales:
        batch = arr.generate_batch(spec, t, keys)
        stat.append(float(np.mean(batch.counts) / t))
    gaps = [abs(s - rate) for s in stat]
    passed = all(g <= tol for g, tol in zip(gaps, tolerances))
    return CheckReport("renewal_rate", scales, stat,
                       f"|mean N(t)/t - {rate:g}| <= {list(tolerances)} per scale",
                       passed, {"rate": rate, "gaps": gaps, "replicates": replicates, "seed": seed})
