"""Limit covariance of the scaled shot-noise vector and Gaussian sampling from it.

For a regularly varying response the limit covariance is

    Pi(s, t) = rho * int_0^{s∧t} C(s - y, t - y) y^(rho - 1) dy,

and for a fictitious one the limit has independent values with variance
rho * B(beta + 1, rho) * u^(beta + rho). After the substitution y = (s∧t) z
the integrand carries power singularities z^(rho-1) at 0 and, on the diagonal
with beta < 0, (1 - z)^beta at 1. The interval is split at 1/2 and each half
gets a power substitution that cancels its singularity; double-exponential
(tanh-sinh) quadrature then handles what is left, even for beta close to -1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import special

from . import rng
from .errors import ConsistencyError, DomainError, NumericError
from .responses import CovarianceModel

DEFAULT_TOL = 1e-8
PSD_SLACK = 1e-8
JITTER_LADDER = (0.0, 1e-12, 1e-11, 1e-10)

# |tau| <= 6.1 keeps the smallest abscissa (and its complement) near 1e-300
_TAU_MAX = 6.1
_MAX_LEVEL = 12


def beta_fn(x: float, y: float) -> float:
    """Euler beta function B(x, y) = Gamma(x) Gamma(y) / Gamma(x + y)."""
    if not (x > 0 and y > 0):
        raise DomainError(f"beta function needs positive arguments, got ({x}, {y})")
    return float(special.beta(x, y))


def _ts_nodes(level: int):
    """Abscissae x, complements 1 - x and weights dx/dtau for the nodes new at ``level``."""
    h = 2.0 ** -level
    if level == 0:
        k = np.arange(-math.floor(_TAU_MAX), math.floor(_TAU_MAX) + 1)
    else:
        m = math.floor(_TAU_MAX / h)
        k = np.arange(-m, m + 1)
        k = k[k % 2 != 0]
    tau = k * h
    q = math.pi * np.sinh(tau)
    x = 1.0 / (1.0 + np.exp(-q))
    xc = 1.0 / (1.0 + np.exp(q))
    w = math.pi * np.cosh(tau) * x * xc
    keep = (x > 0) & (xc > 0) & (w > 0)
    return x[keep], xc[keep], w[keep]


def tanh_sinh(func, tol: float = DEFAULT_TOL, min_level: int = 3):
    """Integrate ``func(x, 1 - x)`` over (0, 1).

    ``func`` receives the abscissae together with their complements (computed
    without cancellation) so that singular factors like (1 - x)^beta stay
    accurate near the right end. Returns ``(value, error_estimate)``; the
    estimate is the change between the last two step halvings.
    """
    total = 0.0
    prev = None
    for level in range(_MAX_LEVEL + 1):
        x, xc, w = _ts_nodes(level)
        with np.errstate(over="ignore", invalid="ignore"):
            terms = w * func(x, xc)
        if not np.all(np.isfinite(terms)):
            raise NumericError("integrand is not finite at a quadrature node")
        total += float(np.sum(terms))
        estimate = total * 2.0 ** -level
        if prev is not None:
            err = abs(estimate - prev)
            if level >= min_level and err <= tol:
                return estimate, err
        prev = estimate
    raise NumericError(f"tanh-sinh quadrature did not reach tol={tol}", estimate, err)


def limit_cov_Pi(model: CovarianceModel, rho: float, s: float, t: float, tol: float = DEFAULT_TOL):
    """Pi(s, t) and an absolute error estimate."""
    if not (s > 0 and t > 0 and rho > 0):
        raise DomainError(f"need s, t, rho > 0, got s={s}, t={t}, rho={rho}")
    beta = model.beta
    m = min(s, t)
    if model.fictitious:
        if s != t:
            return 0.0, 0.0
        return rho * beta_fn(beta + 1.0, rho) * m ** (beta + rho), 0.0
    ds, dt = s - m, t - m
    factor = rho * m ** rho
    # split at z = 1/2 and remove the endpoint power singularities by substitution:
    # z = v^(1/p) / 2 on the left, 1 - z = w^(1/q) / 2 on the right
    p = min(rho, 1.0)
    singular = s == t and beta < 0
    q = beta + 1.0 if singular else 1.0

    def left(v, vc):
        z = 0.5 * np.power(v, 1.0 / p)
        x = m * (1.0 - z)
        return model.C(ds + x, dt + x) * (0.5 ** rho / p) * np.power(v, rho / p - 1.0)

    def right(w, wc):
        zc = 0.5 * np.power(w, 1.0 / q)
        jac = np.power(1.0 - zc, rho - 1.0) * (0.5 / q) * np.power(w, 1.0 / q - 1.0)
        if not singular:
            x = m * zc
            return model.C(ds + x, dt + x) * jac
        # C(x, x) = x^beta h(x): evaluate h at a floor so underflow never meets the pole
        x = np.maximum(m * zc, 1e-280)
        h = model.C(x, x) * np.power(x, -beta)
        return h * m ** beta * 0.5 ** (beta + 1.0) / q * np.power(1.0 - zc, rho - 1.0)

    v1, e1 = tanh_sinh(left, 0.5 * tol / factor)
    v2, e2 = tanh_sinh(right, 0.5 * tol / factor)
    return factor * (v1 + v2), factor * (e1 + e2)


@dataclass(frozen=True)
class LimitCovariance:
    grid: np.ndarray
    matrix: np.ndarray
    quad_error: np.ndarray
    fictitious: bool
    beta: float
    rho: float

    def diagonal_law(self) -> np.ndarray:
        """rho B(beta+1, rho) u^(beta+rho) on the grid."""
        return self.rho * beta_fn(self.beta + 1.0, self.rho) * self.grid ** (self.beta + self.rho)

    def to_csv(self, path) -> None:
        head = ",".join(["u"] + [repr(float(u)) for u in self.grid])
        rows = [",".join([repr(float(u))] + [repr(float(v)) for v in row])
                for u, row in zip(self.grid, self.matrix)]
        Path(path).write_text("\n".join([head] + rows) + "\n", encoding="utf-8")


def limit_cov_matrix(model: CovarianceModel, rho: float, grid, tol: float = DEFAULT_TOL) -> LimitCovariance:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise DomainError(f"grid must be strictly increasing and positive, got {grid}")
    n = len(grid)
    mat = np.zeros((n, n))
    err = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            mat[i, j], err[i, j] = limit_cov_Pi(model, rho, grid[i], grid[j], tol)
            mat[j, i], err[j, i] = mat[i, j], err[i, j]
    cov = LimitCovariance(grid, mat, err, bool(model.fictitious), float(model.beta), float(rho))
    diag_gap = np.abs(np.diag(mat) - cov.diagonal_law())
    if np.any(diag_gap > 10 * tol + 1e-12 * np.abs(np.diag(mat))):
        raise ConsistencyError(f"diagonal of Pi departs from rho B(beta+1, rho) u^(beta+rho) by {diag_gap.max():.3g}")
    smallest = float(np.linalg.eigvalsh(mat)[0])
    if smallest < -PSD_SLACK * float(np.max(np.diag(mat))):
        raise ConsistencyError(f"limit covariance is not positive semidefinite (eigenvalue {smallest:.3g})")
    return cov


def _root(matrix: np.ndarray) -> np.ndarray:
    scale = float(np.max(np.diag(matrix)))
    for jitter in JITTER_LADDER:
        try:
            return np.linalg.cholesky(matrix + jitter * scale * np.eye(len(matrix)))
        except np.linalg.LinAlgError:
            continue
    raise NumericError("Cholesky factorisation failed even with diagonal jitter")


def sample_limit_gaussian(cov: LimitCovariance, stream: rng.Stream, count: int) -> np.ndarray:
    """``count`` independent centred Gaussian vectors with covariance ``cov.matrix``."""
    n = len(cov.grid)
    z = stream.normals(count * n).reshape(count, n)
    return z @ _root(cov.matrix).T
