import math
from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from immigrationlab import arrivals as arr
from immigrationlab import rng
from immigrationlab.arrivals import ArrivalRealization, PoissonNH, Renewal
from immigrationlab.errors import ConfigurationError, DegenerateScaleError, DomainError
from immigrationlab.responses import ScaledVariable, make_response
from immigrationlab.shotnoise import Scenario, evaluate_Y, mc_ensemble, scaled_sample
from conftest import within


@dataclass(frozen=True)
class ConstantResponse:
    """Test-only response X(t) = kappa (1 + t)^(beta/2) for t >= 0."""

    kappa: float = 1.0
    beta: float = 0.0

    def variance(self, t):
        return 0.0

    def path_values(self, keys, times):
        times = np.atleast_2d(np.asarray(times, dtype=float))
        return np.where(times >= 0, self.kappa * np.power(1.0 + np.maximum(times, 0), self.beta / 2), 0.0)


@dataclass(frozen=True)
class CountingResponse:
    """Test-only response X(t) = 1{t >= 0}, so Y counts arrivals."""

    beta: float = 0.0

    def path_values(self, keys, times):
        return (np.atleast_2d(np.asarray(times, dtype=float)) >= 0).astype(float)


def test_no_arrivals_gives_zero():
    real = ArrivalRealization(np.array([]), 5.0)
    assert np.all(evaluate_Y(real, ScaledVariable(0.0), [0.0, 2.0, 5.0], rng.derive(1)) == 0)


def test_two_point_cancellation():
    spec = ScaledVariable(0.0, rng.TwoPoint(0.5))
    for r in range(1000):
        s = rng.derive(2, [r])
        if make_response(spec, s.child(0)).eta > 0 > make_response(spec, s.child(1)).eta:
            break
    real = ArrivalRealization(np.array([0.0, 1.0]), 2.0)
    y = evaluate_Y(real, spec, [0.5, 1.5], s)
    assert y[0] == 1.0 and y[1] == 0.0


def test_deterministic_renewal_constant_response():
    real = arr.generate_arrivals(Renewal(rng.Deterministic(1.0)), 2.0, rng.derive(0))
    assert evaluate_Y(real, ConstantResponse(), [2.0], rng.derive(0))[0] == 3.0


def test_query_outside_horizon():
    real = ArrivalRealization(np.array([0.0]), 1.0)
    with pytest.raises(DomainError):
        evaluate_Y(real, ScaledVariable(0.0), [1.5], rng.derive(0))


def test_matches_direct_sum():
    spec = ScaledVariable(0.5)
    stream = rng.derive(7, [3])
    real = arr.generate_arrivals(PoissonNH(2.0, 1.0), 20.0, stream)
    times = np.array([0.0, 3.3, 10.0, 20.0])
    y = evaluate_Y(real, spec, times, stream)
    direct = [sum(make_response(spec, stream.child(k))(s - tk) for k, tk in enumerate(real.times)) for s in times]
    assert np.allclose(y, direct, rtol=1e-12, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(points=st.lists(st.floats(0, 10, allow_nan=False), max_size=12),
       kappa=st.floats(-3, 3, allow_nan=False), beta=st.floats(-0.9, 2))
def test_linear_in_constant_response(points, kappa, beta):
    real = ArrivalRealization(np.sort(np.array(points, dtype=float)), 10.0)
    times = np.linspace(0, 10, 7)
    y = evaluate_Y(real, ConstantResponse(kappa, beta), times, rng.derive(0))
    oracle = [sum(kappa * (1 + s - t) ** (beta / 2) for t in points if t <= s) for s in times]
    assert np.allclose(y, oracle, rtol=1e-12, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(points=st.lists(st.floats(0, 10, allow_nan=False), max_size=12), extra=st.floats(0, 10, allow_nan=False))
def test_adding_an_arrival_never_decreases_counting_shot_noise(points, extra):
    times = np.linspace(0, 10, 11)
    base = ArrivalRealization(np.sort(np.array(points, dtype=float)), 10.0)
    more = ArrivalRealization(np.sort(np.array(points + [extra], dtype=float)), 10.0)
    y0 = evaluate_Y(base, CountingResponse(), times, rng.derive(0))
    y1 = evaluate_Y(more, CountingResponse(), times, rng.derive(0))
    assert np.all(y1 >= y0)


def _scenario(**kw):
    args = dict(arrival=Renewal(rng.Exponential(1.0)), response=ScaledVariable(0.0), c=1.0, rho=1.0,
                grid=(0.5, 1.0, 2.0), t=400.0, replicates=10_000)
    args.update(kw)
    return Scenario(**args)


def test_scaled_vector_moments():
    ens = mc_ensemble(_scenario(), seed=3)
    n = len(ens)
    within(ens[:, 1].mean(), 0.0, math.sqrt(1.0025 / n), 4)
    within(ens[:, 1].var(ddof=1), 1.0025, math.sqrt(2 / n) * 1.0025, 4)


def test_ensemble_rows_are_scaled_samples():
    sc = _scenario(replicates=300)
    ens = mc_ensemble(sc, seed=9)
    for r in (0, 1, 255, 256, 299):
        assert np.array_equal(ens[r], scaled_sample(sc, rng.derive(9, [r])))


def test_ensemble_deterministic_and_thread_independent():
    sc = _scenario(replicates=700, t=50.0)
    a = mc_ensemble(sc, seed=5)
    assert np.array_equal(a, mc_ensemble(sc, seed=5))
    assert np.array_equal(a, mc_ensemble(sc, seed=5, threads=4))
    assert np.array_equal(a[:300], mc_ensemble(sc, seed=5, replicates=300))
    assert not np.array_equal(a, mc_ensemble(sc, seed=6))


def test_degenerate_scale():
    sc = _scenario(response=ConstantResponse())
    with pytest.raises(DegenerateScaleError):
        scaled_sample(sc, rng.derive(0))


def test_standing_assumption_rejected():
    with pytest.raises(ConfigurationError, match="rho ∧ 1"):
        _scenario(response=ConstantResponse(beta=-1.5))
    with pytest.raises(ConfigurationError):
        _scenario(arrival=PoissonNH(1.0, 0.5), c=1.0, rho=0.5, response=ScaledVariable(-0.6))


@pytest.mark.parametrize("kw", [dict(c=2.0), dict(rho=2.0), dict(grid=(1.0, 0.5)), dict(grid=(0.0, 1.0)),
                                dict(t=-1.0), dict(replicates=0)])
def test_scenario_validation(kw):
    with pytest.raises(ConfigurationError):
        _scenario(**kw)
