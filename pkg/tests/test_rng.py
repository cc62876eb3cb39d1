import math

import numpy as np
import pytest
from scipy import stats

from immigrationlab import rng
from immigrationlab.errors import ConfigurationError
from conftest import within

N = 10 ** 6


def test_same_seed_and_path_reproduce():
    a = rng.derive(42, [0]).uniforms(100)
    b = rng.derive(42, [0]).uniforms(100)
    assert np.array_equal(a, b)


def test_distinct_paths_differ():
    a = rng.derive(42, [0]).uniforms(100)
    b = rng.derive(42, [1]).uniforms(100)
    assert not np.array_equal(a, b)
    assert not np.array_equal(rng.derive(42, [0, 1]).uniforms(10), rng.derive(42, [1, 0]).uniforms(10))


def test_derive_matches_bulk_keys_and_child():
    keys = rng.replicate_keys(7, 5)
    for r in range(5):
        assert rng.derive(7, [r]).key == keys[r]
    assert rng.derive(7, [3, 9]).key == rng.derive(7, [3]).child(9).key


def test_child_and_split_domains_are_disjoint():
    s = rng.derive(1)
    kids = {int(s.child(i).key) for i in range(1000)}
    splits = {int(s.split(i).key) for i in range(1000)}
    assert not kids & splits


def test_many_streams_pooled_mean():
    keys = rng.replicate_keys(42, 10_000)
    u = rng.uniform_at(keys[:, None], np.arange(100, dtype=np.uint64)[None, :])
    sigma = 1 / math.sqrt(12)
    within(u.mean(), 0.5, sigma / math.sqrt(u.size), 4)
    assert 0 < u.min() and u.max() < 1


def test_streams_uncorrelated():
    keys = rng.replicate_keys(5, 2)
    a = rng.uniform_at(keys[0], np.arange(N))
    b = rng.uniform_at(keys[1], np.arange(N))
    r = np.corrcoef(a, b)[0, 1]
    assert abs(r) < 4 / math.sqrt(N)
    lag = np.corrcoef(a[:-1], a[1:])[0, 1]
    assert abs(lag) < 4 / math.sqrt(N)


def test_sequential_draws_advance():
    s = rng.derive(3)
    first, second = s.uniforms(5), s.uniforms(5)
    assert np.array_equal(np.concatenate([first, second]), rng.derive(3).uniforms(10))
    assert s.counter == 10


def test_deterministic():
    assert rng.sample(rng.derive(1), rng.Deterministic(1.0)) == 1.0


def test_pareto_tail_exceedance():
    x = rng.derive(11).draw(rng.ParetoTail(-0.5), N)
    frac = np.mean(x > 3)
    within(frac, 0.5, math.sqrt(0.25 / N), 3)
    assert x.min() >= 0


def test_pareto_tail_is_exact_inversion():
    law = rng.ParetoTail(-0.3)
    u = np.array([0.9, 0.5, 0.1])
    eta = law.from_uniform(u)
    assert np.allclose(law.survival(eta), u, rtol=1e-13)


def test_exponential_mean():
    x = rng.derive(12).draw(rng.Exponential(2.0), N)
    within(x.mean(), 0.5, 0.5 / 1e3, 3)


@pytest.mark.parametrize("law", [
    rng.Exponential(2.0), rng.Normal(0.0, 1.5), rng.Normal(1.0, 0.5),
    rng.LogNormal(0.0, 0.5), rng.TwoPoint(0.5), rng.TwoPoint(0.2),
])
def test_menu_moments(law):
    x = rng.derive(99, [hash(repr(law)) % 1000]).draw(law, N)
    within(x.mean(), law.mean, x.std() / math.sqrt(N), 4)
    c = x - x.mean()
    se_var = math.sqrt((np.mean(c ** 4) - np.mean(c ** 2) ** 2) / N)
    within(x.var(ddof=1), law.variance, se_var, 4)


def test_two_point_is_centred_unit():
    law = rng.TwoPoint(0.3)
    hi, lo = law.support
    assert math.isclose(0.3 * hi + 0.7 * lo, 0.0, abs_tol=1e-15)
    assert math.isclose(0.3 * hi ** 2 + 0.7 * lo ** 2, 1.0)


@pytest.mark.parametrize("bad", [
    lambda: rng.Exponential(0.0), lambda: rng.ParetoTail(-1.0), lambda: rng.ParetoTail(0.1),
    lambda: rng.Normal(0, 0), lambda: rng.TwoPoint(1.0), lambda: rng.LogNormal(0, -1),
])
def test_invalid_parameters(bad):
    with pytest.raises(ConfigurationError):
        bad()


def test_law_dict_round_trip_and_strings():
    law = rng.law_from_dict({"law": "pareto_tail", "beta": "-0.25"})
    assert law == rng.ParetoTail(-0.25)
    assert rng.law_from_dict(rng.law_to_dict(rng.Normal(1.0, 2.0))) == rng.Normal(1.0, 2.0)
    with pytest.raises(ConfigurationError):
        rng.law_from_dict({"law": "exponential", "scale": 1})
    with pytest.raises(ConfigurationError):
        rng.law_from_dict({"law": "cauchy"})


def test_seed_range():
    rng.derive(2 ** 64 - 1)
    with pytest.raises(ConfigurationError):
        rng.derive(2 ** 64)
    with pytest.raises(ConfigurationError):
        rng.derive(-1)


def test_poisson_quantile_matches_scipy():
    g = np.random.default_rng(0)
    u = g.uniform(size=20_000)
    mu = np.concatenate([g.uniform(0, 3, 5000), g.uniform(3, 50, 5000), g.uniform(50, 2000, 10_000)])
    assert np.array_equal(rng.poisson_quantile(u, mu), stats.poisson.ppf(u, mu))
    assert np.all(rng.poisson_quantile(u[:10], 0.0) == 0)
