import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from pydantic import ValidationError
from scipy import stats

from jointail.marginals import Exponential, HeavyWeibull, Lognormal, MixtureSpec, Pareto
from jointail.montecarlo import StreamKey

from .conftest import FAMILIES

def test_pareto_tail_is_exact():
    assert Pareto(alpha=2.0).tail(10.0) == pytest.approx(0.01, rel=1e-14)
    assert Pareto(alpha=2.0).tail(0.5) == 1.0

def test_scalar_in_scalar_out():
    m = Lognormal()
    assert isinstance(m.tail(2.0), float)
    assert isinstance(m.quantile(0.5), float)
    assert m.tail(np.array([1.0, 2.0])).shape == (2,)

@given(m=st.sampled_from(FAMILIES), u=st.floats(min_value=0.01, max_value=1 - 1e-6))
def test_quantile_inverts_tail(m, u):
    x = m.quantile(u)
    assert m.tail(x) == pytest.approx(1.0 - u, rel=1e-7)

@given(m=st.sampled_from(FAMILIES), a=st.floats(min_value=0.0, max_value=1e3), b=st.floats(min_value=0.0, max_value=1e3))
def test_tail_is_monotone(m, a, b):
    lo, hi = sorted((a, b))
    assert m.tail(hi) <= m.tail(lo)

@given(x=st.floats(min_value=1.0, max_value=1e12), t=st.floats(min_value=1.0, max_value=1e6))
def test_pareto_scale_ratio(x, t):
    m = Pareto(alpha=1.7)
    assert math.exp(m.log_tail(t * x) - m.log_tail(x)) == pytest.approx(t ** -1.7, rel=1e-9)

@given(a=st.floats(min_value=0.0, max_value=5.0), x=st.floats(min_value=5.0, max_value=500.0))
def test_exponential_shift_ratio(a, x):
    m = Exponential(rate=1.3)
    assert math.exp(m.log_tail(x - a) - m.log_tail(x)) == pytest.approx(math.exp(1.3 * a), rel=1e-9)

def test_far_log_tails_stay_finite():
    for m in FAMILIES:
        assert math.isfinite(m.log_tail(1e30))
    assert Lognormal().tail(1e30) >= 0.0

def test_shift_is_location_equivariant():
    u = np.linspace(0.05, 0.95, 19)
    m = HeavyWeibull(shape=0.5)
    assert np.allclose(m.shifted(-3.0).sample(u), m.sample(u) - 3.0, rtol=0, atol=1e-12)
    assert m.shifted(-3.0).left_endpoint == -3.0
    assert Pareto(alpha=2.0).shifted(1.5).left_endpoint == 2.5

def test_probability_arguments_are_checked():
    m = Pareto(alpha=2.0)
    with pytest.raises(ValueError):
        m.sample(0.0)
    with pytest.raises(ValueError):
        m.quantile(1.0)
    assert m.quantile(0.0) == 1.0

def test_probability_errors_name_the_first_bad_value():
    m = Pareto(alpha=2.0)
    with pytest.raises(ValueError, match=r'\[0, 1\), got 1\.5 at index 2$'):
        m.quantile(np.array([0.1, 0.5, 1.5, 2.0]))
    with pytest.raises(ValueError, match=r'got 1\.0 at index \(1, 1\)$'):
        m.quantile([[0.1, 0.2], [0.3, 1.0]])
    with pytest.raises(ValueError, match=r'\(0, 1\), got 0\.0$'):
        m.sample(0.0)
    u = np.full(100_000, 0.5)
    u[-1] = math.nan
    with pytest.raises(ValueError) as e:
        m.quantile(u)
    assert str(e.value) == 'probability argument must lie in [0, 1), got nan at index 99999'

def test_parameters_are_validated():
    with pytest.raises(ValidationError):
        Pareto(alpha=0.0)
    with pytest.raises(ValidationError):
        HeavyWeibull(shape=1.0)
    with pytest.raises(ValidationError):
        Pareto(alpha=2.0, beta=1.0)
    m = Pareto(alpha=2.0)
    with pytest.raises(ValidationError):
        m.alpha = 3.0

def test_rv_index_and_heavy_tail_metadata():
    assert Pareto(alpha=2.5).rv_index() == 2.5
    assert Lognormal().rv_index() is None
    assert Lognormal.heavy_tailed and not Exponential.heavy_tailed
    mix = MixtureSpec(p=0.3, left=Pareto(alpha=3.0), right=Pareto(alpha=1.5))
    assert mix.rv_index() == 1.5

@given(u=st.floats(min_value=0.001, max_value=0.9999))
def test_mixture_quantile_inverts_cdf(u):
    mix = MixtureSpec(p=0.4, left=Pareto(alpha=2.0), right=Lognormal(mu=0.5))
    assert mix.cdf(mix.quantile(u)) == pytest.approx(u, abs=1e-10)

def test_mixture_log_tail_matches_tail():
    mix = MixtureSpec(p=0.25, left=Pareto(alpha=2.0), right=Exponential())
    for x in (0.5, 3.0, 40.0):
        assert math.exp(mix.log_tail(x)) == pytest.approx(mix.tail(x), rel=1e-12)

@pytest.mark.parametrize('m', FAMILIES + [MixtureSpec(p=0.5, left=Pareto(alpha=2.0), right=Exponential())], ids=str)
def test_inverse_transform_matches_cdf(m):
    n = 100_000
    u = StreamKey(seed=99).generator().random(n)
    u = u[u > 0]
    result = stats.kstest(np.asarray(m.sample(u)), m.cdf)
    assert result.pvalue > 1e-3

def test_empirical_tail_at_upper_percentile():
    m = Pareto(alpha=2.0)
    n = 1_000_000
    x = m.sample(np.clip(StreamKey(seed=5).generator().random(n), 1e-300, None))
    p = float(np.mean(x > m.quantile(0.99)))
    assert abs(p - 0.01) < 4 * math.sqrt(0.01 * 0.99 / n)
