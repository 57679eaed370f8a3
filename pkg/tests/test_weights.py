import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from pydantic import ValidationError
from scipy.stats import spearmanr

from jointail.dependence import JointModel
from jointail.marginals import Pareto
from jointail.model import DiagnosticKind
from jointail.weights import (Bernoulli, Degenerate, LognormalWeight, MomentError, ProbeFunctions, Uniform,
                              WeightModel, assumption_a_check, mixed_moment, weighted_pair_tail)

def _pair_weights(theta, delta, coupling='independent') -> WeightModel:
    return WeightModel(thetas=[theta], deltas=[delta], coupling=coupling)

def test_breiman_moment_of_uniform_weights():
    wm = _pair_weights(Uniform(a=0.0, b=2.0), Uniform(a=0.0, b=1.0))
    assert mixed_moment(wm, 0, 0, 2.0, 1.5) == pytest.approx(8 / 15, rel=1e-12)

@given(a1=st.floats(0.1, 5.0), a2=st.floats(0.1, 5.0))
def test_comonotone_uniform_moment(a1, a2):
    wm = _pair_weights(Uniform(a=0.0, b=2.0), Uniform(a=0.0, b=1.0), 'comonotone')
    # Theta = 2V, Delta = V with V uniform
    assert mixed_moment(wm, 0, 0, a1, a2) == pytest.approx(2 ** a1 / (a1 + a2 + 1), rel=1e-8)

def test_comonotone_lognormal_moment():
    w = LognormalWeight(mu=0.0, sigma=0.5)
    assert mixed_moment(_pair_weights(w, w, 'comonotone'), 0, 0, 1.0, 1.0) == pytest.approx(math.exp(0.5), rel=1e-12)
    assert mixed_moment(_pair_weights(w, w), 0, 0, 1.0, 1.0) == pytest.approx(math.exp(0.25), rel=1e-12)

def test_comonotone_moment_across_an_atom():
    wm = _pair_weights(Bernoulli(p=0.3, c=2.0), Uniform(a=0.0, b=1.0), 'comonotone')
    # 2 * integral of v over (0.7, 1)
    assert mixed_moment(wm, 0, 0, 1.0, 1.0) == pytest.approx(0.51, rel=1e-9)

def test_comonotone_weights_are_rank_identical(key):
    wm = WeightModel(thetas=[Uniform(a=0.5, b=2.0), LognormalWeight(sigma=0.8)],
                     deltas=[Uniform(a=0.0, b=1.0)], coupling='comonotone')
    theta, delta = wm.sample(key.generator(), 5000)
    assert spearmanr(theta[:, 0], delta[:, 0])[0] == pytest.approx(1.0)
    assert spearmanr(theta[:, 1], delta[:, 0])[0] == pytest.approx(1.0)
    assert np.all(np.diff(theta[np.argsort(delta[:, 0]), 0]) >= 0)

@pytest.mark.parametrize('spec', [Uniform(a=0.0, b=1.0), Uniform(a=1.0, b=3.0), Bernoulli(p=0.4, c=1.0),
                                  LognormalWeight(sigma=0.3)])
def test_quantiles_are_non_decreasing(spec):
    u = np.linspace(0.001, 0.999, 999)
    assert np.all(np.diff(spec.quantile(u)) >= 0)

@pytest.mark.parametrize('coupling', ['independent', 'comonotone'])
@settings(deadline=None)
@given(a1=st.floats(0.1, 4.0), a2=st.floats(0.1, 4.0), step=st.floats(0.05, 2.0))
def test_mixed_moment_monotone_in_exponents(coupling, a1, a2, step):
    below = _pair_weights(Bernoulli(p=0.3, c=1.0), Uniform(a=0.0, b=1.0), coupling)
    assert mixed_moment(below, 0, 0, a1 + step, a2) <= mixed_moment(below, 0, 0, a1, a2) * (1 + 1e-9)
    assert mixed_moment(below, 0, 0, a1, a2 + step) <= mixed_moment(below, 0, 0, a1, a2) * (1 + 1e-9)
    above = _pair_weights(Uniform(a=1.0, b=2.0), Degenerate(c=1.5), coupling)
    assert mixed_moment(above, 0, 0, a1 + step, a2) >= mixed_moment(above, 0, 0, a1, a2) * (1 - 1e-9)
    assert mixed_moment(above, 0, 0, a1, a2 + step) >= mixed_moment(above, 0, 0, a1, a2) * (1 - 1e-9)

def test_degenerate_partner_factorizes():
    wm = _pair_weights(Degenerate(c=3.0), LognormalWeight(sigma=0.4), 'comonotone')
    assert mixed_moment(wm, 0, 0, 2.0, 1.0) == pytest.approx(9 * math.exp(0.08), rel=1e-12)

def test_moment_arguments_are_checked():
    wm = _pair_weights(Uniform(), Uniform())
    with pytest.raises(MomentError):
        mixed_moment(wm, 0, 0, 0.0, 1.0)
    with pytest.raises(MomentError):
        mixed_moment(wm, 0, 0, 1.0, math.inf)
    with pytest.raises(IndexError):
        mixed_moment(wm, 1, 0, 1.0, 1.0)
    assert issubclass(MomentError, ValueError)

def test_weight_validation():
    with pytest.raises(ValidationError, match='degenerate at zero'):
        _pair_weights(Degenerate(c=0.0), Uniform())
    with pytest.raises(ValidationError):
        Uniform(a=1.0, b=1.0)
    with pytest.raises(ValidationError):
        Bernoulli(p=0.0)
    with pytest.raises(ValidationError):
        WeightModel.model_validate({'thetas': [{'dist': 'gamma'}], 'deltas': [{'dist': 'degenerate'}]})

def test_weight_laws():
    u = Uniform(a=0.5, b=1.5)
    assert u.tail(1.0) == pytest.approx(0.5)
    assert u.moment(1.0) == pytest.approx(1.0)
    b = Bernoulli(p=0.25, c=4.0)
    assert b.tail(3.9) == 0.25 and b.tail(4.0) == 0.0
    assert b.moment(0.5) == pytest.approx(0.5)
    assert b.breaks() == (0.75,)
    assert LognormalWeight(mu=1.0).tail(math.e) == pytest.approx(0.5)

def test_sampling_shapes_and_coupling(key):
    wm = WeightModel(thetas=[Uniform(a=0.0, b=2.0)] * 3, deltas=[Uniform(a=0.0, b=1.0)] * 2, coupling='comonotone')
    theta, delta = wm.sample(key.generator(), 1000)
    assert theta.shape == (1000, 3) and delta.shape == (1000, 2)
    assert np.allclose(theta[:, 1], 2 * delta[:, 0])
    assert np.all(theta > 0) and np.all(theta <= 2)

def test_unit_weights():
    wm = WeightModel.unit(2, 3)
    assert wm.is_unit and not wm.has_lognormal
    assert len(wm.thetas) == 2 and len(wm.deltas) == 3

def test_unit_weights_leave_pair_tail_unchanged(fgm_pair, key):
    est = weighted_pair_tail(fgm_pair, WeightModel.unit(1, 1), 0, 0, 10.0, 20.0, 100, key)
    assert est.n == 0
    assert est.mean == fgm_pair.pair_tail(0, 0, 10.0, 20.0)

def test_weighted_tail_of_independent_pareto_pair(key):
    jm = JointModel(x_marginals=[Pareto(alpha=2.0)], y_marginals=[Pareto(alpha=1.5)])
    wm = _pair_weights(Uniform(a=0.0, b=2.0), Uniform(a=0.0, b=1.0))
    est = weighted_pair_tail(jm, wm, 0, 0, 10.0, 10.0, 100, key)
    assert est.mean == pytest.approx(8 / 15 * jm.pair_tail(0, 0, 10.0, 10.0), rel=1e-8)

def test_comonotone_weighted_tail_is_exact(fgm_pair, key):
    wm = _pair_weights(Uniform(a=0.0, b=2.0), Uniform(a=0.0, b=1.0), 'comonotone')
    est = weighted_pair_tail(fgm_pair, wm, 0, 0, 10.0, 10.0, 100, key)
    assert est.n == 0 and est.se == 0.0
    assert 0.0 < est.mean < fgm_pair.pair_tail(0, 0, 5.0, 10.0)

def test_lognormal_weights_fall_back_to_sampling(fgm_pair, key):
    wm = _pair_weights(LognormalWeight(sigma=0.5), Degenerate(c=1.0))
    est = weighted_pair_tail(fgm_pair, wm, 0, 0, 10.0, 10.0, 50_000, key)
    assert est.n == 50_000 and est.se > 0
    exact = math.exp(0.5) * fgm_pair.pair_tail(0, 0, 10.0, 10.0)
    assert est.mean == pytest.approx(exact, rel=0.1)

def test_assumption_a_with_bounded_weights(fgm_pair, key):
    wm = _pair_weights(Uniform(a=0.0, b=2.0), Uniform(a=0.0, b=1.0))
    theta, delta = assumption_a_check(wm, fgm_pair, ProbeFunctions(), [0.9, 0.99, 0.999], 100, key)
    assert theta.kind == DiagnosticKind.ASSUMPTION_A_THETA and delta.kind == DiagnosticKind.ASSUMPTION_A_DELTA
    assert theta.values[0].estimate > 0
    assert theta.last.estimate == 0.0 and delta.last.estimate == 0.0
    assert not theta.last.unresolved and theta.last.expected == 0.0

def test_assumption_a_checks_dimensions(fgm_pair, uniform_weights, key):
    with pytest.raises(ValueError, match='shape'):
        assumption_a_check(uniform_weights, fgm_pair, ProbeFunctions(), [0.9], 100, key)
