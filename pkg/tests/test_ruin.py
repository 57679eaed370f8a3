import math

import pytest
from hypothesis import given, settings, strategies as st
from pydantic import ValidationError

from jointail.classes import RatioProbe
from jointail.dependence import JointModel, PairwiseFGM
from jointail.marginals import Pareto
from jointail.model import PredictorKind, Variant
from jointail.montecarlo import StreamKey
from jointail.ruin import RiskScenario, psi_and_asym, psi_and_by_horizon, psi_and_mc, ruin_report, surplus_grid
from jointail.sums import estimate_lhs
from jointail.weights import LognormalWeight, Uniform, WeightModel

def test_horizon_must_match_claims(fgm_pareto):
    with pytest.raises(ValidationError, match='horizon'):
        RiskScenario(horizon=3, claims=fgm_pareto, surplus_grid=[(10.0, 10.0)])
    with pytest.raises(ValidationError, match='positive'):
        RiskScenario(horizon=2, claims=fgm_pareto, surplus_grid=[(10.0, 0.0)])
    with pytest.raises(ValidationError, match='shape'):
        RiskScenario(horizon=2, claims=fgm_pareto, surplus_grid=[(10.0, 10.0)], discounts=WeightModel.unit(1, 1))

def test_premium_shifts_claims(fgm_pareto):
    rs = RiskScenario(horizon=2, claims=fgm_pareto, surplus_grid=[(10.0, 10.0)], premium=(0.5, 0.25))
    assert [f.shift for f in rs.net_claims.x_marginals] == [-0.5, -0.5]
    assert [g.shift for g in rs.net_claims.y_marginals] == [-0.25, -0.25]
    assert RiskScenario(horizon=2, claims=fgm_pareto, surplus_grid=[(1.0, 1.0)]).net_claims is fgm_pareto

def test_single_period_ruin_is_the_pair_tail(fgm_pair, key):
    x, y = fgm_pair.x_marginals[0].quantile(0.9), fgm_pair.y_marginals[0].quantile(0.9)
    rs = RiskScenario(horizon=1, claims=fgm_pair, surplus_grid=[(x, y)])
    p = fgm_pair.pair_tail(0, 0, x, y)
    value, se = psi_and_asym(rs, x, y)
    assert value == p and se == 0.0
    n = 200_000
    est = psi_and_mc(rs, x, y, n, key)
    assert abs(est.mean - p) < 4 * math.sqrt(p * (1 - p) / n)

def test_discounted_ruin_report(fgm_pareto, key):
    discounts = WeightModel(thetas=[Uniform(a=0.0, b=1.0)] * 2, deltas=[Uniform(a=0.0, b=1.0)] * 2)
    grid = surplus_grid(fgm_pareto, RatioProbe(quantile_levels=[0.9, 0.99]))
    rs = RiskScenario(horizon=2, claims=fgm_pareto, discounts=discounts, surplus_grid=grid, premium=(0.1, 0.1))
    assert rs.predictor_kind == PredictorKind.S_WEIGHTED
    report = ruin_report(rs, 50_000, key, name='h2')
    assert report.horizon == 2 and report.name == 'h2'
    assert [c.variant for c in report.cells] == [Variant.JOINT_RUNNING_MAX] * 2
    assert [(c.x, c.y) for c in report.cells] == grid
    assert len(report.bands) == 1
    assert all(c.rhs > 0 for c in report.cells)

def test_lognormal_discounts_need_samples(fgm_pair):
    discounts = WeightModel(thetas=[LognormalWeight(sigma=0.3)], deltas=[LognormalWeight(sigma=0.3)])
    rs = RiskScenario(horizon=1, claims=fgm_pair, discounts=discounts, surplus_grid=[(10.0, 10.0)])
    with pytest.raises(ValueError, match='stream key'):
        psi_and_asym(rs, 10.0, 10.0)

def _horizon4(premium=(0.0, 0.0)) -> RiskScenario:
    claims = JointModel(x_marginals=[Pareto(alpha=2.0)] * 4, y_marginals=[Pareto(alpha=1.5)] * 4,
                        copula=PairwiseFGM(thetas=[1.0] * 4))
    discounts = WeightModel(thetas=[Uniform(a=0.0, b=1.0)] * 4, deltas=[Uniform(a=0.0, b=1.0)] * 4)
    return RiskScenario(horizon=4, claims=claims, discounts=discounts, surplus_grid=[(5.0, 5.0)], premium=premium)

@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 32), x=st.floats(0.5, 30.0), y=st.floats(0.5, 30.0),
       premium=st.sampled_from([(0.0, 0.0), (1.5, 1.5)]))
def test_ruin_grows_with_the_horizon(seed, x, y, premium):
    rs = _horizon4(premium)
    key = StreamKey(seed=seed)
    by_horizon = psi_and_by_horizon(rs, x, y, 5000, key)
    assert len(by_horizon) == 4
    means = [e.mean for e in by_horizon]
    assert all(b >= a for a, b in zip(means, means[1:]))
    assert by_horizon[-1] == psi_and_mc(rs, x, y, 5000, key)

def test_ruin_shrinks_with_the_surplus(fgm_pair, key):
    xs = [2.0, 4.0, 8.0, 16.0]
    rs = RiskScenario(horizon=1, claims=fgm_pair, surplus_grid=[(x, 2.0) for x in xs])
    same_draws = [psi_and_mc(rs, x, 2.0, 50_000, key).mean for x in xs]
    assert all(b <= a for a, b in zip(same_draws, same_draws[1:]))
    cells = ruin_report(rs, 200_000, key).cells
    for a, b in zip(cells, cells[1:]):
        assert b.lhs.mean <= a.lhs.mean + 3 * (a.lhs.se + b.lhs.se)

def test_ruin_without_premium_is_the_running_max_estimate(key):
    rs = _horizon4()
    lhs = estimate_lhs(rs.claims, rs.discounts, 6.0, 9.0, Variant.JOINT_RUNNING_MAX, 20_000, key)
    assert psi_and_mc(rs, 6.0, 9.0, 20_000, key) == lhs
    shifted = _horizon4((0.5, 0.5))
    lhs = estimate_lhs(shifted.net_claims, shifted.discounts, 6.0, 9.0, Variant.JOINT_RUNNING_MAX, 20_000, key)
    assert psi_and_mc(shifted, 6.0, 9.0, 20_000, key) == lhs
