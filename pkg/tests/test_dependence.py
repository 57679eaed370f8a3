import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from pydantic import ValidationError
from scipy import stats
from scipy.special import ndtri

from jointail.dependence import (GaussianCopula, JointModel, PairwiseFGM, pair_diagnostic, qai_curve,
                                 sai_constant, slow_variation_probe, triple_diagnostic)
from jointail.marginals import Lognormal, Pareto
from jointail.model import DiagnosticKind

def _pareto_model(copula, n=1, m=1) -> JointModel:
    return JointModel(x_marginals=[Pareto(alpha=2.0)] * n, y_marginals=[Pareto(alpha=1.5)] * m, copula=copula)

def test_independent_pair_tail_is_product():
    jm = JointModel(x_marginals=[Pareto(alpha=2.0)], y_marginals=[Pareto(alpha=2.0)])
    assert jm.pair_tail(0, 0, 10.0, 10.0) == pytest.approx(1e-4, rel=1e-12)

def test_fgm_pair_tail(fgm_pair):
    fx, gy = 0.01, 10 ** -1.5
    expected = fx * gy * (1 + (1 - fx) * (1 - gy))
    assert fgm_pair.pair_tail(0, 0, 10.0, 10.0) == pytest.approx(expected, rel=1e-12)
    assert math.exp(fgm_pair.log_pair_tail(0, 0, 10.0, 10.0)) == pytest.approx(expected, rel=1e-12)

def test_fgm_couples_only_matching_indices(fgm_pareto):
    assert fgm_pareto.coupling(0, 0) == ('fgm', 1.0)
    assert fgm_pareto.coupling(0, 1) == ('product', 0.0)
    assert fgm_pareto.pair_tail(1, 0, 10.0, 10.0) == pytest.approx(0.01 * 10 ** -1.5, rel=1e-12)

@pytest.mark.parametrize('a,b', [(0.0, 0.0), (1.0, 1.5), (2.0, -0.5), (3.0, 3.0)])
def test_gaussian_pair_tail_matches_bivariate_normal(a, b):
    rho = 0.5
    jm = JointModel(x_marginals=[Lognormal()], y_marginals=[Lognormal()],
                    copula=GaussianCopula(corr=[[1.0, rho], [rho, 1.0]]))
    exact = stats.multivariate_normal.cdf([-a, -b], mean=[0, 0], cov=[[1, rho], [rho, 1]], abseps=1e-10, releps=1e-10)
    assert jm.pair_tail(0, 0, math.exp(a), math.exp(b)) == pytest.approx(exact, abs=2e-6)

def test_gaussian_zero_correlation_is_product():
    jm = JointModel(x_marginals=[Pareto(alpha=2.0)], y_marginals=[Pareto(alpha=1.5)],
                    copula=GaussianCopula(corr=[[1.0, 0.0], [0.0, 1.0]]))
    assert jm.coupling(0, 0) == ('product', 0.0)
    assert jm.pair_tail(0, 0, 10.0, 10.0) == pytest.approx(0.01 * 10 ** -1.5, rel=1e-12)

@given(theta=st.floats(-1.0, 1.0), x=st.floats(1.0, 1e4), y=st.floats(1.0, 1e4))
def test_fgm_respects_frechet_bounds(theta, x, y):
    jm = _pareto_model(PairwiseFGM(thetas=[theta]))
    fx, gy = jm.x_marginals[0].tail(x), jm.y_marginals[0].tail(y)
    joint = jm.pair_tail(0, 0, x, y)
    assert max(0.0, fx + gy - 1.0) - 1e-15 <= joint <= min(fx, gy) + 1e-15

def test_vectorized_pair_tail(fgm_pair):
    xs = np.array([2.0, 10.0, 100.0])
    out = fgm_pair.pair_tail(0, 0, xs, xs)
    assert out.shape == (3,)
    assert out[1] == pytest.approx(fgm_pair.pair_tail(0, 0, 10.0, 10.0))

def test_copula_validation():
    with pytest.raises(ValidationError, match='positive semidefinite'):
        GaussianCopula(corr=[[1.0, 0.9, 0.9], [0.9, 1.0, -0.9], [0.9, -0.9, 1.0]])
    with pytest.raises(ValidationError, match='symmetric'):
        GaussianCopula(corr=[[1.0, 0.2], [0.3, 1.0]])
    with pytest.raises(ValidationError):
        PairwiseFGM(thetas=[1.5])
    with pytest.raises(ValidationError, match='thetas'):
        _pareto_model(PairwiseFGM(thetas=[0.5, 0.5]))
    with pytest.raises(ValidationError, match='3x3'):
        _pareto_model(GaussianCopula(corr=[[1.0, 0.1], [0.1, 1.0]]), n=2)

@pytest.mark.parametrize('name', ['gumbel', 'Clayton', 'student'])
def test_asymptotically_dependent_copulas_are_rejected(name):
    data = {'x_marginals': [{'family': 'pareto', 'alpha': 2.0}],
            'y_marginals': [{'family': 'pareto', 'alpha': 2.0}],
            'copula': {'type': name}}
    with pytest.raises(ValidationError, match='asymptotically dependent'):
        JointModel.model_validate(data)

def test_indices_are_checked(fgm_pareto):
    with pytest.raises(IndexError):
        fgm_pareto.pair_tail(2, 0, 1.0, 1.0)
    with pytest.raises(IndexError):
        fgm_pareto.pair(0, -1)

@pytest.mark.parametrize('model', ['fgm_pair', 'gauss_lognormal'])
@pytest.mark.parametrize('q', [0.9, 0.99])
def test_sample_matches_exact_joint_tail(request, key, model, q):
    jm = request.getfixturevalue(model)
    n = 400_000
    x, y = jm.sample(key.generator(), n)
    assert x.shape == (n, 1) and y.shape == (n, 1)
    tx, ty = jm.x_marginals[0].quantile(q), jm.y_marginals[0].quantile(q)
    p = jm.pair_tail(0, 0, tx, ty)
    emp = float(np.mean((x[:, 0] > tx) & (y[:, 0] > ty)))
    assert abs(emp - p) < 4 * math.sqrt(p * (1 - p) / n)

@pytest.mark.parametrize('model,rho', [('fgm_pair', 1 / 3), ('gauss_lognormal', 6 / math.pi * math.asin(0.25))])
def test_sample_spearman_correlation(request, key, model, rho):
    n = 100_000
    x, y = request.getfixturevalue(model).sample(key.generator(), n)
    r = stats.spearmanr(x[:, 0], y[:, 0])[0]
    assert abs(r - rho) < 3 / math.sqrt(n - 1)

def test_pqai_under_independence(indep_pareto, key):
    n = 400_000
    curve = pair_diagnostic(indep_pareto, DiagnosticKind.PQAI, 'x', 0, 1, [0.9, 0.99], n, key)
    # P[X0 > x, X1 > x] / (2 F(x)) = F(x) / 2
    assert abs(curve.values[1].estimate - 0.005) < 4 * math.sqrt(1e-4 / n) / 0.02
    assert curve.is_decreasing()

def test_gqai_and_gtai_under_independence(indep_pareto, key):
    n = 200_000
    gqai = triple_diagnostic(indep_pareto, DiagnosticKind.GQAI_X, (0, 1, 0), [0.9], n, key)
    assert abs(gqai.last.estimate - 0.05) < 4 * math.sqrt(1e-3 / n) / 0.02
    gtai = triple_diagnostic(indep_pareto, DiagnosticKind.GTAI_Y, (0, 1, 1), [0.9], n, key)
    assert abs(gtai.last.estimate - 0.1) < 4 * math.sqrt(0.09 / (0.01 * n))

def test_diagnostics_do_not_depend_on_workers(indep_pareto, key):
    n = 3 * (1 << 16)
    a = pair_diagnostic(indep_pareto, DiagnosticKind.TAI, 'y', 0, 1, [0.9, 0.95], n, key, workers=1)
    b = pair_diagnostic(indep_pareto, DiagnosticKind.TAI, 'y', 0, 1, [0.9, 0.95], n, key, workers=3)
    assert a == b

def test_diagnostic_arguments_are_checked(indep_pareto, key):
    with pytest.raises(ValueError):
        pair_diagnostic(indep_pareto, DiagnosticKind.PQAI, 'x', 1, 1, [0.9], 100, key)
    with pytest.raises(ValueError):
        pair_diagnostic(indep_pareto, DiagnosticKind.GQAI_X, 'x', 0, 1, [0.9], 100, key)
    with pytest.raises(IndexError):
        triple_diagnostic(indep_pareto, DiagnosticKind.GQAI_Y, (0, 1, 5), [0.9], 100, key)

def test_unresolved_cells_are_flagged(indep_pareto, key):
    curve = triple_diagnostic(indep_pareto, DiagnosticKind.GQAI_X, (0, 1, 0), [0.9999], 1000, key)
    assert curve.last.unresolved
    # 3 / (N * 2 * 0.0001^2)
    assert curve.last.upper == pytest.approx(1.5e5, rel=1e-6)
    assert curve.is_non_increasing()

def test_sai_constant_of_fgm(fgm_pair):
    curve = sai_constant(fgm_pair, 0, 0, [0.9, 0.99, 0.999, 0.9999])
    assert curve.last.expected == 2.0
    assert curve.last.estimate == pytest.approx(2.0, rel=1e-3)
    assert curve.estimates == sorted(curve.estimates)

def test_slow_variation_of_fgm(fgm_pair):
    curve = slow_variation_probe(fgm_pair, 0, 0, (2.0, 2.0), [0.9, 0.999, 0.9999])
    assert curve.last.estimate == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(ValueError):
        slow_variation_probe(fgm_pair, 0, 0, (0.0, 2.0), [0.9])

@pytest.mark.parametrize('copula', [PairwiseFGM(thetas=[1.0]), GaussianCopula(corr=[[1.0, 0.5], [0.5, 1.0]])],
                         ids=['fgm', 'gaussian'])
def test_qai_vanishes(copula):
    curve = qai_curve(_pareto_model(copula), 0, 0, [0.9, 0.99, 0.999])
    assert curve.is_decreasing()
    assert curve.last.estimate < 0.05

def test_gaussian_gqai_with_one_correlated_pair(key):
    corr = [[1.0, 0.0, 0.5], [0.0, 1.0, 0.0], [0.5, 0.0, 1.0]]
    jm = JointModel(x_marginals=[Pareto(alpha=2.0)] * 2, y_marginals=[Pareto(alpha=1.5)],
                    copula=GaussianCopula(corr=corr))
    levels = [0.9, 0.99]
    curve = triple_diagnostic(jm, DiagnosticKind.GQAI_X, (0, 1, 0), levels, 1_000_000, key)
    assert curve.is_non_increasing() and curve.is_decreasing()
    assert curve.last.estimate < 0.05
    for q, (x, y), v in zip(levels, curve.thresholds, curve.values):
        # X1 is independent of (X0, Y0)
        p = jm.pair_tail(0, 0, x, y)
        exact = (1 - q) * p / (p + (1 - q) ** 2)
        assert abs(v.estimate - exact) < 4 * v.se

def test_gaussian_pair_tail_at_normal_scores():
    rho = 0.5
    jm = JointModel(x_marginals=[Pareto(alpha=2.0)], y_marginals=[Pareto(alpha=1.5)],
                    copula=GaussianCopula(corr=[[1.0, rho], [rho, 1.0]]))
    x, y = jm.x_marginals[0].quantile(0.9), jm.y_marginals[0].quantile(0.8)
    a, b = ndtri(0.9), ndtri(0.8)
    exact = stats.multivariate_normal.cdf([-a, -b], mean=[0, 0], cov=[[1, rho], [rho, 1]], abseps=1e-10, releps=1e-10)
    assert jm.pair_tail(0, 0, x, y) == pytest.approx(exact, abs=2e-6)

def test_gaussian_orthant_probability():
    jm = JointModel(x_marginals=[Lognormal()], y_marginals=[Lognormal()],
                    copula=GaussianCopula(corr=[[1.0, 0.5], [0.5, 1.0]]))
    # P[Z1 > 0, Z2 > 0] = 1/4 + arcsin(rho) / (2 pi)
    assert jm.pair_tail(0, 0, 1.0, 1.0) == pytest.approx(1 / 3, abs=1e-10)
