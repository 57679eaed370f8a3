import pytest

from jointail.dependence import GaussianCopula, Independence, JointModel, PairwiseFGM
from jointail.marginals import Exponential, HeavyWeibull, Lognormal, Pareto
from jointail.montecarlo import StreamKey
from jointail.weights import Uniform, WeightModel

FAMILIES = [
    Pareto(alpha=2.0),
    Pareto(alpha=0.5, scale=3.0),
    Lognormal(mu=0.0, sigma=1.0),
    HeavyWeibull(shape=0.5, scale=2.0),
    Exponential(rate=1.0),
]

@pytest.fixture
def key() -> StreamKey:
    return StreamKey(seed=20240611)

@pytest.fixture
def fgm_pair() -> JointModel:
    return JointModel(x_marginals=[Pareto(alpha=2.0)], y_marginals=[Pareto(alpha=1.5)],
                      copula=PairwiseFGM(thetas=[1.0]))

@pytest.fixture
def fgm_pareto() -> JointModel:
    """n = m = 2, Pareto(2) claims on x, Pareto(1.5) on y, coupled pairs theta = 1."""
    return JointModel(x_marginals=[Pareto(alpha=2.0)] * 2, y_marginals=[Pareto(alpha=1.5)] * 2,
                      copula=PairwiseFGM(thetas=[1.0, 1.0]))

@pytest.fixture
def indep_pareto() -> JointModel:
    return JointModel(x_marginals=[Pareto(alpha=2.0)] * 2, y_marginals=[Pareto(alpha=2.0)] * 2,
                      copula=Independence())

@pytest.fixture
def gauss_lognormal() -> JointModel:
    corr = [[1.0, 0.5], [0.5, 1.0]]
    return JointModel(x_marginals=[Lognormal()], y_marginals=[Lognormal()], copula=GaussianCopula(corr=corr))

@pytest.fixture
def uniform_weights() -> WeightModel:
    """Theta ~ U(0, 2], Delta ~ U(0, 1], independent."""
    return WeightModel(thetas=[Uniform(a=0.0, b=2.0)] * 2, deltas=[Uniform(a=0.0, b=1.0)] * 2)

MINIMAL_SCENARIO = '''
seed = 7
n_samples = 2000

[[marginals_x]]
family = "pareto"
alpha = 2.0

[[marginals_y]]
family = "pareto"
alpha = 1.5

[copula]
type = "fgm"
thetas = [1.0]
'''
