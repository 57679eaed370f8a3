"""Two-line discrete-time risk model with stochastic discount factors.

Both lines start from surpluses (x, y) and pay discounted net claims each
period; psi_and is the probability that both lines are ruined by the horizon,
not necessarily at the same period. With inf of the empty set taken as
+infinity, {tau_and <= n} is the joint running-max exceedance.
"""
from typing import Optional
from typing_extensions import Self
from pydantic import BaseModel, ConfigDict, Field, model_validator
import numpy as np

from .classes import RatioProbe
from .dependence import JointModel
from .model import MCEstimate, PredictorKind, RatioReport, Variant
from .montecarlo import StreamKey, run_parallel_many
from .sums import band_result, default_predictor, estimate_lhs, predictor, ratio_cells, simulate_paths
from .weights import WeightModel
from .log import *

class RiskScenario(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    horizon: int = Field(ge=1)
    claims: JointModel
    discounts: Optional[WeightModel] = None
    surplus_grid: list[tuple[float, float]] = Field(min_length=1)
    premium: tuple[float, float] = (0.0, 0.0)
    """Deterministic premium income per period of each line"""
    predictor: Optional[PredictorKind] = None

    @model_validator(mode='after')
    def _check(self) -> Self:
        if not self.claims.n == self.claims.m == self.horizon:
            raise ValueError(f'horizon {self.horizon} must equal both claim dimensions '
                             f'(n={self.claims.n}, m={self.claims.m})')
        if self.discounts is not None:
            self.discounts.check_dims(self.claims)
        for x, y in self.surplus_grid:
            if not (x > 0 and y > 0):
                raise ValueError(f'surplus levels must be positive, got ({x}, {y})')
        return self

    @property
    def net_claims(self) -> JointModel:
        """Claims less premium income, as shifted marginals."""
        c1, c2 = self.premium
        if c1 == 0 and c2 == 0:
            return self.claims
        return self.claims.model_copy(update={
            'x_marginals': [f.shifted(-c1) for f in self.claims.x_marginals],
            'y_marginals': [g.shifted(-c2) for g in self.claims.y_marginals],
        })

    @property
    def predictor_kind(self) -> PredictorKind:
        return self.predictor or default_predictor(self.discounts)

def psi_and_mc(rs: RiskScenario, x: float, y: float, n: int, key: StreamKey, workers: int = 1) -> MCEstimate:
    """Monte Carlo psi_and(x, y, horizon): the joint running-max estimate of the sums module."""
    return estimate_lhs(rs.net_claims, rs.discounts, x, y, Variant.JOINT_RUNNING_MAX, n, key, workers)

def psi_and_by_horizon(rs: RiskScenario, x: float, y: float, n: int, key: StreamKey,
                       workers: int = 1) -> list[MCEstimate]:
    """psi_and(x, y, h) for h = 1..horizon, all from the same paths.

    The last entry is psi_and_mc(rs, x, y, n, key, workers) exactly.
    """
    jm = rs.net_claims

    def task(gen, size):
        paths = simulate_paths(jm, rs.discounts, gen, size)
        return (np.maximum.accumulate(paths.s, axis=1) > x) & (np.maximum.accumulate(paths.t, axis=1) > y)

    return run_parallel_many(task, n, key, workers)

def psi_and_asym(rs: RiskScenario, x: float, y: float, n: int = 0, key: Optional[StreamKey] = None,
                 workers: int = 1) -> tuple[float, float]:
    """Double-sum approximation of psi_and; n and key feed lognormal discounts only."""
    if rs.predictor_kind == PredictorKind.S_WEIGHTED and rs.discounts is not None and rs.discounts.has_lognormal:
        if not n or key is None:
            raise ValueError('lognormal discounts need a sample count and stream key for the predictor')
    return predictor(rs.predictor_kind, rs.net_claims, rs.discounts, x, y, n or 1,
                     key or StreamKey(seed=0), workers)

def ruin_report(rs: RiskScenario,
                n: int,
                key: StreamKey,
                workers: int = 1,
                band: Optional[tuple[float, float]] = None,
                name: str = '') -> RatioReport:
    """psi_and estimates against the predictor over the surplus grid, in grid order."""
    info(f'ruin {name or "scenario"}: horizon {rs.horizon}, {len(rs.surplus_grid)} surplus points, N={n}')
    grid = [(float(c), x, y) for c, (x, y) in enumerate(rs.surplus_grid)]
    cells = ratio_cells(rs.net_claims, rs.discounts, grid, [Variant.JOINT_RUNNING_MAX],
                        rs.predictor_kind, n, key, workers)
    bands = [band_result(Variant.JOINT_RUNNING_MAX, cells, band)]
    return RatioReport(name=name, predictor_kind=rs.predictor_kind, cells=cells, bands=bands, horizon=rs.horizon)

def surplus_grid(claims: JointModel, probe: RatioProbe) -> list[tuple[float, float]]:
    """Surplus pairs at the probe quantiles of the first claim of each line."""
    return [(float(claims.x_marginals[0].quantile(q)), float(claims.y_marginals[0].quantile(q)))
            for q in probe.quantile_levels]

__all__ = ['RiskScenario', 'psi_and_mc', 'psi_and_by_horizon', 'psi_and_asym', 'ruin_report', 'surplus_grid']
