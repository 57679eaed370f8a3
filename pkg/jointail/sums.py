"""Plain and randomly weighted sums, their asymptotic predictors and the ratio experiments."""
from dataclasses import dataclass
from typing import Optional, Sequence
from pydantic import BaseModel, ConfigDict
import math
import numpy as np

from .classes import RatioProbe
from .dependence import JointModel, triple_diagnostic
from .marginals import Pareto
from .model import (BandResult, BandStatus, DiagnosticCurve, DiagnosticKind, DiagnosticValue, MCEstimate,
                    PredictorKind, RatioCell, RatioReport, Variant)
from .montecarlo import StreamKey, conditional, run_parallel_many, total
from .weights import WeightModel, mixed_moment, weighted_pair_tail
from .log import *

MIN_HITS = 10
DENOMINATOR_STREAM = (1 << 32) - 1
"""Path index reserved for the weighted denominators of product diagnostics"""

class RegimeError(ValueError):
    pass

@dataclass(frozen=True)
class PathSample:
    """size joint paths of (weighted) partial sums and their maxima."""
    s: np.ndarray
    """Partial sums S_1..S_n, shape (size, n)"""
    t: np.ndarray
    """Partial sums T_1..T_m, shape (size, m)"""
    comp_x: np.ndarray
    """Terms Theta_i X_i, shape (size, n)"""
    comp_y: np.ndarray

    @property
    def s_final(self) -> np.ndarray:
        return self.s[:, -1]

    @property
    def t_final(self) -> np.ndarray:
        return self.t[:, -1]

    @property
    def s_max(self) -> np.ndarray:
        return self.s.max(axis=1)

    @property
    def t_max(self) -> np.ndarray:
        return self.t.max(axis=1)

    @property
    def x_max(self) -> np.ndarray:
        return self.comp_x.max(axis=1)

    @property
    def y_max(self) -> np.ndarray:
        return self.comp_y.max(axis=1)

    @property
    def x_pos(self) -> np.ndarray:
        return np.maximum(self.comp_x, 0.0).sum(axis=1)

    @property
    def y_pos(self) -> np.ndarray:
        return np.maximum(self.comp_y, 0.0).sum(axis=1)

    def indicators(self, x: float, y: float) -> dict[Variant, np.ndarray]:
        return {
            Variant.JOINT_SUM: (self.s_final > x) & (self.t_final > y),
            Variant.JOINT_RUNNING_MAX: (self.s_max > x) & (self.t_max > y),
            Variant.JOINT_COMPONENT_MAX: (self.x_max > x) & (self.y_max > y),
        }

    def sandwich_holds(self, x: float, y: float) -> bool:
        """joint final sum <= joint running max <= joint positive-part sum, on every path."""
        ind = self.indicators(x, y)
        upper = (self.x_pos > x) & (self.y_pos > y)
        lo, mid = ind[Variant.JOINT_SUM], ind[Variant.JOINT_RUNNING_MAX]
        return bool(np.all(~lo | mid) and np.all(~mid | upper))

def simulate_paths(jm: JointModel, wm: Optional[WeightModel], gen: np.random.Generator, size: int = 1) -> PathSample:
    """The main vector is drawn before the weights, so unit weights reproduce the unweighted paths."""
    x, y = jm.sample(gen, size)
    if wm is not None:
        wm.check_dims(jm)
        theta, delta = wm.sample(gen, size)
        x, y = x * theta, y * delta
    return PathSample(s=np.cumsum(x, axis=1), t=np.cumsum(y, axis=1), comp_x=x, comp_y=y)

def predictor_S(jm: JointModel, x: float, y: float) -> float:
    return sum(jm.pair_tail(i, j, x, y) for i in range(jm.n) for j in range(jm.m))

def predictor_S_weighted(jm: JointModel,
                         wm: WeightModel,
                         x: float,
                         y: float,
                         n: int,
                         key: StreamKey,
                         workers: int = 1) -> MCEstimate:
    wm.check_dims(jm)
    return total([weighted_pair_tail(jm, wm, i, j, x, y, n, key.child(i, j), workers)
                  for i in range(jm.n) for j in range(jm.m)])

def _common_index(name: str, marginals) -> float:
    if not all(isinstance(f, Pareto) for f in marginals):
        raise RegimeError(f'breiman predictor needs Pareto {name} marginals, got {", ".join(map(str, marginals))}')
    alphas = {f.alpha for f in marginals}
    if len(alphas) != 1:
        raise RegimeError(f'breiman predictor needs a common {name} index, got {sorted(alphas)}')
    return alphas.pop()

def predictor_breiman(jm: JointModel, wm: WeightModel, x: float, y: float) -> float:
    """sum_ij E[Theta_i^a1 Delta_j^a2] P[X_i > x, Y_j > y]."""
    wm.check_dims(jm)
    a1 = _common_index('x', jm.x_marginals)
    a2 = _common_index('y', jm.y_marginals)
    return sum(mixed_moment(wm, i, j, a1, a2) * jm.pair_tail(i, j, x, y)
               for i in range(jm.n) for j in range(jm.m))

def estimate_lhs_all(jm: JointModel,
                     wm: Optional[WeightModel],
                     x: float,
                     y: float,
                     n: int,
                     key: StreamKey,
                     workers: int = 1) -> dict[Variant, MCEstimate]:
    """All three joint exceedance probabilities from one set of paths."""
    variants = list(Variant)

    def task(gen, size):
        ind = simulate_paths(jm, wm, gen, size).indicators(x, y)
        return np.column_stack([ind[v] for v in variants])

    out = dict(zip(variants, run_parallel_many(task, n, key, workers)))
    for v, est in out.items():
        if est.hits < MIN_HITS:
            warning(f'{v.value} at ({x:.4g}, {y:.4g}): {est.hits:.0f} hits in {n} samples, increase N')
    return out

def estimate_lhs(jm: JointModel,
                 wm: Optional[WeightModel],
                 x: float,
                 y: float,
                 variant: Variant,
                 n: int,
                 key: StreamKey,
                 workers: int = 1) -> MCEstimate:
    return estimate_lhs_all(jm, wm, x, y, n, key, workers)[variant]

def band_result(variant: Variant, cells: Sequence[RatioCell], band: Optional[tuple[float, float]] = None) -> BandResult:
    """Acceptance of the top-level ratio: explicit band, else |ratio - 1| <= max(0.15, 5 * rel. CI half-width)."""
    top = cells[-1]
    if band is None:
        tol = max(0.15, 5 * top.lhs.rel_half_width)
        lo, hi = 1.0 - tol, 1.0 + tol
    else:
        lo, hi = band
    resolved = [c for c in cells if not c.lhs.unresolved and c.rhs > 0]
    trend = 'toward-1'
    if len(resolved) >= 2 and abs(resolved[-1].ratio - 1) > abs(resolved[0].ratio - 1):
        trend = 'away-from-1'
    if top.lhs.unresolved or top.rhs <= 0 or not math.isfinite(top.lhs.rel_half_width):
        status = BandStatus.INCONCLUSIVE
    else:
        status = BandStatus.PASS if lo <= top.ratio <= hi else BandStatus.FAIL
    return BandResult(variant=variant, ratio=top.ratio, lo=lo, hi=hi, status=status, trend=trend)

def default_predictor(wm: Optional[WeightModel]) -> PredictorKind:
    return PredictorKind.S_PLAIN if wm is None or wm.is_unit else PredictorKind.S_WEIGHTED

def predictor(kind: PredictorKind,
              jm: JointModel,
              wm: Optional[WeightModel],
              x: float,
              y: float,
              n: int,
              key: StreamKey,
              workers: int = 1) -> tuple[float, float]:
    """(value, se) of the chosen double-sum predictor."""
    if kind == PredictorKind.S_PLAIN:
        return predictor_S(jm, x, y), 0.0
    wm = wm or WeightModel.unit(jm.n, jm.m)
    if kind == PredictorKind.S_BREIMAN:
        return predictor_breiman(jm, wm, x, y), 0.0
    est = predictor_S_weighted(jm, wm, x, y, n, key, workers)
    return est.mean, est.se

def ratio_cells(jm: JointModel,
                wm: Optional[WeightModel],
                grid: Sequence[tuple[float, float, float]],
                variants: Sequence[Variant],
                kind: PredictorKind,
                n: int,
                key: StreamKey,
                workers: int = 1) -> list[RatioCell]:
    """LHS on key/0/cell, predictor on key/1/cell: the two sides never share draws."""
    cells = []
    for c, (level, x, y) in enumerate(grid):
        lhs = estimate_lhs_all(jm, wm, x, y, n, key.child(0, c), workers)
        rhs, rhs_se = predictor(kind, jm, wm, x, y, n, key.child(1, c), workers)
        cells += [RatioCell(level=level, x=x, y=y, variant=v, lhs=lhs[v], rhs=rhs, rhs_se=rhs_se) for v in variants]
    return cells

def maxsum_experiment(jm: JointModel,
                      wm: Optional[WeightModel],
                      probe: RatioProbe,
                      n: int,
                      key: StreamKey,
                      workers: int = 1,
                      predictor_kind: Optional[PredictorKind] = None,
                      band: Optional[tuple[float, float]] = None,
                      name: str = '') -> RatioReport:
    """Joint sum, running max and component max exceedance against the double-sum predictor.

    Thresholds at level q are the q-quantiles of X_1 and Y_1.
    """
    if wm is not None:
        wm.check_dims(jm)
    kind = predictor_kind or default_predictor(wm)
    grid = [(q, float(jm.x_marginals[0].quantile(q)), float(jm.y_marginals[0].quantile(q)))
            for q in probe.quantile_levels]
    info(f'maxsum {name or "experiment"}: n={jm.n}, m={jm.m}, predictor={kind.value}, N={n}')
    cells = ratio_cells(jm, wm, grid, list(Variant), kind, n, key, workers)
    bands = [band_result(v, [c for c in cells if c.variant == v], band) for v in Variant]
    return RatioReport(name=name, predictor_kind=kind, cells=cells, bands=bands)

class SumClosureReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    closure: DiagnosticCurve
    """P[V_i + V_k > x] / (tail_i(x) + tail_k(x))"""
    c_ratio: DiagnosticCurve
    """P[V_i + V_k > z x] / P[V_i + V_k > x] at the top level, over z"""
    r2_ratio: Optional[DiagnosticCurve] = None
    """Summed pair ratio against t^-(alpha_1 + alpha_2), when partners are given"""

def sum_closure_check(jm: JointModel,
                      seq: str,
                      i: int,
                      k: int,
                      probe: RatioProbe,
                      n: int,
                      key: StreamKey,
                      workers: int = 1,
                      partners: Optional[tuple[int, int]] = None) -> SumClosureReport:
    if i == k:
        raise ValueError(f'sum closure needs two distinct indices, got {i} twice')
    if partners is not None and min(probe.scale_factors) <= 1:
        raise ValueError(f'r2 ratio needs scale factors above 1, got {list(probe.scale_factors)}')
    ms = jm.marginals(seq)
    other = jm.marginals('y' if seq == 'x' else 'x')
    col = 0 if seq == 'x' else 1

    thresholds, values = [], []
    for cell, q in enumerate(probe.quantile_levels):
        x = float(ms[i].quantile(q))

        def task(gen, size, x=x):
            v = jm.sample(gen, size)[col]
            return v[:, i] + v[:, k] > x

        est, = run_parallel_many(task, n, key.child(0, cell), workers)
        den = float(ms[i].tail(x)) + float(ms[k].tail(x))
        values.append(DiagnosticValue(estimate=est.mean / den, se=est.se / den, unresolved=est.unresolved, expected=1.0))
        thresholds.append((x, x))
    closure = DiagnosticCurve(kind=DiagnosticKind.SUM_CLOSURE, levels=list(probe.quantile_levels),
                              thresholds=thresholds, values=values, label=f'{seq}[{i}]+{seq}[{k}]')

    top = thresholds[-1][0]
    zs = list(probe.z_levels)

    def c_task(gen, size):
        v = jm.sample(gen, size)[col]
        s = v[:, i] + v[:, k]
        return np.column_stack([s > top] + [s > z * top for z in zs])

    base, *scaled = run_parallel_many(c_task, n, key.child(1), workers)
    c_values = []
    for est in scaled:
        c = conditional(base, est)
        if c.unresolved or c.mean <= 0:
            c_values.append(DiagnosticValue(estimate=0.0, unresolved=True, expected=1.0))
        else:
            c_values.append(DiagnosticValue(estimate=1.0 / c.mean, se=c.se / c.mean ** 2, expected=1.0))
    c_curve = DiagnosticCurve(kind=DiagnosticKind.C_RATIO, levels=zs, thresholds=[(z * top, z * top) for z in zs],
                              values=c_values, label=closure.label)

    r2 = None
    if partners is not None:
        j, l = partners
        a1 = [a for a in (ms[i].rv_index(), ms[k].rv_index()) if a is not None]
        a2 = [a for a in (other[j].rv_index(), other[l].rv_index()) if a is not None]
        expected_index = min(a1) + min(a2) if a1 and a2 else None
        x = top
        y = float(other[j].quantile(probe.quantile_levels[-1]))
        ts = list(probe.scale_factors)

        def r_task(gen, size):
            xs, ys = jm.sample(gen, size)
            sv, so = (xs, ys) if seq == 'x' else (ys, xs)
            a = sv[:, i] + sv[:, k]
            b = so[:, j] + so[:, l]
            return np.column_stack([(a > x) & (b > y)] + [(a > t * x) & (b > t * y) for t in ts])

        base, *scaled = run_parallel_many(r_task, n, key.child(2), workers)
        r_values = []
        for t, est in zip(ts, scaled):
            c = conditional(est, base)
            expected = t ** -expected_index if expected_index is not None else None
            r_values.append(DiagnosticValue(estimate=c.mean, se=c.se, unresolved=c.unresolved, expected=expected))
        r2 = DiagnosticCurve(kind=DiagnosticKind.R2_RATIO, levels=ts, thresholds=[(t * x, t * y) for t in ts],
                             values=r_values, label=f'{closure.label};partners({j},{l})')
    return SumClosureReport(closure=closure, c_ratio=c_curve, r2_ratio=r2)

def product_dependence_check(jm: JointModel,
                             wm: WeightModel,
                             kind: DiagnosticKind,
                             indices: tuple[int, int, int],
                             probe: RatioProbe,
                             n: int,
                             key: StreamKey,
                             workers: int = 1) -> DiagnosticCurve:
    """GQAI / GTAI curve on the products Theta_i X_i and Delta_j Y_j.

    Numerators use the same streams as the raw diagnostic; denominators are
    Rao-Blackwellized weighted pair tails on a reserved stream.
    """
    wm.check_dims(jm)

    def sampler(gen, size):
        x, y = jm.sample(gen, size)
        theta, delta = wm.sample(gen, size)
        return x * theta, y * delta

    def joint_tail(a, b, x, y):
        return weighted_pair_tail(jm, wm, a, b, x, y, n, key.child(DENOMINATOR_STREAM, a, b), workers).mean

    return triple_diagnostic(jm, kind, indices, probe.quantile_levels, n, key, workers,
                             sampler=sampler, joint_tail=joint_tail)

__all__ = [
    'RegimeError',
    'PathSample',
    'simulate_paths',
    'predictor_S',
    'predictor_S_weighted',
    'predictor_breiman',
    'predictor',
    'default_predictor',
    'estimate_lhs',
    'estimate_lhs_all',
    'band_result',
    'ratio_cells',
    'maxsum_experiment',
    'SumClosureReport',
    'sum_closure_check',
    'product_dependence_check',
]
