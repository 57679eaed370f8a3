"""Finite-probe diagnostics for the heavy-tailed distribution classes.

Verdicts are 'consistent-with' statements at finite thresholds. Exact-tail
checks are evaluated on the probe quantiles and, for closed-form tails, on far
points x_top * 10^d in log space, where the limit behavior is visible.
"""
from dataclasses import dataclass
from typing import Callable, Optional, Sequence
from typing_extensions import Self
from pydantic import BaseModel, ConfigDict, Field, field_validator
import math
import numpy as np

from .dependence import JointModel, PairView
from .marginals import MixtureSpec, TailLaw
from .model import (ClassCheck, ClassReport, DiagnosticCurve, DiagnosticKind, DiagnosticValue,
                    RatioRow, Verdict)
from .montecarlo import StreamKey, run_parallel
from .weights import ProbeFunctions
from .log import *

_MIN_REL = 1e-10
"""Smallest relative shift still resolved in double precision"""
_U_MAX = float(np.nextafter(1.0, 0.0))
_U_MIN = float(np.finfo(np.float64).tiny)

def _increasing(name: str, values: list[float]) -> list[float]:
    if not values:
        raise ValueError(f'{name} must not be empty')
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f'{name} must be strictly increasing, got {values}')
    return values

class RatioProbe(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    quantile_levels: list[float] = [0.9, 0.99, 0.999, 0.9999]
    scale_factors: list[float] = [2.0, 5.0, 10.0]
    """t > 1 for the R check and v > 1 for the Matuszewska indices"""
    shift_values: list[float] = [0.5, 1.0, 2.0]
    """a for the L check"""
    shrink_factors: list[float] = [0.25, 0.5]
    """b in (0, 1) for the D check"""
    z_levels: list[float] = [0.5, 0.8, 0.9, 0.95, 0.99]
    far_decades: list[float] = [4.0, 32.0]
    tolerance: float = Field(default=0.02, gt=0, lt=1)
    cap: float = Field(default=50.0, gt=0)

    @field_validator('quantile_levels', 'z_levels', 'shrink_factors')
    @classmethod
    def _check_unit(cls, v: list[float], info) -> list[float]:
        _increasing(info.field_name, v)
        if not all(0 < x < 1 for x in v):
            raise ValueError(f'{info.field_name} must lie in (0, 1), got {v}')
        return v

    @field_validator('scale_factors')
    @classmethod
    def _check_scale(cls, v: list[float]) -> list[float]:
        _increasing('scale_factors', v)
        if not all(x > 1 for x in v):
            raise ValueError(f'scale_factors must exceed 1, got {v}')
        return v

    @field_validator('shift_values', 'far_decades')
    @classmethod
    def _check_positive(cls, v: list[float], info) -> list[float]:
        _increasing(info.field_name, v)
        if not all(x > 0 for x in v):
            raise ValueError(f'{info.field_name} must be positive, got {v}')
        return v

    @property
    def b(self) -> float:
        return self.shrink_factors[0]

LogTail = Callable[..., float]

def _points_1d(m: TailLaw, probe: RatioProbe, far: bool = True) -> list[float]:
    xs = [float(m.quantile(q)) for q in probe.quantile_levels]
    if far:
        base = max(abs(xs[-1]), 1.0)
        xs += [base * 10.0 ** d for d in probe.far_decades]
    return xs

def _ratio(logf: LogTail, p: tuple, q: tuple) -> float:
    d = logf(*q) - logf(*p)
    if math.isnan(d):
        return math.nan
    return math.exp(min(d, 700.0))

def _within(value: float, target: float, eps: float) -> bool:
    return math.isfinite(value) and abs(value - target) <= eps * abs(target)

def _shift_check(logf: LogTail, pts: list[tuple], shifts: Sequence[float], eps: float) -> ClassCheck:
    rows, verdicts = [], []
    for a in shifts:
        usable = [p for p in pts if all(a >= _MIN_REL * abs(c) for c in p)]
        for p in usable:
            value = shift_ratio(logf, p, (a,) * len(p))
            rows.append(RatioRow(x=p[0], y=p[1] if len(p) > 1 else None, parameter=a, value=value,
                                 expected=1.0, unresolved=not math.isfinite(value)))
        if not usable or not math.isfinite(rows[-1].value):
            verdicts.append(Verdict.UNRESOLVED)
        else:
            verdicts.append(Verdict.of(_within(rows[-1].value, 1.0, eps)))
    return ClassCheck(verdict=Verdict.all_of(verdicts), rows=rows)

def shift_ratio(logf: LogTail, p: tuple, a: tuple) -> float:
    """tail(p - a) / tail(p); the zero shift is exactly 1."""
    if all(s == 0 for s in a):
        return 1.0
    return _ratio(logf, p, tuple(c - s for c, s in zip(p, a)))

def _scale(p: tuple, f: float) -> tuple:
    return tuple(c * f for c in p)

def _dominated_check(logf: LogTail, pts: list[tuple], n_probe: int, b: float, eps: float) -> ClassCheck:
    rows = []
    for p in pts:
        value = _ratio(logf, p, _scale(p, b))
        rows.append(RatioRow(x=p[0], y=p[1] if len(p) > 1 else None, parameter=b, value=value,
                             unresolved=not math.isfinite(value)))
    lo, hi = (n_probe - 1, len(pts) - 1) if len(pts) > n_probe else (len(pts) - 2, len(pts) - 1)
    if lo < 0 or rows[lo].unresolved or rows[hi].unresolved:
        return ClassCheck(verdict=Verdict.UNRESOLVED, rows=rows, note='ratio not finite')
    slope = (math.log(rows[hi].value) - math.log(rows[lo].value)) / (math.log(pts[hi][0]) - math.log(pts[lo][0]))
    return ClassCheck(verdict=Verdict.of(slope <= eps), rows=rows, note=f'log-ratio slope {slope:.4g}')

def _consistent_check(logf: LogTail, pts: list[tuple], zs: Sequence[float], eps: float,
                      dominated: ClassCheck) -> ClassCheck:
    p = pts[-1]
    rows = []
    for z in zs:
        value = _ratio(logf, p, _scale(p, z))
        rows.append(RatioRow(x=p[0], y=p[1] if len(p) > 1 else None, parameter=z, value=value,
                             unresolved=not math.isfinite(value)))
    if dominated.verdict != Verdict.CONSISTENT:
        return ClassCheck(verdict=dominated.verdict, rows=rows, note='D check does not hold')
    if len(rows) < 2:
        return ClassCheck(verdict=Verdict.of(_within(rows[-1].value, 1.0, eps)), rows=rows)
    (z0, r0), (z1, r1) = [(r.parameter, r.value) for r in rows[-2:]]
    if not (math.isfinite(r0) and math.isfinite(r1)):
        return ClassCheck(verdict=Verdict.UNRESOLVED, rows=rows)
    at_one = r1 + (r1 - r0) / (z1 - z0) * (1.0 - z1)
    return ClassCheck(verdict=Verdict.of(abs(at_one - 1.0) <= eps), rows=rows, note=f'extrapolated ratio {at_one:.4g}')

def _index_estimates(m: TailLaw, pts: list[float], factors: Sequence[float]) -> list[tuple[float, float, float]]:
    """(x, v, -ln(tail(vx)/tail(x)) / ln v) at the two largest points."""
    out = []
    for x in pts[-2:]:
        for v in factors:
            if v == 1.0:
                continue
            d = float(m.log_tail(v * x)) - float(m.log_tail(x))
            out.append((x, v, -d / math.log(v)))
    return out

def matuszewska(m: TailLaw, probe: RatioProbe) -> tuple[float, Optional[float]]:
    """(J-, J+) from exact tails; J+ is None when it exceeds the probe cap."""
    est = [e for _, _, e in _index_estimates(m, _points_1d(m, probe), probe.scale_factors) if not math.isnan(e)]
    if not est:
        raise ValueError(f'no finite tail ratio for {m}')
    j_minus, j_plus = max(min(est), 0.0), max(est)
    return j_minus, (j_plus if j_plus <= probe.cap else None)

def _regular_check(m: TailLaw, pts: list[float], probe: RatioProbe) -> tuple[ClassCheck, Optional[float]]:
    est = _index_estimates(m, pts, probe.scale_factors)
    rows = [RatioRow(x=x, parameter=v, value=a, unresolved=not math.isfinite(a)) for x, v, a in est]
    alphas = [a for _, _, a in est]
    if not alphas or not all(math.isfinite(a) for a in alphas):
        return ClassCheck(verdict=Verdict.UNRESOLVED, rows=rows), None
    alpha_hat = float(np.mean(alphas[-len(probe.scale_factors):]))
    spread = (max(alphas) - min(alphas)) / max(abs(alpha_hat), 1e-300)
    ok = alpha_hat > 0 and spread <= probe.tolerance and alpha_hat < probe.cap
    return ClassCheck(verdict=Verdict.of(ok), rows=rows, note=f'alpha-hat {alpha_hat:.4g}'), alpha_hat

def _subexp_check(m: TailLaw, probe: RatioProbe, n: Optional[int], key: Optional[StreamKey],
                  workers: int) -> ClassCheck:
    if not n or key is None:
        return ClassCheck(verdict=Verdict.UNRESOLVED, note='not sampled')
    rows = []
    for cell, q in enumerate(probe.quantile_levels):
        x = float(m.quantile(q))

        def task(gen, size, x=x):
            u = np.clip(gen.random((size, 2)), _U_MIN, _U_MAX)
            v = np.maximum(np.asarray(m.sample(u)), 0.0)
            return v.sum(axis=1) > x

        est = run_parallel(task, n, key.child(cell), workers)
        tail = float(m.tail(x))
        rows.append(RatioRow(x=x, parameter=q, value=est.mean / tail, se=est.se / tail,
                             expected=2.0, unresolved=est.unresolved))
    top = rows[-1]
    if top.unresolved:
        return ClassCheck(verdict=Verdict.UNRESOLVED, rows=rows, note='no hits at the top level')
    band = max(0.15, 5 * 1.96 * top.se / top.value)
    return ClassCheck(verdict=Verdict.of(abs(top.value / 2.0 - 1.0) <= band), rows=rows)

def class_report_1d(m: TailLaw,
                    probe: RatioProbe,
                    n: Optional[int] = None,
                    key: Optional[StreamKey] = None,
                    workers: int = 1) -> ClassReport:
    """Verdicts for H, L, S, D, C, R plus Matuszewska indices of one marginal.

    The S check is Monte Carlo and runs only when n and key are given.
    """
    pts = _points_1d(m, probe)
    tup = [(x,) for x in pts]
    logf = lambda x: float(m.log_tail(x))
    eps = probe.tolerance

    dominated = _dominated_check(logf, tup, len(probe.quantile_levels), probe.b, eps)
    regular, alpha_hat = _regular_check(m, pts, probe)
    j_minus, j_plus = matuszewska(m, probe)
    checks = {
        'H': ClassCheck(verdict=Verdict.of(m.heavy_tailed), note='family metadata'),
        'L': _shift_check(logf, tup, probe.shift_values, eps),
        'S': _subexp_check(m, probe, n, key, workers),
        'D': dominated,
        'C': _consistent_check(logf, tup, probe.z_levels, eps, dominated),
        'R': regular,
    }
    debug(f'{m}: ' + ', '.join(f'{k}={v.verdict.value}' for k, v in checks.items()))
    return ClassReport(subject=str(m), checks=checks, j_minus=j_minus, j_plus=j_plus, cap=probe.cap,
                       alpha_hat=alpha_hat if checks['R'].verdict == Verdict.CONSISTENT else None)

@dataclass(frozen=True)
class MixturePair:
    """Bivariate tail mixture p * F(x, y) + (1 - p) * G(x, y) of two pairs."""
    p: float
    first: PairView
    second: PairView

    @property
    def fx(self) -> MixtureSpec:
        return MixtureSpec(p=self.p, left=self.first.fx, right=self.second.fx)

    @property
    def gy(self) -> MixtureSpec:
        return MixtureSpec(p=self.p, left=self.first.gy, right=self.second.gy)

    @property
    def closed_form(self) -> bool:
        return self.first.closed_form and self.second.closed_form

    def joint(self, x, y):
        return self.p * self.first.joint(x, y) + (1 - self.p) * self.second.joint(x, y)

    def log_joint(self, x, y):
        return float(np.logaddexp(math.log(self.p) + self.first.log_joint(x, y),
                                  math.log1p(-self.p) + self.second.log_joint(x, y)))

    def __str__(self) -> str:
        return f'mixture({self.p:g}: {self.first}, {self.second})'

def _points_2d(pair, probe: RatioProbe) -> list[tuple[float, float]]:
    xs = _points_1d(pair.fx, probe, far=pair.closed_form)
    ys = _points_1d(pair.gy, probe, far=pair.closed_form)
    return list(zip(xs, ys))

def _insensitivity_check(logf: LogTail, pts: list[tuple], pf: ProbeFunctions, eps: float) -> ClassCheck:
    """sup over |a1| <= a(x), |a2| <= a(y) of |tail(x - a1, y - a2) / tail(x, y) - 1|, at the corners."""
    rows = []
    for x, y in pts:
        ax, ay = pf.a(abs(x)), pf.a(abs(y))
        if ax < _MIN_REL * abs(x) or ay < _MIN_REL * abs(y):
            continue
        dev = max(abs(shift_ratio(logf, (x, y), (s * ax, s * ay)) - 1.0) for s in (1.0, -1.0))
        rows.append(RatioRow(x=x, y=y, parameter=pf.kappa_a, value=dev, expected=0.0,
                             unresolved=not math.isfinite(dev)))
    if not rows or rows[-1].unresolved:
        return ClassCheck(verdict=Verdict.UNRESOLVED, rows=rows)
    return ClassCheck(verdict=Verdict.of(rows[-1].value <= eps), rows=rows)

def _bivariate_regular_check(pair, logf: LogTail, pts: list[tuple], probe: RatioProbe,
                             sai: float) -> ClassCheck:
    a1, a2 = pair.fx.rv_index(), pair.gy.rv_index()
    if a1 is None or a2 is None:
        return ClassCheck(verdict=Verdict.INCONSISTENT, note='a marginal is not regularly varying')
    rows = []
    for t in probe.scale_factors:
        expected = t ** -(a1 + a2)
        for p in pts:
            value = _ratio(logf, p, _scale(p, t))
            rows.append(RatioRow(x=p[0], y=p[1], parameter=t, value=value, expected=expected,
                                 unresolved=not math.isfinite(value)))
    if sai < probe.tolerance:
        return ClassCheck(verdict=Verdict.UNRESOLVED, rows=rows,
                          note=f'SAI constant {sai:.3g} vanishes, membership not implied')
    last = [r for r in rows if r.x == pts[-1][0]]
    ok = all(_within(r.value, r.expected, probe.tolerance) for r in last)
    return ClassCheck(verdict=Verdict.of(ok), rows=rows)

def _report_2d(pair, probe: RatioProbe, n: Optional[int], key: Optional[StreamKey], workers: int,
               pf: ProbeFunctions) -> ClassReport:
    pts = _points_2d(pair, probe)
    logf = lambda x, y: float(pair.log_joint(x, y))
    eps = probe.tolerance
    marg = {
        'x': class_report_1d(pair.fx, probe, n, key.child(0) if key else None, workers),
        'y': class_report_1d(pair.gy, probe, n, key.child(1) if key else None, workers),
    }
    x, y = pts[-1]
    sai = math.exp(logf(x, y) - float(pair.fx.log_tail(x)) - float(pair.gy.log_tail(y)))

    both = lambda name, check: check.model_copy(update={
        'verdict': Verdict.all_of([check.verdict, marg['x'].verdict(name), marg['y'].verdict(name)])})
    dominated = both('D', _dominated_check(logf, pts, len(probe.quantile_levels), probe.b, eps))
    checks = {
        'L2': both('L', _shift_check(logf, pts, probe.shift_values, eps)),
        'D2': dominated,
        'C2': both('C', _consistent_check(logf, pts, probe.z_levels, eps, dominated)),
        'R2': _bivariate_regular_check(pair, logf, pts, probe, sai),
        'JI': _insensitivity_check(logf, pts, pf, eps),
    }
    a1, a2 = pair.fx.rv_index(), pair.gy.rv_index()
    typical = None if a1 is None or a2 is None else a1 == a2
    debug(f'{pair}: ' + ', '.join(f'{k}={v.verdict.value}' for k, v in checks.items()))
    return ClassReport(subject=str(pair), checks=checks, cap=probe.cap, typical=typical,
                       sai_constant=sai, marginals=marg)

def class_report_2d(jm: JointModel,
                    i: int,
                    j: int,
                    probe: RatioProbe,
                    n: Optional[int] = None,
                    key: Optional[StreamKey] = None,
                    workers: int = 1,
                    pf: ProbeFunctions = ProbeFunctions()) -> ClassReport:
    """Verdicts for L2, D2, C2, R2 and joint insensitivity of the pair (X_i, Y_j)."""
    return _report_2d(jm.pair(i, j), probe, n, key, workers, pf)

def mixture_closure_check(jm1: JointModel,
                          jm2: JointModel,
                          i: int,
                          j: int,
                          p: float,
                          probe: RatioProbe,
                          n: Optional[int] = None,
                          key: Optional[StreamKey] = None,
                          workers: int = 1) -> ClassReport:
    """Class verdicts of the tail mixture p * F(x, y) + (1 - p) * G(x, y).

    The case is 'dominated' when the second joint tail is negligible against the
    first at the last evaluation point, 'same-class' otherwise.
    """
    if not 0 < p < 1:
        raise ValueError(f'mixture weight must lie in (0, 1), got {p}')
    pair = MixturePair(p, jm1.pair(i, j), jm2.pair(i, j))
    report = _report_2d(pair, probe, n, key, workers, ProbeFunctions())
    x, y = _points_2d(pair, probe)[-1]
    share = math.exp(pair.second.log_joint(x, y) - pair.first.log_joint(x, y))
    case = 'dominated' if share < probe.tolerance else 'same-class'
    return report.model_copy(update={'case': case})

def s2_ratio_check(jm: JointModel,
                   i: int,
                   j: int,
                   probe: RatioProbe,
                   n: int,
                   key: StreamKey,
                   workers: int = 1) -> DiagnosticCurve:
    """P[X1 + X2 > x, Y1 + Y2 > y] / P[X > x, Y > y] over two iid copies of the pair."""
    jm._check_index(i, j)
    thresholds, values = [], []
    for cell, q in enumerate(probe.quantile_levels):
        x = float(jm.x_marginals[i].quantile(q))
        y = float(jm.y_marginals[j].quantile(q))

        def task(gen, size, x=x, y=y):
            x1, y1 = jm.sample(gen, size)
            x2, y2 = jm.sample(gen, size)
            return (x1[:, i] + x2[:, i] > x) & (y1[:, j] + y2[:, j] > y)

        est = run_parallel(task, n, key.child(cell), workers)
        den = jm.pair_tail(i, j, x, y)
        if est.unresolved:
            warning(f's2 ratio at level {q}: no hits, increase N')
            values.append(DiagnosticValue(estimate=0.0, unresolved=True, expected=4.0))
        else:
            values.append(DiagnosticValue(estimate=est.mean / den, se=est.se / den, expected=4.0))
        thresholds.append((x, y))
    return DiagnosticCurve(kind=DiagnosticKind.S2_RATIO, levels=list(probe.quantile_levels),
                           thresholds=thresholds, values=values, label=f'pair({i},{j})')

__all__ = [
    'RatioProbe',
    'MixturePair',
    'shift_ratio',
    'matuszewska',
    'class_report_1d',
    'class_report_2d',
    'mixture_closure_check',
    's2_ratio_check',
]
