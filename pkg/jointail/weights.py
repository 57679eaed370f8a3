"""Random weights (Theta_1..Theta_n, Delta_1..Delta_m), independent of the main vector."""
from typing import Annotated, Callable, Literal, Optional, Union
from typing_extensions import Self
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, model_validator
from scipy.special import ndtr, ndtri
from scipy.integrate import quad
import math
import numpy as np

from .dependence import JointModel
from .model import DiagnosticCurve, DiagnosticKind, DiagnosticValue, MCEstimate
from .montecarlo import StreamKey, run_parallel
from .log import *

_U_MAX = float(np.nextafter(1.0, 0.0))
_U_MIN = float(np.finfo(np.float64).tiny)
_QUAD = dict(epsabs=0.0, epsrel=1e-10, limit=200)

class MomentError(ValueError):
    pass

class _Weight(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    def breaks(self) -> tuple[float, ...]:
        """Levels where the quantile function jumps."""
        return ()

    def quantile(self, u):
        raise NotImplementedError

    def tail(self, t: float) -> float:
        """P[w > t]"""
        raise NotImplementedError

    def moment(self, a: float) -> float:
        """E[w^a] for a > 0"""
        raise NotImplementedError

    def positive_mass(self) -> float:
        return 1.0

    def expect(self, f: Callable[[float], float]) -> Optional[float]:
        """Exact E[f(w)], None when only Monte Carlo can provide it."""
        return None

class Degenerate(_Weight):
    dist: Literal['degenerate'] = 'degenerate'
    c: float = Field(default=1.0, ge=0)

    def quantile(self, u):
        return np.full(np.shape(u), self.c) if np.ndim(u) else self.c

    def tail(self, t):
        return 1.0 if self.c > t else 0.0

    def moment(self, a):
        return self.c ** a

    def positive_mass(self):
        return 1.0 if self.c > 0 else 0.0

    def expect(self, f):
        return float(f(self.c))

    def __str__(self) -> str:
        return f'Degenerate({self.c:g})'

class Uniform(_Weight):
    """Uniform on (a, b]."""
    dist: Literal['uniform'] = 'uniform'
    a: float = Field(default=0.0, ge=0)
    b: PositiveFloat = 1.0

    @model_validator(mode='after')
    def _check_bounds(self) -> Self:
        if not self.a < self.b:
            raise ValueError(f'uniform weight needs a < b, got ({self.a}, {self.b}]')
        return self

    def quantile(self, u):
        v = self.a + (self.b - self.a) * np.asarray(u, dtype=np.float64)
        return float(v) if np.ndim(v) == 0 else v

    def tail(self, t):
        return float(np.clip((self.b - t) / (self.b - self.a), 0.0, 1.0))

    def moment(self, a):
        return (self.b ** (a + 1) - self.a ** (a + 1)) / ((a + 1) * (self.b - self.a))

    def expect(self, f):
        value, _ = quad(lambda t: float(f(t)), self.a, self.b, **_QUAD)
        return value / (self.b - self.a)

    def __str__(self) -> str:
        return f'Uniform({self.a:g}, {self.b:g}]'

class LognormalWeight(_Weight):
    dist: Literal['lognormal'] = 'lognormal'
    mu: float = 0.0
    sigma: PositiveFloat = 1.0

    def quantile(self, u):
        with np.errstate(divide='ignore'):
            v = np.exp(self.mu + self.sigma * ndtri(np.asarray(u, dtype=np.float64)))
        return float(v) if np.ndim(v) == 0 else v

    def tail(self, t):
        if t <= 0:
            return 1.0
        return float(ndtr(-(math.log(t) - self.mu) / self.sigma))

    def moment(self, a):
        return math.exp(a * self.mu + 0.5 * (a * self.sigma) ** 2)

    def __str__(self) -> str:
        return f'Lognormal(mu={self.mu:g}, sigma={self.sigma:g})'

class Bernoulli(_Weight):
    """c with probability p, 0 otherwise."""
    dist: Literal['bernoulli'] = 'bernoulli'
    p: float = Field(gt=0, le=1)
    c: PositiveFloat = 1.0

    def breaks(self) -> tuple[float, ...]:
        return (1.0 - self.p,) if self.p < 1 else ()

    def quantile(self, u):
        v = np.where(np.asarray(u) >= 1.0 - self.p, self.c, 0.0)
        return float(v) if np.ndim(v) == 0 else v

    def tail(self, t):
        if t < 0:
            return 1.0
        return self.p if self.c > t else 0.0

    def moment(self, a):
        return self.p * self.c ** a

    def positive_mass(self):
        return self.p

    def expect(self, f):
        return self.p * float(f(self.c)) + (1 - self.p) * float(f(0.0))

    def __str__(self) -> str:
        return f'Bernoulli(p={self.p:g}, c={self.c:g})'

WeightSpec = Annotated[Union[Degenerate, Uniform, LognormalWeight, Bernoulli], Field(discriminator='dist')]

class WeightModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    thetas: list[WeightSpec] = Field(min_length=1)
    deltas: list[WeightSpec] = Field(min_length=1)
    coupling: Literal['independent', 'comonotone'] = 'independent'
    """comonotone: every weight is a monotone transform of one uniform draw"""

    @model_validator(mode='after')
    def _check_mass(self) -> Self:
        for name, specs in (('theta', self.thetas), ('delta', self.deltas)):
            for i, w in enumerate(specs):
                if w.positive_mass() <= 0:
                    raise ValueError(f'{name}[{i}] = {w} is degenerate at zero')
        return self

    @classmethod
    def unit(cls, n: int, m: int) -> Self:
        return cls(thetas=[Degenerate(c=1.0)] * n, deltas=[Degenerate(c=1.0)] * m)

    @property
    def is_unit(self) -> bool:
        return all(isinstance(w, Degenerate) and w.c == 1.0 for w in self.thetas + self.deltas)

    @property
    def has_lognormal(self) -> bool:
        return any(isinstance(w, LognormalWeight) for w in self.thetas + self.deltas)

    def check_dims(self, jm: JointModel) -> None:
        if len(self.thetas) != jm.n or len(self.deltas) != jm.m:
            raise ValueError(f'weights have shape ({len(self.thetas)}, {len(self.deltas)}) '
                             f'but the joint model has n={jm.n}, m={jm.m}')

    def sample(self, gen: np.random.Generator, size: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """size draws: arrays of shape (size, n) and (size, m)."""
        n, m = len(self.thetas), len(self.deltas)
        if self.coupling == 'comonotone':
            u = np.repeat(gen.random((size, 1)), n + m, axis=1)
        else:
            u = gen.random((size, n + m))
        u = np.clip(u, _U_MIN, _U_MAX)
        theta = np.column_stack([np.broadcast_to(w.quantile(u[:, i]), (size,)) for i, w in enumerate(self.thetas)])
        delta = np.column_stack([np.broadcast_to(w.quantile(u[:, n + j]), (size,)) for j, w in enumerate(self.deltas)])
        return theta.astype(np.float64), delta.astype(np.float64)

def _segments(*specs) -> list[tuple[float, float]]:
    cuts = sorted({0.0, 1.0, *(b for s in specs for b in s.breaks())})
    return list(zip(cuts, cuts[1:]))

def _comonotone_expect(theta, delta, g: Callable[[float, float], float]) -> float:
    total = 0.0
    for lo, hi in _segments(theta, delta):
        value, _ = quad(lambda u: float(g(theta.quantile(u), delta.quantile(u))), lo, hi, **_QUAD)
        total += value
    return total

def mixed_moment(wm: WeightModel, i: int, j: int, a1: float, a2: float) -> float:
    """E[Theta_i^a1 Delta_j^a2]."""
    for name, idx, specs, a in (('theta', i, wm.thetas, a1), ('delta', j, wm.deltas, a2)):
        if not 0 <= idx < len(specs):
            raise IndexError(f'{name} index {idx} out of range')
        if not a > 0 or not math.isfinite(a):
            raise MomentError(f'{name}[{idx}] = {specs[idx]}: moment exponent {a} must be positive and finite')
    th, de = wm.thetas[i], wm.deltas[j]
    if wm.coupling == 'independent' or isinstance(th, Degenerate) or isinstance(de, Degenerate):
        return th.moment(a1) * de.moment(a2)
    if isinstance(th, LognormalWeight) and isinstance(de, LognormalWeight):
        return math.exp(a1 * th.mu + a2 * de.mu + 0.5 * (a1 * th.sigma + a2 * de.sigma) ** 2)
    return _comonotone_expect(th, de, lambda t, d: t ** a1 * d ** a2)

class ProbeFunctions(BaseModel):
    """Power functions b(x) = x^kappa_b, c(y) = y^kappa_c and a(x) = x^kappa_a."""
    model_config = ConfigDict(frozen=True, extra='forbid')

    kappa_b: float = Field(default=0.5, gt=0, lt=1)
    kappa_c: float = Field(default=0.5, gt=0, lt=1)
    kappa_a: float = Field(default=0.5, gt=0, lt=1)

    def b(self, x: float) -> float:
        return x ** self.kappa_b

    def c(self, y: float) -> float:
        return y ** self.kappa_c

    def a(self, x: float) -> float:
        return x ** self.kappa_a

def weighted_pair_tail(jm: JointModel,
                       wm: WeightModel,
                       i: int,
                       j: int,
                       x: float,
                       y: float,
                       n: int,
                       key: StreamKey,
                       workers: int = 1) -> MCEstimate:
    """P[Theta_i X_i > x, Delta_j Y_j > y] as E[pair_tail(x / Theta_i, y / Delta_j)].

    Exact (quadrature or atoms) unless a lognormal weight is involved, in which
    case the outer expectation is a Monte Carlo average with its standard error.
    A zero weight contributes nothing.
    """
    th, de = wm.thetas[i], wm.deltas[j]

    def h(t, d):
        t = np.asarray(t, dtype=np.float64)
        d = np.asarray(d, dtype=np.float64)
        with np.errstate(divide='ignore'):
            xs = np.where(t > 0, x / np.where(t > 0, t, 1.0), math.inf)
            ys = np.where(d > 0, y / np.where(d > 0, d, 1.0), math.inf)
        return jm.pair_tail(i, j, xs, ys)

    if isinstance(th, LognormalWeight) or isinstance(de, LognormalWeight):
        def task(gen, size):
            theta, delta = wm.sample(gen, size)
            return h(theta[:, i], delta[:, j])
        return run_parallel(task, n, key, workers)

    if wm.coupling == 'comonotone' and not (isinstance(th, Degenerate) or isinstance(de, Degenerate)):
        return MCEstimate.exact(_comonotone_expect(th, de, lambda t, d: float(h(t, d))))
    return MCEstimate.exact(th.expect(lambda t: de.expect(lambda d: float(h(t, d)))))

def assumption_a_check(wm: WeightModel,
                       jm: JointModel,
                       pf: ProbeFunctions,
                       levels: list[float],
                       n: int,
                       key: StreamKey,
                       workers: int = 1,
                       i: int = 0,
                       j: int = 0) -> tuple[DiagnosticCurve, DiagnosticCurve]:
    """P[Theta_i > b(x)] / P[Theta_i X_i > x, Delta_j Y_j > y] and the Delta_j analogue with c(y).

    Evaluated along the diagonal grid x = q-quantile of X_i, y = q-quantile of Y_j.
    """
    wm.check_dims(jm)
    thresholds, theta_vals, delta_vals = [], [], []
    for cell, q in enumerate(levels):
        x = float(jm.x_marginals[i].quantile(q))
        y = float(jm.y_marginals[j].quantile(q))
        den = weighted_pair_tail(jm, wm, i, j, x, y, n, key.child(cell), workers)
        for num, out in ((wm.thetas[i].tail(pf.b(x)), theta_vals), (wm.deltas[j].tail(pf.c(y)), delta_vals)):
            if den.unresolved or den.mean <= 0:
                warning(f'assumption A at level {q}: joint weighted tail unresolved')
                out.append(DiagnosticValue(estimate=0.0, unresolved=True, expected=0.0))
            else:
                out.append(DiagnosticValue(estimate=num / den.mean, se=num * den.se / den.mean ** 2, expected=0.0))
        thresholds.append((x, y))
    label = f'pair({i},{j})'
    return (DiagnosticCurve(kind=DiagnosticKind.ASSUMPTION_A_THETA, levels=list(levels),
                            thresholds=thresholds, values=theta_vals, label=label),
            DiagnosticCurve(kind=DiagnosticKind.ASSUMPTION_A_DELTA, levels=list(levels),
                            thresholds=thresholds, values=delta_vals, label=label))

__all__ = [
    'MomentError',
    'Degenerate',
    'Uniform',
    'LognormalWeight',
    'Bernoulli',
    'WeightSpec',
    'WeightModel',
    'ProbeFunctions',
    'mixed_moment',
    'weighted_pair_tail',
    'assumption_a_check',
]
