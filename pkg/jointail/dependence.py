"""Joint laws of (X_1..X_n, Y_1..Y_m) and asymptotic-independence diagnostics.

Every shipped copula has an exact pairwise joint tail P[X_i > x, Y_j > y], so
asymptotic predictors built from pair tails are exact values.
"""
from dataclasses import dataclass
from functools import cached_property, partial
from typing import Annotated, Callable, Literal, Optional, Sequence, Union
from typing_extensions import Self
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import ndtr, ndtri
from scipy.integrate import quad
import math
import numpy as np

from .marginals import Marginal
from .model import DiagnosticCurve, DiagnosticKind, DiagnosticValue
from .montecarlo import StreamKey, run_parallel, run_parallel_many, conditional
from .log import *

MAX_DIM = 16
ASYMPTOTICALLY_DEPENDENT = {'gumbel', 'clayton', 'joe', 'galambos', 'student', 't'}
_U_MAX = float(np.nextafter(1.0, 0.0))
_U_MIN = float(np.finfo(np.float64).tiny)

class Independence(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    type: Literal['independence'] = 'independence'

class GaussianCopula(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    type: Literal['gaussian'] = 'gaussian'
    corr: list[list[float]]
    """(n+m) x (n+m) correlation matrix, x variables first"""

    @model_validator(mode='after')
    def _check_corr(self) -> Self:
        c = np.asarray(self.corr, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f'correlation matrix must be square, got shape {c.shape}')
        if not np.allclose(c, c.T, atol=1e-12):
            raise ValueError('correlation matrix must be symmetric')
        if not np.allclose(np.diag(c), 1.0, atol=1e-12):
            raise ValueError('correlation matrix must have a unit diagonal')
        off = c[~np.eye(len(c), dtype=bool)]
        if np.any(np.abs(off) >= 1):
            raise ValueError('off-diagonal correlations must lie strictly inside (-1, 1)')
        smallest = float(np.linalg.eigvalsh(c).min())
        if smallest < -1e-10:
            raise ValueError(f'correlation matrix is not positive semidefinite (smallest eigenvalue {smallest:.4g})')
        return self

    @cached_property
    def factor(self) -> np.ndarray:
        """A with A @ A.T == corr, valid for singular matrices too."""
        w, v = np.linalg.eigh(np.asarray(self.corr, dtype=np.float64))
        return v * np.sqrt(np.maximum(w, 0.0))

class PairwiseFGM(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    type: Literal['fgm'] = 'fgm'
    thetas: list[Annotated[float, Field(ge=-1, le=1)]]
    """FGM parameter of each coupled pair (X_i, Y_i)"""

Copula = Annotated[Union[Independence, GaussianCopula, PairwiseFGM], Field(discriminator='type')]

def reject_dependent_copula(data):
    """Before-validator body: refuse asymptotically dependent copula names by name."""
    if isinstance(data, dict):
        cop = data.get('copula')
        name = cop.get('type') if isinstance(cop, dict) else None
        if isinstance(name, str) and name.lower() in ASYMPTOTICALLY_DEPENDENT:
            raise ValueError(f"copula '{name}' is asymptotically dependent and not supported")
    return data

def _fgm_conditional(u: np.ndarray, w: np.ndarray, theta: float) -> np.ndarray:
    """Inverse of the FGM conditional law V | U = u evaluated at w."""
    a = theta * (1.0 - 2.0 * u)
    small = np.abs(a) < 1e-12
    safe = np.where(small, 1.0, a)
    root = ((1 + safe) - np.sqrt((1 + safe) ** 2 - 4 * safe * w)) / (2 * safe)
    return np.where(small, w, root)

def _gauss_pair_survival(a: float, b: float, rho: float) -> float:
    """P[Z1 > a, Z2 > b] for standard normals with correlation rho."""
    if a == math.inf or b == math.inf:
        return 0.0
    if a < b:
        a, b = b, a
    if a == -math.inf:
        return 1.0
    if b == -math.inf:
        return float(ndtr(-a))
    s = math.sqrt(1.0 - rho * rho)
    integrand = lambda z: math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) * ndtr((rho * z - b) / s)
    value, _ = quad(integrand, a, math.inf, epsabs=1e-12, epsrel=1e-10, limit=200)
    return min(max(value, 0.0), float(ndtr(-a)))

class JointModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    x_marginals: list[Marginal] = Field(min_length=1, max_length=MAX_DIM)
    y_marginals: list[Marginal] = Field(min_length=1, max_length=MAX_DIM)
    copula: Copula = Field(default_factory=Independence)

    @model_validator(mode='before')
    @classmethod
    def _reject_dependent(cls, data):
        return reject_dependent_copula(data)

    @model_validator(mode='after')
    def _check_dims(self) -> Self:
        d = self.n + self.m
        if isinstance(self.copula, GaussianCopula) and len(self.copula.corr) != d:
            raise ValueError(f'gaussian correlation matrix must be {d}x{d} for n={self.n}, m={self.m}')
        if isinstance(self.copula, PairwiseFGM) and len(self.copula.thetas) != min(self.n, self.m):
            raise ValueError(f'fgm copula needs {min(self.n, self.m)} thetas, got {len(self.copula.thetas)}')
        return self

    @property
    def n(self) -> int:
        return len(self.x_marginals)

    @property
    def m(self) -> int:
        return len(self.y_marginals)

    def _check_index(self, i: int, j: int) -> None:
        if not 0 <= i < self.n:
            raise IndexError(f'x index {i} out of range for n={self.n}')
        if not 0 <= j < self.m:
            raise IndexError(f'y index {j} out of range for m={self.m}')

    def coupling(self, i: int, j: int) -> tuple[str, float]:
        """('product', 0), ('fgm', theta) or ('gauss', rho) for the pair (X_i, Y_j)."""
        self._check_index(i, j)
        cop = self.copula
        if isinstance(cop, PairwiseFGM) and i == j and cop.thetas[i] != 0:
            return 'fgm', cop.thetas[i]
        if isinstance(cop, GaussianCopula):
            rho = cop.corr[i][self.n + j]
            if rho != 0:
                return 'gauss', rho
        return 'product', 0.0

    def _uniforms(self, gen: np.random.Generator, size: int) -> np.ndarray:
        d = self.n + self.m
        u = gen.random((size, d))
        cop = self.copula
        if isinstance(cop, GaussianCopula):
            z = ndtri(np.maximum(u, _U_MIN)) @ cop.factor.T
            u = ndtr(z)
        elif isinstance(cop, PairwiseFGM):
            for i, theta in enumerate(cop.thetas):
                u[:, self.n + i] = _fgm_conditional(u[:, i], u[:, self.n + i], theta)
        return np.minimum(u, _U_MAX)

    def sample(self, gen: np.random.Generator, size: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """size joint draws: arrays of shape (size, n) and (size, m)."""
        u = self._uniforms(gen, size)
        x = np.column_stack([f.quantile(u[:, i]) for i, f in enumerate(self.x_marginals)])
        y = np.column_stack([g.quantile(u[:, self.n + j]) for j, g in enumerate(self.y_marginals)])
        return x, y

    def pair_tail(self, i: int, j: int, x, y):
        """Exact P[X_i > x, Y_j > y]."""
        kind, c = self.coupling(i, j)
        fx = np.asarray(self.x_marginals[i].tail(x))
        gy = np.asarray(self.y_marginals[j].tail(y))
        if kind == 'fgm':
            v = fx * gy * (1 + c * (1 - fx) * (1 - gy))
        elif kind == 'gauss':
            with np.errstate(divide='ignore'):
                a, b = -ndtri(fx), -ndtri(gy)
            v = np.vectorize(partial(_gauss_pair_survival, rho=c), otypes=[np.float64])(a, b)
        else:
            v = fx * gy
        return float(v) if np.ndim(v) == 0 else v

    def log_pair_tail(self, i: int, j: int, x, y):
        kind, c = self.coupling(i, j)
        lf = np.asarray(self.x_marginals[i].log_tail(x))
        lg = np.asarray(self.y_marginals[j].log_tail(y))
        if kind == 'fgm':
            v = lf + lg + np.log1p(c * (-np.expm1(lf)) * (-np.expm1(lg)))
        elif kind == 'gauss':
            with np.errstate(divide='ignore'):
                v = np.log(np.asarray(self.pair_tail(i, j, x, y)))
        else:
            v = lf + lg
        return float(v) if np.ndim(v) == 0 else v

    def pair(self, i: int, j: int) -> 'PairView':
        self._check_index(i, j)
        return PairView(self, i, j)

    def marginals(self, seq: str) -> list:
        if seq == 'x':
            return self.x_marginals
        if seq == 'y':
            return self.y_marginals
        raise ValueError(f"sequence must be 'x' or 'y', got {seq!r}")

@dataclass(frozen=True)
class PairView:
    """The pair (X_i, Y_j) of a joint model as a bivariate tail."""
    model: JointModel
    i: int
    j: int

    @property
    def fx(self):
        return self.model.x_marginals[self.i]

    @property
    def gy(self):
        return self.model.y_marginals[self.j]

    @property
    def closed_form(self) -> bool:
        return self.model.coupling(self.i, self.j)[0] != 'gauss'

    def joint(self, x, y):
        return self.model.pair_tail(self.i, self.j, x, y)

    def log_joint(self, x, y):
        return self.model.log_pair_tail(self.i, self.j, x, y)

    def __str__(self) -> str:
        return f'pair({self.i},{self.j})'

Sampler = Callable[[np.random.Generator, int], tuple[np.ndarray, np.ndarray]]
JointTail = Callable[[int, int, float, float], float]

def _ratio_value(est, den: float, expected: Optional[float] = None) -> DiagnosticValue:
    if est.unresolved or den <= 0:
        upper = 3.0 / (est.n * den) if est.n and den > 0 else None
        return DiagnosticValue(estimate=0.0, se=0.0, unresolved=True, expected=expected, upper=upper)
    return DiagnosticValue(estimate=est.mean / den, se=est.se / den, expected=expected)

def _warn_unresolved(curve: DiagnosticCurve) -> DiagnosticCurve:
    for q, v in zip(curve.levels, curve.values):
        if v.unresolved:
            warning(f'{curve.kind.value} {curve.label}: cell at level {q} unresolved, increase N')
    return curve

def pair_diagnostic(jm: JointModel,
                    kind: DiagnosticKind,
                    seq: str,
                    i: int,
                    k: int,
                    levels: Sequence[float],
                    n: int,
                    key: StreamKey,
                    workers: int = 1) -> DiagnosticCurve:
    """pQAI ratio P[|V_i| > x, V_k > x] / (tail_i(x) + tail_k(x)) or TAI P[|V_i| > x_i | V_k > x_k]."""
    if kind not in (DiagnosticKind.PQAI, DiagnosticKind.TAI):
        raise ValueError(f'pair_diagnostic handles pqai and tai, not {kind.value}')
    ms = jm.marginals(seq)
    if i == k:
        raise ValueError(f'pair diagnostic needs two distinct indices, got {i} twice')
    for idx in (i, k):
        if not 0 <= idx < len(ms):
            raise IndexError(f'{seq} index {idx} out of range')
    col = 0 if seq == 'x' else 1

    thresholds, values = [], []
    for cell, q in enumerate(levels):
        xi = float(ms[i].quantile(q))
        xk = xi if kind == DiagnosticKind.PQAI else float(ms[k].quantile(q))

        def task(gen, size, xi=xi, xk=xk):
            v = jm.sample(gen, size)[col]
            a = np.abs(v[:, i]) > xi
            b = v[:, k] > xk
            return np.column_stack([a & b, b])

        both, given = run_parallel_many(task, n, key.child(cell), workers)
        if kind == DiagnosticKind.PQAI:
            den = float(ms[i].tail(xi)) + float(ms[k].tail(xi))
            values.append(_ratio_value(both, den))
        else:
            c = conditional(both, given)
            values.append(DiagnosticValue(estimate=c.mean, se=c.se, unresolved=c.unresolved))
        thresholds.append((xi, xk))
    return _warn_unresolved(DiagnosticCurve(kind=kind, levels=list(levels), thresholds=thresholds,
                                            values=values, label=f'{seq}[{i}],{seq}[{k}]'))

def triple_diagnostic(jm: JointModel,
                      kind: DiagnosticKind,
                      indices: tuple[int, int, int],
                      levels: Sequence[float],
                      n: int,
                      key: StreamKey,
                      workers: int = 1,
                      *,
                      sampler: Optional[Sampler] = None,
                      joint_tail: Optional[JointTail] = None) -> DiagnosticCurve:
    """GQAI / GTAI curves for (i, k) in one sequence and j in the other.

    sampler and joint_tail default to the raw variables; passing the product
    sampler and product pair tails gives the same diagnostic on weighted terms.
    """
    sampler = sampler or jm.sample
    joint_tail = joint_tail or jm.pair_tail
    i, k, j = indices
    if i == k:
        raise ValueError(f'triple diagnostic needs two distinct indices in one sequence, got {i} twice')
    on_x = kind in (DiagnosticKind.GQAI_X, DiagnosticKind.GTAI_X)
    if kind not in (DiagnosticKind.GQAI_X, DiagnosticKind.GQAI_Y, DiagnosticKind.GTAI_X, DiagnosticKind.GTAI_Y):
        raise ValueError(f'triple_diagnostic handles gqai/gtai kinds, not {kind.value}')
    same, other = (jm.x_marginals, jm.y_marginals) if on_x else (jm.y_marginals, jm.x_marginals)
    for idx in (i, k):
        if not 0 <= idx < len(same):
            raise IndexError(f'index {idx} out of range for the conditioning sequence')
    if not 0 <= j < len(other):
        raise IndexError(f'index {j} out of range for the other sequence')
    quasi = kind in (DiagnosticKind.GQAI_X, DiagnosticKind.GQAI_Y)

    thresholds, values = [], []
    for cell, q in enumerate(levels):
        si = float(same[i].quantile(q))
        sk = si if quasi else float(same[k].quantile(q))
        oj = float(other[j].quantile(q))

        def task(gen, size, si=si, sk=sk, oj=oj):
            x, y = sampler(gen, size)
            s, o = (x, y) if on_x else (y, x)
            a = np.abs(s[:, i]) > si
            b = (s[:, k] > sk) & (o[:, j] > oj)
            return np.column_stack([a & b, b])

        both, given = run_parallel_many(task, n, key.child(cell), workers)
        if quasi:
            if on_x:
                den = joint_tail(i, j, si, oj) + joint_tail(k, j, si, oj)
            else:
                den = joint_tail(j, i, oj, si) + joint_tail(j, k, oj, si)
            values.append(_ratio_value(both, den))
        else:
            c = conditional(both, given)
            values.append(DiagnosticValue(estimate=c.mean, se=c.se, unresolved=c.unresolved))
        thresholds.append((si, oj))
    return _warn_unresolved(DiagnosticCurve(kind=kind, levels=list(levels), thresholds=thresholds,
                                            values=values, label=f'({i},{k};{j})'))

def _pair_thresholds(jm: JointModel, i: int, j: int, levels: Sequence[float]) -> list[tuple[float, float]]:
    jm._check_index(i, j)
    return [(float(jm.x_marginals[i].quantile(q)), float(jm.y_marginals[j].quantile(q))) for q in levels]

def _sai_limit(jm: JointModel, i: int, j: int) -> Optional[float]:
    kind, c = jm.coupling(i, j)
    if kind == 'fgm':
        return 1.0 + c
    if kind == 'product':
        return 1.0
    return None

def _sai(jm: JointModel, i: int, j: int, x: float, y: float) -> float:
    return jm.pair_tail(i, j, x, y) / (float(jm.x_marginals[i].tail(x)) * float(jm.y_marginals[j].tail(y)))

def sai_constant(jm: JointModel, i: int, j: int, levels: Sequence[float]) -> DiagnosticCurve:
    """P[X_i > x, Y_j > y] / (F_i(x) G_j(y)); exact for every shipped copula."""
    thresholds = _pair_thresholds(jm, i, j, levels)
    limit = _sai_limit(jm, i, j)
    values = [DiagnosticValue(estimate=_sai(jm, i, j, x, y), expected=limit) for x, y in thresholds]
    return DiagnosticCurve(kind=DiagnosticKind.SAI_CONST, levels=list(levels), thresholds=thresholds,
                           values=values, label=f'pair({i},{j})')

def slow_variation_probe(jm: JointModel, i: int, j: int, t: tuple[float, float],
                         levels: Sequence[float]) -> DiagnosticCurve:
    """f(t1 x, t2 y) / f(x, y) with f the SAI ratio; tends to 1 for slowly varying f."""
    t1, t2 = t
    if t1 <= 0 or t2 <= 0:
        raise ValueError(f'scale factors must be positive, got {t}')
    thresholds = _pair_thresholds(jm, i, j, levels)
    expected = 1.0 if jm.coupling(i, j)[0] != 'gauss' else None
    values = [DiagnosticValue(estimate=_sai(jm, i, j, t1 * x, t2 * y) / _sai(jm, i, j, x, y), expected=expected)
              for x, y in thresholds]
    return DiagnosticCurve(kind=DiagnosticKind.SLOWVAR, levels=list(levels), thresholds=thresholds,
                           values=values, label=f'pair({i},{j}) t=({t1:g},{t2:g})')

def qai_curve(jm: JointModel, i: int, j: int, levels: Sequence[float]) -> DiagnosticCurve:
    """P[X_i > x, Y_j > y] / (F_i(x) + G_j(y)), which must vanish for every R(2) pair."""
    thresholds = _pair_thresholds(jm, i, j, levels)
    values = []
    for x, y in thresholds:
        den = float(jm.x_marginals[i].tail(x)) + float(jm.y_marginals[j].tail(y))
        values.append(DiagnosticValue(estimate=jm.pair_tail(i, j, x, y) / den, expected=0.0))
    return DiagnosticCurve(kind=DiagnosticKind.QAI, levels=list(levels), thresholds=thresholds,
                           values=values, label=f'pair({i},{j})')

__all__ = [
    'Independence',
    'GaussianCopula',
    'PairwiseFGM',
    'Copula',
    'JointModel',
    'PairView',
    'pair_diagnostic',
    'triple_diagnostic',
    'sai_constant',
    'slow_variation_probe',
    'qai_curve',
]
