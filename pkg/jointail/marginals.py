"""Parametric one-dimensional laws with exact tails and inverse-transform sampling.

Every law accepts scalars or numpy arrays; scalar input gives a float back.
"""
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat
from typing import Annotated, ClassVar, Literal, Optional, Union
from typing_extensions import Self
from scipy.special import ndtr, ndtri, log_ndtr
from scipy.optimize import brentq
import numpy as np

ArrayLike = float | np.ndarray

def _out(v: np.ndarray) -> ArrayLike:
    return float(v) if np.ndim(v) == 0 else v

def _check_unit(u: ArrayLike, closed_left: bool = True) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    ok = ((u >= 0) if closed_left else (u > 0)) & (u < 1)
    if not np.all(ok):
        interval = '[0, 1)' if closed_left else '(0, 1)'
        bad = int(np.flatnonzero(~ok)[0])
        idx = tuple(int(i) for i in np.unravel_index(bad, u.shape))
        where = '' if not idx else f' at index {idx[0] if len(idx) == 1 else idx}'
        raise ValueError(f'probability argument must lie in {interval}, got {float(u.flat[bad])}{where}')
    return u

class _Family(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    shift: float = 0.0
    """Additive location shift"""

    heavy_tailed: ClassVar[bool] = True
    """Membership in H, analytic family metadata"""

    def _log_tail(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _tail(self, z: np.ndarray) -> np.ndarray:
        return np.exp(self._log_tail(z))

    def _quantile(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def tail(self, x: ArrayLike) -> ArrayLike:
        """P[X > x]"""
        with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
            return _out(self._tail(np.asarray(x, dtype=np.float64) - self.shift))

    def log_tail(self, x: ArrayLike) -> ArrayLike:
        with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
            return _out(self._log_tail(np.asarray(x, dtype=np.float64) - self.shift))

    def cdf(self, x: ArrayLike) -> ArrayLike:
        return _out(1.0 - np.asarray(self.tail(x)))

    def quantile(self, u: ArrayLike) -> ArrayLike:
        """Generalized inverse of the distribution function on [0, 1)."""
        u = _check_unit(u)
        with np.errstate(divide='ignore'):
            return _out(self._quantile(u) + self.shift)

    def sample(self, u: ArrayLike) -> ArrayLike:
        """Inverse-transform draw from uniform variates in (0, 1)."""
        return self.quantile(_check_unit(u, closed_left=False))

    def rv_index(self) -> Optional[float]:
        return None

    @property
    def left_endpoint(self) -> float:
        return self.shift

    def shifted(self, s: float) -> Self:
        return self.model_copy(update={'shift': self.shift + s})

class Pareto(_Family):
    family: Literal['pareto'] = 'pareto'
    alpha: PositiveFloat
    scale: PositiveFloat = 1.0

    def _tail(self, z):
        return np.power(self.scale / np.maximum(z, self.scale), self.alpha)

    def _log_tail(self, z):
        return self.alpha * (np.log(self.scale) - np.log(np.maximum(z, self.scale)))

    def _quantile(self, u):
        return self.scale * np.power(1.0 - u, -1.0 / self.alpha)

    def rv_index(self) -> Optional[float]:
        return self.alpha

    @property
    def left_endpoint(self) -> float:
        return self.scale + self.shift

    def __str__(self) -> str:
        return f'Pareto(alpha={self.alpha:g}, scale={self.scale:g})'

class Lognormal(_Family):
    family: Literal['lognormal'] = 'lognormal'
    mu: float = 0.0
    sigma: PositiveFloat = 1.0

    def _std(self, z):
        return (np.log(np.maximum(z, 0.0)) - self.mu) / self.sigma

    def _tail(self, z):
        return ndtr(-self._std(z))

    def _log_tail(self, z):
        return log_ndtr(-self._std(z))

    def _quantile(self, u):
        return np.exp(self.mu + self.sigma * ndtri(u))

    def __str__(self) -> str:
        return f'Lognormal(mu={self.mu:g}, sigma={self.sigma:g})'

class HeavyWeibull(_Family):
    family: Literal['weibull'] = 'weibull'
    shape: float = Field(gt=0, lt=1)
    scale: PositiveFloat = 1.0

    def _log_tail(self, z):
        return -np.power(np.maximum(z, 0.0) / self.scale, self.shape)

    def _quantile(self, u):
        return self.scale * np.power(-np.log1p(-u), 1.0 / self.shape)

    def __str__(self) -> str:
        return f'HeavyWeibull(shape={self.shape:g}, scale={self.scale:g})'

class Exponential(_Family):
    family: Literal['exponential'] = 'exponential'
    rate: PositiveFloat = 1.0

    heavy_tailed: ClassVar[bool] = False

    def _log_tail(self, z):
        return -self.rate * np.maximum(z, 0.0)

    def _quantile(self, u):
        return -np.log1p(-u) / self.rate

    def __str__(self) -> str:
        return f'Exponential(rate={self.rate:g})'

Marginal = Annotated[Union[Pareto, Lognormal, HeavyWeibull, Exponential], Field(discriminator='family')]

class MixtureSpec(BaseModel):
    """Finite mixture p * F1 + (1 - p) * F2 of two marginals."""
    model_config = ConfigDict(frozen=True, extra='forbid')

    p: float = Field(gt=0, lt=1)
    """Weight of the left component"""
    left: Marginal
    right: Marginal

    @property
    def heavy_tailed(self) -> bool:
        return self.left.heavy_tailed or self.right.heavy_tailed

    @property
    def left_endpoint(self) -> float:
        return min(self.left.left_endpoint, self.right.left_endpoint)

    def tail(self, x: ArrayLike) -> ArrayLike:
        l = np.asarray(self.left.tail(x))
        r = np.asarray(self.right.tail(x))
        return _out(self.p * l + (1 - self.p) * r)

    def log_tail(self, x: ArrayLike) -> ArrayLike:
        l = np.asarray(self.left.log_tail(x))
        r = np.asarray(self.right.log_tail(x))
        return _out(np.logaddexp(np.log(self.p) + l, np.log1p(-self.p) + r))

    def cdf(self, x: ArrayLike) -> ArrayLike:
        return _out(1.0 - np.asarray(self.tail(x)))

    def _scalar_quantile(self, u: float) -> float:
        a = float(self.left.quantile(u))
        b = float(self.right.quantile(u))
        lo, hi = min(a, b), max(a, b)
        if lo == hi or u == 0.0 or float(self.cdf(lo)) >= u:
            return lo
        if float(self.cdf(hi)) <= u:
            return hi
        return brentq(lambda x: float(self.cdf(x)) - u, lo, hi, xtol=1e-14, rtol=1e-13)

    def quantile(self, u: ArrayLike) -> ArrayLike:
        u = _check_unit(u)
        return _out(np.vectorize(self._scalar_quantile, otypes=[np.float64])(u))

    def sample(self, u: ArrayLike) -> ArrayLike:
        """Component selection by the same uniform: u < p picks the left law."""
        u = _check_unit(u, closed_left=False)
        first = u < self.p
        v = np.where(first, u / self.p, (u - self.p) / (1 - self.p))
        v = np.clip(v, np.finfo(np.float64).tiny, np.nextafter(1.0, 0.0))
        return _out(np.where(first, self.left.quantile(v), self.right.quantile(v)))

    def rv_index(self) -> Optional[float]:
        indices = [a for a in (self.left.rv_index(), self.right.rv_index()) if a is not None]
        return min(indices) if indices else None

    def __str__(self) -> str:
        return f'Mixture({self.p:g}: {self.left}, {self.right})'

TailLaw = Union[Pareto, Lognormal, HeavyWeibull, Exponential, MixtureSpec]
"""Anything with tail, log_tail, quantile and sample"""

__all__ = [
    'Pareto',
    'Lognormal',
    'HeavyWeibull',
    'Exponential',
    'Marginal',
    'MixtureSpec',
    'TailLaw',
]
