from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator
from typing import Optional, Iterable
from typing_extensions import Self
from enum import Enum
import math

Z95 = 1.96

class MCEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: float
    """Estimated probability or expectation"""
    se: float = Field(ge=0)
    """Standard error of the mean"""
    n: int = Field(ge=0)
    """Samples behind the estimate, 0 for values computed exactly"""
    unresolved: bool = False
    """Every sample was zero (no hits)"""

    @computed_field  # type: ignore[prop-decorator]
    @property
    def ci95(self) -> tuple[float, float]:
        return (self.mean - Z95 * self.se, self.mean + Z95 * self.se)

    @property
    def hits(self) -> float:
        return self.mean * self.n

    @property
    def rel_half_width(self) -> float:
        if self.mean <= 0:
            return math.inf
        return Z95 * self.se / self.mean

    @classmethod
    def exact(cls, value: float) -> Self:
        return cls(mean=float(value), se=0.0, n=0)

    @classmethod
    def from_sums(cls, n: int, total: float, total_sq: float) -> Self:
        if n < 1:
            raise ValueError(f'cannot build an estimate from {n} samples')
        mean = total / n
        var = max(total_sq / n - mean * mean, 0.0)
        unresolved = total == 0.0 and total_sq == 0.0
        return cls(mean=mean, se=math.sqrt(var / n), n=n, unresolved=unresolved)

    def scaled(self, factor: float) -> Self:
        """Estimate of factor * E[...]; factor must be positive."""
        return self.model_copy(update={'mean': self.mean * factor, 'se': self.se * factor})

class DiagnosticKind(str, Enum):
    PQAI = 'pqai'
    TAI = 'tai'
    QAI = 'qai'
    GQAI_X = 'gqai_x'
    GQAI_Y = 'gqai_y'
    GTAI_X = 'gtai_x'
    GTAI_Y = 'gtai_y'
    SAI_CONST = 'sai_const'
    SLOWVAR = 'slowvar'
    ASSUMPTION_A_THETA = 'assumption_a_theta'
    ASSUMPTION_A_DELTA = 'assumption_a_delta'
    SUM_CLOSURE = 'sum_closure'
    C_RATIO = 'c_ratio'
    R2_RATIO = 'r2_ratio'
    S2_RATIO = 's2_ratio'

class DiagnosticValue(BaseModel):
    model_config = ConfigDict(frozen=True)

    estimate: float
    se: float = 0.0
    unresolved: bool = False
    """Not enough hits to estimate this cell; estimate is not meaningful"""
    expected: Optional[float] = None
    """Limit value the estimate is compared against, when one is known"""
    upper: Optional[float] = None
    """95% upper bound of a ratio cell with no hits: 3 / (N * denominator)"""

class DiagnosticCurve(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: DiagnosticKind
    levels: list[float]
    """Probe parameter of each cell (quantile level, z or t)"""
    thresholds: list[tuple[float, float]]
    """Threshold pair (x, y) of each cell"""
    values: list[DiagnosticValue]
    label: str = ''

    @model_validator(mode='after')
    def _check(self) -> Self:
        if not len(self.levels) == len(self.thresholds) == len(self.values):
            raise ValueError('levels, thresholds and values must have the same length')
        for (x0, y0), (x1, y1) in zip(self.thresholds, self.thresholds[1:]):
            if not (x1 > x0 and y1 > y0):
                raise ValueError(f'thresholds must increase componentwise, got {(x0, y0)} then {(x1, y1)}')
        return self

    @property
    def estimates(self) -> list[float]:
        return [v.estimate for v in self.values]

    @property
    def last(self) -> DiagnosticValue:
        return self.values[-1]

    def is_decreasing(self) -> bool:
        """Strictly decreasing over the resolved cells."""
        est = [v.estimate for v in self.values if not v.unresolved]
        return all(b < a for a, b in zip(est, est[1:]))

    def is_non_increasing(self) -> bool:
        """Non-increasing over the resolved cells, with zero-hit cells at their upper bound."""
        est = [v.upper if v.unresolved else v.estimate for v in self.values if not v.unresolved or v.upper is not None]
        return all(b <= a for a, b in zip(est, est[1:]))

class Verdict(str, Enum):
    CONSISTENT = 'consistent-with'
    INCONSISTENT = 'inconsistent-with'
    UNRESOLVED = 'unresolved'
    NOT_APPLICABLE = 'not-applicable'

    @classmethod
    def of(cls, ok: bool) -> 'Verdict':
        return cls.CONSISTENT if ok else cls.INCONSISTENT

    @classmethod
    def all_of(cls, verdicts: Iterable['Verdict']) -> 'Verdict':
        verdicts = list(verdicts)
        if cls.INCONSISTENT in verdicts:
            return cls.INCONSISTENT
        if cls.NOT_APPLICABLE in verdicts:
            return cls.NOT_APPLICABLE
        if cls.UNRESOLVED in verdicts:
            return cls.UNRESOLVED
        return cls.CONSISTENT

class RatioRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float
    y: Optional[float] = None
    parameter: float
    """Probe argument: shift a, scale b/t, or z"""
    value: float
    se: float = 0.0
    expected: Optional[float] = None
    unresolved: bool = False

class ClassCheck(BaseModel):
    model_config = ConfigDict(frozen=True)

    verdict: Verdict
    rows: list[RatioRow] = Field(default_factory=list)
    note: str = ''

class ClassReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    subject: str
    """What was diagnosed, e.g. 'x[0]' or 'pair(0,1)'"""
    checks: dict[str, ClassCheck] = Field(default_factory=dict)
    """Verdict per class name (H, L, S, D, C, R, L2, D2, C2, R2, JI)"""
    j_minus: Optional[float] = None
    """Lower Matuszewska index estimate"""
    j_plus: Optional[float] = None
    """Upper Matuszewska index estimate, None when above cap"""
    cap: float = 50.0
    alpha_hat: Optional[float] = None
    typical: Optional[bool] = None
    """R(2) with alpha_1 == alpha_2"""
    sai_constant: Optional[float] = None
    case: Optional[str] = None
    """Mixture configuration: 'same-class' or 'dominated'"""
    marginals: dict[str, 'ClassReport'] = Field(default_factory=dict)

    @model_validator(mode='after')
    def _check_indices(self) -> Self:
        if self.j_minus is not None and self.j_plus is not None and self.j_minus > self.j_plus + 1e-9:
            raise ValueError(f'J- = {self.j_minus} exceeds J+ = {self.j_plus}')
        return self

    @property
    def j_plus_above_cap(self) -> bool:
        return self.j_minus is not None and self.j_plus is None

    def verdict(self, name: str) -> Verdict:
        return self.checks[name].verdict

class Variant(str, Enum):
    JOINT_SUM = 'joint-sum'
    JOINT_RUNNING_MAX = 'joint-running-max'
    JOINT_COMPONENT_MAX = 'joint-component-max'

class PredictorKind(str, Enum):
    S_PLAIN = 'plain'
    S_WEIGHTED = 'weighted'
    S_BREIMAN = 'breiman'

class BandStatus(str, Enum):
    PASS = 'pass'
    FAIL = 'fail'
    INCONCLUSIVE = 'inconclusive'

class RatioCell(BaseModel):
    model_config = ConfigDict(frozen=True)

    level: float
    x: float
    y: float
    variant: Variant
    lhs: MCEstimate
    rhs: float
    rhs_se: float = 0.0

    @computed_field  # type: ignore[prop-decorator]
    @property
    def ratio(self) -> float:
        return self.lhs.mean / self.rhs if self.rhs > 0 else math.nan

    @computed_field  # type: ignore[prop-decorator]
    @property
    def ci(self) -> tuple[float, float]:
        lo, hi = self.lhs.ci95
        if self.rhs <= 0:
            return (math.nan, math.nan)
        return (lo / self.rhs, hi / self.rhs)

class BandResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    variant: Variant
    ratio: float
    lo: float
    hi: float
    status: BandStatus
    trend: str
    """'toward-1' when |ratio - 1| at the top level is no larger than at the bottom"""

class RatioReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str = ''
    predictor_kind: PredictorKind
    cells: list[RatioCell]
    bands: list[BandResult] = Field(default_factory=list)
    horizon: Optional[int] = None

    def cells_for(self, variant: Variant) -> list[RatioCell]:
        return [c for c in self.cells if c.variant == variant]

    def band(self, variant: Variant) -> BandResult:
        for b in self.bands:
            if b.variant == variant:
                return b
        raise KeyError(f'no band for {variant.value}')

__all__ = [
    'MCEstimate',
    'DiagnosticKind',
    'DiagnosticValue',
    'DiagnosticCurve',
    'Verdict',
    'RatioRow',
    'ClassCheck',
    'ClassReport',
    'Variant',
    'PredictorKind',
    'BandStatus',
    'BandResult',
    'RatioCell',
    'RatioReport',
]
