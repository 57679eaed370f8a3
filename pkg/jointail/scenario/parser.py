"""Scenario files: TOML text validated into a ScenarioFile, and its canonical form."""
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from typing import Annotated, Literal, Optional, Union
from typing_extensions import Self
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

from ..classes import RatioProbe
from ..dependence import Copula, Independence, JointModel, reject_dependent_copula
from ..marginals import Marginal
from ..model import DiagnosticKind, PredictorKind, Verdict
from ..report import SCHEMA_VERSION
from ..weights import WeightModel

class ScenarioError(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__('invalid scenario:\n' + '\n'.join(f'  - {v}' for v in violations))

class _Experiment(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    name: Optional[str] = None
    band: Optional[tuple[float, float]] = None
    """Acceptance band on the headline value"""
    levels: Optional[list[float]] = None
    """Quantile levels overriding the probe's"""

    @field_validator('band')
    @classmethod
    def _check_band(cls, v):
        if v is not None and not v[0] <= v[1]:
            raise ValueError(f'band must be [lo, hi] with lo <= hi, got {list(v)}')
        return v

    @field_validator('levels')
    @classmethod
    def _check_levels(cls, v):
        if v is not None:
            RatioProbe(quantile_levels=v)
        return v

class ClassReport1DExperiment(_Experiment):
    kind: Literal['class_report_1d'] = 'class_report_1d'
    seq: Literal['x', 'y'] = 'x'
    index: int = Field(default=0, ge=0)
    expect: Optional[dict[str, Verdict]] = None

class ClassReport2DExperiment(_Experiment):
    kind: Literal['class_report_2d'] = 'class_report_2d'
    i: int = Field(default=0, ge=0)
    j: int = Field(default=0, ge=0)
    expect: Optional[dict[str, Verdict]] = None

class MatuszewskaExperiment(_Experiment):
    kind: Literal['matuszewska'] = 'matuszewska'
    seq: Literal['x', 'y'] = 'x'
    index: int = Field(default=0, ge=0)

class DependenceExperiment(_Experiment):
    kind: Literal['dependence'] = 'dependence'
    diagnostic: DiagnosticKind
    seq: Literal['x', 'y'] = 'x'
    """Sequence of the pQAI / TAI pair"""
    indices: list[Annotated[int, Field(ge=0)]] = Field(min_length=2, max_length=3)
    """(i, k) for pair diagnostics, (i, k, j) for triples, (i, j) for exact pair curves"""
    t: tuple[float, float] = (2.0, 2.0)
    decreasing: bool = False
    """Also fail unless the curve is non-increasing across its levels"""

    @field_validator('diagnostic')
    @classmethod
    def _check_diagnostic(cls, v):
        allowed = {DiagnosticKind.PQAI, DiagnosticKind.TAI, DiagnosticKind.QAI, DiagnosticKind.GQAI_X,
                   DiagnosticKind.GQAI_Y, DiagnosticKind.GTAI_X, DiagnosticKind.GTAI_Y,
                   DiagnosticKind.SAI_CONST, DiagnosticKind.SLOWVAR}
        if v not in allowed:
            raise ValueError(f"'{v.value}' is not a dependence diagnostic")
        return v

    @model_validator(mode='after')
    def _check_arity(self) -> Self:
        triple = self.diagnostic.value.startswith(('gqai', 'gtai'))
        if len(self.indices) != (3 if triple else 2):
            raise ValueError(f'{self.diagnostic.value} needs {3 if triple else 2} indices, got {len(self.indices)}')
        return self

class AssumptionAExperiment(_Experiment):
    kind: Literal['assumption_a'] = 'assumption_a'
    i: int = Field(default=0, ge=0)
    j: int = Field(default=0, ge=0)
    kappa_b: float = Field(default=0.5, gt=0, lt=1)
    kappa_c: float = Field(default=0.5, gt=0, lt=1)

class MaxsumExperiment(_Experiment):
    kind: Literal['maxsum'] = 'maxsum'
    predictor: Optional[PredictorKind] = None

class SumClosureExperiment(_Experiment):
    kind: Literal['sum_closure'] = 'sum_closure'
    seq: Literal['x', 'y'] = 'x'
    i: int = Field(default=0, ge=0)
    k: int = Field(default=1, ge=0)
    partners: Optional[tuple[int, int]] = None

class ProductDependenceExperiment(_Experiment):
    kind: Literal['product_dependence'] = 'product_dependence'
    diagnostic: DiagnosticKind
    indices: tuple[int, int, int]
    decreasing: bool = False

    @field_validator('diagnostic')
    @classmethod
    def _check_diagnostic(cls, v):
        if not v.value.startswith(('gqai', 'gtai')):
            raise ValueError(f"product dependence needs a gqai or gtai diagnostic, got '{v.value}'")
        return v

class RuinExperiment(_Experiment):
    kind: Literal['ruin'] = 'ruin'
    surplus_grid: Optional[list[tuple[float, float]]] = None
    """Defaults to the probe quantiles of the first claims"""
    premium: tuple[float, float] = (0.0, 0.0)
    predictor: Optional[PredictorKind] = None

class S2RatioExperiment(_Experiment):
    kind: Literal['s2_ratio'] = 's2_ratio'
    i: int = Field(default=0, ge=0)
    j: int = Field(default=0, ge=0)

class MixtureComponent(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    marginals_x: list[Marginal]
    marginals_y: list[Marginal]
    copula: Copula = Field(default_factory=Independence)

class MixtureClosureExperiment(_Experiment):
    kind: Literal['mixture_closure'] = 'mixture_closure'
    p: float = Field(default=0.5, gt=0, lt=1)
    i: int = Field(default=0, ge=0)
    j: int = Field(default=0, ge=0)
    second: MixtureComponent
    expect: Optional[dict[str, Verdict]] = None

Experiment = Annotated[Union[
    ClassReport1DExperiment,
    ClassReport2DExperiment,
    MatuszewskaExperiment,
    DependenceExperiment,
    AssumptionAExperiment,
    MaxsumExperiment,
    SumClosureExperiment,
    ProductDependenceExperiment,
    RuinExperiment,
    S2RatioExperiment,
    MixtureClosureExperiment,
], Field(discriminator='kind')]

class ScenarioFile(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')

    schema_version: int = SCHEMA_VERSION
    seed: Optional[int] = Field(default=None, ge=0, lt=1 << 64)
    n_samples: Optional[int] = Field(default=None, ge=1)
    threads: Optional[int] = Field(default=None, ge=1)
    output: Optional[str] = None
    marginals_x: list[Marginal] = Field(min_length=1)
    marginals_y: list[Marginal] = Field(min_length=1)
    copula: Copula = Field(default_factory=Independence)
    weights: Optional[WeightModel] = None
    probe: RatioProbe = Field(default_factory=RatioProbe)
    experiments: list[Experiment] = Field(default_factory=list)

    @model_validator(mode='before')
    @classmethod
    def _reject_dependent(cls, data):
        return reject_dependent_copula(data)

    @field_validator('schema_version')
    @classmethod
    def _check_version(cls, v: int) -> int:
        if v != SCHEMA_VERSION:
            raise ValueError(f'unsupported schema version {v}, expected {SCHEMA_VERSION}')
        return v

    @property
    def joint_model(self) -> JointModel:
        return JointModel(x_marginals=self.marginals_x, y_marginals=self.marginals_y, copula=self.copula)

    def experiment_name(self, index: int) -> str:
        exp = self.experiments[index]
        return exp.name or f'{index:02d}_{exp.kind}'

def _where(loc: tuple) -> str:
    return 'top level' if not loc else '.'.join(str(p) for p in loc)

def _violations(e: ValidationError) -> list[str]:
    out = []
    for err in e.errors():
        loc = tuple(err['loc'])
        if err['type'] == 'extra_forbidden':
            out.append(f"unknown field '{loc[-1]}' at {_where(loc[:-1])}")
        else:
            msg = err['msg'].removeprefix('Value error, ')
            out.append(f'{_where(loc)}: {msg}')
    return out

def _reference_violations(sf: ScenarioFile) -> list[str]:
    jm = sf.joint_model
    n, m = jm.n, jm.m
    out = []

    def need(cond: bool, idx: int, msg: str):
        if not cond:
            out.append(f'experiments.{idx}: {msg}')

    if sf.weights is not None and (len(sf.weights.thetas) != n or len(sf.weights.deltas) != m):
        out.append(f'weights: shape ({len(sf.weights.thetas)}, {len(sf.weights.deltas)}) does not match n={n}, m={m}')
    for idx, exp in enumerate(sf.experiments):
        size = {'x': n, 'y': m}
        match exp:
            case ClassReport1DExperiment() | MatuszewskaExperiment():
                need(exp.index < size[exp.seq], idx, f'{exp.seq} index {exp.index} out of range')
            case ClassReport2DExperiment() | S2RatioExperiment() | AssumptionAExperiment() | MixtureClosureExperiment():
                need(exp.i < n and exp.j < m, idx, f'pair ({exp.i}, {exp.j}) out of range for n={n}, m={m}')
                if isinstance(exp, AssumptionAExperiment):
                    need(sf.weights is not None, idx, 'assumption_a needs a weights section')
                if isinstance(exp, MixtureClosureExperiment):
                    sec = exp.second
                    need(exp.i < len(sec.marginals_x) and exp.j < len(sec.marginals_y), idx,
                         f'pair ({exp.i}, {exp.j}) out of range for the second component')
            case DependenceExperiment():
                if exp.diagnostic in (DiagnosticKind.PQAI, DiagnosticKind.TAI):
                    need(all(i < size[exp.seq] for i in exp.indices), idx, f'{exp.seq} indices {exp.indices} out of range')
                elif len(exp.indices) == 3:
                    on_x = exp.diagnostic.value.endswith('_x')
                    same, other = (n, m) if on_x else (m, n)
                    i, k, j = exp.indices
                    need(i < same and k < same and j < other, idx, f'indices {exp.indices} out of range')
                else:
                    i, j = exp.indices
                    need(i < n and j < m, idx, f'pair ({i}, {j}) out of range for n={n}, m={m}')
            case ProductDependenceExperiment():
                on_x = exp.diagnostic.value.endswith('_x')
                same, other = (n, m) if on_x else (m, n)
                i, k, j = exp.indices
                need(i < same and k < same and j < other, idx, f'indices {list(exp.indices)} out of range')
                need(sf.weights is not None, idx, 'product_dependence needs a weights section')
            case SumClosureExperiment():
                need(max(exp.i, exp.k) < size[exp.seq], idx, f'{exp.seq} indices ({exp.i}, {exp.k}) out of range')
                if exp.partners is not None:
                    other = 'y' if exp.seq == 'x' else 'x'
                    need(max(exp.partners) < size[other], idx, f'partners {list(exp.partners)} out of range')
            case RuinExperiment():
                need(n == m, idx, f'ruin needs equal claim dimensions, got n={n}, m={m}')
    names = [sf.experiment_name(i) for i in range(len(sf.experiments))]
    for name in sorted({x for x in names if names.count(x) > 1}):
        out.append(f"experiment name '{name}' is used more than once")
    return out

def parse_scenario(text: str) -> ScenarioFile:
    """Validate scenario text, reporting every violation found."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ScenarioError([f'syntax: {e}']) from e
    try:
        sf = ScenarioFile.model_validate(data)
    except ValidationError as e:
        raise ScenarioError(_violations(e)) from e
    try:
        violations = _reference_violations(sf)
    except ValidationError as e:
        violations = [f'joint model: {v}' for v in _violations(e)]
    if violations:
        raise ScenarioError(violations)
    return sf

def dump_scenario(sf: ScenarioFile) -> str:
    """Canonical TOML text; parse(dump(sf)) == sf."""
    return tomli_w.dumps(sf.model_dump(mode='json', exclude_none=True))

__all__ = [
    'ScenarioError',
    'Experiment',
    'ScenarioFile',
    'MixtureComponent',
    'parse_scenario',
    'dump_scenario',
]
