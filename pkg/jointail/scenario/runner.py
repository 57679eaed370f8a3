"""Experiment orchestration: one registered runner per experiment kind."""
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping, Optional
from pydantic import BaseModel, ConfigDict, Field
import math
import os

from ..classes import RatioProbe, class_report_1d, class_report_2d, matuszewska, mixture_closure_check, s2_ratio_check
from ..dependence import JointModel, pair_diagnostic, qai_curve, sai_constant, slow_variation_probe, triple_diagnostic
from ..model import BandStatus, ClassReport, DiagnosticCurve, DiagnosticKind, DiagnosticValue, RatioReport, Variant
from ..montecarlo import StreamKey
from ..report import (Provenance, class_report_csv, curves_csv, load_json, matuszewska_csv, ratio_report_csv,
                      scenario_hash, to_json)
from ..ruin import RiskScenario, ruin_report, surplus_grid
from ..sums import maxsum_experiment, product_dependence_check, sum_closure_check
from ..weights import ProbeFunctions, WeightModel, assumption_a_check
from .parser import ScenarioFile, dump_scenario
from ..log import *

DEFAULT_SEED = 0
DEFAULT_SAMPLES = 100_000
DEFAULT_THREADS = 1
DEFAULT_OUT = 'out'
SUMMARY = 'summary.json'

class Settings(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int = Field(ge=0, lt=1 << 64)
    n_samples: int = Field(ge=1)
    threads: int = Field(ge=1)
    output: str

def resolve_settings(sf: ScenarioFile,
                     *,
                     seed: Optional[int] = None,
                     samples: Optional[int] = None,
                     threads: Optional[int] = None,
                     out: Optional[str] = None,
                     env: Mapping[str, str] = os.environ) -> Settings:
    """Command line over scenario file over environment over built-in defaults."""
    def pick(cli, file, var, default, conv=int):
        for v in (cli, file):
            if v is not None:
                return v
        if env.get(var):
            return conv(env[var])
        return default

    return Settings(seed=pick(seed, sf.seed, 'JOINTAIL_SEED', DEFAULT_SEED),
                    n_samples=pick(samples, sf.n_samples, 'JOINTAIL_SAMPLES', DEFAULT_SAMPLES),
                    threads=pick(threads, sf.threads, 'JOINTAIL_THREADS', DEFAULT_THREADS),
                    output=pick(out, sf.output, 'JOINTAIL_OUT', DEFAULT_OUT, str))

class Outcome(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    kind: str
    status: Optional[BandStatus] = None
    """None for informational experiments without a band or expected verdicts"""
    headline: Optional[float] = None
    detail: str = ''

@dataclass(frozen=True)
class Context:
    sf: ScenarioFile
    settings: Settings
    jm: JointModel
    prov: Provenance

    @property
    def wm(self) -> Optional[WeightModel]:
        return self.sf.weights

    @property
    def n(self) -> int:
        return self.settings.n_samples

    @property
    def workers(self) -> int:
        return self.settings.threads

    def probe(self, exp) -> RatioProbe:
        if exp.levels is None:
            return self.sf.probe
        return self.sf.probe.model_copy(update={'quantile_levels': list(exp.levels)})

@dataclass(frozen=True)
class Result:
    outcome: Outcome
    csv: str
    result: Any

Runner = Callable[[Context, Any, str, StreamKey], Result]

_runners: dict[str, Runner] = {}
def runner(kind: str) -> Callable[[Runner], Runner]:
    def register(f: Runner) -> Runner:
        if kind in _runners:
            raise ValueError(f'runner for {kind} already registered')
        _runners[kind] = f
        return f
    return register

def _band_status(band: Optional[tuple[float, float]], values: list[Optional[float]],
                 unresolved: bool = False) -> Optional[BandStatus]:
    if band is None:
        return None
    if unresolved or any(v is None or math.isnan(v) for v in values):
        return BandStatus.INCONCLUSIVE
    lo, hi = band
    return BandStatus.PASS if all(lo <= v <= hi for v in values) else BandStatus.FAIL

def _verdict_status(report: ClassReport, expect: Optional[dict]) -> tuple[Optional[BandStatus], str]:
    if not expect:
        return None, ''
    missing = [k for k in expect if k not in report.checks]
    if missing:
        raise ValueError(f'unknown class names in expect: {", ".join(missing)}')
    wrong = [f'{k}={report.verdict(k).value}' for k, v in expect.items() if report.verdict(k) != v]
    return (BandStatus.FAIL if wrong else BandStatus.PASS), ', '.join(wrong)

def _bounded_in_band(band: tuple[float, float], v: DiagnosticValue) -> bool:
    """A resolved cell inside the band, or a zero-hit cell whose upper bound is."""
    lo, hi = band
    if not v.unresolved:
        return lo <= v.estimate <= hi
    return v.upper is not None and lo <= 0 and v.upper <= hi

def _curve_status(band: Optional[tuple[float, float]], curves: list[DiagnosticCurve],
                  decreasing: bool = False) -> Optional[BandStatus]:
    last = [c.last for c in curves]
    status = _band_status(band, [v.estimate for v in last], any(v.unresolved for v in last))
    if status == BandStatus.INCONCLUSIVE and all(_bounded_in_band(band, v) for v in last):
        status = BandStatus.PASS
    if decreasing and status != BandStatus.FAIL:
        if not all(c.is_non_increasing() for c in curves):
            return BandStatus.FAIL
        status = status or BandStatus.PASS
    return status

def _curve_result(ctx: Context, exp, name: str, curves: list[DiagnosticCurve], result: Any,
                  decreasing: bool = False) -> Result:
    outcome = Outcome(name=name, kind=exp.kind, headline=curves[0].last.estimate,
                      status=_curve_status(exp.band, curves, decreasing))
    return Result(outcome=outcome, csv=curves_csv(curves, ctx.prov), result=result)

def _ratio_result(ctx: Context, exp, name: str, report: RatioReport, variants: list[Variant]) -> Result:
    statuses = [report.band(v).status for v in variants]
    if BandStatus.FAIL in statuses:
        status = BandStatus.FAIL
    elif BandStatus.INCONCLUSIVE in statuses:
        status = BandStatus.INCONCLUSIVE
    else:
        status = BandStatus.PASS
    detail = ', '.join(f'{v.value}={report.band(v).ratio:.4g} ({report.band(v).status.value})' for v in variants)
    outcome = Outcome(name=name, kind=exp.kind, status=status, headline=report.band(variants[0]).ratio, detail=detail)
    return Result(outcome=outcome, csv=ratio_report_csv(report, ctx.prov), result=report)

def _class_result(ctx: Context, exp, name: str, report: ClassReport) -> Result:
    status, detail = _verdict_status(report, exp.expect)
    outcome = Outcome(name=name, kind=exp.kind, status=status, headline=report.alpha_hat, detail=detail)
    return Result(outcome=outcome, csv=class_report_csv(report, ctx.prov), result=report)

@runner('class_report_1d')
def _run_class_1d(ctx: Context, exp, name: str, key: StreamKey) -> Result:
    m = ctx.jm.marginals(exp.seq)[exp.index]
    return _class_result(ctx, exp, name, class_report_1d(m, ctx.probe(exp), ctx.n, key, ctx.workers))

@runner('class_report_2d')
def _run_class_2d(ctx: Context, exp, name: str, key: StreamKey) -> Result:
    return _class_result(ctx, exp, name, class_report_2d(ctx.jm, exp.i, exp.j, ctx.probe(exp), ctx.n, key, ctx.workers))

@runner('mixture_closure')
def _run_mixture(ctx: Context, exp, name: str, key: StreamKey) -> Result:
    sec = exp.second
    jm2 = JointModel(x_marginals=sec.marginals_x, y_marginals=sec.marginals_y, copula=sec.copula)
    report = mixture_closure_check(ctx.jm, jm2, exp.i, exp.j, exp.p, ctx.probe(exp), ctx.n, key, ctx.workers)
    return _class_result(ctx, exp, name, report)

@runner('matuszewska')
def _run_matuszewska(ctx: Context, exp, name: str, key: StreamKey) -> Result:
    probe = ctx.probe(exp)
    m = ctx.jm.marginals(exp.seq)[exp.index]
    j_minus, j_plus = matuszewska(m, probe)
    status = _band_status(exp.band, [j_minus, math.inf if j_plus is None else j_plus])
    outcome = Outcome(name=name, kind=exp.kind, status=status, headline=j_plus,
                      detail=f'J- {j_minus:.4g}, J+ ' + ('above cap' if j_plus is None else f'{j_plus:.4g}'))
    result = {'subject': str(m), 'j_minus': j_minus, 'j_plus': j_plus, 'cap': probe.cap}
    return Result(outcome=outcome, csv=matuszewska_csv(str(m), j_minus, j_plus, probe.cap, ctx.prov), result=result)

@runner('dependence')
def _run_dependence(ctx: Context, exp, name: str, key: StreamKey) -> Result:
    levels = ctx.probe(exp).quantile_levels
    kind = exp.diagnostic
    match kind:
        case DiagnosticKind.PQAI | DiagnosticKind.TAI:
            i, k = exp.indices
            curve = pair_diagnostic(ctx.jm, kind, exp.seq, i, k, levels, ctx.n, key, ctx.workers)
        case DiagnosticKind.SAI_CONST:
            curve = sai_constant(ctx.jm, *exp.indices, levels)
        case DiagnosticKind.SLOWVAR:
            curve = slow_variation_probe(ctx.jm, *exp.indices, exp.t, levels)
        case DiagnosticKind.QAI:
            curve = qai_curve(ctx.jm, *exp.indices, levels)
        case _:
            curve = triple_diagnostic(ctx.jm, kind, tuple(exp.indices), levels, ctx.n, key, ctx.workers)
    return _curve_result(ctx, exp, name, [curve], curve, exp.decreasing)

@runner('assumption_a')
def _run_assumption_a(ctx: Context, exp, name: str, key: StreamKey) -> Result:
    pf = ProbeFunctions(kappa_b=exp.kappa_b, kappa_c=exp.kappa_c)
    curves = list(assumption_a_check(ctx.wm, ctx.jm, pf, ctx.probe(exp).quantile_levels, ctx.n, key,
                                     ctx.workers, exp.i, exp.j))
    return _curve_result(ctx, exp, name, curves, {'theta': curves[0], 'delta': curves[1]})

@runner('maxsum')
def _run_maxsum(ctx: Context, exp, name: str, key: StreamKey) -> Result:
    report = maxsum_experiment(ctx.jm, ctx.wm, ctx.probe(exp), ctx.n, key, ctx.workers,
                               exp.predictor, exp.band, name)
    return _ratio_result(ctx, exp, name, report, [Variant.JOINT_SUM, Variant.JOINT_RUNNING_MAX])

@runner('ruin')
def _run_ruin(ctx: Context, exp, name: str, key: StreamKey) -> Result:
    grid = exp.surplus_grid or surplus_grid(ctx.jm, ctx.probe(exp))
    rs = RiskScenario(horizon=ctx.jm.n, claims=ctx.jm, discounts=ctx.wm, surplus_grid=grid,
                      premium=exp.premium, predictor=exp.predictor)
    report = ruin_report(rs, ctx.n, key, ctx.workers, exp.band, name)
    return _ratio_result(ctx, exp, name, report, [Variant.JOINT_RUNNING_MAX])

@runner('sum_closure')
def _run_sum_closure(ctx: Context, exp, name: str, key: StreamKey) -> Result:
    report = sum_closure_check(ctx.jm, exp.seq, exp.i, exp.k, ctx.probe(exp), ctx.n, key, ctx.workers, exp.partners)
    curves = [c for c in (report.closure, report.c_ratio, report.r2_ratio) if c is not None]
    res = _curve_result(ctx, exp, name, [report.closure], report)
    return Result(outcome=res.outcome, csv=curves_csv(curves, ctx.prov), result=report)

@runner('product_dependence')
def _run_product(ctx: Context, exp, name: str, key: StreamKey) -> Result:
    curve = product_dependence_check(ctx.jm, ctx.wm, exp.diagnostic, exp.indices, ctx.probe(exp), ctx.n, key, ctx.workers)
    return _curve_result(ctx, exp, name, [curve], curve, exp.decreasing)

@runner('s2_ratio')
def _run_s2(ctx: Context, exp, name: str, key: StreamKey) -> Result:
    curve = s2_ratio_check(ctx.jm, exp.i, exp.j, ctx.probe(exp), ctx.n, key, ctx.workers)
    return _curve_result(ctx, exp, name, [curve], curve)

def exit_code(outcomes: list[Outcome]) -> int:
    return 0 if all(o.status in (None, BandStatus.PASS) for o in outcomes) else 2

def _summary(outcomes: list[Outcome]) -> dict[str, Any]:
    return {'experiments': outcomes, 'exit_code': exit_code(outcomes)}

def canonical_hash(sf: ScenarioFile, settings: Settings) -> str:
    """Hash of the scenario as run; thread count and output path never enter it."""
    effective = sf.model_copy(update={'seed': settings.seed, 'n_samples': settings.n_samples,
                                      'threads': None, 'output': None})
    return scenario_hash(dump_scenario(effective))

def run_experiments(sf: ScenarioFile, settings: Settings) -> int:
    """Run every experiment, write <out>/<name>.csv, <name>.json and summary.json; return the exit code."""
    prov = Provenance(scenario_hash=canonical_hash(sf, settings), seed=settings.seed, n_samples=settings.n_samples)
    out = Path(settings.output)
    root = StreamKey(seed=settings.seed)
    outcomes: list[Outcome] = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        ctx = Context(sf=sf, settings=settings, jm=sf.joint_model, prov=prov)
        for idx, exp in enumerate(sf.experiments):
            name = sf.experiment_name(idx)
            info(f'[{idx + 1}/{len(sf.experiments)}] {name} ({exp.kind})')
            res = _runners[exp.kind](ctx, exp, name, root.child(idx))
            (out / f'{name}.csv').write_text(res.csv, encoding='utf-8', newline='')
            (out / f'{name}.json').write_text(
                to_json({'name': name, 'kind': exp.kind, 'experiment': exp, 'outcome': res.outcome,
                         'result': res.result}, prov), encoding='utf-8', newline='')
            status = res.outcome.status.value if res.outcome.status else 'info'
            info(f'{name}: {status} {res.outcome.detail}'.rstrip())
            outcomes.append(res.outcome)
        (out / SUMMARY).write_text(to_json(_summary(outcomes), prov), encoding='utf-8', newline='')
    except (ValueError, IndexError, RuntimeError) as e:
        error(f'experiment failed: {e}')
        return 1
    except OSError as e:
        error(f'cannot write results to {out}: {e}')
        return 1
    return exit_code(outcomes)

def summarize(directory: Path) -> int:
    """Rebuild summary.json from the per-experiment result files of a run."""
    outcomes, prov = [], None
    for path in sorted(directory.glob('*.json')):
        if path.name == SUMMARY:
            continue
        doc = load_json(path.read_text(encoding='utf-8'))
        outcomes.append(Outcome.model_validate(doc['outcome']))
        prov = prov or Provenance.model_validate(doc['provenance'])
    if prov is None:
        raise ValueError(f'no result files in {directory}')
    (directory / SUMMARY).write_text(to_json(_summary(outcomes), prov), encoding='utf-8', newline='')
    return exit_code(outcomes)

__all__ = ['Settings', 'resolve_settings', 'Outcome', 'runner', 'run_experiments', 'summarize', 'exit_code', 'canonical_hash']
