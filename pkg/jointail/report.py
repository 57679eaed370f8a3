from pydantic import BaseModel, ConfigDict
from typing import Any, Iterable, Optional, Sequence
from io import StringIO
import hashlib
import math
import json
import csv

from .model import ClassReport, DiagnosticCurve, RatioReport

SCHEMA_VERSION = 1

class Provenance(BaseModel):
    model_config = ConfigDict(frozen=True)

    scenario_hash: str
    seed: int
    n_samples: int
    schema_version: int = SCHEMA_VERSION

def scenario_hash(canonical_text: str) -> str:
    return hashlib.sha256(canonical_text.encode('utf-8')).hexdigest()

def _table(prov: Provenance, columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    sb = StringIO()
    def p(*args, **kwargs):
        print(*args, **kwargs, file=sb)

    p(f'# scenario_sha256: {prov.scenario_hash}')
    p(f'# seed: {prov.seed}')
    p(f'# n_samples: {prov.n_samples}')
    p(f'# schema_version: {prov.schema_version}')
    w = csv.writer(sb, lineterminator='\n')
    w.writerow(columns)
    for row in rows:
        w.writerow(['' if v is None else v for v in row])
    return sb.getvalue()

def ratio_report_csv(report: RatioReport, prov: Provenance) -> str:
    columns = ['x', 'y', 'variant', 'lhs', 'se', 'rhs', 'ratio', 'ci_lo', 'ci_hi', 'n']
    if report.horizon is not None:
        columns.append('horizon')

    def rows():
        for c in report.cells:
            lo, hi = c.ci
            row = [c.x, c.y, c.variant.value, c.lhs.mean, c.lhs.se, c.rhs, c.ratio, lo, hi, c.lhs.n]
            if report.horizon is not None:
                row.append(report.horizon)
            yield row

    return _table(prov, columns, rows())

def curves_csv(curves: Sequence[DiagnosticCurve], prov: Provenance) -> str:
    columns = ['kind', 'label', 'level', 'x', 'y', 'estimate', 'se', 'expected', 'upper', 'unresolved']
    rows = ([c.kind.value, c.label, q, x, y, v.estimate, v.se, v.expected, v.upper, int(v.unresolved)]
            for c in curves
            for q, (x, y), v in zip(c.levels, c.thresholds, c.values))
    return _table(prov, columns, rows)

def class_report_csv(report: ClassReport, prov: Provenance) -> str:
    columns = ['subject', 'class', 'verdict', 'x', 'y', 'parameter', 'value', 'se', 'expected', 'unresolved']

    def rows(r: ClassReport):
        for name, check in r.checks.items():
            if not check.rows:
                yield [r.subject, name, check.verdict.value, None, None, None, None, None, None, None]
            for row in check.rows:
                yield [r.subject, name, check.verdict.value, row.x, row.y, row.parameter,
                       row.value, row.se, row.expected, int(row.unresolved)]
        for sub in r.marginals.values():
            yield from rows(sub)

    return _table(prov, columns, rows(report))

def matuszewska_csv(subject: str, j_minus: float, j_plus: Optional[float], cap: float, prov: Provenance) -> str:
    columns = ['subject', 'j_minus', 'j_plus', 'j_plus_above_cap', 'cap']
    return _table(prov, columns, [[subject, j_minus, j_plus, int(j_plus is None), cap]])

def to_json(payload: dict[str, Any], prov: Provenance) -> str:
    """Stable JSON text: provenance first, then the payload in insertion order."""
    doc = {'provenance': prov.model_dump(mode='json')}
    doc.update(_plain(payload))
    return json.dumps(doc, indent='\t', ensure_ascii=False, allow_nan=False) + '\n'

def _plain(o: Any) -> Any:
    """JSON-ready copy; non-finite floats become null so the output stays strict JSON."""
    if isinstance(o, BaseModel):
        return _plain(o.model_dump(mode='json'))
    if isinstance(o, float):
        return o if math.isfinite(o) else None
    if isinstance(o, dict):
        return {k: _plain(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_plain(v) for v in o]
    return o

def load_json(text: str) -> dict[str, Any]:
    doc = json.loads(text)
    if not isinstance(doc, dict) or 'provenance' not in doc:
        raise ValueError('not a jointail result file')
    return doc

def provenance_of(doc: dict[str, Any]) -> Optional[Provenance]:
    p = doc.get('provenance')
    return Provenance.model_validate(p) if p else None

__all__ = [
    'SCHEMA_VERSION',
    'Provenance',
    'scenario_hash',
    'ratio_report_csv',
    'curves_csv',
    'class_report_csv',
    'matuszewska_csv',
    'to_json',
    'load_json',
    'provenance_of',
]
