"""File formats: the interaction log, the precomputed tables, the model bundle
and the reports.

- log: TSV with header ``group query item count``, UTF-8, LF line endings
- tables: JSON objects keyed by condition then outcome
- bundle: one JSON document holding the catalog, every table and a metadata
  block
- reports: JSON plus CSV ('.' decimal, ',' delimiter, LF endings, header row)

Floats are written so that reading them back gives the same bits, CSV cells
with 17 significant digits.
"""

import csv
import io
import json
import logging
import math
import pathlib
import re
import sys
from typing import Dict, Optional, Sequence, Tuple, Union

import pandas as pd

from gass.core import (KIND_GROUP, KIND_INTENT, KIND_ITEM, KIND_QUERY,
                       Catalog, CondProb, MarginalProb, ProbModel,
                       RelevanceTable)
from gass.estimate import LOG_COLUMNS, InteractionLog
from gass.exceptions import ParseError
from utils import flatten, load_columns, nest

logger = logging.getLogger(__name__)

PathLike = Union[str, pathlib.Path]
FLOAT_FORMAT = '%.17g'
BUNDLE_FORMAT = 'gass-model/1'

# (name in bundle, condition kinds, outcome kind)
COND_TABLES = {
    'p_d_qg': ('p(d|q,g)', (KIND_QUERY, KIND_GROUP), KIND_ITEM),
    'p_t_d': ('p(t|d)', (KIND_ITEM, ), KIND_INTENT),
    'p_t_qg': ('p(t|q,g)', (KIND_QUERY, KIND_GROUP), KIND_INTENT),
    'p_q_g': ('p(q|g)', (KIND_GROUP, ), KIND_QUERY),
    'p_g_q': ('p(g|q)', (KIND_QUERY, ), KIND_GROUP),
}
MARGINAL_TABLES = {
    'p_q': ('p(q)', KIND_QUERY),
    'p_g': ('p(g)', KIND_GROUP),
}


def _load_json(path: PathLike) -> object:
    try:
        with open(path, encoding='utf-8') as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, str(path), exc.lineno) from None
    except OSError as exc:
        raise ParseError(exc.strerror or str(exc), str(path)) from None


def read_log(path: PathLike) -> InteractionLog:
    """Read the TSV interaction log.

    Ids are read verbatim, quotes included. Line numbers in errors count the
    header as line 1.

    Raises:
        ParseError: With the offending line number, if the header, a field or
            a count is malformed, or if the log holds no rows.
    """
    try:
        # header=None, so a row with extra fields fails instead of becoming
        # an index column
        frame = pd.read_csv(path,
                            sep='\t',
                            header=None,
                            dtype=str,
                            keep_default_na=False,
                            lineterminator='\n',
                            quoting=csv.QUOTE_NONE,
                            skip_blank_lines=False)
    except OSError as exc:
        raise ParseError(exc.strerror or str(exc), str(path)) from None
    except pd.errors.EmptyDataError:
        raise ParseError('empty log, expected a header', str(path), 1) from None
    except pd.errors.ParserError as exc:
        match = re.search(r'line (\d+)', str(exc))
        raise ParseError(f'expected {len(LOG_COLUMNS)} fields',
                         str(path),
                         int(match.group(1)) if match else None) from None
    header = [str(c).rstrip('\r') for c in frame.iloc[0]]
    if header != LOG_COLUMNS:
        raise ParseError(
            f'header must be {" ".join(LOG_COLUMNS)!r}, got {" ".join(header)!r}',
            str(path), 1)
    frame = frame.iloc[1:].reset_index(drop=True)
    frame.columns = LOG_COLUMNS
    if frame.empty:
        raise ParseError('log has no rows', str(path), 2)
    frame['count'] = frame['count'].str.rstrip('\r')
    counts = pd.to_numeric(frame['count'], errors='coerce')
    problems = [
        (frame.isna().any(axis=1), f'expected {len(LOG_COLUMNS)} fields'),
        (frame[['group', 'query', 'item']].eq('').any(axis=1), 'empty id'),
        (counts.isna() | (counts % 1 != 0), 'count is not an integer'),
        (counts < 1, 'count must be >= 1'),
    ]
    bad = pd.concat([mask for mask, _ in problems], axis=1).any(axis=1)
    if bad.any():
        index = int(bad.to_numpy().argmax())
        message = next(m for mask, m in problems if mask.iloc[index])
        raise ParseError(message, str(path), index + 2)
    frame['count'] = counts.astype('int64')
    logger.info('read %d log rows from %s', len(frame), path)
    return InteractionLog(frame)


def write_log(log: InteractionLog, path: PathLike):
    log.frame.to_csv(path, sep='\t', index=False, lineterminator='\n')


def _numbers(nested: dict, path: PathLike, depth: int) -> Dict[tuple, float]:
    if not isinstance(nested, dict):
        raise ParseError('expected a JSON object', str(path))
    flat = flatten(nested)
    for key, value in flat.items():
        if len(key) != depth:
            raise ParseError(f'entry {"/".join(key)} is nested {len(key)} '
                             f'levels deep, expected {depth}', str(path))
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParseError(f'entry {"/".join(key)} is not a number',
                             str(path))
    return {k: float(v) for k, v in flat.items()}


def cond_from_json(nested: dict, name: str, condition_kinds: Tuple[str, ...],
                   outcome_kind: str, path: PathLike = '<bundle>') -> CondProb:
    flat = _numbers(nested, path, len(condition_kinds) + 1)
    rows: Dict[tuple, Dict[str, float]] = {}
    for key, p in flat.items():
        rows.setdefault(key[:-1], {})[key[-1]] = p
    return CondProb(name, condition_kinds, outcome_kind, rows)


def cond_to_json(table: CondProb) -> dict:
    return nest({
        key + (outcome, ): p
        for key, row in table.rows.items() for outcome, p in row.items()
    })


def read_table(path: PathLike, name: str, condition_kinds: Tuple[str, ...],
               outcome_kind: str) -> CondProb:
    """Read a conditional table such as p(t|d) from nested JSON."""
    return cond_from_json(_load_json(path), name, condition_kinds,
                          outcome_kind, path)


def read_intents(path: PathLike) -> CondProb:
    """p(t|d) as {item: {intent: probability}}."""
    return read_table(path, 'p(t|d)', (KIND_ITEM, ), KIND_INTENT)


def read_relevance(path: PathLike) -> RelevanceTable:
    """p(r_d|t) as {item: {intent: probability}}."""
    flat = _numbers(_load_json(path), path, 2)
    return RelevanceTable(flat)


def relevance_to_json(relevance: RelevanceTable) -> dict:
    return nest(dict(relevance.values))


def model_to_json(model: ProbModel,
                  metadata: Optional[Dict[str, object]] = None) -> dict:
    meta = {'format': BUNDLE_FORMAT}
    meta.update(model.metadata)
    meta.update(metadata or {})
    bundle = {
        'metadata': meta,
        'catalog': {
            'queries': list(model.catalog.queries),
            'items': list(model.catalog.items),
            'intents': list(model.catalog.intents),
            'groups': list(model.catalog.groups),
        },
        'candidates': {q: list(c)
                       for q, c in model.candidates.items()},
    }
    for key in COND_TABLES:
        bundle[key] = cond_to_json(getattr(model, key))
    for key in MARGINAL_TABLES:
        bundle[key] = dict(getattr(model, key).probs)
    bundle['relevance'] = relevance_to_json(model.relevance)
    return bundle


def model_from_json(bundle: dict, path: PathLike = '<bundle>') -> ProbModel:
    try:
        catalog = Catalog(**{
            k: tuple(bundle['catalog'][k])
            for k in ('queries', 'items', 'intents', 'groups')
        })
        tables = {
            key: cond_from_json(bundle[key], name, kinds, outcome, path)
            for key, (name, kinds, outcome) in COND_TABLES.items()
        }
        marginals = {
            key: MarginalProb(name, kind, {
                k[0]: p
                for k, p in _numbers(bundle[key], path, 1).items()
            })
            for key, (name, kind) in MARGINAL_TABLES.items()
        }
        relevance = RelevanceTable(_numbers(bundle['relevance'], path, 2))
        candidates = {q: tuple(c) for q, c in bundle['candidates'].items()}
        metadata = dict(bundle.get('metadata', {}))
    except (KeyError, TypeError, AttributeError) as exc:
        raise ParseError(f'malformed model bundle: {exc}', str(path)) from None
    return ProbModel(catalog=catalog,
                     relevance=relevance,
                     candidates=candidates,
                     metadata=metadata,
                     **tables,
                     **marginals)


def write_json(data: object, path: PathLike):
    text = json.dumps(data, indent=2, allow_nan=False) + '\n'
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)


def write_bundle(model: ProbModel,
                 path: PathLike,
                 metadata: Optional[Dict[str, object]] = None):
    write_json(model_to_json(model, metadata), path)
    logger.info('wrote model bundle %s', path)


def read_bundle(path: PathLike) -> ProbModel:
    bundle = _load_json(path)
    if not isinstance(bundle, dict):
        raise ParseError('model bundle must be a JSON object', str(path))
    return model_from_json(bundle, path)


def _clean(value: object) -> object:
    """JSON-safe scalar, NaN becomes null."""
    if isinstance(value, float) and math.isnan(value):
        return None
    if hasattr(value, 'item'):
        return _clean(value.item())
    return value


def frame_to_records(frame: pd.DataFrame) -> list:
    return [{k: _clean(v)
             for k, v in row.items()}
            for row in frame.to_dict(orient='records')]


def frame_to_csv(frame: pd.DataFrame) -> str:
    buffer = io.StringIO()
    frame.to_csv(buffer,
                 index=False,
                 float_format=FLOAT_FORMAT,
                 lineterminator='\n')
    return buffer.getvalue()


def write_csv(frame: pd.DataFrame, path: Optional[PathLike]):
    """Write a frame as CSV, to stdout when path is None or '-'."""
    text = frame_to_csv(frame)
    if path is None or str(path) == '-':
        sys.stdout.write(text)
        return
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)


def report_columns(frame: pd.DataFrame) -> pd.DataFrame:
    """Rename internal metric keys to report column names."""
    columns, column_types = load_columns()
    frame = frame.rename(columns=columns)
    types = {c: t for c, t in column_types.items() if c in frame.columns}
    return frame.astype(types)


def internal_columns(frame: pd.DataFrame) -> pd.DataFrame:
    columns, _ = load_columns()
    return frame.rename(columns={v: k for k, v in columns.items()})


def output_paths(path: PathLike,
                 suffixes: Sequence[str] = ('.json', '.csv')) -> list:
    """PATH.json and PATH.csv, an existing .json/.csv suffix is replaced."""
    path = pathlib.Path(path)
    if path.suffix in suffixes:
        path = path.with_suffix('')
    return [path.parent / (path.name + s) for s in suffixes]


def write_report(report, path: PathLike) -> list:
    """Write a MetricReport as JSON and CSV next to each other."""
    json_path, csv_path = output_paths(path)
    write_json(
        {
            'metadata': {k: _clean(v)
                         for k, v in report.metadata.items()},
            'aggregate': {k: _clean(v)
                          for k, v in report.aggregate.items()},
            'per_query': frame_to_records(report.per_query),
        }, json_path)
    write_csv(report_columns(report.to_frame()), csv_path)
    logger.info('wrote report %s and %s', json_path, csv_path)
    return [json_path, csv_path]


def write_frame(frame: pd.DataFrame,
                path: PathLike,
                metadata: Optional[Dict[str, object]] = None) -> list:
    """Write any result table as JSON (with metadata) and CSV."""
    json_path, csv_path = output_paths(path)
    write_json(
        {
            'metadata': {k: _clean(v)
                         for k, v in (metadata or {}).items()},
            'rows': frame_to_records(frame),
        }, json_path)
    write_csv(frame, csv_path)
    return [json_path, csv_path]


def read_sweep(path: PathLike) -> pd.DataFrame:
    """Read a sweep CSV back into internal column names."""
    try:
        frame = pd.read_csv(path, dtype={'beta': str})
    except (OSError, pd.errors.ParserError,
            pd.errors.EmptyDataError) as exc:
        raise ParseError(str(exc), str(path)) from None
    frame = internal_columns(frame)
    missing = [c for c in ('ranker', 'beta') if c not in frame.columns]
    if missing:
        raise ParseError(f'sweep is missing columns {", ".join(missing)}',
                         str(path), 1)
    return frame
