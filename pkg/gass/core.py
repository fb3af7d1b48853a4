"""This module contains the probability model shared by every other module:
the catalog of identifiers, the conditional and marginal probability tables,
the relevance and score tables, and their validation.

All tables are treated as immutable once built, lookups of absent keys follow
the sparse-log convention and return 0.0.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from gass.config import PROB_TOLERANCE
from gass.exceptions import NotFoundError, ValidationError

logger = logging.getLogger(__name__)

Key = Tuple[str, ...]
KIND_QUERY = 'query'
KIND_ITEM = 'item'
KIND_INTENT = 'intent'
KIND_GROUP = 'group'


def _as_key(key: Union[str, Sequence[str]]) -> Key:
    if isinstance(key, str):
        return (key, )
    return tuple(key)


@dataclass(frozen=True)
class Catalog:
    """Registries of query, item, intent and group ids.

    Ids are opaque strings, dense indices follow insertion order.
    """
    queries: Tuple[str, ...]
    items: Tuple[str, ...]
    intents: Tuple[str, ...]
    groups: Tuple[str, ...]
    _index: Dict[str, Dict[str, int]] = field(init=False,
                                              repr=False,
                                              compare=False)

    def __post_init__(self):
        for name in ('queries', 'items', 'intents', 'groups'):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(
            self, '_index', {
                KIND_QUERY: {q: i
                             for i, q in enumerate(self.queries)},
                KIND_ITEM: {d: i
                            for i, d in enumerate(self.items)},
                KIND_INTENT: {t: i
                              for i, t in enumerate(self.intents)},
                KIND_GROUP: {g: i
                             for i, g in enumerate(self.groups)},
            })

    def ids(self, kind: str) -> Tuple[str, ...]:
        return {
            KIND_QUERY: self.queries,
            KIND_ITEM: self.items,
            KIND_INTENT: self.intents,
            KIND_GROUP: self.groups,
        }[kind]

    def index(self, kind: str, id_: str) -> int:
        """Dense index of an id.

        Raises:
            NotFoundError: If the id is not registered under that kind.
        """
        try:
            return self._index[kind][id_]
        except KeyError:
            raise NotFoundError(f'unknown {kind} id {id_!r}') from None

    def contains(self, kind: str, id_: str) -> bool:
        return id_ in self._index[kind]


@dataclass(frozen=True)
class CondProb:
    """A keyed conditional distribution, e.g. p(d|q,g).

    ``condition_kinds`` and ``outcome_kind`` name the catalog registries the
    keys and outcomes live in, so the table can be checked against a catalog.
    """
    name: str
    condition_kinds: Tuple[str, ...]
    outcome_kind: str
    rows: Mapping[Key, Mapping[str, float]]

    def __post_init__(self):
        rows = {
            _as_key(k): {o: float(p)
                         for o, p in row.items()}
            for k, row in self.rows.items()
        }
        object.__setattr__(self, 'rows', rows)
        object.__setattr__(self, 'condition_kinds',
                           tuple(self.condition_kinds))

    def has_row(self, key: Union[str, Sequence[str]]) -> bool:
        return _as_key(key) in self.rows

    def row(self, key: Union[str, Sequence[str]]) -> Mapping[str, float]:
        """The distribution for one condition key.

        Raises:
            NotFoundError: If the table has no row for the key.
        """
        key = _as_key(key)
        try:
            return self.rows[key]
        except KeyError:
            raise NotFoundError(
                f'{self.name} has no row for {", ".join(key)}') from None

    def prob(self, key: Union[str, Sequence[str]], outcome: str) -> float:
        return self.rows.get(_as_key(key), {}).get(outcome, 0.0)

    def keys(self) -> List[Key]:
        return list(self.rows.keys())

    def renormalized(self) -> 'CondProb':
        """Return a copy where every row is divided by its sum.

        Rows summing to zero are kept as they are.
        """
        rows = {}
        for key, row in self.rows.items():
            total = math.fsum(row.values())
            if total > 0 and total != 1.0:
                row = {o: p / total for o, p in row.items()}
            rows[key] = row
        return replace(self, rows=rows)


@dataclass(frozen=True)
class MarginalProb:
    """A distribution over the ids of one catalog registry, e.g. p(q)."""
    name: str
    kind: str
    probs: Mapping[str, float]

    def __post_init__(self):
        object.__setattr__(self, 'probs',
                           {k: float(v)
                            for k, v in self.probs.items()})

    def get(self, id_: str) -> float:
        return self.probs.get(id_, 0.0)

    def renormalized(self) -> 'MarginalProb':
        total = math.fsum(self.probs.values())
        if total <= 0 or total == 1.0:
            return self
        return replace(self,
                       probs={k: v / total
                              for k, v in self.probs.items()})


@dataclass(frozen=True)
class RelevanceTable:
    """Independent Bernoulli relevance p(r_d|t) per (item, intent).

    This is not a distribution, missing entries mean 0.0.
    """
    values: Mapping[Tuple[str, str], float]

    def __post_init__(self):
        object.__setattr__(
            self, 'values',
            {(d, t): float(p)
             for (d, t), p in self.values.items()})

    def get(self, item: str, intent: str) -> float:
        return self.values.get((item, intent), 0.0)

    def matrix(self, items: Sequence[str],
               intents: Sequence[str]) -> np.ndarray:
        """Dense (items x intents) array of relevance probabilities."""
        out = np.zeros((len(items), len(intents)), dtype=np.float64)
        for i, d in enumerate(items):
            for j, t in enumerate(intents):
                out[i, j] = self.values.get((d, t), 0.0)
        return out


@dataclass(frozen=True)
class ScoreTable:
    """Static ranker scores r_{d,q} with the ordered candidate list per query."""
    scores: Mapping[Tuple[str, str], float]
    candidates: Mapping[str, Tuple[str, ...]]

    def __post_init__(self):
        object.__setattr__(
            self, 'scores',
            {(d, q): float(s)
             for (d, q), s in self.scores.items()})
        object.__setattr__(self, 'candidates',
                           {q: tuple(c)
                            for q, c in self.candidates.items()})

    @classmethod
    def from_rows(cls, rows: Mapping[str, Mapping[str,
                                                  float]]) -> 'ScoreTable':
        """Build from {query: {item: score}}, candidates in row order."""
        scores = {(d, q): s for q, row in rows.items() for d, s in row.items()}
        candidates = {q: tuple(row.keys()) for q, row in rows.items()}
        return cls(scores, candidates)

    @property
    def queries(self) -> List[str]:
        return list(self.candidates.keys())

    def candidates_for(self, query: str) -> Tuple[str, ...]:
        """Raises:
            NotFoundError: If the query has no candidate list.
        """
        try:
            return self.candidates[query]
        except KeyError:
            raise NotFoundError(f'no candidates for query {query!r}') from None

    def vector(self, query: str) -> np.ndarray:
        """Scores of the query's candidates, aligned with candidates_for."""
        return np.array([
            self.scores.get((d, query), 0.0)
            for d in self.candidates_for(query)
        ],
                        dtype=np.float64)


@dataclass(frozen=True)
class ProbModel:
    """The full probability model evaluated by the metrics module."""
    catalog: Catalog
    p_d_qg: CondProb
    p_t_d: CondProb
    p_t_qg: CondProb
    p_q: MarginalProb
    p_q_g: CondProb
    p_g: MarginalProb
    p_g_q: CondProb
    relevance: RelevanceTable
    candidates: Mapping[str, Tuple[str, ...]]
    metadata: Mapping[str, object] = field(default_factory=dict)

    def candidates_for(self, query: str) -> Tuple[str, ...]:
        try:
            return tuple(self.candidates[query])
        except KeyError:
            raise NotFoundError(f'unknown query {query!r}') from None

    def groups_for(self, query: str) -> List[str]:
        """Groups that issue the query, i.e. have a p(t|q,g) row, in catalog order."""
        return [
            g for g in self.catalog.groups if self.p_t_qg.has_row((query, g))
        ]

    def cond_tables(self) -> List[CondProb]:
        return [self.p_d_qg, self.p_t_d, self.p_t_qg, self.p_q_g, self.p_g_q]

    def marginal_tables(self) -> List[MarginalProb]:
        return [self.p_q, self.p_g]


@dataclass(frozen=True)
class Violation:
    table: str
    key: str
    rule: str

    def __str__(self) -> str:
        return f'{self.table}[{self.key}]: {self.rule}'


def _check_prob(value: float) -> Optional[str]:
    if not math.isfinite(value) or value < 0.0 or value > 1.0:
        return f'value {value!r} out of [0,1]'
    return None


def _check_cond(table: CondProb, catalog: Catalog) -> List[Violation]:
    violations = []
    for key, row in table.rows.items():
        key_str = ','.join(key)
        if len(key) != len(table.condition_kinds):
            violations.append(
                Violation(table.name, key_str,
                          f'expected {len(table.condition_kinds)} key parts'))
            continue
        for kind, part in zip(table.condition_kinds, key):
            if not catalog.contains(kind, part):
                violations.append(
                    Violation(table.name, key_str, f'unknown {kind} {part!r}'))
        for outcome, p in row.items():
            if not catalog.contains(table.outcome_kind, outcome):
                violations.append(
                    Violation(table.name, f'{key_str}->{outcome}',
                              f'unknown {table.outcome_kind} {outcome!r}'))
            problem = _check_prob(p)
            if problem:
                violations.append(
                    Violation(table.name, f'{key_str}->{outcome}', problem))
        total = math.fsum(row.values())
        if abs(total - 1.0) > PROB_TOLERANCE:
            violations.append(
                Violation(table.name, key_str, f'sum={total!r} for ({key_str})'))
    return violations


def _check_marginal(table: MarginalProb, catalog: Catalog) -> List[Violation]:
    violations = []
    for id_, p in table.probs.items():
        if not catalog.contains(table.kind, id_):
            violations.append(
                Violation(table.name, id_, f'unknown {table.kind} {id_!r}'))
        problem = _check_prob(p)
        if problem:
            violations.append(Violation(table.name, id_, problem))
    total = math.fsum(table.probs.values())
    if abs(total - 1.0) > PROB_TOLERANCE:
        violations.append(Violation(table.name, '*', f'sum={total!r}'))
    return violations


def validate_catalog(catalog: Catalog) -> List[Violation]:
    violations = []
    for kind in (KIND_QUERY, KIND_ITEM, KIND_INTENT, KIND_GROUP):
        ids = catalog.ids(kind)
        if not ids:
            violations.append(Violation('catalog', kind, f'no {kind} ids'))
        if len(set(ids)) != len(ids):
            seen = set()
            for id_ in ids:
                if id_ in seen:
                    violations.append(
                        Violation('catalog', id_, f'duplicate {kind} id'))
                seen.add(id_)
        for id_ in ids:
            if not isinstance(id_, str) or not id_:
                violations.append(
                    Violation('catalog', repr(id_), f'empty {kind} id'))
    return violations


def validate_relevance(relevance: RelevanceTable,
                       catalog: Catalog) -> List[Violation]:
    violations = []
    for (d, t), p in relevance.values.items():
        key = f'{d},{t}'
        if not catalog.contains(KIND_ITEM, d):
            violations.append(Violation('p(r|t)', key, f'unknown item {d!r}'))
        if not catalog.contains(KIND_INTENT, t):
            violations.append(Violation('p(r|t)', key,
                                        f'unknown intent {t!r}'))
        problem = _check_prob(p)
        if problem:
            violations.append(Violation('p(r|t)', key, problem))
    return violations


def validate_scores(scores: ScoreTable,
                    catalog: Optional[Catalog] = None) -> List[Violation]:
    violations = []
    for q, candidates in scores.candidates.items():
        if not candidates:
            violations.append(Violation('scores', q, 'no candidates'))
        if len(set(candidates)) != len(candidates):
            violations.append(Violation('scores', q, 'duplicate candidates'))
        if catalog is not None and not catalog.contains(KIND_QUERY, q):
            violations.append(Violation('scores', q, f'unknown query {q!r}'))
        for d in candidates:
            if catalog is not None and not catalog.contains(KIND_ITEM, d):
                violations.append(
                    Violation('scores', f'{d},{q}', f'unknown item {d!r}'))
            s = scores.scores.get((d, q), 0.0)
            if not math.isfinite(s):
                violations.append(
                    Violation('scores', f'{d},{q}', f'score {s!r} not finite'))
    return violations


def validate(model: ProbModel) -> List[Violation]:
    """Check every invariant of the probability model.

    Violations are returned as data, nothing is raised.

    Args:
        model (ProbModel): The model to check.

    Returns:
        List[Violation]: Empty iff the model is valid.
    """
    catalog = model.catalog
    violations = validate_catalog(catalog)
    for table in model.cond_tables():
        violations += _check_cond(table, catalog)
    for table in model.marginal_tables():
        violations += _check_marginal(table, catalog)
    violations += validate_relevance(model.relevance, catalog)
    for q in catalog.queries:
        if not model.candidates.get(q):
            violations.append(Violation('candidates', q, 'no candidates'))
    for q, candidates in model.candidates.items():
        if not catalog.contains(KIND_QUERY, q):
            violations.append(
                Violation('candidates', q, f'unknown query {q!r}'))
        for d in candidates:
            if not catalog.contains(KIND_ITEM, d):
                violations.append(
                    Violation('candidates', f'{q}->{d}', f'unknown item {d!r}'))
    return violations


def require_valid(model: ProbModel) -> ProbModel:
    """Raises:
        ValidationError: Listing every violation, if there is any.
    """
    violations = validate(model)
    if violations:
        raise ValidationError(
            f'model has {len(violations)} violation(s)', violations)
    return model


def renormalize(model: ProbModel) -> ProbModel:
    """Opt-in repair that rescales every distribution to sum to one."""
    changed = [
        t.name for t in model.cond_tables() + model.marginal_tables()
        if t != t.renormalized()
    ]
    if changed:
        logger.warning('renormalized tables: %s', ', '.join(changed))
    return replace(model,
                   p_d_qg=model.p_d_qg.renormalized(),
                   p_t_d=model.p_t_d.renormalized(),
                   p_t_qg=model.p_t_qg.renormalized(),
                   p_q=model.p_q.renormalized(),
                   p_q_g=model.p_q_g.renormalized(),
                   p_g=model.p_g.renormalized(),
                   p_g_q=model.p_g_q.renormalized())
