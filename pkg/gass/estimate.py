"""Turn interaction logs into the probability model, and generate synthetic
logs with the same shape.

Every probability is a plain maximum-likelihood frequency, there is no
smoothing here, the metrics carry their own.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from gass.core import (KIND_GROUP, KIND_INTENT, KIND_ITEM, KIND_QUERY,
                       Catalog, CondProb, MarginalProb, ProbModel,
                       RelevanceTable)
from gass.exceptions import InvalidArgumentError, ValidationError

logger = logging.getLogger(__name__)

LOG_COLUMNS = ['group', 'query', 'item', 'count']


class InteractionLog:
    """Rows of (group, query, item, count), kept in a DataFrame."""

    def __init__(self, frame: pd.DataFrame):
        missing = [c for c in LOG_COLUMNS if c not in frame.columns]
        if missing:
            raise InvalidArgumentError(
                f'log is missing columns: {", ".join(missing)}')
        frame = frame[LOG_COLUMNS].reset_index(drop=True)
        for column in ['group', 'query', 'item']:
            frame[column] = frame[column].astype(str)
            if frame[column].eq('').any():
                raise InvalidArgumentError(f'empty {column} id in log')
        if (frame['count'] < 1).any():
            raise InvalidArgumentError('log counts must be >= 1')
        frame['count'] = frame['count'].astype('int64')
        self.frame = frame

    @classmethod
    def from_rows(cls, rows: Iterable[Tuple[str, str, str,
                                            int]]) -> 'InteractionLog':
        return cls(pd.DataFrame(list(rows), columns=LOG_COLUMNS))

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def total(self) -> int:
        return int(self.frame['count'].sum())


@dataclass(frozen=True)
class EstimatedTables:
    queries: Tuple[str, ...]
    items: Tuple[str, ...]
    groups: Tuple[str, ...]
    p_d_qg: CondProb
    p_q: MarginalProb
    p_q_g: CondProb
    p_g: MarginalProb
    p_g_q: CondProb
    candidates: Dict[str, Tuple[str, ...]]


def _unique(values: pd.Series) -> Tuple[str, ...]:
    return tuple(pd.unique(values))


def _conditional(frame: pd.DataFrame, conditions: Sequence[str],
                 outcome: str) -> Dict[tuple, Dict[str, float]]:
    counts = frame.groupby(conditions + [outcome], sort=False)['count'].sum()
    totals = frame.groupby(conditions, sort=False)['count'].sum()
    rows: Dict[tuple, Dict[str, float]] = {}
    for key, n in counts.items():
        condition, value = key[:-1], key[-1]
        total = totals.loc[condition if len(condition) > 1 else condition[0]]
        rows.setdefault(condition, {})[value] = n / total
    return rows


def estimate_tables(log: InteractionLog) -> EstimatedTables:
    """Frequency estimates of p(d|q,g), p(q), p(q|g), p(g) and p(g|q).

    (q, g) pairs absent from the log get no row.

    Args:
        log (InteractionLog): The interaction log.

    Raises:
        InvalidArgumentError: If the log is empty.

    Returns:
        EstimatedTables: The estimated tables and the ids seen in the log.
    """
    if len(log) == 0:
        raise InvalidArgumentError('interaction log is empty')
    frame = log.frame
    total = log.total

    query_counts = frame.groupby('query', sort=False)['count'].sum()
    group_counts = frame.groupby('group', sort=False)['count'].sum()
    p_q = MarginalProb('p(q)', KIND_QUERY,
                       {q: n / total
                        for q, n in query_counts.items()})
    p_g = MarginalProb('p(g)', KIND_GROUP,
                       {g: n / total
                        for g, n in group_counts.items()})
    p_d_qg = CondProb('p(d|q,g)', (KIND_QUERY, KIND_GROUP), KIND_ITEM,
                      _conditional(frame, ['query', 'group'], 'item'))
    p_q_g = CondProb('p(q|g)', (KIND_GROUP, ), KIND_QUERY,
                     _conditional(frame, ['group'], 'query'))
    p_g_q = CondProb('p(g|q)', (KIND_QUERY, ), KIND_GROUP,
                     _conditional(frame, ['query'], 'group'))

    candidates = {
        q: _unique(items)
        for q, items in frame.groupby('query', sort=False)['item']
    }
    logger.info('estimated tables from %d rows (%d interactions)', len(log),
                total)
    return EstimatedTables(_unique(frame['query']), _unique(frame['item']),
                           _unique(frame['group']), p_d_qg, p_q, p_q_g, p_g,
                           p_g_q, candidates)


def intent_given_query_group(p_t_given_d: CondProb,
                             p_d_given_qg: CondProb) -> CondProb:
    """p(t|q,g) = sum_d p(t|d) p(d|q,g).

    Raises:
        ValidationError: If an item with p(d|q,g) mass has no p(t|d) row.
    """
    missing = sorted({
        d
        for row in p_d_given_qg.rows.values() for d in row
        if not p_t_given_d.has_row(d)
    })
    if missing:
        raise ValidationError('items without an intent distribution',
                              [f'p(t|d)[{d}]: missing row' for d in missing])
    rows = {}
    for key, row in p_d_given_qg.rows.items():
        mixed: Dict[str, float] = {}
        for d, p_d in row.items():
            for t, p_t in p_t_given_d.row(d).items():
                mixed[t] = mixed.get(t, 0.0) + p_t * p_d
        rows[key] = mixed
    return CondProb('p(t|q,g)', p_d_given_qg.condition_kinds, KIND_INTENT,
                    rows)


def build_model(log: InteractionLog,
                p_t_d: CondProb,
                relevance: RelevanceTable,
                candidates: Optional[Mapping[str, Sequence[str]]] = None,
                metadata: Optional[Dict[str, object]] = None) -> ProbModel:
    """Assemble the full probability model.

    Items come from the log, intents from the p(t|d) table. Items the log
    never mentions lose their p(t|d) row and, if p(t|d) describes them, their
    relevance rows too. Relevance for an item neither table knows is left in
    place for validation to reject.

    Args:
        log (InteractionLog): The interaction log.
        p_t_d (CondProb): Precomputed intent relatedness per item.
        relevance (RelevanceTable): Precomputed p(r_d|t).
        candidates (Optional[Mapping[str, Sequence[str]]], optional): Candidate
            lists per query, defaults to the items seen with each query.
        metadata (Optional[Dict[str, object]], optional): Provenance.

    Returns:
        ProbModel: The model, not validated yet.
    """
    tables = estimate_tables(log)
    items = list(tables.items)
    if candidates is not None:
        known = set(items)
        for q in tables.queries:
            for d in candidates.get(q, ()):
                if d not in known:
                    items.append(d)
                    known.add(d)
    known_items = set(items)
    described = {k[0] for k in p_t_d.rows}
    dropped = [k for k in p_t_d.rows if k[0] not in known_items]
    if dropped:
        logger.warning('dropping %d p(t|d) rows for items not in the log',
                       len(dropped))
        p_t_d = CondProb(
            p_t_d.name, p_t_d.condition_kinds, p_t_d.outcome_kind,
            {k: v
             for k, v in p_t_d.rows.items() if k[0] in known_items})
    unlogged = {(d, t) for d, t in relevance.values
                if d not in known_items and d in described}
    if unlogged:
        logger.warning('dropping %d relevance rows for items not in the log',
                       len(unlogged))
        relevance = RelevanceTable({
            k: p
            for k, p in relevance.values.items() if k not in unlogged
        })
    intents: Dict[str, None] = {}
    for row in p_t_d.rows.values():
        for t in row:
            intents.setdefault(t, None)

    catalog = Catalog(tables.queries, tuple(items), tuple(intents),
                      tables.groups)
    if candidates is None:
        query_candidates = tables.candidates
    else:
        query_candidates = {
            q: tuple(candidates.get(q, tables.candidates[q]))
            for q in tables.queries
        }
    return ProbModel(catalog=catalog,
                     p_d_qg=tables.p_d_qg,
                     p_t_d=p_t_d,
                     p_t_qg=intent_given_query_group(p_t_d, tables.p_d_qg),
                     p_q=tables.p_q,
                     p_q_g=tables.p_q_g,
                     p_g=tables.p_g,
                     p_g_q=tables.p_g_q,
                     relevance=relevance,
                     candidates=query_candidates,
                     metadata=dict(metadata or {}))


@dataclass(frozen=True)
class SynthConfig:
    """Sizes and knobs of the synthetic log.

    ``interactions`` is the mean click count per group. ``majority`` is the
    share of every query's traffic issued by g0, the other groups split the
    rest evenly. ``noise`` is the click weight every
    candidate gets on top of its fit with the group's reading of the query.
    ``bridge_share`` is the fraction of items spread over two intents.
    """
    queries: int = 100
    items: int = 500
    intents: int = 10
    groups: int = 2
    candidates: int = 20
    sense_items: int = 3
    bridge_items: int = 1
    group_concentration: float = 0.05
    item_concentration: float = 0.02
    bridge_share: float = 0.2
    majority: float = 0.9
    noise: float = 0.05
    popularity_sigma: float = 0.5
    interactions: int = 100000
    seed: int = 42

    def __post_init__(self):
        for name in ('queries', 'items', 'intents', 'groups', 'candidates',
                     'interactions'):
            if getattr(self, name) < 1:
                raise InvalidArgumentError(f'{name} must be >= 1')
        for name in ('sense_items', 'bridge_items'):
            if getattr(self, name) < 0:
                raise InvalidArgumentError(f'{name} must be >= 0')
        for name in ('group_concentration', 'item_concentration', 'noise',
                     'popularity_sigma'):
            if not getattr(self, name) >= 0:
                raise InvalidArgumentError(f'{name} must be >= 0')
        if not 0 <= self.bridge_share <= 1:
            raise InvalidArgumentError('bridge_share must be in [0, 1]')
        if self.groups > 1 and not 0 < self.majority < 1:
            raise InvalidArgumentError(
                'majority must be in (0, 1) with more than one group')

    def group_shares(self) -> np.ndarray:
        if self.groups == 1:
            return np.ones(1)
        rest = (1.0 - self.majority) / (self.groups - 1)
        return np.array([self.majority] + [rest] * (self.groups - 1))


@dataclass(frozen=True)
class SyntheticData:
    log: InteractionLog
    p_t_d: CondProb
    relevance: RelevanceTable
    candidates: Dict[str, Tuple[str, ...]]
    group_intents: pd.DataFrame
    senses: pd.DataFrame
    config: SynthConfig
    metadata: Dict[str, object] = field(default_factory=dict)

    def to_model(self) -> ProbModel:
        """Estimate the model, keeping only tables for candidate items."""
        logged = set(self.log.frame['query'])
        known = {
            d
            for q, c in self.candidates.items() if q in logged for d in c
        }
        p_t_d = CondProb(self.p_t_d.name, self.p_t_d.condition_kinds,
                         self.p_t_d.outcome_kind,
                         {k: v
                          for k, v in self.p_t_d.rows.items() if k[0] in known})
        relevance = RelevanceTable({(d, t): p
                                    for (d, t), p in self.relevance.values.items()
                                    if d in known})
        return build_model(self.log,
                           p_t_d,
                           relevance,
                           candidates=self.candidates,
                           metadata=self.metadata)


def _ids(prefix: str, n: int) -> Tuple[str, ...]:
    width = len(str(n - 1))
    return tuple(f'{prefix}{i:0{width}d}' for i in range(n))


def _dirichlet(rng: np.random.Generator, alpha: np.ndarray) -> np.ndarray:
    """Row-wise Dirichlet draws that tolerate zero concentrations.

    A row whose gamma draws are all zero falls back to uniform.
    """
    draws = rng.gamma(alpha)
    totals = draws.sum(axis=1, keepdims=True)
    return np.where(totals > 0, draws / np.where(totals > 0, totals, 1.0),
                    1.0 / alpha.shape[1])


def _item_intents(rng: np.random.Generator, config: SynthConfig):
    """p(t|d) for every item, and each item's primary intent.

    Items put concentration 1 on their primary intent and
    ``item_concentration`` elsewhere. Bridge items add concentration 1 on a
    second intent.
    """
    primary = rng.integers(config.intents, size=config.items)
    alpha = np.full((config.items, config.intents), config.item_concentration)
    alpha[np.arange(config.items), primary] = 1.0
    bridge = np.zeros(config.items, dtype=bool)
    if config.intents > 1:
        bridge = rng.random(config.items) < config.bridge_share
        secondary = (primary + rng.integers(1, config.intents,
                                            size=config.items)) % config.intents
        alpha[bridge, secondary[bridge]] = 1.0
    return _dirichlet(rng, alpha), primary, bridge


def _pick(rng: np.random.Generator, pool: np.ndarray, taken: set,
          k: int) -> List[int]:
    free = [int(i) for i in pool if int(i) not in taken]
    if k <= 0 or not free:
        return []
    picked = rng.choice(free, size=min(k, len(free)), replace=False)
    return [int(i) for i in picked]


def _candidates_for(rng: np.random.Generator, config: SynthConfig,
                    senses: Sequence[int], item_intents: np.ndarray,
                    primary: np.ndarray, bridge: np.ndarray) -> np.ndarray:
    """Candidate item indices for one query, sorted.

    Filled in order of priority: bridge items that best cover every reading
    of the query, then items dedicated to each reading taken in turn, then
    background items whose primary intent matches no reading.
    """
    distinct = list(dict.fromkeys(senses))
    size = min(config.candidates, config.items)
    taken: set = set()
    chosen: List[int] = []
    if len(distinct) > 1 and config.bridge_items:
        cover = np.prod(item_intents[:, distinct], axis=1)
        for i in np.argsort(-cover, kind='stable')[:config.bridge_items]:
            chosen.append(int(i))
            taken.add(int(i))
    per_sense = []
    for s in distinct:
        pool = np.flatnonzero((primary == s) & ~bridge)
        picked = _pick(rng, pool, taken, config.sense_items)
        taken.update(picked)
        per_sense.append(picked)
    for k in range(config.sense_items):
        chosen += [picked[k] for picked in per_sense if k < len(picked)]
    background = np.flatnonzero(~np.isin(primary, distinct))
    chosen += _pick(rng, background, taken, size - len(chosen))
    taken.update(chosen)
    chosen += _pick(rng, np.arange(config.items), taken, size - len(chosen))
    return np.sort(np.array(chosen[:size], dtype=np.int64))


def gen_synthetic(config: SynthConfig) -> SyntheticData:
    """Generate a seeded log of ambiguous queries read differently by groups.

    Intent t is a home intent of group t mod |G|. Each group spreads its
    interest over intents with concentration 1 on home intents and
    ``group_concentration`` elsewhere, so a concentration near 0 gives groups
    that want disjoint intents. Every query gets one reading (sense) per
    group, drawn from the group's interest. Its candidates mix items made
    for each reading, bridge items covering several readings and unrelated
    background items.

    Query popularity is shared by all groups and g0 issues the ``majority``
    share of each query's traffic. A group clicks an item in proportion to
    the item's popularity times ``noise`` plus p(sense|d) for its reading.
    p(r_d|t) is p(t|d) itself.

    Args:
        config (SynthConfig): Sizes, knobs and seed.

    Returns:
        SyntheticData: Log, p(t|d), relevance, candidate lists and the
        readings each group gives every query.
    """
    rng = np.random.default_rng(config.seed)
    queries = _ids('q', config.queries)
    items = _ids('d', config.items)
    intents = _ids('t', config.intents)
    groups = _ids('g', config.groups)

    home = np.arange(config.intents)[None, :] % config.groups == np.arange(
        config.groups)[:, None]
    group_alpha = np.where(home, 1.0, config.group_concentration)
    group_intents = _dirichlet(rng, group_alpha)

    item_intents, primary, bridge = _item_intents(rng, config)
    popularity = rng.lognormal(0.0, config.popularity_sigma, size=config.items)
    query_popularity = _dirichlet(rng, np.ones((1, config.queries)))[0]
    per_query = rng.multinomial(config.interactions * config.groups,
                                query_popularity)
    shares = config.group_shares()

    rows = []
    senses = np.empty((config.queries, config.groups), dtype=np.int64)
    candidate_index = {}
    for q_i, q in enumerate(queries):
        senses[q_i] = [
            rng.choice(config.intents, p=group_intents[g_i])
            for g_i in range(config.groups)
        ]
        index = _candidates_for(rng, config, senses[q_i], item_intents,
                                primary, bridge)
        candidate_index[q] = index
        per_group = rng.multinomial(per_query[q_i], shares)
        for g_i, g in enumerate(groups):
            if per_group[g_i] == 0:
                continue
            preference = popularity[index] * (
                config.noise + item_intents[index, senses[q_i, g_i]])
            if preference.sum() > 0:
                preference = preference / preference.sum()
            else:
                preference = np.full(len(index), 1.0 / len(index))
            counts = rng.multinomial(per_group[g_i], preference)
            rows += [(g, q, items[d], int(n))
                     for d, n in zip(index, counts) if n > 0]

    p_t_d = CondProb(
        'p(t|d)', (KIND_ITEM, ), KIND_INTENT, {
            (d, ): {
                t: float(p)
                for t, p in zip(intents, item_intents[i]) if p > 0
            }
            for i, d in enumerate(items)
        })
    relevance = RelevanceTable({(d, t): float(item_intents[i, j])
                                for i, d in enumerate(items)
                                for j, t in enumerate(intents)
                                if item_intents[i, j] > 0})
    candidates = {
        q: tuple(items[i] for i in index)
        for q, index in candidate_index.items()
    }
    frame = pd.DataFrame(group_intents, index=list(groups),
                         columns=list(intents))
    readings = pd.DataFrame([[intents[s] for s in row] for row in senses],
                            index=list(queries),
                            columns=list(groups))
    logger.info('generated %d log rows for %d queries and %d groups',
                len(rows), config.queries, config.groups)
    return SyntheticData(InteractionLog.from_rows(rows),
                         p_t_d,
                         relevance,
                         candidates,
                         frame,
                         readings,
                         config,
                         metadata={'synthetic': asdict(config)})
