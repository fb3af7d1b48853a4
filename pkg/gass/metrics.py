"""The search success metric suite.

Bottom up:
- item success, p(s_d|t,q) = p(r_d|t) * p(exposure of d)
- intent success, p(s|t,q) = 1 - prod_d (1 - p(s_d|t,q))
- group success, p(s|q,g) = sum_t p(t|q,g) p(s|t,q)

On top of those sit the query level metrics, GA-SS within a query (every
group succeeds) and DA-SS (the group-unaware intent mixture), and the two
across-query GA-SS variants, sum over queries of the group product and
product over groups of the query sum.

Exposure comes from either a static ranking or a sampled policy per query.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from gass import __version__
from gass.browse import BrowsingModel, Ranking, exposure_vector
from gass.config import (DEFAULT_EPSILON, DEFAULT_SAMPLES, DEFAULT_SEED,
                         LOG_SPACE_THRESHOLD, PROB_TOLERANCE, Settings)
from gass.core import ProbModel, validate_scores
from gass.exceptions import (InvalidArgumentError, NotFoundError,
                             ValidationError)
from gass.policy import PLConfig, PolicySample, pl_sample_policy, static_ranking
from gass.rankers import get_ranker

logger = logging.getLogger(__name__)

Policy = Union[Ranking, PolicySample]
STATIC = 'static'
WEIGHTINGS = ('pq', 'uniform')


def _clamp(value: float) -> float:
    return min(1.0, max(0.0, value))


def _product(factors: Sequence[float]) -> float:
    """Product of non-negative factors, as summed logs past the threshold."""
    if len(factors) > LOG_SPACE_THRESHOLD:
        if any(f <= 0.0 for f in factors):
            return 0.0
        return math.exp(math.fsum(math.log(f) for f in factors))
    result = 1.0
    for f in factors:
        result *= f
    return result


@dataclass(frozen=True)
class EvalContext:
    """Everything needed to evaluate success for a set of queries.

    ``fixed_success`` replaces the exposure-based intent success with given
    p(s|t,q) values keyed by (query, intent), absent pairs count as 0.
    """
    model: ProbModel
    browsing: BrowsingModel = field(default_factory=BrowsingModel)
    policies: Mapping[str, Policy] = field(default_factory=dict)
    epsilon: float = DEFAULT_EPSILON
    fixed_success: Optional[Mapping[Tuple[str, str], float]] = None
    _intent_cache: Dict[str, np.ndarray] = field(default_factory=dict,
                                                  init=False,
                                                  repr=False,
                                                  compare=False)

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise InvalidArgumentError(
                f'epsilon must be >= 0, got {self.epsilon!r}')

    def policy(self, query: str) -> Policy:
        try:
            return self.policies[query]
        except KeyError:
            raise NotFoundError(f'no policy for query {query!r}') from None

    def exposure(self, query: str) -> Dict[str, float]:
        """Exposure of every item the query's policy can show."""
        policy = self.policy(query)
        return dict(zip(policy.items, exposure_vector(policy, self.browsing)))

    def intent_successes(self, query: str) -> np.ndarray:
        """p(s|t,q) for every catalog intent, memoized per query."""
        cached = self._intent_cache.get(query)
        if cached is not None:
            return cached
        intents = self.model.catalog.intents
        if self.fixed_success is not None:
            success = np.array(
                [self.fixed_success.get((query, t), 0.0) for t in intents],
                dtype=np.float64)
        else:
            policy = self.policy(query)
            exposure = exposure_vector(policy, self.browsing)
            shown = exposure > 0
            items = [d for d, s in zip(policy.items, shown) if s]
            relevance = self.model.relevance.matrix(items, intents)
            item_success = relevance * exposure[shown][:, None]
            success = 1.0 - np.prod(1.0 - item_success, axis=0)
        success = np.clip(success, 0.0, 1.0)
        self._intent_cache[query] = success
        return success


def item_success(ctx: EvalContext, item: str, intent: str, query: str) -> float:
    """p(s_d|t,q), relevance times (expected) exposure."""
    relevance = ctx.model.relevance.get(item, intent)
    if relevance == 0.0:
        return 0.0
    return _clamp(relevance * ctx.exposure(query).get(item, 0.0))


def intent_query_success(ctx: EvalContext, intent: str, query: str) -> float:
    """p(s|t,q), the chance at least one shown item succeeds for the intent."""
    index = ctx.model.catalog.index('intent', intent)
    return float(ctx.intent_successes(query)[index])


def group_query_success(ctx: EvalContext, group: str, query: str) -> float:
    """p(s|q,g) = sum_t p(t|q,g) p(s|t,q).

    Raises:
        NotFoundError: If there is no p(t|q,g) row for (query, group).
    """
    row = ctx.model.p_t_qg.row((query, group))
    success = ctx.intent_successes(query)
    catalog = ctx.model.catalog
    return _clamp(
        math.fsum(p * success[catalog.index('intent', t)]
                  for t, p in row.items()))


def _groups(ctx: EvalContext, query: str) -> List[str]:
    groups = ctx.model.groups_for(query)
    if not groups:
        raise NotFoundError(f'no group has an intent distribution for {query!r}')
    return groups


def ga_ss_within(ctx: EvalContext, query: str) -> float:
    """GA-SS within a query, prod_g (p(s|q,g) + epsilon), clamped to [0, 1].

    The product runs over the groups that issue the query.
    """
    factors = [
        group_query_success(ctx, g, query) + ctx.epsilon
        for g in _groups(ctx, query)
    ]
    return _clamp(_product(factors))


def intent_given_query(ctx: EvalContext, query: str) -> Dict[str, float]:
    """p(t|q) as the p(g|q) weighted marginal of p(t|q,g)."""
    p_t: Dict[str, float] = {}
    for g, p_g in ctx.model.p_g_q.row(query).items():
        if not ctx.model.p_t_qg.has_row((query, g)):
            continue
        for t, p in ctx.model.p_t_qg.row((query, g)).items():
            p_t[t] = p_t.get(t, 0.0) + p_g * p
    return p_t


def da_ss_within(ctx: EvalContext, query: str) -> float:
    """DA-SS, sum_t p(t|q) p(s|t,q) ignoring groups."""
    success = ctx.intent_successes(query)
    catalog = ctx.model.catalog
    return _clamp(
        math.fsum(p * success[catalog.index('intent', t)]
                  for t, p in intent_given_query(ctx, query).items()))


def _query_set(ctx: EvalContext,
               queries: Optional[Sequence[str]]) -> List[str]:
    if queries is None:
        queries = ctx.model.catalog.queries
    return sorted(queries)


def ga_ss_sum_of_product(ctx: EvalContext,
                         queries: Optional[Sequence[str]] = None) -> float:
    """sum_q p(q) GA-SS within q.

    Raises:
        ValidationError: If p(q) does not sum to one over the query set.
    """
    queries = _query_set(ctx, queries)
    mass = math.fsum(ctx.model.p_q.get(q) for q in queries)
    if abs(mass - 1.0) > PROB_TOLERANCE:
        raise ValidationError(
            f'p(q) sums to {mass:.17g} over the evaluated queries')
    return _clamp(
        math.fsum(ga_ss_within(ctx, q) * ctx.model.p_q.get(q)
                  for q in queries))


def ga_ss_product_of_sum(ctx: EvalContext,
                         queries: Optional[Sequence[str]] = None) -> float:
    """prod_g (sum_q p(q|g) p(s|q,g) + epsilon).

    Raises:
        NotFoundError: If a group has no p(q|g) row.
    """
    queries = _query_set(ctx, queries)
    factors = []
    for g in ctx.model.catalog.groups:
        row = ctx.model.p_q_g.row(g)
        total = math.fsum(
            group_query_success(ctx, g, q) * row[q] for q in queries
            if row.get(q, 0.0) > 0.0)
        factors.append(total + ctx.epsilon)
    return _clamp(_product(factors))


@dataclass
class MetricReport:
    """Per-query and aggregate metric values with the settings that made them.

    ``per_query`` has one row per query: query, p_q, da_ss, ga_ss_within and
    one p_s_<group> column per group.
    """
    per_query: pd.DataFrame
    aggregate: Dict[str, float]
    metadata: Dict[str, object] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        """Per-query rows followed by one aggregate row with query '*'."""
        aggregate = {'query': '*', 'p_q': self.per_query['p_q'].sum()}
        aggregate.update(self.aggregate)
        return pd.concat([self.per_query, pd.DataFrame([aggregate])],
                         ignore_index=True)


def weighted_mean(values: pd.Series, weights: pd.Series,
                  weighting: str = 'pq') -> float:
    """Average within-query values over queries, by p(q) or uniformly."""
    if weighting not in WEIGHTINGS:
        raise InvalidArgumentError(f'unknown weighting {weighting!r}')
    if weighting == 'uniform' or weights.sum() <= 0:
        return float(math.fsum(values) / len(values))
    return float(
        math.fsum(values * weights) / math.fsum(weights))


def _evaluate_query(ctx: EvalContext, query: str) -> Dict[str, float]:
    row = {
        'query': query,
        'p_q': ctx.model.p_q.get(query),
        'da_ss': da_ss_within(ctx, query),
        'ga_ss_within': ga_ss_within(ctx, query),
    }
    for g in ctx.model.catalog.groups:
        if ctx.model.p_t_qg.has_row((query, g)):
            row[f'p_s_{g}'] = group_query_success(ctx, g, query)
        else:
            row[f'p_s_{g}'] = float('nan')
    return row


def evaluate(ctx: EvalContext,
             queries: Optional[Sequence[str]] = None,
             weighting: str = 'pq',
             workers: Optional[int] = None,
             metadata: Optional[Dict[str, object]] = None) -> MetricReport:
    """Evaluate every metric for a set of queries.

    Queries are evaluated in parallel, the aggregation always runs over the
    sorted query ids so the result does not depend on the worker count.

    Args:
        ctx (EvalContext): Model, browsing model and policies.
        queries (Optional[Sequence[str]], optional): Defaults to all queries.
        weighting (str, optional): 'pq' or 'uniform' averaging of the within
            query metrics. Defaults to 'pq'.
        workers (Optional[int], optional): Defaults to GASS_THREADS.
        metadata (Optional[Dict[str, object]], optional): Extra metadata.

    Returns:
        MetricReport: The report.
    """
    queries = _query_set(ctx, queries)
    workers = workers or Settings.threads()
    # pool.map keeps query order
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(lambda q: _evaluate_query(ctx, q), queries))
    per_query = pd.DataFrame(rows)
    aggregate = {
        'da_ss': weighted_mean(per_query['da_ss'], per_query['p_q'],
                               weighting),
        'ga_ss_within': weighted_mean(per_query['ga_ss_within'],
                                      per_query['p_q'], weighting),
        'ga_ss_sum_of_product': ga_ss_sum_of_product(ctx, queries),
        'ga_ss_product_of_sum': ga_ss_product_of_sum(ctx, queries),
    }
    meta = {
        'tool': 'gass',
        'version': __version__,
        'gamma': ctx.browsing.gamma,
        'epsilon': ctx.epsilon,
        'weighting': weighting,
        'queries': len(queries),
    }
    meta.update(metadata or {})
    logger.info('evaluated %d queries: %s', len(queries), aggregate)
    return MetricReport(per_query, aggregate, meta)


def build_policies(model: ProbModel,
                   ranker: str,
                   beta: Union[float, str],
                   samples: int = DEFAULT_SAMPLES,
                   seed: int = DEFAULT_SEED,
                   depth: Optional[int] = None,
                   normalize_scores: bool = True,
                   workers: Optional[int] = None,
                   queries: Optional[Sequence[str]] = None) -> Dict[str, Policy]:
    """Score every query with a ranker and turn the scores into policies.

    ``beta='static'`` gives the deterministic ranking, any positive beta a
    sampled Plackett-Luce policy.

    Raises:
        ValidationError: If the ranker's scores are not finite, or refer to
            unknown queries or items.
    """
    if queries is None:
        queries = model.catalog.queries
    queries = list(queries)
    scores = get_ranker(ranker).score_table(model,
                                            queries,
                                            normalize=normalize_scores)
    violations = validate_scores(scores, model.catalog)
    if violations:
        raise ValidationError(f'{ranker} produced invalid scores', violations)
    if beta == STATIC:
        return {q: static_ranking(scores, q, depth) for q in queries}
    config = PLConfig(float(beta), samples, seed, depth)
    workers = workers or Settings.threads()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        policies = list(
            pool.map(lambda q: pl_sample_policy(scores, q, config), queries))
    return dict(zip(queries, policies))


def run(model: ProbModel,
        ranker: str = 'mpc',
        beta: Union[float, str] = STATIC,
        samples: int = DEFAULT_SAMPLES,
        gamma: Optional[float] = None,
        epsilon: float = DEFAULT_EPSILON,
        seed: int = DEFAULT_SEED,
        depth: Optional[int] = None,
        normalize_scores: bool = True,
        weighting: str = 'pq',
        workers: Optional[int] = None) -> MetricReport:
    """Rank, randomize and evaluate in one go, the eval pipeline."""
    browsing = BrowsingModel() if gamma is None else BrowsingModel(
        gamma=gamma)
    policies = build_policies(model, ranker, beta, samples, seed, depth,
                              normalize_scores, workers)
    ctx = EvalContext(model, browsing, policies, epsilon)
    metadata = {
        'ranker': get_ranker(ranker).name,
        'beta': beta,
        'samples': samples,
        'seed': seed,
        'depth': depth,
        'residual_mass': browsing.residual_mass(depth),
        'normalized_scores': normalize_scores,
    }
    return evaluate(ctx, weighting=weighting, workers=workers,
                    metadata=metadata)
