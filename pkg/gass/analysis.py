"""Experiment protocols built on top of the metrics.

- sweeps of every metric over rankers and PL temperatures
- min-max normalization of the sweep series for plotting
- Kendall tau-b correlation between metrics across sweep cells
- the two-query toy table and the single-query motivating cases
- a top-K case study of what one query shows at different temperatures
"""

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats
from tqdm import tqdm

from gass.browse import BrowsingModel
from gass.config import (DEFAULT_BETAS, DEFAULT_EPSILON, DEFAULT_GAMMA,
                         DEFAULT_RANKERS, DEFAULT_SAMPLES, DEFAULT_SEED)
from gass.core import CondProb, KIND_INTENT, KIND_ITEM, ProbModel, RelevanceTable
from gass.estimate import InteractionLog, build_model
from gass.exceptions import GassError, InvalidArgumentError
from gass.metrics import (STATIC, WEIGHTINGS, EvalContext, build_policies,
                          da_ss_within, evaluate, ga_ss_within)
from gass.policy import PolicySample
from gass.rankers import get_ranker

logger = logging.getLogger(__name__)

METRICS = ['da_ss', 'ga_ss_within', 'ga_ss_sum_of_product',
           'ga_ss_product_of_sum']


@dataclass(frozen=True)
class EvalConfig:
    samples: int = DEFAULT_SAMPLES
    gamma: float = DEFAULT_GAMMA
    epsilon: float = DEFAULT_EPSILON
    seed: int = DEFAULT_SEED
    depth: Optional[int] = None
    normalize_scores: bool = True
    weighting: str = 'pq'
    workers: Optional[int] = None

    def __post_init__(self):
        if self.samples < 1:
            raise InvalidArgumentError(
                f'samples must be >= 1, got {self.samples!r}')
        if not 0 < self.gamma < 1:
            raise InvalidArgumentError(
                f'gamma must lie in (0, 1), got {self.gamma!r}')
        if not self.epsilon >= 0:
            raise InvalidArgumentError(
                f'epsilon must be >= 0, got {self.epsilon!r}')
        if self.depth is not None and self.depth < 1:
            raise InvalidArgumentError(
                f'depth must be >= 1, got {self.depth!r}')
        if self.weighting not in WEIGHTINGS:
            raise InvalidArgumentError(
                f'weighting must be one of {", ".join(WEIGHTINGS)}, '
                f'got {self.weighting!r}')
        if self.workers is not None and self.workers < 1:
            raise InvalidArgumentError(
                f'workers must be >= 1, got {self.workers!r}')


@dataclass
class SweepResult:
    """Aggregate metric values per (ranker, beta) cell.

    ``frame`` has columns ranker, beta and the four metrics, beta is either a
    float or 'static'.
    """
    frame: pd.DataFrame
    metadata: Dict[str, object] = field(default_factory=dict)

    @property
    def stochastic(self) -> pd.DataFrame:
        """The cells with a sampled policy, the static reference left out."""
        return self.frame[self.frame['beta'].astype(str) != STATIC]

    def __len__(self) -> int:
        return len(self.frame)


def sweep(model: ProbModel,
          rankers: Sequence[str] = DEFAULT_RANKERS,
          betas: Sequence[float] = DEFAULT_BETAS,
          config: EvalConfig = EvalConfig(),
          include_static: bool = False) -> SweepResult:
    """Evaluate all four metrics for every (ranker, beta) combination.

    Within-query metrics are averaged over queries, weighted by p(q) unless
    the config asks for a uniform average.

    Args:
        model (ProbModel): A validated model.
        rankers (Sequence[str], optional): Ranker names. Defaults to mpc, gmpc.
        betas (Sequence[float], optional): Temperatures. Defaults to 1/8 .. 8.
        config (EvalConfig, optional): Evaluation settings.
        include_static (bool, optional): Add a 'static' reference cell per
            ranker. Defaults to False.

    Raises:
        GassError: Any evaluation error, its message prefixed with the cell.

    Returns:
        SweepResult: One row per cell, in ranker then beta order.
    """
    columns: List[Union[float, str]] = list(betas)
    if include_static:
        columns = [STATIC] + columns
    cells = list(itertools.product(rankers, columns))
    browsing = BrowsingModel(gamma=config.gamma)
    rows = []
    for ranker, beta in tqdm(cells, desc='sweep', disable=None, leave=False):
        try:
            policies = build_policies(model, ranker, beta, config.samples,
                                      config.seed, config.depth,
                                      config.normalize_scores, config.workers)
            ctx = EvalContext(model, browsing, policies, config.epsilon)
            report = evaluate(ctx,
                              weighting=config.weighting,
                              workers=config.workers)
        except GassError as exc:
            exc.args = (f'cell (ranker={ranker}, beta={beta}): {exc}', ) + \
                exc.args[1:]
            raise
        row = {'ranker': get_ranker(ranker).name, 'beta': beta}
        row.update({m: report.aggregate[m] for m in METRICS})
        rows.append(row)
        logger.info('sweep cell %s beta=%s done', ranker, beta)
    metadata = {
        'gamma': config.gamma,
        'epsilon': config.epsilon,
        'samples': config.samples,
        'seed': config.seed,
        'depth': config.depth,
        'weighting': config.weighting,
        'normalized_scores': config.normalize_scores,
    }
    return SweepResult(pd.DataFrame(rows, columns=['ranker', 'beta'] + METRICS),
                       metadata)


def min_max_normalize(values: Sequence[float]) -> np.ndarray:
    """Scale a series to [0, 1], a constant series maps to zeros.

    Raises:
        InvalidArgumentError: If the series is empty.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise InvalidArgumentError('cannot normalize an empty series')
    low, high = values.min(), values.max()
    if high == low:
        return np.zeros_like(values)
    return (values - low) / (high - low)


def kendall_tau(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Tie-corrected Kendall tau-b between two series.

    Two constant series agree perfectly (1.0), a constant series against a
    varying one carries no ordering information (0.0).

    Raises:
        InvalidArgumentError: If the lengths differ or are below 2.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape:
        raise InvalidArgumentError(
            f'series lengths differ: {xs.size} vs {ys.size}')
    if xs.size < 2:
        raise InvalidArgumentError('kendall tau needs at least 2 points')
    x_constant = np.all(xs == xs[0])
    y_constant = np.all(ys == ys[0])
    if x_constant and y_constant:
        return 1.0
    if x_constant or y_constant:
        return 0.0
    tau = stats.kendalltau(xs, ys, variant='b')[0]
    return float(np.clip(tau, -1.0, 1.0))


def correlation_matrix(result: Union[SweepResult, pd.DataFrame],
                       metrics: Sequence[str] = METRICS) -> pd.DataFrame:
    """Pairwise Kendall tau-b between metrics over the stochastic sweep cells.

    Raises:
        InvalidArgumentError: If there are fewer than 2 cells.
    """
    if isinstance(result, SweepResult):
        frame = result.stochastic
    else:
        frame = result[result['beta'].astype(str) != STATIC]
    if len(frame) < 2:
        raise InvalidArgumentError(
            'correlation needs at least 2 sweep cells')
    matrix = pd.DataFrame(np.eye(len(metrics)),
                          index=list(metrics),
                          columns=list(metrics))
    for a, b in itertools.combinations(metrics, 2):
        tau = kendall_tau(frame[a].to_numpy(), frame[b].to_numpy())
        matrix.loc[a, b] = tau
        matrix.loc[b, a] = tau
    return matrix


def plot_data(result: SweepResult) -> pd.DataFrame:
    """Long-format series for a metric-vs-beta figure.

    Each metric is min-max normalized across all of its stochastic cells,
    so the rankers share one axis per metric.
    """
    frame = result.stochastic
    parts = []
    for metric in METRICS:
        part = frame[['ranker', 'beta']].copy()
        part['metric'] = metric
        part['value'] = frame[metric].to_numpy()
        part['normalized'] = min_max_normalize(frame[metric].to_numpy())
        parts.append(part)
    data = pd.concat(parts, ignore_index=True)
    return data[['metric', 'ranker', 'beta', 'value', 'normalized']]


def _scenario(rows: Sequence[Tuple[str, str, str, int]],
              item_intent: Dict[str, str]) -> ProbModel:
    """A model where every item carries exactly one intent."""
    p_t_d = CondProb('p(t|d)', (KIND_ITEM, ), KIND_INTENT,
                     {(d, ): {t: 1.0}
                      for d, t in item_intent.items()})
    relevance = RelevanceTable({(d, t): 1.0 for d, t in item_intent.items()})
    return build_model(InteractionLog.from_rows(rows), p_t_d, relevance)


def toy_model() -> ProbModel:
    """Two equally likely queries, two equal groups with opposite intents."""
    rows = [('gA', 'q1', 'd1', 1), ('gB', 'q1', 'd2', 1),
            ('gA', 'q2', 'd1', 1), ('gB', 'q2', 'd2', 1)]
    return _scenario(rows, {'d1': 't1', 'd2': 't2'})


RETRIEVALS = (('t1', ), ('t2', ), ('t1', 't2'))


def toy_table() -> pd.DataFrame:
    """Evaluate all nine retrieval systems of the two-query toy scenario.

    Every retrieved intent succeeds with probability one and no smoothing is
    applied, so all values are exact.

    Returns:
        pd.DataFrame: One row per system, the intents retrieved for q1 and q2,
        GA-SS within each query and the four aggregate metrics.
    """
    model = toy_model()
    rows = []
    for q1, q2 in itertools.product(RETRIEVALS, repeat=2):
        fixed = {('q1', t): 1.0 for t in q1}
        fixed.update({('q2', t): 1.0 for t in q2})
        ctx = EvalContext(model, epsilon=0.0, fixed_success=fixed)
        report = evaluate(ctx, workers=1)
        within = report.per_query.set_index('query')['ga_ss_within']
        row = {
            'q1': '+'.join(q1),
            'q2': '+'.join(q2),
            'ga_ss_within_q1': within['q1'],
            'ga_ss_within_q2': within['q2'],
        }
        row.update({m: report.aggregate[m] for m in METRICS})
        rows.append(row)
    return pd.DataFrame(rows)


def toy_oracle() -> pd.DataFrame:
    """The toy table computed by hand with exact fractions."""
    half = Fraction(1, 2)
    rows = []
    for q1, q2 in itertools.product(RETRIEVALS, repeat=2):
        # group A is served by t1, group B by t2
        served = {
            (g, q): int(t in r)
            for g, t in (('gA', 't1'), ('gB', 't2'))
            for q, r in (('q1', q1), ('q2', q2))
        }
        within = {
            q: served[('gA', q)] * served[('gB', q)]
            for q in ('q1', 'q2')
        }
        da = {
            q: half * served[('gA', q)] + half * served[('gB', q)]
            for q in ('q1', 'q2')
        }
        rows.append({
            'q1': '+'.join(q1),
            'q2': '+'.join(q2),
            'ga_ss_within_q1': Fraction(within['q1']),
            'ga_ss_within_q2': Fraction(within['q2']),
            'da_ss': half * da['q1'] + half * da['q2'],
            'ga_ss_within': half * within['q1'] + half * within['q2'],
            'ga_ss_sum_of_product': half * within['q1'] + half * within['q2'],
            'ga_ss_product_of_sum':
            (half * served[('gA', 'q1')] + half * served[('gA', 'q2')]) *
            (half * served[('gB', 'q1')] + half * served[('gB', 'q2')]),
        })
    return pd.DataFrame(rows)


def motivating_cases() -> pd.DataFrame:
    """DA-SS and GA-SS for the two single-query motivating scenarios.

    Case 1, two equal groups wanting t1 and t2: half success on both intents
    scores the same DA-SS as full success on t1 alone, GA-SS tells them apart.
    Case 2, group A spread over t1..t3 and group B on t4: retrieving t1..t3
    looks more diverse than balancing t1 and t4 but leaves group B with nothing.
    """
    case1 = _scenario([('gA', 'q', 'd1', 1), ('gB', 'q', 'd2', 1)], {
        'd1': 't1',
        'd2': 't2'
    })
    case2 = _scenario([('gA', 'q', 'd1', 1), ('gA', 'q', 'd2', 1),
                       ('gA', 'q', 'd3', 1), ('gB', 'q', 'd4', 1)], {
                           'd1': 't1',
                           'd2': 't2',
                           'd3': 't3',
                           'd4': 't4'
                       })
    systems = [
        ('case 1', 'balanced t1/t2', case1, {'t1': 0.5, 't2': 0.5}),
        ('case 1', 'exclusive t1', case1, {'t1': 1.0}),
        ('case 2', 'diverse t1/t2/t3', case2, {
            't1': 1.0,
            't2': 1.0,
            't3': 1.0
        }),
        ('case 2', 'balanced t1/t4', case2, {'t1': 1.0, 't4': 1.0}),
    ]
    rows = []
    for case, system, model, success in systems:
        ctx = EvalContext(model,
                          epsilon=0.0,
                          fixed_success={('q', t): p
                                         for t, p in success.items()})
        rows.append({
            'case': case,
            'system': system,
            'da_ss': da_ss_within(ctx, 'q'),
            'ga_ss': ga_ss_within(ctx, 'q'),
        })
    return pd.DataFrame(rows)


def case_study(model: ProbModel,
               query: str,
               rankers: Sequence[str] = DEFAULT_RANKERS,
               betas: Sequence[float] = DEFAULT_BETAS,
               depth: int = 10,
               config: EvalConfig = EvalConfig()) -> pd.DataFrame:
    """What one query shows at each temperature.

    For every ranker and beta, plus the static ranking, lists the top-K of
    the most frequent sampled ranking with the query's DA-SS and GA-SS.
    """
    model.candidates_for(query)
    browsing = BrowsingModel(gamma=config.gamma)
    rows = []
    for ranker in rankers:
        for beta in [STATIC] + list(betas):
            policies = build_policies(model, ranker, beta, config.samples,
                                      config.seed, config.depth,
                                      config.normalize_scores, config.workers,
                                      [query])
            policy = policies[query]
            ctx = EvalContext(model, browsing, {query: policy},
                              config.epsilon)
            shown = policy.modal_ranking(depth) if isinstance(
                policy, PolicySample) else policy
            rows.append({
                'ranker': get_ranker(ranker).name,
                'beta': beta,
                'top': ' '.join(shown.items[:depth]),
                'da_ss': da_ss_within(ctx, query),
                'ga_ss_within': ga_ss_within(ctx, query),
            })
    return pd.DataFrame(rows)
