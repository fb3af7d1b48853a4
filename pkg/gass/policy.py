"""Static rankings and Plackett-Luce stochastic ranking policies.

A static ranker sorts candidates by score. A stochastic policy is built on top
of the same scores by sampling items one at a time without replacement, each
draw a softmax over the remaining scores divided by the temperature beta. A
small beta gives back the static ranking, a large one approaches a uniformly
random permutation.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from gass.browse import Ranking
from gass.config import (DEFAULT_SAMPLES, DEFAULT_SEED, MAX_EXACT_CANDIDATES,
                         PROB_TOLERANCE)
from gass.core import ScoreTable
from gass.exceptions import CapacityError, InvalidArgumentError
from utils import stable_hash

logger = logging.getLogger(__name__)

_UINT64 = 2**64


@dataclass(frozen=True)
class PLConfig:
    beta: float
    samples: int = DEFAULT_SAMPLES
    seed: int = DEFAULT_SEED
    depth: Optional[int] = None

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise InvalidArgumentError(
                f'beta must be a positive real, got {self.beta!r}')
        if self.samples < 1:
            raise InvalidArgumentError(
                f'samples must be >= 1, got {self.samples!r}')
        if self.depth is not None and self.depth < 1:
            raise InvalidArgumentError(
                f'depth must be >= 1, got {self.depth!r}')


@dataclass(frozen=True, eq=False)
class PolicySample:
    """An empirical stochastic policy for one query.

    ``orders`` holds one sampled ranking per row as indices into ``items``
    (the candidate set), ``weights`` the probability mass of each row.
    """
    query: str
    items: Tuple[str, ...]
    orders: np.ndarray
    weights: np.ndarray
    beta: Optional[float] = None
    seed: Optional[int] = None
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'items', tuple(self.items))
        orders = np.asarray(self.orders, dtype=np.int64)
        if orders.ndim == 1:
            orders = orders[None, :]
        weights = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, 'orders', orders)
        object.__setattr__(self, 'weights', weights)
        if orders.shape[0] != weights.shape[0]:
            raise InvalidArgumentError('one weight per ranking is required')
        if orders.shape[0] == 0:
            return
        if np.any(weights <= 0):
            raise InvalidArgumentError('policy weights must be positive')
        total = math.fsum(weights)
        if abs(total - 1.0) > PROB_TOLERANCE:
            raise InvalidArgumentError(
                f'policy weights sum to {total!r}, expected 1')
        if orders.min() < 0 or orders.max() >= len(self.items):
            raise InvalidArgumentError('ranking refers to a non-candidate')

    def __len__(self) -> int:
        return self.orders.shape[0]

    @property
    def samples(self) -> int:
        return len(self)

    @property
    def depth(self) -> int:
        return self.orders.shape[1]

    @property
    def rankings(self) -> List[Tuple[Ranking, float]]:
        return [(Ranking(self.query, tuple(self.items[i] for i in row)),
                 float(w)) for row, w in zip(self.orders, self.weights)]

    def frequencies(self,
                    depth: Optional[int] = None) -> Dict[Tuple[str, ...], float]:
        """Total weight per distinct ranking, or per distinct top-K prefix."""
        totals: Dict[Tuple[str, ...], float] = {}
        for ranking, w in self.rankings:
            key = ranking.items if depth is None else ranking.items[:depth]
            totals[key] = totals.get(key, 0.0) + w
        return totals

    def modal_ranking(self, depth: Optional[int] = None) -> Ranking:
        """The ranking (or top-K prefix) carrying the most weight.

        Ties are broken by item ids.
        """
        totals = self.frequencies(depth)
        best = min(totals.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        return Ranking(self.query, best)

    @classmethod
    def from_rankings(cls,
                      query: str,
                      rankings: Sequence[Tuple[Ranking, float]],
                      items: Optional[Sequence[str]] = None,
                      **kwargs) -> 'PolicySample':
        """Build a policy from explicit (ranking, weight) pairs."""
        if items is None:
            seen: Dict[str, None] = {}
            for ranking, _ in rankings:
                for d in ranking.items:
                    seen.setdefault(d, None)
            items = list(seen)
        position = {d: i for i, d in enumerate(items)}
        depth = {len(r) for r, _ in rankings}
        if len(depth) > 1:
            raise InvalidArgumentError('rankings differ in length')
        orders = np.array([[position[d] for d in r.items]
                           for r, _ in rankings],
                          dtype=np.int64).reshape(len(rankings), -1)
        weights = np.array([w for _, w in rankings], dtype=np.float64)
        return cls(query, tuple(items), orders, weights, **kwargs)

    @classmethod
    def static(cls, ranking: Ranking,
               items: Optional[Sequence[str]] = None) -> 'PolicySample':
        """The degenerate policy that always shows one ranking."""
        return cls.from_rankings(ranking.query, [(ranking, 1.0)], items=items)


def static_ranking(scores: ScoreTable,
                   query: str,
                   depth: Optional[int] = None) -> Ranking:
    """Sort the query's candidates by score, descending.

    Ties are broken by item id ascending.

    Args:
        scores (ScoreTable): The ranker's scores.
        query (str): The query id.
        depth (Optional[int], optional): Keep only the top K. Defaults to None.

    Returns:
        Ranking: The static ranking.
    """
    candidates = scores.candidates_for(query)
    ranked = sorted(candidates,
                    key=lambda d: (-scores.scores.get((d, query), 0.0), d))
    if depth is not None:
        ranked = ranked[:depth]
    return Ranking(query, tuple(ranked))


def query_stream(seed: int, query: str) -> np.random.Generator:
    """Independent, scheduling-free random stream for one query.

    The master seed is mixed with a stable hash of the query id, so the
    stream does not depend on which worker evaluates the query or when.
    """
    sequence = np.random.SeedSequence([seed % _UINT64, stable_hash(query)])
    return np.random.Generator(np.random.Philox(sequence))


def _log_weights(scores: np.ndarray, beta: float) -> np.ndarray:
    # max subtraction keeps exp() finite at small beta
    return (scores - scores.max()) / beta


def _sample_block(log_weights: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Sequential PL draws for many samples at once.

    Args:
        log_weights (np.ndarray): Per-candidate log weights, shape (n,).
        uniforms (np.ndarray): Uniform [0, 1) draws, shape (samples, depth).

    Returns:
        np.ndarray: Candidate indices, shape (samples, depth).
    """
    n_samples, depth = uniforms.shape
    ind = np.arange(n_samples)
    logits = np.tile(log_weights[None, :], (n_samples, 1))
    rankings = np.empty((n_samples, depth), dtype=np.int64)
    for k in range(depth):
        logits -= np.max(logits, axis=1)[:, None]
        probs = np.exp(logits)
        cumprobs = np.cumsum(probs, axis=1)
        targets = uniforms[:, k] * cumprobs[:, -1]
        sampled = np.sum(targets[:, None] >= cumprobs, axis=1)
        rankings[:, k] = sampled
        logits[ind, sampled] = -np.inf
    return rankings


def pl_sample_one(scores: ScoreTable,
                  query: str,
                  beta: float,
                  rng: np.random.Generator,
                  depth: Optional[int] = None) -> Ranking:
    """Draw one ranking from the Plackett-Luce policy.

    Args:
        scores (ScoreTable): The ranker's scores.
        query (str): The query id.
        beta (float): Softmax temperature, positive.
        rng (np.random.Generator): Random stream to draw from.
        depth (Optional[int], optional): Stop after K draws. Defaults to None.

    Returns:
        Ranking: A permutation of the candidates, or its top-K prefix.
    """
    if not beta > 0:
        raise InvalidArgumentError(f'beta must be positive, got {beta!r}')
    candidates = scores.candidates_for(query)
    depth = len(candidates) if depth is None else min(depth, len(candidates))
    log_weights = _log_weights(scores.vector(query), beta)
    order = _sample_block(log_weights, rng.random((1, depth)))[0]
    return Ranking(query, tuple(candidates[i] for i in order))


def pl_sample_policy(scores: ScoreTable, query: str,
                     config: PLConfig) -> PolicySample:
    """Sample ``config.samples`` rankings, each with weight 1/samples.

    Sample i only depends on (seed, query, i), so the result is the same
    whatever order queries are evaluated in.
    """
    candidates = scores.candidates_for(query)
    depth = len(candidates) if config.depth is None else min(
        config.depth, len(candidates))
    rng = query_stream(config.seed, query)
    uniforms = rng.random((config.samples, depth))
    orders = _sample_block(_log_weights(scores.vector(query), config.beta),
                           uniforms)
    weights = np.full(config.samples, 1.0 / config.samples)
    return PolicySample(query,
                        candidates,
                        orders,
                        weights,
                        beta=config.beta,
                        seed=config.seed,
                        metadata={'samples': config.samples, 'depth': depth})


def pl_permutation_prob(scores: ScoreTable, query: str, beta: float,
                        ranking: Ranking) -> float:
    """Exact Plackett-Luce probability of a full permutation.

    The product over positions of the softmax of the chosen item among the
    items not placed yet.

    Raises:
        InvalidArgumentError: If the ranking is not a permutation of the
            query's candidates.
    """
    if not beta > 0:
        raise InvalidArgumentError(f'beta must be positive, got {beta!r}')
    candidates = scores.candidates_for(query)
    if sorted(ranking.items) != sorted(candidates):
        raise InvalidArgumentError(
            f'ranking is not a permutation of the candidates of {query!r}')
    position = {d: i for i, d in enumerate(candidates)}
    log_weights = _log_weights(scores.vector(query), beta)
    order = [position[d] for d in ranking.items]
    log_prob = 0.0
    for k, chosen in enumerate(order):
        log_prob += log_weights[chosen] - logsumexp(log_weights[order[k:]])
    return math.exp(log_prob)


def _enumerate(log_weights: List[float], remaining: Tuple[int, ...],
               prefix: Tuple[int, ...], log_prob: float):
    if not remaining:
        yield prefix, log_prob
        return
    log_denom = logsumexp([log_weights[i] for i in remaining])
    for i in remaining:
        rest = tuple(j for j in remaining if j != i)
        yield from _enumerate(log_weights, rest, prefix + (i, ),
                              log_prob + log_weights[i] - log_denom)


def pl_exact_policy(scores: ScoreTable,
                    query: str,
                    beta: float,
                    max_n: int = MAX_EXACT_CANDIDATES) -> PolicySample:
    """Enumerate every permutation with its exact PL probability.

    Permutations whose probability underflows to zero are left out.

    Raises:
        CapacityError: If the query has more than ``max_n`` candidates.
    """
    if not beta > 0:
        raise InvalidArgumentError(f'beta must be positive, got {beta!r}')
    candidates = scores.candidates_for(query)
    n = len(candidates)
    if n > max_n:
        raise CapacityError(
            f'{n} candidates for {query!r}, exact enumeration allows {max_n}')
    log_weights = list(_log_weights(scores.vector(query), beta))
    orders, weights = [], []
    for order, log_prob in _enumerate(log_weights, tuple(range(n)), (), 0.0):
        weight = math.exp(log_prob)
        if weight > 0.0:
            orders.append(order)
            weights.append(weight)
    logger.debug('enumerated %d permutations for %s', len(orders), query)
    return PolicySample(query,
                        candidates,
                        np.array(orders, dtype=np.int64).reshape(len(orders), n),
                        np.array(weights),
                        beta=beta,
                        metadata={'exact': True, 'permutations': math.factorial(n)})
