"""Score builders for the two popularity rankers.

Most Popular Completion (MPC) ranks candidates by p(d|q), the group mixture of
the group-conditional popularity. Group-aware MPC (gMPC) ranks by the product
over groups of p(d|q,g), so an item only scores well if every group that
issues the query wants it. For recommendation the same two models go by MPV
and gMPV.
"""

import abc
import logging
from typing import Dict, Iterable, Optional

import numpy as np

from gass.config import DEFAULT_EPSILON, LOG_SPACE_THRESHOLD, SCORE_FLOOR
from gass.core import KIND_QUERY, ProbModel, ScoreTable
from gass.exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)


def _check_query(model: ProbModel, query: str):
    model.catalog.index(KIND_QUERY, query)


def mpc_scores(model: ProbModel, query: str) -> Dict[str, float]:
    """p(d|q) = sum_g p(g|q) p(d|q,g) for every candidate of the query.

    Raises:
        NotFoundError: If the query is unknown or has no p(g|q) row.
    """
    _check_query(model, query)
    p_g = model.p_g_q.row(query)
    scores = {}
    for d in model.candidates_for(query):
        scores[d] = sum(p * model.p_d_qg.prob((query, g), d)
                        for g, p in p_g.items())
    return scores


def gmpc_scores(model: ProbModel,
                query: str,
                smoothing: float = DEFAULT_EPSILON) -> Dict[str, float]:
    """prod_g (p(d|q,g) + smoothing) over the groups issuing the query.

    Raises:
        NotFoundError: If the query is unknown.
        InvalidArgumentError: If smoothing is negative.
    """
    if smoothing < 0:
        raise InvalidArgumentError(
            f'smoothing must be >= 0, got {smoothing!r}')
    _check_query(model, query)
    groups = [
        g for g in model.catalog.groups if model.p_d_qg.has_row((query, g))
    ]
    if not groups:
        logger.warning('no group issues %s, gMPC scores are flat', query)
    candidates = model.candidates_for(query)
    factors = np.array(
        [[model.p_d_qg.prob((query, g), d) + smoothing for g in groups]
         for d in candidates],
        dtype=np.float64).reshape(len(candidates), len(groups))
    if len(groups) > LOG_SPACE_THRESHOLD:
        with np.errstate(divide='ignore'):
            products = np.exp(np.log(factors).sum(axis=1))
    else:
        products = np.prod(factors, axis=1)
    return {d: float(s) for d, s in zip(candidates, products)}


def log_scale(row: Dict[str, float],
              floor: float = SCORE_FLOOR) -> Dict[str, float]:
    """Max-relative log scores for one query.

    Raises:
        InvalidArgumentError: If a score is negative or not finite.
    """
    values = np.array(list(row.values()), dtype=np.float64)
    if values.size and not (np.isfinite(values).all() and
                            (values >= 0).all()):
        raise InvalidArgumentError('scores must be finite and >= 0')
    top = values.max(initial=0.0)
    if top <= 0:
        return {d: 0.0 for d in row}
    logits = np.log(values / top + floor) - np.log1p(floor)
    return {d: float(s) for d, s in zip(row, logits)}


class Ranker(abc.ABC):
    """A static ranker that assigns r_{d,q} to every candidate."""
    key = ''
    name = ''

    def __init__(self, name: Optional[str] = None):
        if name is not None:
            self.name = name

    @abc.abstractmethod
    def scores(self, model: ProbModel, query: str) -> Dict[str, float]:
        """Raw score of every candidate of the query."""

    def score_table(self,
                    model: ProbModel,
                    queries: Optional[Iterable[str]] = None,
                    normalize: bool = True) -> ScoreTable:
        """Scores for every query, as a ScoreTable.

        Normalized scores are log(s / top + floor) - log(1 + floor), with top
        the query's largest raw score. The raw order is kept. A Plackett-Luce
        softmax over these at beta 1 samples in proportion to s / top + floor.
        A query whose scores are all zero gets flat scores.

        Args:
            model (ProbModel): The probability model.
            queries (Optional[Iterable[str]], optional): Defaults to all queries.
            normalize (bool, optional): Use the log scale above instead of the
                raw scores. Defaults to True.

        Returns:
            ScoreTable: Candidates in model order with their scores.
        """
        if queries is None:
            queries = model.catalog.queries
        rows = {}
        for q in queries:
            row = self.scores(model, q)
            if normalize:
                row = log_scale(row)
            rows[q] = row
        return ScoreTable.from_rows(rows)


class MPC(Ranker):
    key = 'mpc'
    name = 'MPC'

    def scores(self, model: ProbModel, query: str) -> Dict[str, float]:
        return mpc_scores(model, query)


class GMPC(Ranker):
    key = 'gmpc'
    name = 'gMPC'

    def __init__(self,
                 name: Optional[str] = None,
                 smoothing: float = DEFAULT_EPSILON):
        super().__init__(name)
        self.smoothing = smoothing

    def scores(self, model: ProbModel, query: str) -> Dict[str, float]:
        return gmpc_scores(model, query, self.smoothing)


RANKERS = {
    'mpc': (MPC, 'MPC'),
    'gmpc': (GMPC, 'gMPC'),
    'mpv': (MPC, 'MPV'),
    'gmpv': (GMPC, 'gMPV'),
}


def get_ranker(key: str) -> Ranker:
    """Look up a ranker by its command-line name.

    Raises:
        InvalidArgumentError: If the name is not one of mpc, gmpc, mpv, gmpv.
    """
    try:
        cls, display = RANKERS[key.lower()]
    except KeyError:
        raise InvalidArgumentError(
            f'unknown ranker {key!r}, choose from {", ".join(RANKERS)}'
        ) from None
    ranker = cls(display)
    ranker.key = key.lower()
    return ranker
