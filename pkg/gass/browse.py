"""User browsing models that turn rank positions into exposure probabilities.

Only rank-biased precision (RBP) is shipped: a searcher inspects the item at
rank k with probability gamma^(k-1), so exposure falls off exponentially
further down the list. Items missing from a (possibly truncated) ranking are
never exposed.
"""

import enum
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from gass.config import DEFAULT_GAMMA
from gass.exceptions import InvalidArgumentError

if TYPE_CHECKING:
    from gass.policy import PolicySample


class BrowsingKind(enum.Enum):
    RBP = 'rbp'


@dataclass(frozen=True)
class BrowsingModel:
    kind: BrowsingKind = BrowsingKind.RBP
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise InvalidArgumentError(
                f'gamma must lie in (0, 1), got {self.gamma!r}')

    def position_weights(self, depth: int) -> np.ndarray:
        """Exposure of ranks 1..depth as an array."""
        return self.gamma**np.arange(depth, dtype=np.float64)

    def residual_mass(self, depth: Optional[int]) -> float:
        """Browsing mass lost past the evaluated depth, gamma^K."""
        if depth is None:
            return 0.0
        return self.gamma**depth


@dataclass(frozen=True)
class Ranking:
    """One ordered list of distinct items for a query, rank 1 first."""
    query: str
    items: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, 'items', tuple(self.items))
        if len(set(self.items)) != len(self.items):
            raise InvalidArgumentError(
                f'ranking for {self.query!r} repeats an item')

    def __len__(self) -> int:
        return len(self.items)

    def rank(self, item: str) -> Optional[int]:
        """1-based rank of an item, None if it is not in the list."""
        try:
            return self.items.index(item) + 1
        except ValueError:
            return None


def exposure_at_rank(rank: int, model: BrowsingModel) -> float:
    """Probability that the item at ``rank`` is inspected.

    Raises:
        InvalidArgumentError: If rank is below 1.
    """
    if rank < 1:
        raise InvalidArgumentError(f'rank must be >= 1, got {rank!r}')
    return model.gamma**(rank - 1)


def exposure_static(ranking: Ranking, item: str,
                    model: BrowsingModel) -> float:
    rank = ranking.rank(item)
    if rank is None:
        return 0.0
    return exposure_at_rank(rank, model)


def exposure_expected(policy: 'PolicySample', item: str,
                      model: BrowsingModel) -> float:
    """Expected exposure of an item under a stochastic policy.

    The weighted mean of the static exposure over the policy's rankings.

    Args:
        policy (PolicySample): Weighted rankings for one query.
        item (str): The item id.
        model (BrowsingModel): The browsing model.

    Raises:
        InvalidArgumentError: If the policy holds no rankings.

    Returns:
        float: Expected exposure, in [0, 1].
    """
    if len(policy) == 0:
        raise InvalidArgumentError(f'empty policy for {policy.query!r}')
    if item not in policy.items:
        return 0.0
    return float(exposure_vector(policy, model)[policy.items.index(item)])


def exposure_vector(policy: Union[Ranking, 'PolicySample'],
                    model: BrowsingModel,
                    items: Optional[Sequence[str]] = None) -> np.ndarray:
    """Exposure of every item under a static ranking or a stochastic policy.

    Args:
        policy (Union[Ranking, PolicySample]): What is shown for the query.
        model (BrowsingModel): The browsing model.
        items (Optional[Sequence[str]]): Items to report, in this order. Defaults
            to the ranking's items or the policy's candidates.

    Returns:
        np.ndarray: Exposure aligned with ``items``.
    """
    if isinstance(policy, Ranking):
        weights = model.position_weights(len(policy))
        by_item: Dict[str, float] = dict(zip(policy.items, weights))
        if items is None:
            items = policy.items
        return np.array([by_item.get(d, 0.0) for d in items],
                        dtype=np.float64)

    if len(policy) == 0:
        raise InvalidArgumentError(f'empty policy for {policy.query!r}')
    orders = policy.orders
    contributions = policy.weights[:, None] * model.position_weights(
        orders.shape[1])[None, :]
    exposure = np.bincount(orders.ravel(),
                           weights=contributions.ravel(),
                           minlength=len(policy.items))
    np.clip(exposure, 0.0, 1.0, out=exposure)
    if items is None:
        return exposure
    position = {d: i for i, d in enumerate(policy.items)}
    return np.array(
        [exposure[position[d]] if d in position else 0.0 for d in items],
        dtype=np.float64)
