import math

import numpy as np
import pytest

from gass.analysis import toy_model
from gass.core import (KIND_GROUP, KIND_INTENT, KIND_ITEM, KIND_QUERY,
                       Catalog, CondProb, MarginalProb, ProbModel,
                       RelevanceTable)
from gass.estimate import SynthConfig, gen_synthetic, intent_given_query_group


def build_model(p_d_qg, p_g=None, p_q_g=None, p_t_d=None, relevance=None):
    """A consistent model from per-(query, group) item distributions.

    p(g) defaults to uniform, p(q|g) to uniform over the queries a group
    issues, every item to its own intent 't_<item>' with relevance 1.
    """
    queries, groups, items = {}, {}, {}
    for (q, g), row in p_d_qg.items():
        queries.setdefault(q, None)
        groups.setdefault(g, None)
        for d in row:
            items.setdefault(d, None)
    if p_g is None:
        p_g = {g: 1 / len(groups) for g in groups}
    if p_q_g is None:
        p_q_g = {}
        for g in groups:
            issued = [q for q in queries if (q, g) in p_d_qg]
            p_q_g[g] = {q: 1 / len(issued) for q in issued}
    if p_t_d is None:
        p_t_d = {d: {f't_{d}': 1.0} for d in items}
    if relevance is None:
        relevance = {(d, t): 1.0
                     for d, row in p_t_d.items() for t, p in row.items()
                     if p > 0}
    intents = {}
    for row in p_t_d.values():
        for t in row:
            intents.setdefault(t, None)

    p_q = {
        q: math.fsum(p_g[g] * p_q_g[g].get(q, 0.0) for g in groups)
        for q in queries
    }
    p_g_q = {}
    for q in queries:
        p_g_q[q] = {
            g: p_g[g] * p_q_g[g][q] / p_q[q]
            for g in groups if p_q_g[g].get(q, 0.0) > 0
        }
    candidates = {}
    for (q, _), row in p_d_qg.items():
        known = candidates.setdefault(q, [])
        known += [d for d in row if d not in known]

    p_d_qg_table = CondProb('p(d|q,g)', (KIND_QUERY, KIND_GROUP), KIND_ITEM,
                            p_d_qg)
    p_t_d_table = CondProb('p(t|d)', (KIND_ITEM, ), KIND_INTENT,
                           {(d, ): row
                            for d, row in p_t_d.items()})
    return ProbModel(
        catalog=Catalog(tuple(queries), tuple(items), tuple(intents),
                        tuple(groups)),
        p_d_qg=p_d_qg_table,
        p_t_d=p_t_d_table,
        p_t_qg=intent_given_query_group(p_t_d_table, p_d_qg_table),
        p_q=MarginalProb('p(q)', KIND_QUERY, p_q),
        p_q_g=CondProb('p(q|g)', (KIND_GROUP, ), KIND_QUERY,
                       {(g, ): row
                        for g, row in p_q_g.items()}),
        p_g=MarginalProb('p(g)', KIND_GROUP, p_g),
        p_g_q=CondProb('p(g|q)', (KIND_QUERY, ), KIND_GROUP,
                       {(q, ): row
                        for q, row in p_g_q.items()}),
        relevance=RelevanceTable(relevance),
        candidates={q: tuple(c)
                    for q, c in candidates.items()},
    )


def random_model(rng, queries=None, items=None, intents=None, groups=None):
    """A small random model, every group issuing every query."""
    n_q = queries or int(rng.integers(1, 5))
    n_d = items or int(rng.integers(1, 7))
    n_t = intents or int(rng.integers(1, 4))
    n_g = groups or int(rng.integers(1, 4))
    qs = [f'q{i}' for i in range(n_q)]
    ds = [f'd{i}' for i in range(n_d)]
    ts = [f't{i}' for i in range(n_t)]
    gs = [f'g{i}' for i in range(n_g)]
    p_d_qg = {(q, g): dict(zip(ds, rng.dirichlet(np.ones(n_d))))
              for q in qs for g in gs}
    p_t_d = {d: dict(zip(ts, rng.dirichlet(np.ones(n_t)))) for d in ds}
    relevance = {(d, t): float(rng.random()) for d in ds for t in ts}
    p_g = dict(zip(gs, rng.dirichlet(np.ones(n_g))))
    p_q_g = {g: dict(zip(qs, rng.dirichlet(np.ones(n_q)))) for g in gs}
    return build_model(p_d_qg, p_g, p_q_g, p_t_d, relevance)


@pytest.fixture
def make_model():
    return build_model


@pytest.fixture
def make_random_model():
    return random_model


@pytest.fixture
def toy():
    return toy_model()


@pytest.fixture(scope='session')
def synthetic_model():
    """100 queries, 500 items, 10 intents, 2 groups with g0 at 90% of traffic."""
    return gen_synthetic(SynthConfig(seed=42)).to_model()
