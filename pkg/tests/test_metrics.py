from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from gass.browse import BrowsingModel, Ranking
from gass.core import KIND_GROUP, KIND_QUERY, CondProb, RelevanceTable
from gass.exceptions import NotFoundError, ValidationError
from gass.metrics import (STATIC, EvalContext, build_policies, da_ss_within,
                          evaluate, ga_ss_product_of_sum,
                          ga_ss_sum_of_product, ga_ss_within,
                          group_query_success, intent_query_success,
                          item_success, run)
from gass.policy import pl_exact_policy
from gass.rankers import RANKERS, Ranker, get_ranker

RBP = BrowsingModel(gamma=0.8)


def two_group_model(make_model):
    """Group A wants intent tA (item dA), group B intent tB (item dB)."""
    return make_model(
        {
            ('q', 'gA'): {'dA': 1.0},
            ('q', 'gB'): {'dB': 1.0}
        },
        p_t_d={
            'dA': {'tA': 1.0},
            'dB': {'tB': 1.0}
        })


def shuffled(rng, model):
    """A random static ranking per query."""
    return {
        q: Ranking(q, tuple(rng.permutation(model.candidates_for(q)).tolist()))
        for q in model.catalog.queries
    }


def fixed(model, success, epsilon=0.0):
    return EvalContext(model,
                       epsilon=epsilon,
                       fixed_success={('q', t): p
                                      for t, p in success.items()})


def test_item_success(make_model):
    model = make_model({('q', 'gA'): {'d1': 0.5, 'd2': 0.5}},
                       relevance={
                           ('d1', 't_d1'): 0.0,
                           ('d2', 't_d2'): 0.5
                       })
    ctx = EvalContext(model, RBP, {'q': Ranking('q', ('d1', 'd2'))}, 0.0)
    assert item_success(ctx, 'd1', 't_d1', 'q') == 0.0
    assert item_success(ctx, 'd2', 't_d2', 'q') == pytest.approx(0.4)
    ctx = EvalContext(model, RBP, {'q': Ranking('q', ('d2', 'd1'))}, 0.0)
    assert item_success(ctx, 'd2', 't_d2', 'q') == pytest.approx(0.5)


def test_intent_query_success(make_model):
    model = make_model({('q', 'gA'): {'d1': 0.5, 'd2': 0.5}},
                       p_t_d={
                           'd1': {'t': 1.0},
                           'd2': {'t': 1.0}
                       },
                       relevance={
                           ('d1', 't'): 0.5,
                           ('d2', 't'): 0.625
                       })
    ctx = EvalContext(model, RBP, {'q': Ranking('q', ('d1', 'd2'))}, 0.0)
    assert intent_query_success(ctx, 't', 'q') == pytest.approx(0.75)
    nothing = EvalContext(model, RBP, {'q': Ranking('q', ())}, 0.0)
    assert intent_query_success(nothing, 't', 'q') == 0.0


def test_absorbing_item(make_model):
    model = make_model({('q', 'gA'): {'d1': 1.0}})
    ctx = EvalContext(model, RBP, {'q': Ranking('q', ('d1', ))}, 0.0)
    assert intent_query_success(ctx, 't_d1', 'q') == 1.0
    assert group_query_success(ctx, 'gA', 'q') == 1.0
    assert ga_ss_within(ctx, 'q') == 1.0


def test_group_success_is_intent_mixture(make_model):
    model = make_model({('q', 'gA'): {'d1': 0.5, 'd2': 0.5}})
    ctx = fixed(model, {'t_d1': 1.0, 't_d2': 0.0})
    assert group_query_success(ctx, 'gA', 'q') == pytest.approx(0.5)


def test_unserved_group(make_model):
    ctx = fixed(two_group_model(make_model), {'tA': 1.0})
    assert group_query_success(ctx, 'gA', 'q') == 1.0
    assert group_query_success(ctx, 'gB', 'q') == 0.0
    assert ga_ss_within(ctx, 'q') == 0.0
    assert da_ss_within(ctx, 'q') == pytest.approx(0.5)


def test_within_query_product(make_model):
    model = two_group_model(make_model)
    assert ga_ss_within(fixed(model, {'tA': 1.0, 'tB': 1.0}), 'q') == 1.0
    ctx = fixed(model, {'tA': 0.8, 'tB': 0.5})
    assert ga_ss_within(ctx, 'q') == pytest.approx(0.4)


def test_epsilon_keeps_products_positive(make_model):
    ctx = fixed(two_group_model(make_model), {'tA': 1.0}, epsilon=1e-6)
    assert 0.0 < ga_ss_within(ctx, 'q') < 1e-5


def test_unknown_group_row(make_model):
    ctx = fixed(two_group_model(make_model), {'tA': 1.0})
    with pytest.raises(NotFoundError):
        group_query_success(ctx, 'gC', 'q')


def test_single_query_variants_converge(make_random_model):
    rng = np.random.default_rng(11)
    for _ in range(100):
        model = make_random_model(rng, queries=1)
        q = model.catalog.queries[0]
        policies = build_policies(model, 'mpc', STATIC, workers=1)
        ctx = EvalContext(model, RBP, policies)
        within = ga_ss_within(ctx, q)
        assert abs(ga_ss_sum_of_product(ctx) - within) < 1e-12
        assert abs(ga_ss_product_of_sum(ctx) - within) < 1e-12


def test_within_bounded_by_weakest_group(make_random_model):
    rng = np.random.default_rng(12)
    for _ in range(1000):
        model = make_random_model(rng)
        policies = shuffled(rng, model)
        ctx = EvalContext(model, RBP, policies, epsilon=0.0)
        for q in model.catalog.queries:
            weakest = min(
                group_query_success(ctx, g, q) for g in model.groups_for(q))
            assert ga_ss_within(ctx, q) <= weakest


def test_identical_groups_collapse_to_power(make_model):
    rng = np.random.default_rng(13)
    for _ in range(100):
        n_groups = int(rng.integers(1, 4))
        p = rng.dirichlet(np.ones(4))
        row = {f'd{i}': v for i, v in enumerate(p)}
        model = make_model({('q', f'g{i}'): row for i in range(n_groups)},
                           relevance={(f'd{i}', f't_d{i}'): float(r)
                                      for i, r in enumerate(rng.random(4))})
        ranking = Ranking('q', tuple(rng.permutation(list(row)).tolist()))
        ctx = EvalContext(model, RBP, {'q': ranking}, epsilon=0.0)
        assert ga_ss_within(ctx, 'q') == pytest.approx(
            da_ss_within(ctx, 'q')**n_groups, abs=1e-12)
        assert da_ss_within(ctx, 'q') == pytest.approx(
            group_query_success(ctx, 'g0', 'q'), abs=1e-12)


def test_more_relevance_never_hurts(make_random_model):
    rng = np.random.default_rng(14)
    for _ in range(300):
        model = make_random_model(rng)
        policies = shuffled(rng, model)
        before = EvalContext(model, RBP, policies, epsilon=0.0)
        values = dict(model.relevance.values)
        key = list(values)[int(rng.integers(len(values)))]
        values[key] = values[key] + (1.0 - values[key]) * rng.random()
        better = replace(model,
                         relevance=RelevanceTable(values))
        after = EvalContext(better, RBP, policies, epsilon=0.0)
        for q in model.catalog.queries:
            assert ga_ss_within(after, q) >= ga_ss_within(before, q) - 1e-15
            assert da_ss_within(after, q) >= da_ss_within(before, q) - 1e-15


def toy_context(toy, q1, q2):
    success = {('q1', t): 1.0 for t in q1}
    success.update({('q2', t): 1.0 for t in q2})
    return EvalContext(toy, epsilon=0.0, fixed_success=success)


def test_toy_across_query_variants(toy):
    crossed = toy_context(toy, ['t2'], ['t1'])
    assert ga_ss_sum_of_product(crossed) == 0.0
    assert ga_ss_product_of_sum(crossed) == pytest.approx(0.25)

    same = toy_context(toy, ['t2'], ['t2'])
    assert ga_ss_sum_of_product(same) == 0.0
    assert ga_ss_product_of_sum(same) == 0.0

    full = toy_context(toy, ['t1', 't2'], ['t1', 't2'])
    assert ga_ss_sum_of_product(full) == 1.0
    assert ga_ss_product_of_sum(full) == 1.0


def test_sum_of_product_needs_full_query_mass(toy):
    ctx = toy_context(toy, ['t1'], ['t1'])
    with pytest.raises(ValidationError):
        ga_ss_sum_of_product(ctx, ['q1'])


def test_product_of_sum_needs_group_rows(toy):
    partial = CondProb('p(q|g)', (KIND_GROUP, ), KIND_QUERY,
                       {('gA', ): toy.p_q_g.row('gA')})
    model = replace(toy, p_q_g=partial)
    ctx = EvalContext(model, epsilon=0.0, fixed_success={})
    with pytest.raises(NotFoundError):
        ga_ss_product_of_sum(ctx)


def test_missing_policy(toy):
    ctx = EvalContext(toy, RBP, {})
    with pytest.raises(NotFoundError):
        ga_ss_within(ctx, 'q1')


def test_evaluate_report(toy):
    ctx = toy_context(toy, ['t1', 't2'], ['t1'])
    report = evaluate(ctx, workers=1)
    assert list(report.per_query['query']) == ['q1', 'q2']
    assert list(report.per_query.columns) == [
        'query', 'p_q', 'da_ss', 'ga_ss_within', 'p_s_gA', 'p_s_gB'
    ]
    assert report.aggregate['ga_ss_within'] == pytest.approx(0.5)
    assert report.aggregate['da_ss'] == pytest.approx(0.75)
    frame = report.to_frame()
    assert frame['query'].iloc[-1] == '*'
    assert frame['ga_ss_product_of_sum'].iloc[-1] == pytest.approx(0.5)


def test_uniform_weighting(make_model):
    model = make_model({
        ('q1', 'gA'): {'d1': 1.0},
        ('q2', 'gA'): {'d2': 1.0}
    },
                       p_q_g={'gA': {
                           'q1': 0.9,
                           'q2': 0.1
                       }})
    ctx = EvalContext(model,
                      epsilon=0.0,
                      fixed_success={('q1', 't_d1'): 1.0})
    assert evaluate(ctx, workers=1).aggregate['da_ss'] == pytest.approx(0.9)
    uniform = evaluate(ctx, weighting='uniform', workers=1)
    assert uniform.aggregate['da_ss'] == pytest.approx(0.5)


def test_worker_count_does_not_change_results(synthetic_model):
    one = run(synthetic_model, 'gmpc', 1.0, samples=20, workers=1)
    many = run(synthetic_model, 'gmpc', 1.0, samples=20, workers=4)
    pd.testing.assert_frame_equal(one.per_query, many.per_query)
    assert one.aggregate == many.aggregate


def test_run_records_defaults(toy):
    report = run(toy, 'mpc', 1.0, workers=1)
    assert report.metadata['gamma'] == 0.8
    assert report.metadata['samples'] == 100
    assert report.metadata['seed'] == 42
    assert report.metadata['ranker'] == 'MPC'


def test_static_matches_cold_policy(make_model):
    model = make_model({
        ('q1', 'gA'): {'d1': 0.5, 'd2': 0.3, 'd3': 0.2},
        ('q2', 'gA'): {'d1': 0.1, 'd2': 0.2, 'd3': 0.7},
    })
    static = run(model, 'mpc', STATIC, workers=1)
    cold = run(model, 'mpc', 1 / 64, samples=20_000, workers=1)
    for metric, value in static.aggregate.items():
        assert cold.aggregate[metric] == pytest.approx(value, abs=1e-3)


def test_exact_policy_matches_sampling(make_random_model):
    rng = np.random.default_rng(15)
    model = make_random_model(rng, queries=2, items=5, intents=3, groups=2)
    beta = 1.0
    scores = get_ranker('gmpc').score_table(model)
    exact = {
        q: pl_exact_policy(scores, q, beta)
        for q in model.catalog.queries
    }
    sampled = build_policies(model, 'gmpc', beta, samples=100_000, workers=1)
    exact_report = evaluate(EvalContext(model, RBP, exact), workers=1)
    sampled_report = evaluate(EvalContext(model, RBP, sampled), workers=1)
    for metric, value in exact_report.aggregate.items():
        assert sampled_report.aggregate[metric] == pytest.approx(value,
                                                                 abs=0.01)


class StrayRanker(Ranker):
    """Scores every candidate, plus an item the catalog does not know."""
    key = 'stray'
    name = 'Stray'

    def scores(self, model, query):
        row = {d: 1.0 for d in model.candidates_for(query)}
        row['d_unknown'] = 0.5
        return row


def test_build_policies_rejects_invalid_scores(toy, monkeypatch):
    monkeypatch.setitem(RANKERS, 'stray', (StrayRanker, 'Stray'))
    with pytest.raises(ValidationError, match='d_unknown'):
        build_policies(toy, 'stray', STATIC, workers=1)
