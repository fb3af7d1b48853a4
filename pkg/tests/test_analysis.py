import time

import numpy as np
import pandas as pd
import pytest

from gass.analysis import (METRICS, EvalConfig, SweepResult, case_study,
                           correlation_matrix, kendall_tau, min_max_normalize,
                           motivating_cases, plot_data, sweep, toy_oracle,
                           toy_table)
from gass.config import DEFAULT_BETAS
from gass.exceptions import InvalidArgumentError, NotFoundError

FAST = EvalConfig(samples=10, workers=1)


def test_toy_table_matches_oracle():
    table = toy_table()
    oracle = toy_oracle()
    assert len(table) == 9
    assert list(table[['q1', 'q2']].itertuples(index=False)) == \
        list(oracle[['q1', 'q2']].itertuples(index=False))
    for column in METRICS + ['ga_ss_within_q1', 'ga_ss_within_q2']:
        assert list(table[column]) == [float(v) for v in oracle[column]]


def test_toy_systems_differ_only_across_queries():
    table = toy_table().set_index(['q1', 'q2'])
    crossed = table.loc[('t2', 't1')]
    same = table.loc[('t2', 't2')]
    assert crossed['ga_ss_within_q1'] == same['ga_ss_within_q1'] == 0.0
    assert crossed['ga_ss_within_q2'] == same['ga_ss_within_q2'] == 0.0
    assert crossed['ga_ss_product_of_sum'] == 0.25
    assert same['ga_ss_product_of_sum'] == 0.0
    assert table.loc[('t1', 't1'), 'ga_ss_sum_of_product'] == 0.0
    full = table.loc[('t1+t2', 't1+t2')]
    assert full['ga_ss_sum_of_product'] == full['ga_ss_product_of_sum'] == 1.0


def test_motivating_cases():
    cases = motivating_cases().set_index('system')
    assert cases.loc['balanced t1/t2', 'da_ss'] == pytest.approx(0.5)
    assert cases.loc['balanced t1/t2', 'ga_ss'] == pytest.approx(0.25)
    assert cases.loc['exclusive t1', 'da_ss'] == pytest.approx(0.5)
    assert cases.loc['exclusive t1', 'ga_ss'] == 0.0
    assert cases.loc['diverse t1/t2/t3', 'da_ss'] == pytest.approx(0.75)
    assert cases.loc['diverse t1/t2/t3', 'ga_ss'] == 0.0
    assert cases.loc['balanced t1/t4', 'da_ss'] == pytest.approx(0.5)
    assert cases.loc['balanced t1/t4', 'ga_ss'] == pytest.approx(1 / 3)


@pytest.mark.parametrize('values, expected', [
    ([2, 4, 6], [0, 0.5, 1]),
    ([5], [0]),
    ([0, 0.3, 1], [0, 0.3, 1]),
])
def test_min_max_normalize(values, expected):
    np.testing.assert_allclose(min_max_normalize(values), expected)


def test_min_max_normalize_empty():
    with pytest.raises(InvalidArgumentError):
        min_max_normalize([])


def test_kendall_tau():
    assert kendall_tau([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)
    assert kendall_tau([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)
    assert kendall_tau([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(2 / 3)
    assert kendall_tau([1, 1, 1], [1, 1, 1]) == 1.0
    assert kendall_tau([1, 1, 1], [1, 2, 3]) == 0.0


def test_kendall_tau_ignores_increasing_transforms():
    rng = np.random.default_rng(4)
    xs, ys = rng.random(12), rng.random(12)
    tau = kendall_tau(xs, ys)
    assert kendall_tau(np.exp(xs), ys**3 + 2) == pytest.approx(tau, abs=1e-12)
    assert kendall_tau(np.log(xs), 10 * ys) == pytest.approx(tau, abs=1e-12)


def test_kendall_tau_invalid():
    with pytest.raises(InvalidArgumentError):
        kendall_tau([1, 2], [1, 2, 3])
    with pytest.raises(InvalidArgumentError):
        kendall_tau([1], [1])


def frame_of(values):
    rows = []
    for i, metric_values in enumerate(values):
        row = {'ranker': 'MPC', 'beta': 2.0**i}
        row.update(dict(zip(METRICS, metric_values)))
        rows.append(row)
    return pd.DataFrame(rows)


def test_constant_metrics_correlate_fully():
    matrix = correlation_matrix(frame_of([[0.5, 0.2, 0.3, 0.1]] * 4))
    np.testing.assert_array_equal(matrix.to_numpy(), np.ones((4, 4)))


def test_correlation_matrix_shape():
    rng = np.random.default_rng(4)
    matrix = correlation_matrix(frame_of(rng.random((7, 4))))
    assert list(matrix.index) == METRICS
    np.testing.assert_array_equal(matrix.to_numpy(), matrix.to_numpy().T)
    np.testing.assert_array_equal(np.diag(matrix.to_numpy()), np.ones(4))


def test_correlation_needs_two_cells():
    with pytest.raises(InvalidArgumentError):
        correlation_matrix(frame_of([[0.1, 0.2, 0.3, 0.4]]))


def test_static_cells_are_left_out():
    frame = frame_of([[0.1, 0.2, 0.3, 0.4], [0.2, 0.1, 0.4, 0.3]])
    static = frame.iloc[[0]].assign(beta='static', da_ss=0.9)
    result = SweepResult(pd.concat([static, frame], ignore_index=True))
    assert len(result.stochastic) == 2
    assert correlation_matrix(result).loc['da_ss', 'ga_ss_within'] == -1.0


def test_single_cell_sweep(toy):
    result = sweep(toy, ['mpc'], [1.0], FAST)
    assert len(result) == 1
    assert list(result.frame.columns) == ['ranker', 'beta'] + METRICS
    assert result.frame.loc[0, 'ranker'] == 'MPC'


def test_full_grid(toy):
    result = sweep(toy, config=FAST)
    assert len(result) == 14
    assert list(result.frame['beta'][:7]) == list(DEFAULT_BETAS)
    assert len(sweep(toy, config=FAST, include_static=True)) == 16


def test_sweep_errors_name_the_cell(toy):
    with pytest.raises(InvalidArgumentError, match='ranker=bm25'):
        sweep(toy, ['bm25'], [1.0], FAST)


def test_plot_data(toy):
    result = sweep(toy, config=FAST)
    data = plot_data(result)
    assert len(data) == 14 * 4
    assert list(data.columns) == [
        'metric', 'ranker', 'beta', 'value', 'normalized'
    ]
    assert data['normalized'].between(0, 1).all()


def test_case_study(toy):
    frame = case_study(toy, 'q1', ['mpc'], [1.0, 8.0], depth=1, config=FAST)
    assert list(frame['beta']) == ['static', 1.0, 8.0]
    assert frame['top'].isin(['d1', 'd2']).all()
    with pytest.raises(NotFoundError):
        case_study(toy, 'q9', config=FAST)


GROUP_AWARE = ['ga_ss_within', 'ga_ss_sum_of_product', 'ga_ss_product_of_sum']


@pytest.fixture(scope='module')
def synthetic_sweep(synthetic_model):
    start = time.perf_counter()
    result = sweep(synthetic_model, config=EvalConfig(samples=100))
    return result, time.perf_counter() - start


def test_synthetic_sweep(synthetic_sweep):
    result, elapsed = synthetic_sweep
    assert elapsed < 60
    assert len(result) == 14
    values = result.frame[METRICS].to_numpy()
    assert ((values >= 0) & (values <= 1)).all()
    frame = result.frame.set_index(['ranker', 'beta'])
    for beta in (1 / 8, 1 / 4, 1 / 2, 1.0):
        for metric in GROUP_AWARE:
            assert frame.loc[('gMPC', beta), metric] >= \
                frame.loc[('MPC', beta), metric], (metric, beta)
    for ranker in ('MPC', 'gMPC'):
        cells = frame.loc[ranker]
        for metric in METRICS:
            assert cells.loc[8.0, metric] < cells[metric].max(), \
                (ranker, metric)


def test_synthetic_metric_agreement(synthetic_sweep):
    matrix = correlation_matrix(synthetic_sweep[0])
    np.testing.assert_array_equal(matrix.to_numpy(), matrix.to_numpy().T)
    across = matrix.loc['ga_ss_sum_of_product', 'ga_ss_product_of_sum']
    assert across > matrix.loc['da_ss', 'ga_ss_sum_of_product']
    assert across > matrix.loc['da_ss', 'ga_ss_product_of_sum']


@pytest.mark.parametrize('kwargs', [
    {'samples': 0},
    {'gamma': 1.0},
    {'gamma': 0.0},
    {'epsilon': -1e-6},
    {'epsilon': float('nan')},
    {'depth': 0},
    {'weighting': 'median'},
    {'workers': 0},
])
def test_invalid_eval_config(kwargs):
    with pytest.raises(InvalidArgumentError):
        EvalConfig(**kwargs)
