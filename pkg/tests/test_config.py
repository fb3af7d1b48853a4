import pytest

from gass.config import Settings
from utils import flatten, load_columns, nest, stable_hash


@pytest.mark.parametrize('raw, expected', [('1', 1), ('8', 8), ('0', 1),
                                           ('many', 1)])
def test_threads(monkeypatch, raw, expected):
    monkeypatch.setenv('GASS_THREADS', raw)
    assert Settings.threads() == expected


def test_threads_default(monkeypatch):
    monkeypatch.delenv('GASS_THREADS', raising=False)
    assert Settings.threads() >= 1


def test_log_level(monkeypatch):
    monkeypatch.setenv('GASS_LOG_LEVEL', 'debug')
    assert Settings.log_level() == 'DEBUG'
    monkeypatch.delenv('GASS_LOG_LEVEL')
    assert Settings.log_level() == 'WARNING'


def test_flatten_and_nest():
    nested = {'q1': {'gA': {'d1': 0.5, 'd2': 0.5}}, 'q2': {'gB': {'d1': 1}}}
    flat = flatten(nested)
    assert flat[('q1', 'gA', 'd2')] == 0.5
    assert nest(flat) == nested


def test_stable_hash():
    assert stable_hash('q1') == stable_hash('q1')
    assert stable_hash('q1') != stable_hash('q2')
    assert 0 <= stable_hash('q1') < 2**64


def test_report_columns_cover_metrics():
    columns, column_types = load_columns()
    assert columns['ga_ss_sum_of_product'] == 'ga_ss_sop'
    assert set(columns.values()) == set(column_types)
