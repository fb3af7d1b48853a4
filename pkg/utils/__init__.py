import collections.abc
import hashlib
import json
import pathlib
from typing import Dict, Tuple

COLUMNS_PATH = pathlib.Path(__file__).parent / 'columns.json'


def flatten(d: dict, parent_key: Tuple[str, ...] = ()) -> Dict[tuple, float]:
    """Flatten a nested dictionary into tuple keys.

    {'q1': {'gA': {'d1': 0.5}}} becomes {('q1', 'gA', 'd1'): 0.5}
    """
    items = []
    for k, v in d.items():
        new_key = parent_key + (k, )
        if isinstance(v, collections.abc.Mapping):
            items.extend(flatten(v, new_key).items())
        else:
            items.append((new_key, v))
    return dict(items)


def nest(d: Dict[tuple, float]) -> dict:
    """Inverse of flatten, tuple keys become nested dictionaries"""
    nested = {}
    for key, value in d.items():
        node = nested
        for part in key[:-1]:
            node = node.setdefault(part, {})
        node[key[-1]] = value
    return nested


def stable_hash(name: str) -> int:
    '''64-bit hash of a string that does not change between processes'''
    digest = hashlib.blake2b(name.encode('utf-8'), digest_size=8).digest()
    return int.from_bytes(digest, 'little')


def load_columns() -> Tuple[Dict[str, str], Dict[str, str]]:
    """Report column names and dtypes, keyed by internal metric name."""
    with open(COLUMNS_PATH) as f:
        columns, column_types = json.load(f)
    return columns, column_types
