import os
from pathlib import Path

import numpy as np
import pytest

from slopeone import Dataset, RatingScale

ROOT = Path(__file__).resolve().parent.parent
ML100K = Path(os.environ.get("ML100K_PATH", ROOT / "data" / "ml-100k" / "u.data"))

FIVE_STAR = RatingScale(1.0, 5.0, 1.0)

TWO_USERS = {"A": {"I": 1.0, "J": 1.5}, "B": {"I": 2.0}}
THREE_USERS = {"u1": {1: 1.0, 2: 2.0, 3: 3.0}, "u2": {1: 2.0, 2: 4.0}, "u3": {2: 3.0, 3: 5.0}}


@pytest.fixture
def two_users():
    return Dataset.from_dict(RatingScale(0.0, 5.0, 0.5), TWO_USERS)


@pytest.fixture
def three_users():
    return Dataset.from_dict(FIVE_STAR, THREE_USERS)


def random_ratings(rng, max_users=5, max_items=5, lo=1, hi=5):
    """Random {user: {item: rating}} with every user rating at least one item."""
    n_users = int(rng.integers(1, max_users + 1))
    n_items = int(rng.integers(1, max_items + 1))
    data = {}
    for u in range(n_users):
        k = int(rng.integers(1, n_items + 1))
        items = rng.choice(n_items, size=k, replace=False)
        data[f"u{u}"] = {int(i): float(rng.integers(lo, hi + 1)) for i in items}
    return data, n_items


def item_accumulators(table, dictionary):
    """Pair table re-keyed by raw item ids, so stores with different interning
    orders compare equal. Value is (sum of u[b] - u[a], count) for a < b."""
    out = {}
    for lo, hi, diff, count in table:
        a, b = dictionary.item(lo), dictionary.item(hi)
        if repr(a) > repr(b):
            a, b, diff = b, a, -diff
        out[(a, b)] = (diff, count)
    return out


def assert_tables_match(t1, d1, t2, d2, tol=1e-9):
    a, b = item_accumulators(t1, d1), item_accumulators(t2, d2)
    assert a.keys() == b.keys()
    for key in a:
        assert a[key][1] == b[key][1], key
        assert abs(a[key][0] - b[key][0]) <= tol, key


def assert_stores_match(s1, b1, s2, b2, tol=1e-9):
    assert_tables_match(s1.pairs, s1.dictionary, s2.pairs, s2.dictionary, tol)
    assert_tables_match(b1.like, b1.dictionary, b2.like, b2.dictionary, tol)
    assert_tables_match(b1.dislike, b1.dictionary, b2.dislike, b2.dictionary, tol)


def random_operations(rng, data, n_ops, n_users=6, n_items=6, values=(1, 2, 3, 4, 5)):
    """Random valid (user, item, action, value) changes against a mirror of ``data``."""
    mirror = {u: dict(r) for u, r in data.items()}
    ops = []
    for _ in range(n_ops):
        user = f"u{int(rng.integers(n_users))}"
        item = int(rng.integers(n_items))
        value = float(rng.choice(values))
        rated = mirror.get(user, {})
        if item not in rated:
            action = "add"
            mirror.setdefault(user, {})[item] = value
        elif rng.random() < 0.5:
            action = "remove"
            value = None
            del rated[item]
            if not rated:
                del mirror[user]
        else:
            action = "update"
            rated[item] = value
        ops.append((user, item, action, value))
    return ops, mirror


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, info in RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {info}")
