import csv
import io
import logging

import numpy as np
import pytest
from conftest import FIVE_STAR, random_ratings

import oracle
from slopeone import Dataset, Evaluation, ModelBundle, SchemeId, SplitSpec, split
from slopeone.evaluation import (
    InsufficientDataError,
    all_but_one_mae,
    compare_schemes,
)


def evals(data):
    return [Evaluation(u, r) for u, r in data.items()]


THREE = evals({"a": {1: 1.0, 2: 2.0}, "b": {1: 3.0, 3: 4.0}, "c": {2: 5.0, 3: 1.0}})


class TestSplit:
    def test_accumulates_whole_users(self):
        train, test = split(THREE, SplitSpec(3, order="dataset"), FIVE_STAR)
        assert train.users == ["a", "b"] and train.n_ratings == 4
        assert [ev.user for ev in test] == ["c"]

    def test_zero_target(self):
        train, test = split(THREE, SplitSpec(0, order="dataset"), FIVE_STAR)
        assert len(train) == 0 and len(test) == 3

    def test_test_target_stops_accumulation(self):
        train, test = split(THREE, SplitSpec(1, 1, order="dataset"), FIVE_STAR)
        assert train.users == ["a"] and [ev.user for ev in test] == ["b"]

    def test_seeded_shuffle_is_deterministic(self):
        rng = np.random.default_rng(0)
        pool = evals({f"u{k}": {1: float(rng.integers(1, 6))} for k in range(40)})
        a = split(pool, SplitSpec(10, seed=3), FIVE_STAR)
        b = split(pool, SplitSpec(10, seed=3), FIVE_STAR)
        c = split(pool, SplitSpec(10, seed=4), FIVE_STAR)
        assert a[0].users == b[0].users and a[1] == b[1]
        assert a[0].users != c[0].users
        assert not set(a[0].users) & {ev.user for ev in a[1]}

    def test_insufficient(self):
        with pytest.raises(InsufficientDataError, match="only 6"):
            split(THREE, SplitSpec(7), FIVE_STAR)

    def test_unreachable_test_target_relaxes(self, caplog):
        with caplog.at_level(logging.WARNING):
            train, test = split(THREE, SplitSpec(2, 100, order="dataset"), FIVE_STAR)
        assert len(test) == 2
        assert "not reachable" in caplog.text


class TestAllButOne:
    def test_perfect_predictor(self):
        truth = {ev.user: ev for ev in THREE}
        result = all_but_one_mae("truth", None, THREE, FIVE_STAR,
                                 predictor=lambda q, i: truth[q.user][i])
        assert result.raw_mae == 0.0

    def test_constant_predictor(self):
        result = all_but_one_mae("const", None, evals({"u": {"a": 1.0, "b": 3.0}}),
                                 FIVE_STAR, predictor=lambda q, i: 2.0)
        assert result.raw_mae == pytest.approx(1.0, abs=1e-12)

    def test_per_user_then_global(self):
        heavy = {k: 3.0 for k in range(100)}
        test = evals({"heavy": heavy, "light": {"a": 2.0, "b": 2.0}})
        result = all_but_one_mae("const", None, test, FIVE_STAR, predictor=lambda q, i: 2.0)
        # per-user errors 1 and 0 average to 0.5; pooling ratings would give 100/102
        assert result.raw_mae == pytest.approx(0.5, abs=1e-12)

    def test_hidden_rating_isolation(self):
        seen = []

        def spy(query, item):
            original = next(ev for ev in THREE if ev.user == query.user)
            assert item not in query
            assert len(query) == len(original) - 1
            assert query is not original
            seen.append((query.user, item))
            return 3.0

        all_but_one_mae("spy", None, THREE, FIVE_STAR, predictor=spy)
        assert sorted(seen, key=str) == sorted(
            ((ev.user, i) for ev in THREE for i in ev), key=str)

    def test_single_rating_users_skipped(self):
        test = evals({"one": {"a": 4.0}, "two": {"a": 1.0, "b": 3.0}})
        result = all_but_one_mae("const", None, test, FIVE_STAR, predictor=lambda q, i: 2.0)
        assert result.skipped_users == 1 and result.users == 1

    def test_empty_test_set(self, three_users):
        with pytest.raises(ValueError, match="empty test set"):
            all_but_one_mae("slope-one", three_users, [], FIVE_STAR)

    def test_clamping_never_increases_error(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            data, _ = random_ratings(rng, max_users=5, max_items=6)
            data["extra"] = {0: 1.0, 1: 5.0, 2: 3.0}
            test = evals(data)
            wild = lambda q, i: float(rng.normal(3.0, 4.0))  # noqa: E731
            state = rng.bit_generator.state
            clamped = all_but_one_mae("w", None, test, FIVE_STAR, predictor=wild)
            rng.bit_generator.state = state
            raw = all_but_one_mae("w", None, test, FIVE_STAR, predictor=wild, clip=False)
            assert clamped.raw_mae <= raw.raw_mae + 1e-15


def _random_split(rng):
    train, _ = random_ratings(rng, max_users=5, max_items=5)
    test, _ = random_ratings(rng, max_users=4, max_items=6)
    test = {f"t{u}": r for u, r in test.items()}
    if not any(len(r) > 1 for r in test.values()):
        test["t_extra"] = {0: 2.0, 1: 5.0}
    return train, test


@pytest.mark.parametrize("scheme", list(SchemeId))
def test_vectorized_and_loop_match_oracle(scheme):
    rng = np.random.default_rng(list(SchemeId).index(scheme))
    for _ in range(40):
        train, test = _random_split(rng)
        bundle = ModelBundle.train(Dataset.from_dict(FIVE_STAR, train))
        fast = all_but_one_mae(scheme, bundle, evals(test))
        slow = all_but_one_mae(scheme, bundle, evals(test), vectorized=False)
        expected = oracle.all_but_one_mae(scheme.value, train, test, 1.0, 5.0)
        assert slow.raw_mae == pytest.approx(expected, abs=1e-12)
        assert fast.raw_mae == pytest.approx(expected, abs=1e-12)
        assert fast.fallbacks == slow.fallbacks


def test_vectorized_handles_larger_users():
    rng = np.random.default_rng(77)
    for _ in range(5):
        train, _ = random_ratings(rng, max_users=30, max_items=25)
        test, _ = random_ratings(rng, max_users=10, max_items=25)
        test = {f"t{u}": r for u, r in test.items()}
        test["big"] = {i: float(rng.integers(1, 6)) for i in range(25)}
        bundle = ModelBundle.train(Dataset.from_dict(FIVE_STAR, train))
        for scheme in SchemeId:
            fast = all_but_one_mae(scheme, bundle, evals(test))
            slow = all_but_one_mae(scheme, bundle, evals(test), vectorized=False)
            assert fast.raw_mae == pytest.approx(slow.raw_mae, abs=1e-12), scheme
            assert fast.fallbacks == slow.fallbacks


class TestCompare:
    def setup_method(self):
        rng = np.random.default_rng(12)
        train, test = _random_split(rng)
        self.train = Dataset.from_dict(FIVE_STAR, train)
        self.test = evals(test)

    def test_divisor_one(self):
        report = compare_schemes(list(SchemeId), self.train, self.test, divisor=1.0)
        assert len(report.entries) == 7
        for r in report.ordered():
            assert r.normalized_mae == r.raw_mae
        assert [r.scheme for r in report.ordered()][:3] == [
            "bipolar-slope-one", "weighted-slope-one", "slope-one"]

    def test_divisor_four(self):
        report = compare_schemes(["slope-one"], self.train, self.test, divisor=4.0)
        r = report["slope-one"]
        assert len(report.entries) == 1
        assert r.normalized_mae == r.raw_mae / 4

    def test_failure_is_recorded(self, monkeypatch):
        from slopeone.evaluation import HideOneScorer

        def boom(self, *args):
            raise RuntimeError("boom")

        monkeypatch.setattr(HideOneScorer, "_pearson", boom)
        report = compare_schemes(["pearson", "slope-one"], self.train, self.test)
        assert "boom" in report["pearson"].error
        assert report["slope-one"].error is None
        assert "failed" in report.render()

    def test_csv(self):
        report = compare_schemes(["slope-one", "per-user-average"], self.train, self.test,
                                 divisor=4.0, seed=9)
        rows = list(csv.DictReader(io.StringIO(report.to_csv())))
        assert [r["scheme"] for r in rows] == ["slope-one", "per-user-average"]
        assert float(rows[0]["normalized_mae"]) == report["slope-one"].normalized_mae
        assert rows[0]["seed"] == "9"

    def test_stores_untouched(self):
        bundle = ModelBundle.train(self.train)
        before = (bundle.store.pairs.accumulators(), bundle.bipolar.like.accumulators(),
                  bundle.bipolar.dislike.accumulators(), self.train.item_index())
        for scheme in SchemeId:
            all_but_one_mae(scheme, bundle, self.test)
        after = (bundle.store.pairs.accumulators(), bundle.bipolar.like.accumulators(),
                 bundle.bipolar.dislike.accumulators(), self.train.item_index())
        assert before == after
        test_users = {ev.user for ev in self.test}
        assert not any(users & test_users for users in self.train.item_index().values())
