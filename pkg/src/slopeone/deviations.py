"""Item-item deviation stores with exact incremental maintenance.

Each unordered pair of items is kept once, under the canonical orientation
``hi > lo`` of interned item ids, as a running ``(diff_sum, count)`` where
``diff_sum`` is the sum of ``u[hi] - u[lo]`` over users who rated both.
The average deviation is only formed on read, which makes adding or
removing a single user's contribution an O(1) update per pair.
"""

from __future__ import annotations

from typing import Hashable, Iterable, Iterator, Mapping

import numpy as np

from .core import Dataset, Evaluation, Item, User

Key = tuple[int, int]


class ItemDictionary:
    """Interns raw item identifiers to dense integers in first-seen order."""

    def __init__(self, items: Iterable[Hashable] = ()):
        self._ids: dict = {}
        self._items: list = []
        for item in items:
            self.intern(item)

    def intern(self, item: Item) -> int:
        idx = self._ids.get(item)
        if idx is None:
            idx = len(self._items)
            self._ids[item] = idx
            self._items.append(item)
        return idx

    def get(self, item: Item) -> int | None:
        return self._ids.get(item)

    def item(self, idx: int) -> Item:
        return self._items[idx]

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, item: Item) -> bool:
        return item in self._ids

    def __iter__(self) -> Iterator[Item]:
        return iter(self._items)

    def __eq__(self, other) -> bool:
        return isinstance(other, ItemDictionary) and self._items == other._items

    def __repr__(self) -> str:
        return f"ItemDictionary({self._items!r})"


class PairTable:
    """Sparse map of item pairs to ``(diff_sum, count)`` accumulators."""

    def __init__(self):
        self._diff: dict[Key, float] = {}
        self._count: dict[Key, int] = {}

    def __len__(self) -> int:
        return len(self._count)

    def __iter__(self) -> Iterator[tuple[int, int, float, int]]:
        """Yield ``(lo, hi, diff_sum, count)`` records in sorted key order."""
        for key in sorted(self._count):
            yield key[0], key[1], self._diff[key], self._count[key]

    def raw(self, lo: int, hi: int) -> tuple[float, int]:
        key = (lo, hi)
        return self._diff.get(key, 0.0), self._count.get(key, 0)

    def lookup(self, j: int, i: int) -> tuple[float, int]:
        """Average deviation of ``j`` relative to ``i`` and the co-rating count."""
        if j == i:
            return 0.0, 0
        key = (i, j) if i < j else (j, i)
        count = self._count.get(key, 0)
        if count == 0:
            return 0.0, 0
        dev = self._diff[key] / count
        return (dev if j > i else -dev), count

    def set(self, lo: int, hi: int, diff_sum: float, count: int) -> None:
        if not lo < hi:
            raise ValueError(f"pair ({lo}, {hi}) is not in canonical order")
        if count < 0:
            raise ValueError("negative co-rating count")
        if count == 0:
            self._diff.pop((lo, hi), None)
            self._count.pop((lo, hi), None)
        else:
            self._diff[(lo, hi)] = diff_sum
            self._count[(lo, hi)] = count

    def add_ratings(self, ratings: Mapping[int, float], sign: int = 1) -> int:
        """Add (sign=1) or subtract (sign=-1) one user's contribution to every
        pair of ``ratings`` (interned id -> value). Returns the pair count."""
        ids = sorted(ratings)
        diff, count = self._diff, self._count
        n = 0
        for p, lo in enumerate(ids):
            v_lo = ratings[lo]
            for hi in ids[p + 1:]:
                key = (lo, hi)
                c = count.get(key, 0) + sign
                if c == 0:
                    del diff[key], count[key]
                else:
                    diff[key] = diff.get(key, 0.0) + sign * (ratings[hi] - v_lo)
                    count[key] = c
                n += 1
        return n

    def add_pair(self, a: int, va: float, b: int, vb: float, sign: int) -> None:
        """Add or subtract a single user's contribution to pair (a, b)."""
        key, d = ((a, b), vb - va) if a < b else ((b, a), va - vb)
        c = self._count.get(key, 0) + sign
        if c < 0:
            raise ValueError(f"pair {key} would get a negative count")
        if c == 0:
            self._diff.pop(key, None)
            self._count.pop(key, None)
        else:
            self._diff[key] = self._diff.get(key, 0.0) + sign * d
            self._count[key] = c

    def shift(self, a: int, b: int, delta: float) -> None:
        """Shift pair (a, b) by a change of ``delta`` in the rating of ``a``."""
        key = (a, b) if a < b else (b, a)
        if key not in self._count:
            raise KeyError(f"pair {key} has no co-raters")
        # diff_sum is u[hi] - u[lo]: raising a's rating lowers it when a is lo.
        self._diff[key] += -delta if a < b else delta

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """``(lo, hi, diff_sum, count)`` columns in arbitrary order."""
        n = len(self._count)
        lo = np.fromiter((k[0] for k in self._count), dtype=np.int64, count=n)
        hi = np.fromiter((k[1] for k in self._count), dtype=np.int64, count=n)
        diff = np.fromiter((self._diff[k] for k in self._count), dtype=float, count=n)
        count = np.fromiter(self._count.values(), dtype=float, count=n)
        return lo, hi, diff, count

    def accumulators(self) -> dict[Key, tuple[float, int]]:
        return {k: (self._diff[k], c) for k, c in self._count.items()}


class DeviationStore:
    """dev[j, i] and c[j, i] over all co-rating users."""

    def __init__(self, dictionary: ItemDictionary | None = None):
        self.dictionary = dictionary if dictionary is not None else ItemDictionary()
        self.pairs = PairTable()

    def __len__(self) -> int:
        return len(self.pairs)

    def deviation(self, j: Item, i: Item) -> tuple[float, int]:
        """``(dev_{j,i}, c_{j,i})``; ``(0.0, 0)`` when the pair has no co-raters."""
        a, b = self.dictionary.get(j), self.dictionary.get(i)
        if a is None or b is None:
            return 0.0, 0
        return self.pairs.lookup(a, b)

    def add_evaluation(self, ratings: Mapping[Item, float], sign: int = 1) -> int:
        ids = {self.dictionary.intern(item): value for item, value in ratings.items()}
        return self.pairs.add_ratings(ids, sign)


def polar_split(ratings: Mapping[Item, float]) -> tuple[dict, dict]:
    """Split an evaluation into liked (above its mean) and disliked (below)
    items. Items rated exactly at the mean belong to neither side."""
    if not ratings:
        return {}, {}
    mean = sum(ratings.values()) / len(ratings)
    like = {i: v for i, v in ratings.items() if v > mean}
    dislike = {i: v for i, v in ratings.items() if v < mean}
    return like, dislike


class BipolarDeviationStore:
    """Separate deviation tables for liked/liked and disliked/disliked pairs.

    Keeps a snapshot of every user's last contributed evaluation so a rating
    change can retract that user's old contributions exactly; a change moves
    the user's mean and may reclassify all their items.
    """

    def __init__(self, dictionary: ItemDictionary | None = None):
        self.dictionary = dictionary if dictionary is not None else ItemDictionary()
        self.like = PairTable()
        self.dislike = PairTable()
        self._snapshots: dict[User, dict[Item, float]] = {}

    def deviation(self, j: Item, i: Item, polarity: str) -> tuple[float, int]:
        table = self._table(polarity)
        a, b = self.dictionary.get(j), self.dictionary.get(i)
        if a is None or b is None:
            return 0.0, 0
        return table.lookup(a, b)

    def _table(self, polarity: str) -> PairTable:
        if polarity == "like":
            return self.like
        if polarity == "dislike":
            return self.dislike
        raise ValueError(f"polarity must be 'like' or 'dislike', got {polarity!r}")

    def snapshot(self, user: User) -> dict[Item, float] | None:
        snap = self._snapshots.get(user)
        return None if snap is None else dict(snap)

    def _contribute(self, ratings: Mapping[Item, float], sign: int) -> int:
        like, dislike = polar_split(ratings)
        intern = self.dictionary.intern
        n = self.like.add_ratings({intern(i): v for i, v in like.items()}, sign)
        n += self.dislike.add_ratings({intern(i): v for i, v in dislike.items()}, sign)
        return n

    def restore_snapshots(self, dataset: Dataset) -> None:
        """Record the evaluations the loaded pair tables were built from."""
        self._snapshots = {ev.user: dict(ev.ratings) for ev in dataset}

    def set_user(self, user: User, ratings: Mapping[Item, float]) -> int:
        """Replace a user's contribution with ``ratings`` (empty removes it).
        Returns the number of pair updates performed."""
        n = 0
        old = self._snapshots.pop(user, None)
        if old:
            n += self._contribute(old, -1)
        if ratings:
            ratings = dict(ratings)
            n += self._contribute(ratings, 1)
            self._snapshots[user] = ratings
        return n


def build(dataset: Dataset, dictionary: ItemDictionary | None = None
          ) -> tuple[DeviationStore, BipolarDeviationStore]:
    """Batch-build the plain and bi-polar stores from a training set."""
    dictionary = dictionary if dictionary is not None else ItemDictionary()
    for item in dataset.items:
        dictionary.intern(item)
    store = DeviationStore(dictionary)
    bipolar = BipolarDeviationStore(dictionary)
    for ev in dataset:
        store.add_evaluation(ev.ratings)
        bipolar.set_user(ev.user, ev.ratings)
    return store, bipolar


ACTIONS = ("add", "remove", "update")


def apply_rating_change(store: DeviationStore, bipolar: BipolarDeviationStore,
                        dataset: Dataset, user: User, item: Item, action: str,
                        value: float | None = None) -> int:
    """Apply one rating change to the dataset and both stores in place.

    ``action`` is ``"add"``, ``"remove"`` or ``"update"``; add and update
    need ``value``. Returns the number of plain-store pairs affected.
    """
    if action not in ACTIONS:
        raise ValueError(f"unknown action {action!r}; expected one of {ACTIONS}")
    if action != "remove":
        if value is None:
            raise ValueError(f"{action} needs a rating value")
        value = float(value)
        if not dataset.scale.contains(value):
            raise ValueError(
                f"rating {value} outside [{dataset.scale.min}, {dataset.scale.max}]"
            )

    old = dataset[user] if user in dataset else None
    if action == "add":
        if old is not None and item in old:
            raise ValueError(f"duplicate rating: user {user!r} already rated {item!r}")
        new = old.with_rating(item, value) if old is not None else Evaluation(user, {item: value})
    else:
        if old is None:
            raise KeyError(f"unknown user {user!r}")
        if item not in old:
            raise KeyError(f"user {user!r} has not rated item {item!r}")
        new = old.with_rating(item, value) if action == "update" else old.without(item)

    others = {k: v for k, v in (old.ratings.items() if old is not None else ()) if k != item}
    intern = store.dictionary.intern
    x = intern(item)
    if action == "update":
        delta = value - old[item]
        for k in others:
            store.pairs.shift(x, intern(k), delta)
    else:
        sign, vx = (1, value) if action == "add" else (-1, old[item])
        for k, vk in others.items():
            store.pairs.add_pair(x, vx, intern(k), vk, sign)

    dataset._put(new)
    bipolar.set_user(user, new.ratings)
    return len(others)
