"""Ratings, evaluations and training sets shared by every scheme."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Hashable, Iterable, Iterator, Mapping

Item = Hashable
User = Hashable


class EmptyEvaluationError(ValueError):
    def __init__(self, user: User = None):
        super().__init__("empty evaluation" if user is None else f"empty evaluation for user {user!r}")


@dataclass(frozen=True)
class RatingScale:
    """Legal rating range and increment of a corpus.

    Predictions are clamped to ``[min, max]``; ``step`` is only used for
    validation and never to snap predictions.
    """

    min: float
    max: float
    step: float

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.min, self.max, self.step)):
            raise ValueError("rating scale bounds must be finite")
        if self.step <= 0:
            raise ValueError(f"rating step must be positive, got {self.step}")
        if not self.min < self.max:
            raise ValueError(f"rating scale needs min < max, got [{self.min}, {self.max}]")
        ticks = (self.max - self.min) / self.step
        if abs(ticks - round(ticks)) * self.step > 1e-9:
            raise ValueError(
                f"range [{self.min}, {self.max}] is not a multiple of step {self.step}"
            )

    @classmethod
    def parse(cls, text: str) -> "RatingScale":
        """Parse ``"MIN:MAX:STEP"``, e.g. ``"1:5:1"``."""
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"scale must look like MIN:MAX:STEP, got {text!r}")
        return cls(*(float(p) for p in parts))

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.min + self.max)

    def contains(self, value: float) -> bool:
        return self.min <= value <= self.max


MOVIELENS_SCALE = RatingScale(1.0, 5.0, 1.0)
EACHMOVIE_SCALE = RatingScale(0.0, 1.0, 0.2)


def clamp(value: float, scale: RatingScale) -> float:
    """Clamp a prediction into the scale's range (no rounding to step)."""
    if not math.isfinite(value):
        raise ValueError(f"non-finite prediction: {value}")
    return min(max(value, scale.min), scale.max)


def evaluation_mean(ratings: Mapping[Item, float]) -> float:
    """Average rating of an evaluation; accepts an Evaluation or a plain mapping."""
    if isinstance(ratings, Evaluation):
        ratings = ratings.ratings
    if not ratings:
        raise EmptyEvaluationError()
    return sum(ratings.values()) / len(ratings)


class Evaluation:
    """One user's incomplete rating array.

    Immutable once built; ``without(item)`` and ``with_rating`` return new
    evaluations, which is how the hide-one harness builds its queries.
    """

    __slots__ = ("user", "_ratings", "_mean")

    def __init__(self, user: User, ratings: Mapping[Item, float]):
        self.user = user
        self._ratings = {item: float(value) for item, value in ratings.items()}
        self._mean: float | None = None

    @property
    def ratings(self) -> Mapping[Item, float]:
        return MappingProxyType(self._ratings)

    @property
    def items(self) -> frozenset:
        """S(u), the set of rated items."""
        return frozenset(self._ratings)

    @property
    def mean(self) -> float:
        if self._mean is None:
            self._mean = evaluation_mean(self._ratings)
        return self._mean

    def __len__(self) -> int:
        return len(self._ratings)

    def __contains__(self, item: Item) -> bool:
        return item in self._ratings

    def __getitem__(self, item: Item) -> float:
        return self._ratings[item]

    def __iter__(self) -> Iterator[Item]:
        return iter(self._ratings)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Evaluation):
            return NotImplemented
        return self.user == other.user and self._ratings == other._ratings

    def __repr__(self) -> str:
        return f"Evaluation({self.user!r}, {self._ratings!r})"

    def without(self, item: Item) -> "Evaluation":
        return Evaluation(self.user, {k: v for k, v in self._ratings.items() if k != item})

    def with_rating(self, item: Item, value: float) -> "Evaluation":
        ratings = dict(self._ratings)
        ratings[item] = value
        return Evaluation(self.user, ratings)


class Dataset:
    """The training set: one evaluation per user plus an item -> raters index.

    Only the deviation-store update path mutates a dataset (through the
    private ``_put`` / ``_drop`` methods) so the index stays consistent.
    """

    def __init__(self, scale: RatingScale, evaluations: Iterable[Evaluation] = ()):
        self.scale = scale
        self._evaluations: dict[User, Evaluation] = {}
        self._raters: dict[Item, set] = {}
        for ev in evaluations:
            if ev.user in self._evaluations:
                raise ValueError(f"duplicate evaluation for user {ev.user!r}")
            if len(ev) == 0:
                raise EmptyEvaluationError(ev.user)
            self._check(ev)
            self._evaluations[ev.user] = ev
            for item in ev:
                self._raters.setdefault(item, set()).add(ev.user)

    @classmethod
    def from_dict(cls, scale: RatingScale, data: Mapping[User, Mapping[Item, float]]) -> "Dataset":
        return cls(scale, (Evaluation(u, r) for u, r in data.items()))

    def _check(self, ev: Evaluation) -> None:
        for item, value in ev.ratings.items():
            if not self.scale.contains(value):
                raise ValueError(
                    f"rating {value} of user {ev.user!r} for item {item!r} outside "
                    f"[{self.scale.min}, {self.scale.max}]"
                )

    def __len__(self) -> int:
        return len(self._evaluations)

    def __iter__(self) -> Iterator[Evaluation]:
        return iter(self._evaluations.values())

    def __contains__(self, user: User) -> bool:
        return user in self._evaluations

    def __getitem__(self, user: User) -> Evaluation:
        return self._evaluations[user]

    @property
    def users(self) -> list:
        return list(self._evaluations)

    @property
    def items(self) -> list:
        """Known items in first-appearance order."""
        return list(self._raters)

    @property
    def n_ratings(self) -> int:
        return sum(len(ev) for ev in self._evaluations.values())

    def raters(self, item: Item) -> frozenset:
        return frozenset(self._raters.get(item, ()))

    def evaluations_with(self, item: Item) -> list[Evaluation]:
        """S_i(chi): every evaluation containing ``item``."""
        return [self._evaluations[u] for u in self._raters.get(item, ())]

    def evaluations_with_pair(self, j: Item, i: Item) -> list[Evaluation]:
        a, b = self._raters.get(j, set()), self._raters.get(i, set())
        return [self._evaluations[u] for u in (a & b)]

    def item_index(self) -> dict[Item, frozenset]:
        return {item: frozenset(users) for item, users in self._raters.items()}

    def rebuild_index(self) -> dict[Item, frozenset]:
        index: dict[Item, set] = {}
        for ev in self._evaluations.values():
            for item in ev:
                index.setdefault(item, set()).add(ev.user)
        return {item: frozenset(users) for item, users in index.items()}

    def to_dict(self) -> dict:
        return {ev.user: dict(ev.ratings) for ev in self._evaluations.values()}

    def copy(self) -> "Dataset":
        return Dataset(self.scale, self._evaluations.values())

    def _put(self, ev: Evaluation) -> Evaluation | None:
        """Replace (or insert) a user's evaluation; returns the previous one."""
        self._check(ev)
        old = self._evaluations.get(ev.user)
        if old is not None:
            for item in old.items - ev.items:
                self._unindex(item, ev.user)
        if len(ev) == 0:
            self._evaluations.pop(ev.user, None)
            return old
        self._evaluations[ev.user] = ev
        for item in ev:
            self._raters.setdefault(item, set()).add(ev.user)
        return old

    def _unindex(self, item: Item, user: User) -> None:
        users = self._raters.get(item)
        if users is None:
            return
        users.discard(user)
        if not users:
            del self._raters[item]


@dataclass(frozen=True)
class PredictionEntry:
    value: float
    scheme: str
    fallback: int = 0


@dataclass
class Prediction:
    """P(u): item -> clamped value with the scheme that produced it."""

    entries: dict = field(default_factory=dict)

    def __getitem__(self, item: Item) -> float:
        return self.entries[item].value

    def __contains__(self, item: Item) -> bool:
        return item in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def values(self) -> dict:
        return {item: e.value for item, e in self.entries.items()}

    def top(self, n: int) -> list[tuple]:
        ranked = sorted(self.entries.items(), key=lambda kv: -kv[1].value)
        return ranked[:n]
