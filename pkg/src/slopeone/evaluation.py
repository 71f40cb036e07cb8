"""All-but-one MAE evaluation: train/test split, hide-one scoring, reports.

Each test rating is hidden in turn and predicted from the rest of that
user's evaluation; errors are averaged per user first and then across
users. Schemes are trained once on the training split.

The per-scheme scoring loops are vectorised per test user (one dense
sub-matrix per user covers all of that user's hide-one queries). They
agree with calling :func:`slopeone.predictors.predict` on every hidden
query to within floating-point summation order; ``vectorized=False``
selects the plain loop.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import Dataset, Evaluation, Item, RatingScale, clamp
from .predictors import (
    TABLE_ORDER,
    ZERO_SIMILARITY,
    ModelBundle,
    SchemeId,
    predict,
    rating_matrix,
)

_log = logging.getLogger(__name__)


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    """How many ratings go to training and test.

    ``test_ratings=None`` sends every remaining evaluation to the test set.
    ``order`` is ``"shuffle"`` (users permuted with ``seed``) or ``"dataset"``.
    """

    train_ratings: int
    test_ratings: int | None = None
    order: str = "shuffle"
    seed: int = 0

    def __post_init__(self):
        if self.train_ratings < 0:
            raise ValueError("train rating target must be >= 0")
        if self.test_ratings is not None and self.test_ratings < 0:
            raise ValueError("test rating target must be >= 0")
        if self.order not in ("shuffle", "dataset"):
            raise ValueError(f"unknown selection order {self.order!r}")


def split(evaluations: Iterable[Evaluation], spec: SplitSpec,
          scale: RatingScale | None = None) -> tuple[Dataset, list[Evaluation]]:
    """Split whole evaluations into a training set and a test list.

    Users are taken in order (or seeded shuffle order) into training until
    the training set holds at least ``spec.train_ratings`` ratings, then into
    the test list until it reaches ``spec.test_ratings``. A test target the
    corpus cannot meet is relaxed to "all remaining users" with a warning.
    """
    if isinstance(evaluations, Dataset):
        scale = scale or evaluations.scale
    if scale is None:
        raise ValueError("a rating scale is required")
    pool = list(evaluations)
    total = sum(len(ev) for ev in pool)
    if total < spec.train_ratings:
        raise InsufficientDataError(
            f"need {spec.train_ratings} training ratings but only {total} are available"
        )
    if spec.order == "shuffle":
        perm = np.random.default_rng(spec.seed).permutation(len(pool))
        pool = [pool[k] for k in perm]

    train, pos, n = [], 0, 0
    while n < spec.train_ratings:
        train.append(pool[pos])
        n += len(pool[pos])
        pos += 1
    test, m = [], 0
    while pos < len(pool) and (spec.test_ratings is None or m < spec.test_ratings):
        test.append(pool[pos])
        m += len(pool[pos])
        pos += 1
    if spec.test_ratings is not None and m < spec.test_ratings:
        _log.warning("test target of %d ratings not reachable; using all %d remaining",
                     spec.test_ratings, m)
    return Dataset(scale, train), test


@dataclass
class SchemeResult:
    scheme: str
    raw_mae: float = math.nan
    divisor: float = 1.0
    users: int = 0
    predictions: int = 0
    skipped_users: int = 0
    fallbacks: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def normalized_mae(self) -> float:
        return self.raw_mae / self.divisor


@dataclass
class MAEReport:
    entries: dict = field(default_factory=dict)
    divisor: float = 1.0
    seed: int | None = None
    train_users: int = 0
    train_ratings: int = 0
    test_users: int = 0
    test_ratings: int = 0

    def __getitem__(self, scheme) -> SchemeResult:
        return self.entries[SchemeId.parse(scheme)]

    def ordered(self) -> list[SchemeResult]:
        order = [s for s in TABLE_ORDER if s in self.entries]
        order += [s for s in self.entries if s not in order]
        return [self.entries[s] for s in order]

    def render(self) -> str:
        lines = [
            f"train: {self.train_users} users / {self.train_ratings} ratings   "
            f"test: {self.test_users} users / {self.test_ratings} ratings   "
            f"seed: {self.seed}   divisor: {self.divisor:g}",
            f"{'scheme':<22} {'MAE':>8} {'normalized':>11}  fallbacks",
        ]
        for r in self.ordered():
            if r.error:
                lines.append(f"{r.scheme:<22} {'failed':>8} {'':>11}  {r.error}")
                continue
            fb = " ".join(f"d{d}={c}" for d, c in sorted(r.fallbacks.items()) if d) or "-"
            lines.append(f"{r.scheme:<22} {r.raw_mae:8.4f} {r.normalized_mae:11.4f}  {fb}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scheme", "raw_mae", "normalized_mae", "divisor", "fallback_depth1",
                    "fallback_depth2", "users", "predictions", "skipped_users", "seed",
                    "train_users", "train_ratings", "test_users", "test_ratings", "error"])
        for r in self.ordered():
            w.writerow([r.scheme, repr(r.raw_mae), repr(r.normalized_mae), repr(r.divisor),
                        r.fallbacks.get(1, 0), r.fallbacks.get(2, 0), r.users,
                        r.predictions, r.skipped_users, self.seed, self.train_users,
                        self.train_ratings, self.test_users, self.test_ratings,
                        r.error or ""])
        return buf.getvalue()


Predictor = Callable[[Evaluation, Item], float]


def _pad(a: np.ndarray) -> np.ndarray:
    """Append a zero row and column used for items unknown to the model."""
    out = np.zeros((a.shape[0] + 1, a.shape[1] + 1))
    out[:-1, :-1] = a
    return out


class HideOneScorer:
    """Dense views of a trained bundle for fast hide-one prediction.

    ``predict_hidden(scheme, ev)`` returns, for every item ``i`` of ``ev``
    (in iteration order), the clamped prediction of ``i`` from ``ev``
    without ``i``, along with the fallback depth.
    """

    def __init__(self, bundle: ModelBundle, schemes: Iterable[SchemeId]):
        self.bundle = bundle
        self.scale = bundle.scale
        schemes = {SchemeId.parse(s) for s in schemes}
        dataset = bundle.dataset
        self.index = {item: k for k, item in enumerate(dataset.items)} if dataset else {}
        if bundle.store is not None:
            self.index.update((item, len(self.index)) for item in bundle.store.dictionary
                              if item not in self.index)
        n = len(self.index)
        self.n = n
        if schemes & {SchemeId.SLOPE_ONE, SchemeId.WEIGHTED_SLOPE_ONE,
                      SchemeId.BIPOLAR_SLOPE_ONE}:
            self.plain = self._dense(bundle.store.pairs, bundle.store.dictionary)
        if SchemeId.BIPOLAR_SLOPE_ONE in schemes:
            self.like = self._dense(bundle.bipolar.like, bundle.bipolar.dictionary)
            self.dislike = self._dense(bundle.bipolar.dislike, bundle.bipolar.dictionary)
        if schemes & {SchemeId.BIAS_FROM_MEAN, SchemeId.ADJUSTED_COSINE}:
            self.bias = np.zeros(n + 1)
            self.bias_n = np.zeros(n + 1)
            for v in dataset:
                mv = v.mean
                for item, value in v.ratings.items():
                    k = self.index[item]
                    self.bias[k] += value - mv
                    self.bias_n[k] += 1
            seen = self.bias_n > 0
            self.bias[seen] /= self.bias_n[seen]
        if SchemeId.ADJUSTED_COSINE in schemes:
            model = bundle.item_item
            remap = np.full(n + 1, len(model.index))
            for item, k in model.index.items():
                remap[self.index[item]] = k
            self.ac_remap = remap
            self.ac_sim = np.abs(_pad(model.sim))
            self.ac_alpha = _pad(model.alpha)
            self.ac_beta = _pad(model.beta)
        if SchemeId.PEARSON in schemes:
            users = dataset.users
            X, B = rating_matrix(dataset, self.index, users)
            self.X = np.hstack([X, np.zeros((len(users), 1))])
            self.B = np.hstack([B, np.zeros((len(users), 1))])
            self.vbar = np.array([dataset[u].mean for u in users])

    def _dense(self, table, dictionary):
        n = self.n
        lo, hi, diff, count = table.arrays()
        remap = np.array([self.index.get(item, n) for item in dictionary], dtype=np.int64)
        lo, hi = remap[lo], remap[hi]
        dev = np.zeros((n + 1, n + 1))
        cnt = np.zeros((n + 1, n + 1))
        d = diff / np.maximum(count, 1)
        dev[hi, lo] = d
        dev[lo, hi] = -d
        cnt[hi, lo] = count
        cnt[lo, hi] = count
        return dev, cnt

    def predict_hidden(self, scheme: SchemeId, ev: Evaluation) -> tuple[np.ndarray, np.ndarray]:
        items = list(ev)
        vals = np.array([ev[i] for i in items])
        cols = np.array([self.index.get(i, self.n) for i in items], dtype=np.int64)
        m = len(items)
        means = (vals.sum() - vals) / (m - 1)
        value, depth = getattr(self, "_" + scheme.name.lower())(vals, cols, means)
        value = np.clip(value, self.scale.min, self.scale.max)
        return value, depth

    def _per_user_average(self, vals, cols, means):
        return means, np.zeros(len(vals), dtype=int)

    def _bias_from_mean(self, vals, cols, means):
        known = self.bias_n[cols] > 0
        return np.where(known, means + self.bias[cols], means), np.where(known, 0, 1)

    def _slope_one(self, vals, cols, means):
        dev, cnt = self.plain
        sub = np.ix_(cols, cols)
        rel = cnt[sub] > 0
        nrel = rel.sum(axis=1)
        total = np.where(rel, dev[sub], 0.0).sum(axis=1)
        ok = nrel > 0
        return np.where(ok, means + total / np.maximum(nrel, 1), means), np.where(ok, 0, 1)

    @staticmethod
    def _weighted_sum(dev, cnt, vals, use=None):
        w = cnt if use is None else np.where(use, cnt, 0.0)
        return ((dev + vals[None, :]) * w).sum(axis=1), w.sum(axis=1)

    def _weighted_slope_one(self, vals, cols, means):
        dev, cnt = self.plain
        sub = np.ix_(cols, cols)
        num, den = self._weighted_sum(dev[sub], cnt[sub], vals)
        ok = den > 0
        return np.where(ok, num / np.where(ok, den, 1.0), means), np.where(ok, 0, 1)

    def _bipolar_slope_one(self, vals, cols, means):
        sub = np.ix_(cols, cols)
        off = ~np.eye(len(vals), dtype=bool)
        like = (vals[None, :] > means[:, None]) & off
        dislike = (vals[None, :] < means[:, None]) & off
        n1, d1 = self._weighted_sum(self.like[0][sub], self.like[1][sub], vals, like)
        n2, d2 = self._weighted_sum(self.dislike[0][sub], self.dislike[1][sub], vals, dislike)
        num, den = n1 + n2, d1 + d2
        fb_value, fb_depth = self._weighted_slope_one(vals, cols, means)
        ok = den > 0
        return (np.where(ok, num / np.where(ok, den, 1.0), fb_value),
                np.where(ok, 0, fb_depth + 1))

    def _adjusted_cosine(self, vals, cols, means):
        k = self.ac_remap[cols]
        sub = np.ix_(k, k)
        w = self.ac_sim[sub]
        num = (w * (self.ac_alpha[sub] * vals[None, :] + self.ac_beta[sub])).sum(axis=1)
        den = w.sum(axis=1)
        fb_value, fb_depth = self._bias_from_mean(vals, cols, means)
        ok = den > 0
        return (np.where(ok, num / np.where(ok, den, 1.0), fb_value),
                np.where(ok, 0, fb_depth + 1))

    def _pearson(self, vals, cols, means):
        Xs, Bs = self.X[:, cols], self.B[:, cols]
        cv = (Xs - self.vbar[:, None]) * Bs          # neighbour ratings, centred
        cu = vals[:, None] - means[None, :]          # cu[k', k]: query k' when k hidden
        np.fill_diagonal(cu, 0.0)
        off = 1.0 - np.eye(len(vals))
        num = cv @ cu
        nu = Bs @ (cu * cu)
        nv = (cv * cv) @ off
        ok = (nu > 0) & (nv > 0)
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = np.where(ok, num / np.sqrt(nu * nv), 0.0)
        corr = np.clip(corr, -1.0, 1.0)
        corr[np.abs(corr) < ZERO_SIMILARITY] = 0.0
        gamma = corr * np.abs(corr) ** (self.bundle.rho - 1)
        top = (gamma * cv).sum(axis=0)
        den = (np.abs(gamma) * Bs).sum(axis=0)
        good = den > 0
        return (np.where(good, means + top / np.where(good, den, 1.0), means),
                np.where(good, 0, 1))


def _hide_one_loop(scheme: SchemeId, bundle: ModelBundle, ev: Evaluation):
    values, depths = [], []
    for item in ev:
        entry = predict(scheme, ev.without(item), bundle, [item]).entries[item]
        values.append(entry.value)
        depths.append(entry.fallback)
    return np.array(values), np.array(depths)


def all_but_one_mae(scheme, train, test: Sequence[Evaluation], scale: RatingScale | None = None,
                    *, predictor: Predictor | None = None, clip: bool = True,
                    vectorized: bool = True, scorer: HideOneScorer | None = None,
                    divisor: float = 1.0) -> SchemeResult:
    """All-but-one MAE of one scheme over ``test``.

    ``train`` is a training :class:`Dataset` or an already trained
    :class:`ModelBundle`. A custom ``predictor(query, item)`` replaces the
    scheme (``scheme`` is then only a label); ``clip=False`` scores its raw
    outputs. Test users with a single rating are skipped and counted.
    """
    test = list(test)
    if not test:
        raise ValueError("empty test set")
    label = scheme if predictor is not None else SchemeId.parse(scheme).value
    if predictor is None:
        scheme = SchemeId.parse(scheme)
        bundle = train if isinstance(train, ModelBundle) else ModelBundle.train(train, [scheme])
        scale = scale or bundle.scale
        if vectorized and scorer is None:
            scorer = HideOneScorer(bundle, [scheme])
    elif scale is None:
        raise ValueError("a rating scale is required with a custom predictor")

    result = SchemeResult(str(label), divisor=divisor)
    depth_counts: Counter = Counter()
    per_user = []
    for ev in test:
        if len(ev) < 2:
            result.skipped_users += 1
            continue
        if predictor is not None:
            preds = []
            for item in ev:
                p = float(predictor(ev.without(item), item))
                preds.append(clamp(p, scale) if clip else p)
            preds, depths = np.array(preds), np.zeros(len(preds), dtype=int)
        elif scorer is not None:
            preds, depths = scorer.predict_hidden(scheme, ev)
        else:
            preds, depths = _hide_one_loop(scheme, bundle, ev)
        truth = np.array([ev[i] for i in ev])
        per_user.append(float(np.abs(preds - truth).sum()) / len(ev))
        depth_counts.update(int(d) for d in depths)
        result.predictions += len(ev)
    if not per_user:
        raise ValueError("no test user has two or more ratings")
    result.users = len(per_user)
    result.raw_mae = math.fsum(per_user) / len(per_user)
    result.fallbacks = dict(sorted(depth_counts.items()))
    return result


def compare_schemes(schemes: Iterable, train: Dataset, test: Sequence[Evaluation],
                    scale: RatingScale | None = None, divisor: float = 1.0,
                    seed: int | None = None, vectorized: bool = True) -> MAEReport:
    """All-but-one MAE for several schemes trained once on ``train``.

    A scheme that fails is recorded with its error and the others still run.
    """
    if divisor <= 0:
        raise ValueError("divisor must be positive")
    schemes = [SchemeId.parse(s) for s in schemes]
    test = list(test)
    report = MAEReport(divisor=divisor, seed=seed, train_users=len(train),
                       train_ratings=train.n_ratings, test_users=len(test),
                       test_ratings=sum(len(ev) for ev in test))
    bundle = ModelBundle.train(train, schemes)
    scorer = HideOneScorer(bundle, schemes) if vectorized else None
    for scheme in schemes:
        try:
            report.entries[scheme] = all_but_one_mae(
                scheme, bundle, test, scale, vectorized=vectorized, scorer=scorer,
                divisor=divisor)
        except Exception as exc:  # keep going with the remaining schemes
            _log.exception("scheme %s failed", scheme.value)
            report.entries[scheme] = SchemeResult(scheme.value, divisor=divisor,
                                                  error=f"{type(exc).__name__}: {exc}")
    return report
