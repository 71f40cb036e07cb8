"""Rating predictors: three slope one variants and four reference schemes.

Every ``predict_*`` function takes the query evaluation ``u`` and the items
to score, and returns a :class:`~slopeone.core.Prediction` whose values are
clamped to the rating scale. When a scheme's weighted sum is empty the
prediction falls back to a simpler scheme and the entry records how many
steps down that chain it went.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .core import (
    Dataset,
    EmptyEvaluationError,
    Evaluation,
    Item,
    Prediction,
    PredictionEntry,
    RatingScale,
    clamp,
)
from .deviations import BipolarDeviationStore, DeviationStore, polar_split

# Similarities and correlations smaller than this are treated as exactly 0,
# so the support of a weighted sum does not depend on summation order.
ZERO_SIMILARITY = 1e-12
DEFAULT_RHO = 2.5


class SchemeId(str, enum.Enum):
    PER_USER_AVERAGE = "per-user-average"
    BIAS_FROM_MEAN = "bias-from-mean"
    ADJUSTED_COSINE = "adjusted-cosine-item"
    PEARSON = "pearson"
    SLOPE_ONE = "slope-one"
    WEIGHTED_SLOPE_ONE = "weighted-slope-one"
    BIPOLAR_SLOPE_ONE = "bipolar-slope-one"

    @classmethod
    def parse(cls, name: "str | SchemeId") -> "SchemeId":
        try:
            return cls(name)
        except ValueError:
            known = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown scheme {name!r} (known: {known})") from None


# Row order of comparison reports.
TABLE_ORDER = (
    SchemeId.BIPOLAR_SLOPE_ONE,
    SchemeId.WEIGHTED_SLOPE_ONE,
    SchemeId.SLOPE_ONE,
    SchemeId.BIAS_FROM_MEAN,
    SchemeId.ADJUSTED_COSINE,
    SchemeId.PER_USER_AVERAGE,
    SchemeId.PEARSON,
)


def _query(u) -> Evaluation:
    ev = u if isinstance(u, Evaluation) else Evaluation(None, u)
    if len(ev) == 0:
        raise EmptyEvaluationError(ev.user)
    return ev


def _entry(value: float, scheme: SchemeId, depth: int, scale: RatingScale) -> PredictionEntry:
    return PredictionEntry(clamp(value, scale), scheme.value, depth)


def predict_per_user_average(u, items: Iterable[Item], scale: RatingScale) -> Prediction:
    u = _query(u)
    return Prediction({j: _entry(u.mean, SchemeId.PER_USER_AVERAGE, 0, scale) for j in items})


def item_bias(dataset: Dataset, item: Item) -> tuple[float, int]:
    """Average of ``v_i - mean(v)`` over the training users who rated ``item``."""
    raters = dataset.evaluations_with(item)
    if not raters:
        return 0.0, 0
    return sum(v[item] - v.mean for v in raters) / len(raters), len(raters)


def _bias_value(u: Evaluation, dataset: Dataset, item: Item) -> tuple[float, int]:
    bias, n = item_bias(dataset, item)
    return (u.mean + bias, 0) if n else (u.mean, 1)


def predict_bias_from_mean(u, dataset: Dataset, items: Iterable[Item]) -> Prediction:
    u = _query(u)
    out = {}
    for j in items:
        value, depth = _bias_value(u, dataset, j)
        out[j] = _entry(value, SchemeId.BIAS_FROM_MEAN, depth, dataset.scale)
    return Prediction(out)


class Regression(NamedTuple):
    alpha: float
    beta: float
    degenerate: bool


def fit_pair_regression(dataset: Dataset, i: Item, j: Item) -> Regression:
    """Least-squares fit of ``u_i ~ alpha * u_j + beta`` over users who rated both.

    With no co-raters, or when their ``u_j`` values are all equal, the slope
    is 0 and the intercept the co-raters' mean ``u_i`` (0 without co-raters).
    """
    pts = [(v[j], v[i]) for v in dataset.evaluations_with_pair(i, j)]
    if not pts:
        return Regression(0.0, 0.0, True)
    n = len(pts)
    xm = sum(x for x, _ in pts) / n
    ym = sum(y for _, y in pts) / n
    sxx = sum((x - xm) ** 2 for x, _ in pts)
    if sxx <= 1e-12 * max(1.0, sum(x * x for x, _ in pts)):
        return Regression(0.0, ym, True)
    alpha = sum((x - xm) * (y - ym) for x, y in pts) / sxx
    return Regression(alpha, ym - alpha * xm, False)


def rating_matrix(dataset: Dataset, index: Mapping[Item, int] | None = None,
                  users: list | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Dense ``(values, mask)`` arrays, users x items, zero where unrated."""
    if index is None:
        index = {item: k for k, item in enumerate(dataset.items)}
    users = dataset.users if users is None else users
    values = np.zeros((len(users), len(index)))
    mask = np.zeros_like(values)
    for row, user in enumerate(users):
        for item, value in dataset[user].ratings.items():
            col = index[item]
            values[row, col] = value
            mask[row, col] = 1.0
    return values, mask


@dataclass
class ItemItemModel:
    """Adjusted-cosine similarities and pairwise regressions for every item pair.

    Arrays are indexed ``[target, source]``: ``alpha[i, j], beta[i, j]``
    predict item ``i`` from a rating of item ``j``. ``sim`` is symmetric and
    0 on the diagonal and for pairs without co-raters.
    """

    index: dict
    sim: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    support: np.ndarray

    def similarity(self, i: Item, j: Item) -> float:
        a, b = self.index.get(i), self.index.get(j)
        if a is None or b is None:
            return 0.0
        return float(self.sim[a, b])

    def regression(self, i: Item, j: Item) -> tuple[float, float]:
        a, b = self.index.get(i), self.index.get(j)
        if a is None or b is None:
            return 0.0, 0.0
        return float(self.alpha[a, b]), float(self.beta[a, b])


def fit_item_item(dataset: Dataset) -> ItemItemModel:
    index = {item: k for k, item in enumerate(dataset.items)}
    X, B = rating_matrix(dataset, index)
    if len(dataset):
        means = X.sum(axis=1) / B.sum(axis=1)
    else:
        means = np.zeros(0)
    C = (X - means[:, None]) * B

    support = B.T @ B
    num = C.T @ C
    sq = (C * C).T @ B          # sq[i, j] = sum over co-raters of (u_i - mean)^2
    den = sq * sq.T
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.where(den > 0, num / np.sqrt(den), 0.0)
    sim[np.abs(sim) < ZERO_SIMILARITY] = 0.0
    np.fill_diagonal(sim, 0.0)

    sx = B.T @ X                # sx[i, j] = sum of u_j over co-raters of (i, j)
    sy = sx.T                   # sum of u_i
    sxx = B.T @ (X * X)
    sxy = X.T @ X
    var = support * sxx - sx * sx
    ok = (support > 0) & (var > 1e-12 * np.maximum(1.0, support * sxx))
    with np.errstate(invalid="ignore", divide="ignore"):
        alpha = np.where(ok, (support * sxy - sx * sy) / var, 0.0)
        beta = np.where(support > 0, (sy - alpha * sx) / support, 0.0)
    return ItemItemModel(index, sim, alpha, beta, support)


def predict_adjusted_cosine(u, dataset: Dataset, model: ItemItemModel,
                            items: Iterable[Item]) -> Prediction:
    """Similarity-weighted average of per-pair regressions.

    The target item itself never contributes; an empty weight mass falls
    back to bias-from-mean (depth 1) and then the user mean (depth 2).
    """
    u = _query(u)
    out = {}
    for i in items:
        num = den = 0.0
        for j, uj in u.ratings.items():
            if j == i:
                continue
            w = abs(model.similarity(i, j))
            if w == 0.0:
                continue
            alpha, beta = model.regression(i, j)
            num += w * (alpha * uj + beta)
            den += w
        if den > 0:
            value, depth = num / den, 0
        else:
            value, depth = _bias_value(u, dataset, i)
            depth += 1
        out[i] = _entry(value, SchemeId.ADJUSTED_COSINE, depth, dataset.scale)
    return Prediction(out)


def pearson_correlation(u, w) -> float:
    """Pearson correlation over co-rated items, centred on each evaluation's
    overall mean. Returns 0 without overlap or with a zero centred norm."""
    u = u if isinstance(u, Evaluation) else Evaluation(None, u)
    w = w if isinstance(w, Evaluation) else Evaluation(None, w)
    if len(u) == 0 or len(w) == 0:
        return 0.0
    small, big = (u, w) if len(u) <= len(w) else (w, u)
    common = [k for k in small if k in big]
    if not common:
        return 0.0
    mu, mw = u.mean, w.mean
    num = a = b = 0.0
    for k in common:
        du, dw = u[k] - mu, w[k] - mw
        num += du * dw
        a += du * du
        b += dw * dw
    if a == 0.0 or b == 0.0:
        return 0.0
    c = max(-1.0, min(1.0, num / math.sqrt(a * b)))
    return 0.0 if abs(c) < ZERO_SIMILARITY else c


def case_amplify(corr: float, rho: float = DEFAULT_RHO) -> float:
    """``corr * |corr| ** (rho - 1)``: keeps the sign, shrinks weak correlations."""
    if rho <= 0:
        raise ValueError("case amplification power must be positive")
    return corr * abs(corr) ** (rho - 1)


def predict_pearson(u, dataset: Dataset, items: Iterable[Item],
                    rho: float = DEFAULT_RHO) -> Prediction:
    u = _query(u)
    out = {}
    for i in items:
        num = den = 0.0
        for v in dataset.evaluations_with(i):
            g = case_amplify(pearson_correlation(u, v), rho)
            num += g * (v[i] - v.mean)
            den += abs(g)
        value, depth = (u.mean + num / den, 0) if den > 0 else (u.mean, 1)
        out[i] = _entry(value, SchemeId.PEARSON, depth, dataset.scale)
    return Prediction(out)


def predict_slope_one(u, store: DeviationStore, items: Iterable[Item],
                      scale: RatingScale) -> Prediction:
    """User mean plus the average deviation over relevant items.

    Relevant items are the user's other rated items that share at least one
    co-rater with the target; with none the user mean is returned.
    """
    u = _query(u)
    out = {}
    for j in items:
        total, n = 0.0, 0
        for i in u:
            if i == j:
                continue
            d, c = store.deviation(j, i)
            if c > 0:
                total += d
                n += 1
        value, depth = (u.mean + total / n, 0) if n else (u.mean, 1)
        out[j] = _entry(value, SchemeId.SLOPE_ONE, depth, scale)
    return Prediction(out)


def _weighted(u: Evaluation, store: DeviationStore, j: Item) -> tuple[float, int]:
    num, den = 0.0, 0
    for i, ui in u.ratings.items():
        if i == j:
            continue
        d, c = store.deviation(j, i)
        if c:
            num += (d + ui) * c
            den += c
    return (num / den, 0) if den else (u.mean, 1)


def predict_weighted_slope_one(u, store: DeviationStore, items: Iterable[Item],
                               scale: RatingScale) -> Prediction:
    u = _query(u)
    out = {}
    for j in items:
        value, depth = _weighted(u, store, j)
        out[j] = _entry(value, SchemeId.WEIGHTED_SLOPE_ONE, depth, scale)
    return Prediction(out)


def predict_bipolar_slope_one(u, bipolar: BipolarDeviationStore, store: DeviationStore,
                              items: Iterable[Item], scale: RatingScale) -> Prediction:
    """Weighted slope one restricted to like/like and dislike/dislike pairs.

    ``u``'s own mean splits its items; items rated exactly at the mean are
    unused. With no usable pair the prediction falls back to weighted slope
    one (depth 1) and then the user mean (depth 2).
    """
    u = _query(u)
    like, dislike = polar_split(u.ratings)
    out = {}
    for j in items:
        num, den = 0.0, 0
        for polarity, part in (("like", like), ("dislike", dislike)):
            for i, ui in part.items():
                if i == j:
                    continue
                d, c = bipolar.deviation(j, i, polarity)
                if c:
                    num += (d + ui) * c
                    den += c
        if den:
            value, depth = num / den, 0
        else:
            value, depth = _weighted(u, store, j)
            depth += 1
        out[j] = _entry(value, SchemeId.BIPOLAR_SLOPE_ONE, depth, scale)
    return Prediction(out)


class MissingComponentError(LookupError):
    pass


@dataclass
class ModelBundle:
    """Whatever trained state the schemes need; components may be absent."""

    scale: RatingScale
    dataset: Dataset | None = None
    store: DeviationStore | None = None
    bipolar: BipolarDeviationStore | None = None
    item_item: ItemItemModel | None = None
    rho: float = DEFAULT_RHO

    @classmethod
    def train(cls, dataset: Dataset, schemes: Iterable = tuple(SchemeId),
              rho: float = DEFAULT_RHO) -> "ModelBundle":
        from .deviations import build

        schemes = {SchemeId.parse(s) for s in schemes}
        bundle = cls(dataset.scale, dataset=dataset, rho=rho)
        if schemes & {SchemeId.SLOPE_ONE, SchemeId.WEIGHTED_SLOPE_ONE,
                      SchemeId.BIPOLAR_SLOPE_ONE}:
            bundle.store, bundle.bipolar = build(dataset)
        if SchemeId.ADJUSTED_COSINE in schemes:
            bundle.item_item = fit_item_item(dataset)
        return bundle

    def require(self, scheme: SchemeId, *names: str):
        for name in names:
            if getattr(self, name) is None:
                raise MissingComponentError(
                    f"scheme {scheme.value!r} needs model component {name!r}"
                )
        return [getattr(self, name) for name in names]


def predict(scheme, u, bundle: ModelBundle, items: Iterable[Item]) -> Prediction:
    """Dispatch to the named scheme."""
    scheme = SchemeId.parse(scheme)
    items = list(items)
    if scheme is SchemeId.PER_USER_AVERAGE:
        return predict_per_user_average(u, items, bundle.scale)
    if scheme is SchemeId.BIAS_FROM_MEAN:
        (dataset,) = bundle.require(scheme, "dataset")
        return predict_bias_from_mean(u, dataset, items)
    if scheme is SchemeId.ADJUSTED_COSINE:
        dataset, model = bundle.require(scheme, "dataset", "item_item")
        return predict_adjusted_cosine(u, dataset, model, items)
    if scheme is SchemeId.PEARSON:
        (dataset,) = bundle.require(scheme, "dataset")
        return predict_pearson(u, dataset, items, bundle.rho)
    if scheme is SchemeId.SLOPE_ONE:
        (store,) = bundle.require(scheme, "store")
        return predict_slope_one(u, store, items, bundle.scale)
    if scheme is SchemeId.WEIGHTED_SLOPE_ONE:
        (store,) = bundle.require(scheme, "store")
        return predict_weighted_slope_one(u, store, items, bundle.scale)
    bipolar, store = bundle.require(scheme, "bipolar", "store")
    return predict_bipolar_slope_one(u, bipolar, store, items, bundle.scale)
