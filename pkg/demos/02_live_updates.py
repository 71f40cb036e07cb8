"""
Adding a rating without retraining
==================================

Because the store holds sums and counts rather than averages, one new
rating only touches the pairs formed with the rater's other items. The
result is the same as rebuilding from scratch.
"""

import numpy as np

from slopeone import MOVIELENS_SCALE, Dataset, apply_rating_change, build, predict
from slopeone.predictors import ModelBundle

rng = np.random.default_rng(0)
data = {
    f"user{u}": {f"movie{m}": float(rng.integers(1, 6))
                 for m in rng.choice(12, size=5, replace=False)}
    for u in range(30)
}
dataset = Dataset.from_dict(MOVIELENS_SCALE, data)
store, bipolar = build(dataset)
bundle = ModelBundle(MOVIELENS_SCALE, dataset=dataset, store=store, bipolar=bipolar)

query = {"movie0": 5.0, "movie1": 4.0}
before = predict("weighted-slope-one", query, bundle, ["movie2"])["movie2"]

# A new visitor loves movie0 and hates movie2. Each rating is folded into
# the stores as it arrives.
apply_rating_change(store, bipolar, dataset, "newcomer", "movie0", "add", 5.0)
affected = apply_rating_change(store, bipolar, dataset, "newcomer", "movie2", "add", 1.0)
after = predict("weighted-slope-one", query, bundle, ["movie2"])["movie2"]
print(f"second rating touched {affected} pair; prediction {before:.4f} -> {after:.4f}")

# The incrementally maintained store agrees with a fresh build.
fresh, _ = build(dataset)
worst = max(abs(store.deviation(j, i)[0] - fresh.deviation(j, i)[0])
            for j in dataset.items for i in dataset.items)
print("largest deviation difference vs. rebuild:", worst)

# Retracting the rating restores the original prediction.
apply_rating_change(store, bipolar, dataset, "newcomer", "movie2", "remove")
restored = predict("weighted-slope-one", query, bundle, ["movie2"])["movie2"]
print(f"after removal: {restored:.4f}")
