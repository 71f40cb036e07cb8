"""
All-but-one MAE on MovieLens 100K
=================================

Users are shuffled and taken into the training set until it holds 50,000
ratings; everybody else is a test user. Every test rating is hidden in turn
and predicted from the rest of that user's ratings. MAEs on the 1-5 scale
are divided by 4 to put them on a 0-1 scale.

Needs ``data/ml-100k/u.data`` (run ``python scripts/fetch_movielens.py``).
"""

import sys
import time
from pathlib import Path

from slopeone import MOVIELENS_SCALE, SchemeId, SplitSpec, compare_schemes, load_corpus, split

path = Path(sys.argv[1] if len(sys.argv) > 1 else "data/ml-100k/u.data")
dataset = load_corpus(path, "movielens-tab", MOVIELENS_SCALE)
print(f"{len(dataset)} users, {len(dataset.items)} movies, {dataset.n_ratings} ratings")

train, test = split(dataset, SplitSpec(train_ratings=50_000, seed=0))

start = time.perf_counter()
report = compare_schemes(list(SchemeId), train, test, divisor=4.0, seed=0)
print(report.render())
print(f"({time.perf_counter() - start:.1f}s)")

# A different shuffle moves every number a little; the ordering is stable.
for seed in (1, 2):
    train, test = split(dataset, SplitSpec(train_ratings=50_000, seed=seed))
    r = compare_schemes(["weighted-slope-one", "bias-from-mean"], train, test, divisor=4.0)
    print(f"seed {seed}: weighted slope one {r['weighted-slope-one'].normalized_mae:.4f}, "
          f"bias from mean {r['bias-from-mean'].normalized_mae:.4f}")
