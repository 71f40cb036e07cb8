"""
Slope one on two users and two items
====================================

User A rated item I as 1 and item J as 1.5. User B rated only I, as 2.
Slope one predicts B's rating of J from how much J is rated above I by the
users who rated both.
"""

from slopeone import Dataset, ModelBundle, RatingScale, SchemeId, build, predict

scale = RatingScale(0.0, 5.0, 0.5)
dataset = Dataset.from_dict(scale, {"A": {"I": 1.0, "J": 1.5}, "B": {"I": 2.0}})

# The deviation store keeps, for every co-rated pair, the running sum of
# rating differences and the number of users behind it.
store, bipolar = build(dataset)
print("dev(J, I) and count:", store.deviation("J", "I"))
print("dev(I, J) and count:", store.deviation("I", "J"))

# B's prediction for J is B's rating of I plus the average deviation.
bundle = ModelBundle.train(dataset)
for scheme in SchemeId:
    entry = predict(scheme, dataset["B"], bundle, ["J"]).entries["J"]
    print(f"{scheme.value:>22}: {entry.value:.3f}  (fallback depth {entry.fallback})")

# Bi-polar slope one splits each user's items at that user's mean. B has a
# single rating, which is neither above nor below B's own mean, so the
# bi-polar prediction falls back to weighted slope one (depth 1).

# A first-time visitor needs only one rating to get predictions.
newcomer = {"I": 4.0}
print("newcomer:", predict("weighted-slope-one", newcomer, bundle, ["J"]).values())
