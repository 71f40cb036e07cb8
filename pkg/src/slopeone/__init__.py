"""Slope one collaborative filtering with incrementally maintained deviation stores."""

from .core import (
    EACHMOVIE_SCALE,
    MOVIELENS_SCALE,
    Dataset,
    Evaluation,
    Prediction,
    PredictionEntry,
    RatingScale,
    clamp,
    evaluation_mean,
)
from .deviations import (
    BipolarDeviationStore,
    DeviationStore,
    ItemDictionary,
    apply_rating_change,
    build,
)
from .evaluation import MAEReport, SplitSpec, all_but_one_mae, compare_schemes, split
from .io import load_corpus, load_model, save_model
from .predictors import (
    ItemItemModel,
    ModelBundle,
    SchemeId,
    case_amplify,
    fit_item_item,
    fit_pair_regression,
    pearson_correlation,
    predict,
    predict_adjusted_cosine,
    predict_bias_from_mean,
    predict_bipolar_slope_one,
    predict_pearson,
    predict_per_user_average,
    predict_slope_one,
    predict_weighted_slope_one,
)

__version__ = "0.1.0"
