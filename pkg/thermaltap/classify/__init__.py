from .forest import ForestModel, ForestParams, train_forest  # noqa
from .importance import ImportanceGrid, feature_importance, map_to_grid  # noqa
from .margin import MarginModel, MarginParams, train_margin  # noqa
from .preprocess import PreprocessState, anova_f, anova_f_scores, fit_preprocess  # noqa
from .two_stage import (  # noqa
    MODEL_VERSION,
    PredictionRecord,
    SessionPrediction,
    TwoStageModel,
    flat_infer,
    load_model,
    predict_sessions,
    save_model,
    train_two_stage,
    two_stage_infer,
)
