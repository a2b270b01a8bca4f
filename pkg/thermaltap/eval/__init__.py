from .folds import (  # noqa
    Fold,
    FoldPlan,
    check_hygiene,
    plan_cross_device,
    plan_for,
    plan_lodo,
    plan_loso,
    plan_pooled,
    plan_transfer,
)
from .metrics import ClassificationMetrics, ConfusionMatrix, MeanStd, classification_metrics  # noqa
from .segmentation import SegMetrics, seg_metrics  # noqa
