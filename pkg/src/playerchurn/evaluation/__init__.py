"""Metrics, cross-validation, search and feature selection"""
from .metrics import ConfusionMatrix, RocCurve, accuracy_at, confusion, roc_auc
from .selection import anova_f, rfe, rfe_with_trace, selection_report, univariate_select
from .validation import (
    ConfigResult, CvPlan, SearchResult, cross_validate, grid_search, random_search, score_rows,
    predict_rows, stratified_kfold, train_test_split,
)

__all__ = [
    "ConfusionMatrix", "RocCurve", "accuracy_at", "confusion", "roc_auc",
    "anova_f", "rfe", "rfe_with_trace", "selection_report", "univariate_select",
    "ConfigResult", "CvPlan", "SearchResult", "cross_validate", "grid_search", "random_search",
    "score_rows", "predict_rows", "stratified_kfold", "train_test_split",
]
