"""
Evaluation metrics.
"""

import numpy as np

from .data import Dataset
from .exceptions import ContractError, InputError
from .model import CfmModel, predict
from .protocols.cfm import Metric

VIEW_BLOCK = "views"


def _pair(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
    if y_true.shape != y_pred.shape:
        raise ContractError(f"{y_true.shape[0]} targets but "
                            f"{y_pred.shape[0]} predictions")
    if y_true.size == 0:
        raise ContractError("cannot score an empty set of predictions")
    return y_true, y_pred


def rmse(y_true, y_pred) -> float:
    """Root mean squared error."""
    y_true, y_pred = _pair(y_true, y_pred)
    return float(np.sqrt(np.mean((y_true - y_pred) ** 2)))


def relative_mse(y_true, y_pred, views) -> float:
    """Sum over views of the squared error relative to the spread of the
    view's targets around their mean.

    Predicting every view's mean scores exactly the number of views.

    :param views: The view of every sample.
    :raises InputError: A view has constant targets.
    """
    y_true, y_pred = _pair(y_true, y_pred)
    views = np.asarray(views).ravel()
    if views.shape != y_true.shape:
        raise ContractError("one view label per sample is required")
    total = 0.0
    for view in np.unique(views):
        mask = views == view
        spread = np.sum((y_true[mask] - y_true[mask].mean()) ** 2)
        if spread == 0:
            raise InputError(f"view {view!r} has constant targets")
        total += np.sum((y_true[mask] - y_pred[mask]) ** 2) / spread
    return float(total)


def dataset_views(ds: Dataset) -> np.ndarray:
    """The view of every sample, read from the dataset's view block.

    :raises ContractError: The dataset has no view block."""
    if not ds.has_block(VIEW_BLOCK):
        raise ContractError(
            "relative MSE needs a dataset with a 'views' block")
    return ds.block_index(VIEW_BLOCK)


def score(y_true, y_pred, metric: Metric | str,
          ds: Dataset | None = None) -> float:
    """Scores predictions with the given metric."""
    metric = Metric(metric)
    if metric is Metric.RMSE:
        return rmse(y_true, y_pred)
    if ds is None:
        raise ContractError("relative MSE needs the dataset for its views")
    return relative_mse(y_true, y_pred, dataset_views(ds))


def evaluate(model: CfmModel, ds: Dataset,
             metric: Metric | str = Metric.RMSE) -> float:
    """Predicts ``ds`` with ``model`` and scores the predictions."""
    return score(ds.y, predict(model, ds.X, ds.Xsq), metric, ds)
