"""
Convex factorization machines: factorization machine regression with a
trace-norm constrained, positive semidefinite interaction matrix, trained by
Hazan's Frank-Wolfe algorithm.
"""

import logging

from . import exceptions

from .data import Dataset, FeatureBlock, SplitSpec
from .linsolve import CgConfig
from .model import CfmModel, load_model, predict, save_model
from .settings import Settings
from .sparse import LowRankFactors, SparseDesignMatrix
from .train import TrainConfig, TrainTrace, hazan_fit, ridge_fit

logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = [
    "exceptions", "Dataset", "FeatureBlock", "SplitSpec", "CgConfig",
    "CfmModel", "load_model", "predict", "save_model", "Settings",
    "LowRankFactors", "SparseDesignMatrix", "TrainConfig", "TrainTrace",
    "hazan_fit", "ridge_fit",
]
