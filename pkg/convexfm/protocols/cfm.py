"""
Protocols that signify parts of a convex factorization machine.
"""

from typing import TypedDict
from enum import Enum
from abc import ABC, abstractmethod

import numpy as np


class StepRule(Enum):
    """An enum of the Frank-Wolfe step size rules."""
    HARMONIC = "harmonic"  # 2 / (t + 2)
    LINE_SEARCH = "line_search"


class Preconditioner(Enum):
    """An enum of the preconditioners available to conjugate gradient."""
    NONE = "none"
    JACOBI = "jacobi"


class Metric(Enum):
    """An enum of the evaluation metrics."""
    RMSE = "rmse"
    RELATIVE_MSE = "relative_mse"


class RatingFormat(Enum):
    """An enum of the raw MovieLens rating layouts."""
    TAB_100K = "tab_100k"  # user \t item \t rating \t timestamp
    COLON_1M_PLUS = "colon_1m_plus"  # user::item::rating::timestamp

    @property
    def separator(self) -> str:
        return "\t" if self is RatingFormat.TAB_100K else "::"


class TraceRecord(TypedDict, total=False):
    """A type that contains one row of a training trace.

    :ivar iter: The 0-based Frank-Wolfe step.
    :ivar objective: The rescaled objective after the step.
    :ivar alpha: The step size taken.
    :ivar eig_value: The top eigenvalue of the negated gradient.
    :ivar train_rmse: The training RMSE after the step.
    :ivar test_rmse: The test RMSE after the step, if a test set was given.
    :ivar elapsed_s: Wall time since training started.
    :ivar gap: The Frank-Wolfe duality gap at the step.
    :ivar cg_iters: Conjugate gradient iterations spent in the step.
    :ivar eig_iters: Lanczos iterations spent in the step.
    """
    iter: int
    objective: float
    alpha: float
    eig_value: float
    train_rmse: float
    test_rmse: float | None
    elapsed_s: float
    gap: float
    cg_iters: int
    eig_iters: int


class ModelArrays(TypedDict):
    """A type that contains the arrays stored in a model file."""
    format_version: np.ndarray
    feature_dim: np.ndarray
    eta: np.ndarray
    lambda1: np.ndarray
    linear: np.ndarray
    rank: np.ndarray
    weights: np.ndarray
    basis: np.ndarray


class SymmetricOperator(ABC):
    """ABC for symmetric linear operators known only by their action.

    Implementations must be linear, symmetric and reentrant; none of this is
    checked at runtime."""

    @property
    @abstractmethod
    def dim(self) -> int:
        """The dimension of the vectors this operator acts on."""
        raise NotImplementedError

    @abstractmethod
    def apply(self, v: np.ndarray) -> np.ndarray:
        """Applies this operator to a vector.

        :param v: A vector of length :py:attr:`dim`.
        :return: The image of ``v``."""
        raise NotImplementedError

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return self.apply(v)


class BlockData(TypedDict):
    """A type that describes one named block of feature columns.

    :ivar name: The block name.
    :ivar offset: The first column of the block.
    :ivar width: The number of columns.
    """
    name: str
    offset: int
    width: int


class RatingRecord(TypedDict):
    """A type that contains one raw rating.

    :ivar user: The raw user id.
    :ivar item: The raw item id.
    :ivar rating: The rating value.
    :ivar timestamp: The raw timestamp field.
    """
    user: str
    item: str
    rating: float
    timestamp: str


class LibfmData(TypedDict):
    """A type that contains a parsed libFM file in CSR form.

    :ivar targets: One target per sample.
    :ivar row_offsets: CSR row offsets.
    :ivar col_indices: CSR column indices (sorted within a row).
    :ivar values: CSR values.
    :ivar dim: The number of feature columns.
    :ivar blocks: The feature layout, from the file header if it had one.
    """
    targets: np.ndarray
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    dim: int
    blocks: list[BlockData]
