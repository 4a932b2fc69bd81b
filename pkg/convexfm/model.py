"""
The convex factorization machine model and its fast prediction formula.

A model predicts ``f(x) = wᵀz + ½ tr(ηW (xxᵀ − diag(x∘x)))`` with
``z = [1, x]`` and ``W = P diag(λ) Pᵀ``. The interaction matrix is never
formed: with ``G = P diag(ηλ)^{1/2}``,
``½ tr(ηW (xxᵀ − diag(x∘x))) = ½ (‖Gᵀx‖² − (x∘x)ᵀ(G∘G)1)``.
"""

import os
from dataclasses import dataclass

import numpy as np

from .exceptions import ContractError, IncompleteError, InputError
from .protocols.cfm import ModelArrays
from .sparse import LowRankFactors, SparseDesignMatrix, as_vector, \
    row_squared

FORMAT_VERSION = 1
_MODEL_KEYS = tuple(ModelArrays.__annotations__)


@dataclass(frozen=True, eq=False)
class CfmModel:
    """A fitted model.

    :ivar linear: ``w = [w₀, w₁ … w_d]``, bias first.
    :ivar factors: The interaction factors, carrying ``η`` as their scale.
    :ivar lambda1: The ridge parameter the model was fitted with.
    :ivar feature_dim: ``d``.
    """
    linear: np.ndarray
    factors: LowRankFactors
    lambda1: float
    feature_dim: int

    def __post_init__(self):
        linear = as_vector(self.linear, self.feature_dim + 1, "linear")
        if self.factors.dim != self.feature_dim:
            raise ContractError(
                f"factors have dimension {self.factors.dim}, model has "
                f"{self.feature_dim}")
        self.factors.validate()
        object.__setattr__(self, "linear", linear)

    @property
    def bias(self) -> float:
        return float(self.linear[0])

    @property
    def eta(self) -> float:
        return self.factors.scale

    @property
    def rank(self) -> int:
        return self.factors.rank


def _check_design(X: SparseDesignMatrix, Xsq: SparseDesignMatrix | None,
                  dim: int) -> SparseDesignMatrix:
    if X.n_cols != dim:
        raise ContractError(f"design has {X.n_cols} columns, expected {dim}")
    if Xsq is None:
        return row_squared(X)
    if Xsq.shape != X.shape:
        raise ContractError("squared design does not match the design")
    return Xsq


def quad_scores(X: SparseDesignMatrix, Xsq: SparseDesignMatrix | None,
                factors: LowRankFactors) -> np.ndarray:
    """Returns the interaction part of the prediction for every sample.

    :param X: The sample-major design.
    :param Xsq: ``row_squared(X)``; computed if ``None``.
    :param factors: The interaction factors, applied at their scale.
    :raises ContractError: Dimension mismatch.
    :return: ``½ (‖Gᵀxᵢ‖² − (xᵢ∘xᵢ)ᵀ(G∘G)1)`` for each row ``xᵢ``.
    :rtype: numpy.ndarray
    """
    Xsq = _check_design(X, Xsq, factors.dim)
    if factors.rank == 0:
        return np.zeros(X.n_rows)
    projected = X.csr @ factors.basis
    full = (projected ** 2) @ factors.weights
    diagonal = Xsq.csr @ ((factors.basis ** 2) @ factors.weights)
    return 0.5 * factors.scale * (full - diagonal)


def linear_scores(linear: np.ndarray, X: SparseDesignMatrix) -> np.ndarray:
    """Returns ``wᵀzᵢ`` for every sample."""
    return linear[0] + X.csr @ linear[1:]


def predict(model: CfmModel, X: SparseDesignMatrix,
            Xsq: SparseDesignMatrix | None = None) -> np.ndarray:
    """Predicts every row of ``X``.

    :param model: The model.
    :param X: The sample-major design with ``model.feature_dim`` columns.
    :param Xsq: ``row_squared(X)``; computed if ``None``.
    :raises ContractError: Dimension mismatch.
    :rtype: numpy.ndarray
    """
    Xsq = _check_design(X, Xsq, model.feature_dim)
    return linear_scores(model.linear, X) + quad_scores(X, Xsq, model.factors)


def _span(block) -> slice:
    if isinstance(block, slice):
        return block
    return slice(block.offset, block.offset + block.width)


def interaction_block(model: CfmModel, rows, cols) -> np.ndarray:
    """Reads off a block of the effective interaction matrix ``ηW``.

    For a user/item design, the user × item block is the completed rating
    matrix ``M`` of nuclear-norm matrix factorization.

    :param model: The model.
    :param rows: A feature block (anything with ``offset`` and ``width``)
        or a slice.
    :param cols: Same as ``rows``.
    :return: The dense block.
    :rtype: numpy.ndarray
    """
    factors = model.factors
    left = factors.basis[_span(rows)]
    right = factors.basis[_span(cols)]
    return factors.scale * (left * factors.weights) @ right.T


def save_model(model: CfmModel, path: str | os.PathLike) -> None:
    """Writes a model to a ``.npz`` container.

    The container holds the format version, ``d``, ``η``, ``λ₁``, ``w``, the
    rank, ``λ`` and ``P`` (column-major); floats are stored unchanged so a
    save/load round trip is exact.
    """
    arrays: ModelArrays = {
        "format_version": np.array(FORMAT_VERSION, dtype=np.int64),
        "feature_dim": np.array(model.feature_dim, dtype=np.int64),
        "eta": np.array(model.eta, dtype=np.float64),
        "lambda1": np.array(model.lambda1, dtype=np.float64),
        "linear": model.linear,
        "rank": np.array(model.rank, dtype=np.int64),
        "weights": model.factors.weights,
        "basis": np.asfortranarray(model.factors.basis),
    }
    # a file object keeps numpy from appending ".npz" to the name
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path: str | os.PathLike) -> CfmModel:
    """Reads a model written by :py:func:`save_model`.

    :raises IncompleteError: The container lacks some arrays.
    :raises InputError: Unknown format version or inconsistent shapes.
    """
    with np.load(path, allow_pickle=False) as archive:
        missing = [key for key in _MODEL_KEYS if key not in archive]
        if missing:
            raise IncompleteError(missing)
        arrays = {key: archive[key] for key in _MODEL_KEYS}
    version = int(arrays["format_version"])
    if version != FORMAT_VERSION:
        raise InputError(f"unsupported model format version {version}")
    dim = int(arrays["feature_dim"])
    rank = int(arrays["rank"])
    basis = arrays["basis"]
    if basis.shape != (dim, rank) or arrays["weights"].shape != (rank,):
        raise InputError("model arrays do not match the stored rank")
    factors = LowRankFactors(dim, np.ascontiguousarray(basis),
                             arrays["weights"], float(arrays["eta"]))
    try:
        return CfmModel(arrays["linear"], factors, float(arrays["lambda1"]),
                        dim)
    except ContractError as exc:
        raise InputError(f"corrupt model file: {exc}") from exc
