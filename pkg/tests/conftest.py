"""
Shared fixtures and dense reference implementations.

The oracles here form every matrix explicitly; they are only meant for the
tiny instances the tests build.
"""

import numpy as np
import pytest

from convexfm.data import Dataset, FeatureBlock
from convexfm.sparse import LowRankFactors, SparseDesignMatrix


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_sparse(rng, n_rows: int, n_cols: int, density: float = 0.4):
    """A random design with both its sparse and dense forms."""
    dense = rng.standard_normal((n_rows, n_cols))
    dense[rng.random((n_rows, n_cols)) > density] = 0.0
    return SparseDesignMatrix.from_dense(dense), dense


def random_factors(rng, dim: int, rank: int, scale: float) -> LowRankFactors:
    basis = rng.standard_normal((dim, rank))
    basis /= np.linalg.norm(basis, axis=0)
    weights = rng.random(rank)
    return LowRankFactors(dim, basis, weights / weights.sum(), scale)


def dense_interactions(factors: LowRankFactors) -> np.ndarray:
    """``ηW`` as a dense matrix."""
    return factors.scale * (factors.basis * factors.weights) @ factors.basis.T


def dense_quad(dense_X: np.ndarray, W: np.ndarray) -> np.ndarray:
    """``½ Σ_{ℓ≠ℓ'} W[ℓ, ℓ'] x_ℓ x_ℓ'`` for every row."""
    full = np.einsum("ij,jk,ik->i", dense_X, W, dense_X)
    return 0.5 * (full - dense_X ** 2 @ np.diag(W))


def dense_design(dense_X: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(dense_X.shape[0]), dense_X])


def dense_R(dense_Z: np.ndarray, lambda1: float = 0.0) -> np.ndarray:
    """``I − Z(ZᵀZ + λ₁I)⁻¹Zᵀ`` for a sample-major ``Z``."""
    n, p = dense_Z.shape
    if lambda1 == 0:
        return np.eye(n) - dense_Z @ np.linalg.pinv(dense_Z)
    A = dense_Z.T @ dense_Z + lambda1 * np.eye(p)
    return np.eye(n) - dense_Z @ np.linalg.solve(A, dense_Z.T)


def dense_C(dense_Z: np.ndarray, lambda1: float = 0.0) -> np.ndarray:
    """``RᵀR + λ₁HᵀH`` composed literally."""
    n, p = dense_Z.shape
    R = dense_R(dense_Z, lambda1)
    if lambda1 == 0:
        return R.T @ R
    H = np.linalg.solve(dense_Z.T @ dense_Z + lambda1 * np.eye(p), dense_Z.T)
    return R.T @ R + lambda1 * H.T @ H


def dense_objective(y, dense_X, W, lambda1: float = 0.0) -> float:
    """``(y − f_Q(X; W))ᵀ C (y − f_Q(X; W))`` for a dense ``W``."""
    ybar = y - dense_quad(dense_X, W)
    return float(ybar @ dense_C(dense_design(dense_X), lambda1) @ ybar)


def make_dataset(dense_X, y, name: str = "features") -> Dataset:
    dense_X = np.asarray(dense_X, dtype=np.float64)
    return Dataset(SparseDesignMatrix.from_dense(dense_X), y,
                   [FeatureBlock(name, 0, dense_X.shape[1])])


@pytest.fixture
def quadratic_problem(rng):
    """A small dense regression problem with genuine interactions."""
    dense_X = rng.standard_normal((40, 5))
    truth = random_factors(rng, 5, 2, 3.0)
    y = 0.5 + dense_X @ rng.standard_normal(5) \
        + dense_quad(dense_X, dense_interactions(truth))
    return make_dataset(dense_X, y), dense_X


@pytest.fixture
def ratings_records():
    """Ratings of three users on three items."""
    rows = [("u1", "i1", 5.0), ("u1", "i2", 3.0), ("u2", "i1", 4.0),
            ("u2", "i3", 1.0), ("u3", "i2", 2.0), ("u3", "i3", 4.0),
            ("u1", "i3", 2.0), ("u3", "i1", 5.0)]
    return [{"user": u, "item": i, "rating": r, "timestamp": "0"}
            for u, i, r in rows]
