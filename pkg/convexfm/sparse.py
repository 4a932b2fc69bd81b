"""
Compressed sparse row storage and the vector kernels every solver builds on.

Design matrices are stored sample-major: row ``i`` holds the features of
sample ``i``. Products of the form ``Xᵀ D X v`` are then two passes over the
rows, and no transposed copy is ever materialized.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import ContractError, InputError

UNIT_SUM_TOL = 1e-9
UNIT_NORM_TOL = 1e-8


def as_vector(values, length: int | None = None, name: str = "vector",
              *, error=InputError) -> np.ndarray:
    """Converts ``values`` to a finite float64 vector.

    :param values: Anything :py:func:`numpy.asarray` understands.
    :param length: The required length, if any.
    :param name: The name used in error messages.
    :param error: The exception raised for non-finite entries.
    :raises ContractError: The vector is not 1-D or has the wrong length.
    :return: The vector.
    :rtype: numpy.ndarray
    """
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1:
        raise ContractError(f"{name} must be 1-D, got shape {vec.shape}")
    if length is not None and vec.shape[0] != length:
        raise ContractError(
            f"{name} has length {vec.shape[0]}, expected {length}")
    if not np.all(np.isfinite(vec)):
        raise error(f"{name} contains non-finite values")
    return vec


@dataclass(frozen=True, eq=False)
class SparseDesignMatrix:
    """An immutable CSR matrix with 0-based indices.

    :ivar n_rows: The number of rows (samples).
    :ivar n_cols: The number of columns (features).
    :ivar row_offsets: Start of each row in ``col_indices``; length
        ``n_rows + 1``.
    :ivar col_indices: Column of each stored entry, strictly increasing
        within a row.
    :ivar values: Value of each stored entry.
    """
    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    _csr: sp.csr_array = field(init=False, repr=False)

    def __post_init__(self):
        offsets = np.array(self.row_offsets, dtype=np.int64)
        indices = np.array(self.col_indices, dtype=np.int64)
        values = np.array(self.values, dtype=np.float64)
        if self.n_rows < 0 or self.n_cols < 0:
            raise ContractError("matrix dimensions must be non-negative")
        if offsets.shape != (self.n_rows + 1,):
            raise ContractError(
                f"row_offsets must have length {self.n_rows + 1}")
        nnz = indices.shape[0]
        if values.shape != (nnz,):
            raise ContractError("values and col_indices differ in length")
        if offsets[0] != 0 or offsets[-1] != nnz \
           or np.any(np.diff(offsets) < 0):
            raise ContractError("row_offsets must run from 0 to nnz "
                                "without decreasing")
        if nnz and (indices.min() < 0 or indices.max() >= self.n_cols):
            raise ContractError("column index out of range")
        if not np.all(np.isfinite(values)):
            raise InputError("matrix contains non-finite values")
        # within a row, columns must strictly increase
        steps = np.diff(indices) > 0
        row_starts = offsets[1:-1]
        row_starts = row_starts[(row_starts > 0) & (row_starts < nnz)]
        steps[row_starts - 1] = True
        if not np.all(steps):
            bad = int(np.searchsorted(offsets, np.argmin(steps) + 1,
                                      side="right") - 1)
            raise ContractError(
                f"row {bad} has repeated or unsorted column indices")
        for array in (offsets, indices, values):
            array.flags.writeable = False
        object.__setattr__(self, "row_offsets", offsets)
        object.__setattr__(self, "col_indices", indices)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_csr", sp.csr_array(
            (values, indices, offsets), shape=(self.n_rows, self.n_cols)))

    @classmethod
    def from_dense(cls, array) -> "SparseDesignMatrix":
        """Builds a matrix from a dense 2-D array, storing its non-zeros."""
        array = np.asarray(array, dtype=np.float64)
        if array.ndim != 2:
            raise ContractError(f"expected a 2-D array, got {array.ndim}-D")
        return cls.from_scipy(sp.csr_array(array))

    @classmethod
    def from_scipy(cls, matrix) -> "SparseDesignMatrix":
        """Builds a matrix from any :py:mod:`scipy.sparse` matrix.

        Duplicate entries are rejected rather than summed.
        """
        csr = sp.csr_array(matrix, dtype=np.float64)
        csr = csr.copy()
        csr.sort_indices()
        n_rows, n_cols = csr.shape
        return cls(n_rows, n_cols, csr.indptr, csr.indices, csr.data)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_cols

    @property
    def nnz(self) -> int:
        return int(self.col_indices.shape[0])

    @property
    def csr(self) -> sp.csr_array:
        """The :py:mod:`scipy.sparse` view of this matrix. Do not mutate."""
        return self._csr

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Returns the column indices and values stored in row ``i``."""
        lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
        return self.col_indices[lo:hi], self.values[lo:hi]

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()

    def take_rows(self, rows) -> "SparseDesignMatrix":
        """Returns the matrix made of the given rows, in the given order."""
        return SparseDesignMatrix.from_scipy(self._csr[np.asarray(rows), :])


def spmv(A: SparseDesignMatrix, v) -> np.ndarray:
    """Computes ``A v``.

    :raises ContractError: ``v`` does not have ``A.n_cols`` entries.
    """
    v = as_vector(v, A.n_cols, "v", error=ContractError)
    return A.csr @ v


def spmv_transpose(A: SparseDesignMatrix, v) -> np.ndarray:
    """Computes ``Aᵀ v`` without building the transpose.

    :raises ContractError: ``v`` does not have ``A.n_rows`` entries.
    """
    v = as_vector(v, A.n_rows, "v", error=ContractError)
    # csr.T is a CSC view over the same buffers
    return A.csr.T @ v


def row_squared(A: SparseDesignMatrix) -> SparseDesignMatrix:
    """Returns ``A`` with every stored value squared."""
    return SparseDesignMatrix(A.n_rows, A.n_cols, A.row_offsets,
                              A.col_indices, A.values ** 2)


def with_bias_column(X: SparseDesignMatrix) -> SparseDesignMatrix:
    """Prepends an all-ones column to ``X``, giving the rows ``zᵢ = [1, xᵢ]``.
    """
    offsets = X.row_offsets + np.arange(X.n_rows + 1)
    indices = np.empty(X.nnz + X.n_rows, dtype=np.int64)
    values = np.empty(X.nnz + X.n_rows, dtype=np.float64)
    starts = offsets[:-1]
    indices[starts] = 0
    values[starts] = 1.0
    mask = np.ones(indices.shape[0], dtype=bool)
    mask[starts] = False
    indices[mask] = X.col_indices + 1
    values[mask] = X.values
    return SparseDesignMatrix(X.n_rows, X.n_cols + 1, offsets, indices,
                              values)


def column_square_sums(A: SparseDesignMatrix) -> np.ndarray:
    """Returns ``Σᵢ A[i, j]²`` for every column ``j``, i.e. the diagonal of
    ``AᵀA``."""
    return np.bincount(A.col_indices, weights=A.values ** 2,
                       minlength=A.n_cols)


@dataclass(frozen=True, eq=False)
class LowRankFactors:
    """The Frank-Wolfe iterate ``W = P diag(λ) Pᵀ`` on the unit-trace
    spectahedron, applied at scale ``η``.

    :ivar dim: The feature dimension ``d``.
    :ivar basis: ``d × rank`` array of unit columns (``P``).
    :ivar weights: ``rank`` non-negative weights summing to one (``λ``).
    :ivar scale: The trace budget ``η``.
    """
    dim: int
    basis: np.ndarray
    weights: np.ndarray
    scale: float

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if basis.ndim != 2 or basis.shape[0] != self.dim:
            raise ContractError(
                f"basis must be {self.dim} × rank, got {basis.shape}")
        if weights.shape != (basis.shape[1],):
            raise ContractError("one weight per basis column is required")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def empty(cls, dim: int, scale: float) -> "LowRankFactors":
        """The rank-0 (zero) iterate."""
        return cls(dim, np.zeros((dim, 0)), np.zeros(0), float(scale))

    @property
    def rank(self) -> int:
        return int(self.weights.shape[0])

    def validate(self) -> "LowRankFactors":
        """Checks the spectahedron invariants.

        :raises ContractError: A weight is negative, the weights do not sum
            to one, or a basis column does not have unit norm.
        """
        if self.rank == 0:
            return self
        if np.any(self.weights < 0):
            raise ContractError("factor weights must be non-negative")
        total = self.weights.sum()
        if abs(total - 1.0) > UNIT_SUM_TOL:
            raise ContractError(f"factor weights sum to {total!r}, not 1")
        norms = np.linalg.norm(self.basis, axis=0)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            raise ContractError("factor basis columns must have unit norm")
        return self

    def with_atom(self, p, alpha: float) -> "LowRankFactors":
        """Returns ``(1 − α) W + α ppᵀ`` as new factors."""
        p = as_vector(p, self.dim, "atom", error=ContractError)
        p = p / np.linalg.norm(p)
        weights = np.append((1.0 - alpha) * self.weights, alpha)
        basis = np.column_stack([self.basis, p])
        return LowRankFactors(self.dim, basis, weights, self.scale)

    def scaled_factor(self) -> np.ndarray:
        """Returns ``G = P diag(η λ)^{1/2}`` so that ``ηW = G Gᵀ``."""
        return self.basis * np.sqrt(self.scale * self.weights)
