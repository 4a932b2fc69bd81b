"""
Matrix-free Lanczos iteration for the leading eigenpair of a symmetric
operator.

This is the linear minimization oracle of the Frank-Wolfe loop: on the unit
trace spectahedron, the best vertex for a linear objective ``⟨S, W⟩`` is
``ppᵀ`` with ``p`` the eigenvector of the largest *algebraic* eigenvalue of
``S``.
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .exceptions import ContractError, ConvergenceWarning, NumericalError
from .protocols.cfm import SymmetricOperator

logger = logging.getLogger(__name__)

BASIS_CAP = 300
MIN_TOL = 1e-9


class FunctionOperator(SymmetricOperator):
    """A :py:class:`SymmetricOperator` made from a plain function."""

    def __init__(self, dim: int, function: Callable[[np.ndarray],
                                                     np.ndarray]):
        self._dim = int(dim)
        self.function = function

    @property
    def dim(self) -> int:
        return self._dim

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.function(v)


class MatrixOperator(SymmetricOperator):
    """A :py:class:`SymmetricOperator` backed by an explicit (dense or
    scipy sparse) symmetric matrix."""

    def __init__(self, matrix):
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ContractError("operator matrix must be square")
        self.matrix = matrix

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(self.matrix @ v).ravel()


@dataclass(frozen=True)
class EigResult:
    """An approximate leading eigenpair.

    :ivar vector: The unit eigenvector estimate (sign is arbitrary).
    :ivar value: Its Rayleigh quotient.
    :ivar iterations: Operator applications spent in Lanczos steps.
    :ivar residual: ``‖Av − value·v‖``.
    :ivar converged: Whether the Ritz residual test passed.
    :ivar ritz_history: The running best Ritz value after every step.
    """
    vector: np.ndarray
    value: float
    iterations: int
    residual: float
    converged: bool = True
    ritz_history: tuple[float, ...] = ()


def _top_ritz_pair(alphas: list[float],
                   betas: list[float]) -> tuple[float, np.ndarray]:
    if len(alphas) == 1:
        return alphas[0], np.ones(1)
    k = len(alphas)
    values, vectors = eigh_tridiagonal(
        np.asarray(alphas), np.asarray(betas[:k - 1]),
        select="i", select_range=(k - 1, k - 1))
    return float(values[0]), vectors[:, 0]


def leading_eigenvector(op: SymmetricOperator, tol: float = 1e-8,
                        max_iters: int = BASIS_CAP,
                        seed: int = 0) -> EigResult:
    """Finds the eigenpair of the largest algebraic eigenvalue of ``op``.

    Lanczos with full reorthogonalization against the stored basis. The
    basis holds at most 300 vectors; when it fills up the iteration restarts
    from the best Ritz vector. Iteration stops when the Ritz residual drops
    to ``tol·max(1, |θ|)`` or after ``max_iters`` operator applications.

    :param op: The symmetric operator.
    :param tol: The relative Ritz residual threshold.
    :param max_iters: The cap on operator applications.
    :param seed: Seed of the pseudo-random start vector.
    :raises ContractError: ``tol`` or ``op.dim`` is invalid, or ``op``
        returns a vector of the wrong length.
    :raises NumericalError: ``op`` produced non-finite values.
    :rtype: EigResult
    """
    if not tol > 0:
        raise ContractError(f"tol must be positive, got {tol}")
    if max_iters < 1:
        raise ContractError("max_iters must be at least 1")
    dim = op.dim
    if dim < 1:
        raise ContractError("operator dimension must be at least 1")

    def apply(v):
        out = np.asarray(op.apply(v), dtype=np.float64)
        if out.shape != (dim,):
            raise ContractError(
                f"operator returned shape {out.shape}, expected ({dim},)")
        if not np.all(np.isfinite(out)):
            raise NumericalError("operator produced non-finite values")
        return out

    if dim == 1:
        value = float(apply(np.ones(1))[0])
        return EigResult(np.ones(1), value, 1, 0.0, True, (value,))

    rng = np.random.default_rng(seed)
    start = rng.standard_normal(dim)
    start /= np.linalg.norm(start)

    cap = min(dim, BASIS_CAP, max_iters)
    iterations = 0
    history: list[float] = []
    best = -np.inf
    converged = False
    while True:
        basis = np.zeros((dim, cap))
        basis[:, 0] = start
        alphas: list[float] = []
        betas: list[float] = []
        for j in range(cap):
            q = basis[:, j]
            w = apply(q)
            iterations += 1
            alpha = float(q @ w)
            w -= alpha * q
            if j > 0:
                w -= betas[-1] * basis[:, j - 1]
            # twice is enough
            for _ in range(2):
                w -= basis[:, :j + 1] @ (basis[:, :j + 1].T @ w)
            alphas.append(alpha)
            beta = float(np.linalg.norm(w))
            theta, s = _top_ritz_pair(alphas, betas)
            best = max(best, theta)
            history.append(best)
            ritz_residual = beta * abs(s[-1])
            scale = max(1.0, abs(theta))
            if ritz_residual <= tol * scale \
               or beta <= np.finfo(float).eps * scale:
                converged = True
                break
            if iterations >= max_iters or j == cap - 1:
                break
            betas.append(beta)
            basis[:, j + 1] = w / beta
        ritz = basis[:, :len(alphas)] @ s
        ritz /= np.linalg.norm(ritz)
        if converged or iterations >= max_iters:
            break
        logger.debug("Lanczos restart after %d iterations, θ = %.6g",
                     iterations, theta)
        start = ritz

    image = apply(ritz)
    value = float(ritz @ image)
    residual = float(np.linalg.norm(image - value * ritz))
    if not converged:
        warnings.warn(
            f"Lanczos stopped after {iterations} iterations with residual "
            f"{residual:.3e}", ConvergenceWarning, stacklevel=2)
    return EigResult(ritz, value, iterations, residual, converged,
                     tuple(history))
