"""
Conjugate gradient machinery for the eliminated linear term.

All operators here act on the sample-major design ``Z`` (row ``i`` is
``zᵢ = [1, xᵢ]``) and never form ``ZᵀZ`` or any ``n × n`` matrix. With
``A = ZᵀZ + λ₁I``:

* ``solve_linear_term`` gives ``w = A⁻¹ Zᵀ t``, the ridge fit of ``t``;
* ``apply_R`` gives ``R v = v − Z A⁻¹ Zᵀ v``;
* ``apply_C`` gives ``C v = RᵀR v + λ₁ HᵀH v`` with ``H = A⁻¹ Zᵀ``.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .exceptions import ContractError, ConvergenceWarning, InputError, \
    NumericalError
from .protocols.cfm import Preconditioner
from .settings import current_settings
from .sparse import SparseDesignMatrix, as_vector, column_square_sums

logger = logging.getLogger(__name__)

MAX_ITERS_CAP = 2000


@dataclass(frozen=True)
class CgConfig:
    """Conjugate gradient configuration.

    :ivar tol: Relative residual threshold on the normal equations.
    :ivar max_iters: The iteration cap. ``None`` means ``10·p`` capped at
        2000, where ``p`` is the number of unknowns.
    :ivar preconditioner: The preconditioner to use.
    """
    tol: float = 1e-8
    max_iters: int | None = None
    preconditioner: Preconditioner = Preconditioner.JACOBI

    def __post_init__(self):
        if not self.tol > 0:
            raise ContractError(f"CG tol must be positive, got {self.tol}")
        if self.max_iters is not None and self.max_iters < 1:
            raise ContractError("CG max_iters must be at least 1")
        if isinstance(self.preconditioner, str):
            object.__setattr__(self, "preconditioner",
                               Preconditioner(self.preconditioner))

    def iteration_cap(self, n_unknowns: int) -> int:
        if self.max_iters is not None:
            return self.max_iters
        return max(1, min(10 * n_unknowns, MAX_ITERS_CAP))


@dataclass(frozen=True)
class CgSolution:
    """The outcome of a conjugate gradient solve.

    :ivar solution: The solution vector.
    :ivar iterations: CG iterations performed.
    :ivar final_relative_residual: ``‖b − Ax‖ / ‖b‖`` at exit (0 for
        ``b = 0``).
    :ivar converged: Whether ``tol`` was reached before ``max_iters``.
    """
    solution: np.ndarray
    iterations: int
    final_relative_residual: float
    converged: bool


def resolve_cg(cfg: CgConfig | None) -> CgConfig:
    """Returns ``cfg``, or the configuration of the current
    :py:class:`~convexfm.settings.Settings`."""
    if cfg is not None:
        return cfg
    return current_settings().cg or CgConfig()


def _check_lambda(lambda1: float):
    if not lambda1 >= 0:
        raise ContractError(f"lambda1 must be non-negative, got {lambda1}")


def solve_normal(Z: SparseDesignMatrix, rhs, lambda1: float = 0.0,
                 warm_start=None, cfg: CgConfig | None = None) -> CgSolution:
    """Solves ``(ZᵀZ + λ₁I) w = rhs`` by (preconditioned) CG.

    Each CG step applies ``Z`` and ``Zᵀ`` once.

    :param Z: The sample-major design.
    :param rhs: The right-hand side, one entry per column of ``Z``.
    :param lambda1: The ridge parameter.
    :param warm_start: The initial guess, if any.
    :param cfg: The CG configuration.
    :raises ContractError: Dimension mismatch or negative ``lambda1``.
    :raises NumericalError: CG produced non-finite values.
    :rtype: CgSolution
    """
    cfg = resolve_cg(cfg)
    _check_lambda(lambda1)
    p = Z.n_cols
    rhs = as_vector(rhs, p, "rhs")
    x0 = None
    if warm_start is not None:
        x0 = as_vector(warm_start, p, "warm_start", error=ContractError)

    csr = Z.csr

    def normal_matvec(v):
        v = np.ravel(v)
        return csr.T @ (csr @ v) + lambda1 * v

    operator = LinearOperator((p, p), matvec=normal_matvec,
                              dtype=np.float64)
    preconditioner = None
    if cfg.preconditioner is Preconditioner.JACOBI:
        diagonal = column_square_sums(Z) + lambda1
        # empty columns carry no information; leave them unscaled
        inverse = 1.0 / np.where(diagonal > 0, diagonal, 1.0)
        preconditioner = LinearOperator(
            (p, p), matvec=lambda v: inverse * np.ravel(v), dtype=np.float64)

    iterations = 0

    def count(_xk):
        nonlocal iterations
        iterations += 1

    solution, info = cg(operator, rhs, x0=x0, rtol=cfg.tol, atol=0.0,
                        maxiter=cfg.iteration_cap(p), M=preconditioner,
                        callback=count)
    if info < 0 or not np.all(np.isfinite(solution)):
        raise NumericalError("conjugate gradient broke down",
                             diagnostics={"info": info,
                                          "iterations": iterations})
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0:
        relative = 0.0
    else:
        relative = float(np.linalg.norm(rhs - normal_matvec(solution))
                         / rhs_norm)
    converged = info == 0
    if not converged:
        warnings.warn(
            f"CG stopped after {iterations} iterations with relative "
            f"residual {relative:.3e} (tol {cfg.tol:.1e})",
            ConvergenceWarning, stacklevel=2)
    logger.debug("CG: %d iterations, relative residual %.3e",
                 iterations, relative)
    return CgSolution(solution, iterations, relative, converged)


def solve_linear_term(Z: SparseDesignMatrix, target, lambda1: float = 0.0,
                      warm_start=None,
                      cfg: CgConfig | None = None) -> CgSolution:
    """Fits the linear term: ``w`` minimizing ``‖Zw − target‖² + λ₁‖w‖²``.

    :param Z: The sample-major design (bias column included by the caller).
    :param target: One target per row of ``Z``.
    :param lambda1: The ridge parameter; 0 requires ``ZᵀZ`` to be
        positive definite.
    :param warm_start: A previous solution to start from.
    :param cfg: The CG configuration.
    :raises ContractError: Dimension mismatch.
    :raises InputError: ``target`` has non-finite entries.
    :rtype: CgSolution
    """
    target = as_vector(target, Z.n_rows, "target")
    return solve_normal(Z, Z.csr.T @ target, lambda1, warm_start, cfg)


def residual(Z: SparseDesignMatrix, v, lambda1: float = 0.0,
             warm_start=None,
             cfg: CgConfig | None = None) -> tuple[np.ndarray, CgSolution]:
    """Returns ``R v`` together with the solve that produced it."""
    v = as_vector(v, Z.n_rows, "v")
    solved = solve_linear_term(Z, v, lambda1, warm_start, cfg)
    return v - Z.csr @ solved.solution, solved


def apply_R(Z: SparseDesignMatrix, v, lambda1: float = 0.0,
            cfg: CgConfig | None = None) -> np.ndarray:
    """Applies ``R = I − Z(ZᵀZ + λ₁I)⁻¹Zᵀ``: the part of ``v`` the
    (ridge-regularized) linear model cannot explain."""
    return residual(Z, v, lambda1, None, cfg)[0]


def apply_C_counted(Z: SparseDesignMatrix, v, lambda1: float = 0.0,
                    cfg: CgConfig | None = None) -> tuple[np.ndarray, int]:
    """Same as :py:func:`apply_C`, also returning the CG iterations spent."""
    _check_lambda(lambda1)
    v = as_vector(v, Z.n_rows, "v")
    rv, first = residual(Z, v, lambda1, None, cfg)
    if lambda1 == 0:
        return rv, first.iterations
    h = first.solution
    rr, second = residual(Z, rv, lambda1, None, cfg)  # Rᵀ(Rv) = R(Rv)
    third = solve_normal(Z, h, lambda1, None, cfg)
    return rr + lambda1 * (Z.csr @ third.solution), \
        first.iterations + second.iterations + third.iterations


def apply_C(Z: SparseDesignMatrix, v, lambda1: float = 0.0,
            cfg: CgConfig | None = None) -> np.ndarray:
    """Applies ``C = RᵀR + λ₁HᵀH``.

    At ``λ₁ = 0`` ``R`` is a projector and this is :py:func:`apply_R`.
    Otherwise the two terms are composed from separate solves.
    """
    return apply_C_counted(Z, v, lambda1, cfg)[0]
