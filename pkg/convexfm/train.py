"""
Training: the eliminated-linear-term objective, its gradient, the step size
rules and Hazan's Frank-Wolfe loop over the trace-norm ball.

The interaction matrix is kept as ``ηW`` with ``W`` on the unit-trace
spectahedron (see :py:class:`~convexfm.sparse.LowRankFactors`). For a fixed
``W`` the best linear term is a ridge fit of ``ȳ = y − f_Q(X; ηW)``;
substituting it leaves ``J(W) = ȳᵀ C ȳ`` with
``C = RᵀR + λ₁HᵀH``. Since ``ZᵀZ = A − λ₁I``, ``C`` simplifies to ``R``, so a
single solve per step gives both the residual ``D = C ȳ = ȳ − Zŵ`` and
``J = ‖D‖² + λ₁‖ŵ‖²``.
"""

import csv
import logging
import os
import time
from collections.abc import Iterator
from dataclasses import dataclass, field
from typing import NamedTuple, TextIO

import numpy as np

from .data import Dataset
from .eigen import MIN_TOL, leading_eigenvector
from .exceptions import ContractError, InputError, NumericalError
from .linsolve import CgConfig, apply_C, apply_C_counted, resolve_cg, \
    solve_linear_term
from .metrics import rmse
from .model import CfmModel, linear_scores, predict, quad_scores
from .protocols.cfm import StepRule, SymmetricOperator, TraceRecord
from .settings import current_settings
from .sparse import LowRankFactors, SparseDesignMatrix, UNIT_NORM_TOL, \
    as_vector, spmv, spmv_transpose, with_bias_column

logger = logging.getLogger(__name__)

DEGENERATE_CURVATURE = 1e-300
TRACE_COLUMNS = ("iter", "objective", "alpha", "eig_value", "train_rmse",
                 "test_rmse", "elapsed_s", "gap", "cg_iters", "eig_iters")


@dataclass(frozen=True)
class TrainConfig:
    """Configuration of :py:func:`hazan_fit`.

    :ivar eta: The trace budget ``η``.
    :ivar lambda1: The ridge parameter of the linear term.
    :ivar max_outer_iters: The number of Frank-Wolfe steps ``T``. The
        classical bound ``⌈4C_f/ε⌉`` for accuracy ``ε`` is one way to
        choose it.
    :ivar step_rule: Harmonic ``2/(t+2)`` steps or exact line search.
    :ivar cf_constant: ``C_f``; step ``t`` asks the eigensolver for accuracy
        ``C_f/(t+1)²``.
    :ivar cg: The CG configuration; ``None`` for the current settings.
    :ivar eigen_max_iters: The Lanczos cap; ``None`` for the current
        settings.
    :ivar seed: Seeds the Lanczos start vectors.
    :ivar eval_every: Record a trace row every this many steps (the last
        step is always recorded).
    :ivar stop_gap: Stop once the Frank-Wolfe gap drops to this value.
    :ivar diagonal_correction: Use the exact gradient
        ``η(XᵀDX − diag(Xsqᵀ D))`` rather than ``η XᵀDX``.
    :ivar fit_linear_term: When false the linear term is pinned to zero
        and ``C`` is replaced by the identity, which turns training into
        plain trace-norm constrained least squares.
    """
    eta: float
    lambda1: float = 0.0
    max_outer_iters: int = 100
    step_rule: StepRule = StepRule.LINE_SEARCH
    cf_constant: float = 1.0
    cg: CgConfig | None = None
    eigen_max_iters: int | None = None
    seed: int = 0
    eval_every: int = 1
    stop_gap: float | None = None
    diagonal_correction: bool = True
    fit_linear_term: bool = True

    def __post_init__(self):
        if isinstance(self.step_rule, str):
            object.__setattr__(self, "step_rule",
                               StepRule(self.step_rule.replace("-", "_")))
        if not self.eta > 0:
            raise ContractError(f"eta must be positive, got {self.eta}")
        if not self.lambda1 >= 0:
            raise ContractError("lambda1 must be non-negative")
        if self.max_outer_iters < 1:
            raise ContractError("max_outer_iters must be at least 1")
        if not self.cf_constant > 0:
            raise ContractError("cf_constant must be positive")
        if self.eval_every < 1:
            raise ContractError("eval_every must be at least 1")
        if self.eigen_max_iters is not None and self.eigen_max_iters < 1:
            raise ContractError("eigen_max_iters must be at least 1")
        if self.stop_gap is not None and self.stop_gap < 0:
            raise ContractError("stop_gap must be non-negative")

    def eigen_tolerance(self, t: int) -> float:
        """The Lanczos tolerance at 0-based step ``t``."""
        return max(self.cf_constant / (t + 1) ** 2, MIN_TOL)


@dataclass
class TrainTrace:
    """The rows recorded while training, in step order."""
    records: list[TraceRecord] = field(default_factory=list)

    def append(self, record: TraceRecord) -> None:
        if self.records and record["iter"] <= self.records[-1]["iter"]:
            raise ContractError("trace rows must have increasing iter")
        if not np.isfinite(record["objective"]):
            raise NumericalError("non-finite objective in trace",
                                 diagnostics=dict(record))
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self.records)

    def __getitem__(self, index) -> TraceRecord:
        return self.records[index]

    def column(self, name: str) -> np.ndarray:
        """One column of the trace; missing values become NaN."""
        return np.array([np.nan if row.get(name) is None else row[name]
                         for row in self.records], dtype=np.float64)

    def write_csv(self, fh: TextIO) -> None:
        """Writes the trace as CSV with a header row."""
        writer = csv.DictWriter(fh, fieldnames=TRACE_COLUMNS,
                                lineterminator="\n")
        writer.writeheader()
        for row in self.records:
            writer.writerow({key: "" if row.get(key) is None else row[key]
                             for key in TRACE_COLUMNS})

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            self.write_csv(fh)


class _Residual(NamedTuple):
    D: np.ndarray
    w_hat: np.ndarray
    objective: float
    cg_iters: int


def _factors_of(model_or_factors) -> LowRankFactors:
    if isinstance(model_or_factors, CfmModel):
        return model_or_factors.factors
    return model_or_factors


def _residual(ybar: np.ndarray, Z: SparseDesignMatrix, lambda1: float,
              cg: CgConfig | None, warm, fit_linear: bool = True
              ) -> _Residual:
    if not fit_linear:
        return _Residual(ybar, np.zeros(Z.n_cols), float(ybar @ ybar), 0)
    solved = solve_linear_term(Z, ybar, lambda1, warm, cg)
    w_hat = solved.solution
    D = ybar - Z.csr @ w_hat
    value = float(D @ D + lambda1 * (w_hat @ w_hat))
    return _Residual(D, w_hat, value, solved.iterations)


def objective(y, X: SparseDesignMatrix, Xsq: SparseDesignMatrix | None,
              factors: LowRankFactors, lambda1: float = 0.0,
              cg: CgConfig | None = None) -> float:
    """``J = ȳᵀ C ȳ`` with ``ȳ = y − f_Q(X; ηW)``.

    :param y: The targets.
    :param X: The sample-major design.
    :param Xsq: ``row_squared(X)``; computed if ``None``.
    :param factors: The interaction factors (model or factors).
    :param lambda1: The ridge parameter.
    :param cg: The CG configuration.
    :rtype: float
    """
    y = as_vector(y, X.n_rows, "y")
    ybar = y - quad_scores(X, Xsq, _factors_of(factors))
    value = float(ybar @ apply_C(with_bias_column(X), ybar, lambda1, cg))
    return max(value, 0.0)


def gradient_diag(y, X: SparseDesignMatrix, Xsq: SparseDesignMatrix | None,
                  model, cg: CgConfig | None = None,
                  warm=None) -> tuple[np.ndarray, np.ndarray]:
    """Computes the residual ``D = C ȳ`` that defines the gradient, and the
    linear term ``ŵ`` fitted along the way.

    :param y: The targets.
    :param model: A :py:class:`CfmModel`; only its factors and ``lambda1``
        are used.
    :param warm: A previous ``ŵ`` to warm-start CG from.
    :return: ``(D, ŵ)``; ``D`` is also the training residual
        ``y − f(X; ŵ, ηW)``.
    """
    y = as_vector(y, X.n_rows, "y")
    ybar = y - quad_scores(X, Xsq, model.factors)
    state = _residual(ybar, with_bias_column(X), model.lambda1, cg, warm)
    return state.D, state.w_hat


class GradientOperator(SymmetricOperator):
    """``v ↦ η (Xᵀ diag(D) X v − (Xsqᵀ D) ∘ v)``, the negated gradient of the
    rescaled objective, applied without forming any ``d × d`` matrix.

    Without ``Xsq`` the diagonal term is dropped, leaving ``η Xᵀ diag(D) X``.
    """

    def __init__(self, X: SparseDesignMatrix, D, eta: float = 1.0,
                 Xsq: SparseDesignMatrix | None = None):
        self.X = X
        self.D = as_vector(D, X.n_rows, "D", error=ContractError)
        self.eta = float(eta)
        self.correction = None
        if Xsq is not None:
            if Xsq.shape != X.shape:
                raise ContractError("squared design does not match")
            self.correction = spmv_transpose(Xsq, self.D)

    @property
    def dim(self) -> int:
        return self.X.n_cols

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = spmv_transpose(self.X, self.D * spmv(self.X, v))
        if self.correction is not None:
            out -= self.correction * v
        return self.eta * out


def gradient_operator(X: SparseDesignMatrix, D, eta: float = 1.0,
                      Xsq: SparseDesignMatrix | None = None
                      ) -> SymmetricOperator:
    """Returns ``−∇J_η`` as an operator. See :py:class:`GradientOperator`."""
    return GradientOperator(X, D, eta, Xsq)


def _atom(p: np.ndarray, scale: float) -> LowRankFactors:
    return LowRankFactors(p.shape[0], p[:, None], np.ones(1), scale)


def _step_from_direction(D: np.ndarray, s: np.ndarray,
                         Z: SparseDesignMatrix, lambda1: float,
                         cg: CgConfig | None,
                         fit_linear: bool = True) -> tuple[float, int]:
    """Minimizes ``(ȳ − αs)ᵀ C (ȳ − αs)`` over ``α ∈ [0, 1]`` given
    ``D = C ȳ``."""
    if fit_linear:
        Cs, iterations = apply_C_counted(Z, s, lambda1, cg)
    else:
        Cs, iterations = s, 0
    curvature = float(s @ Cs)
    if curvature < DEGENERATE_CURVATURE:
        logger.warning("degenerate search direction (sᵀCs = %.3g), "
                       "taking a zero step", curvature)
        return 0.0, iterations
    return float(np.clip((D @ s) / curvature, 0.0, 1.0)), iterations


def line_search_step(y, X: SparseDesignMatrix,
                     Xsq: SparseDesignMatrix | None,
                     factors: LowRankFactors, p, lambda1: float = 0.0,
                     cg: CgConfig | None = None) -> float:
    """The exact step towards the vertex ``ppᵀ``.

    With ``s = f_Q(X; ηppᵀ) − f_Q(X; ηW)`` the objective along the segment
    is a convex quadratic in ``α``; its minimizer ``⟨Cȳ, s⟩ / sᵀCs`` is
    clamped to ``[0, 1]``.

    :param p: The unit vertex direction.
    :raises ContractError: ``p`` is not a unit vector.
    :return: The step, or 0 for a degenerate direction.
    """
    factors = _factors_of(factors)
    p = as_vector(p, factors.dim, "p", error=ContractError)
    if abs(np.linalg.norm(p) - 1.0) > UNIT_NORM_TOL:
        raise ContractError("line search direction must be a unit vector")
    y = as_vector(y, X.n_rows, "y")
    current = quad_scores(X, Xsq, factors)
    s = quad_scores(X, Xsq, _atom(p, factors.scale)) - current
    Z = with_bias_column(X)
    D = _residual(y - current, Z, lambda1, cg, None).D
    return _step_from_direction(D, s, Z, lambda1, cg)[0]


def _check_finite(ybar: np.ndarray, t: int, alpha: float) -> None:
    if not np.all(np.isfinite(ybar)):
        raise NumericalError(
            f"predictions became non-finite at iteration {t}",
            diagnostics={"iter": t, "alpha": alpha,
                         "bad_samples": int(np.sum(~np.isfinite(ybar)))})


def hazan_fit(train: Dataset, config: TrainConfig,
              test: Dataset | None = None) -> tuple[CfmModel, TrainTrace]:
    """Fits a convex factorization machine with Hazan's algorithm.

    Starting from ``W = 0``, every step takes the leading eigenvector ``p``
    of the negated gradient and moves to ``(1 − α) W + α ppᵀ``. The first
    step always has ``α = 1``; a step of ``α = 0`` leaves the factors
    unchanged.

    :param train: The training set.
    :param config: The configuration.
    :param test: A test set to score in every trace row.
    :raises InputError: ``train`` is empty.
    :raises ContractError: ``test`` has a different number of columns.
    :raises NumericalError: The objective became non-finite.
    :return: The model and the trace.
    """
    if train.n == 0:
        raise InputError("cannot train on an empty dataset")
    if test is not None and test.d != train.d:
        raise ContractError(f"test set has {test.d} columns, training set "
                            f"has {train.d}")
    cg = resolve_cg(config.cg)
    eigen_cap = config.eigen_max_iters \
        or current_settings().eigen_max_iters
    X, Xsq, y = train.X, train.Xsq, train.y
    Z = with_bias_column(X)
    lambda1, eta = config.lambda1, config.eta
    fit_linear = config.fit_linear_term

    factors = LowRankFactors.empty(train.d, eta)
    quad = np.zeros(train.n)
    state = _residual(y, Z, lambda1, cg, None, fit_linear)
    logger.info("training: n=%d d=%d eta=%g lambda1=%g steps=%d rule=%s",
                train.n, train.d, eta, lambda1, config.max_outer_iters,
                config.step_rule.value)
    trace = TrainTrace()
    started = time.perf_counter()

    last = config.max_outer_iters - 1
    for t in range(config.max_outer_iters):
        operator = gradient_operator(
            X, state.D, eta, Xsq if config.diagonal_correction else None)
        eig = leading_eigenvector(operator, config.eigen_tolerance(t),
                                  eigen_cap, config.seed + t)
        logger.debug("step %d: Lanczos %d iterations, θ = %.6g",
                     t, eig.iterations, eig.value)
        atom_scores = quad_scores(X, Xsq, _atom(eig.vector, eta))
        direction = atom_scores - quad
        gap = 2.0 * float(state.D @ direction)
        cg_iters = state.cg_iters

        if factors.rank == 0:
            alpha = 1.0
        elif config.step_rule is StepRule.HARMONIC:
            alpha = 2.0 / (t + 2)
        else:
            alpha, spent = _step_from_direction(state.D, direction, Z,
                                                lambda1, cg, fit_linear)
            cg_iters += spent
        if eig.value <= 0:
            logger.warning("step %d: top eigenvalue %.3g is not positive",
                           t, eig.value)

        if alpha > 0:
            factors = factors.with_atom(eig.vector, alpha)
            quad = (1.0 - alpha) * quad + alpha * atom_scores
        ybar = y - quad
        _check_finite(ybar, t, alpha)
        state = _residual(ybar, Z, lambda1, cg, state.w_hat, fit_linear)

        stop = config.stop_gap is not None and (
            gap <= config.stop_gap or (eig.value <= 0 and alpha == 0))
        if t % config.eval_every == 0 or t == last or stop:
            train_rmse = float(np.sqrt(np.mean(state.D ** 2)))
            test_rmse = None
            if test is not None and test.n:
                current = CfmModel(state.w_hat, factors, lambda1, train.d)
                test_rmse = rmse(test.y, predict(current, test.X, test.Xsq))
            record: TraceRecord = {
                "iter": t, "objective": state.objective, "alpha": alpha,
                "eig_value": eig.value, "train_rmse": train_rmse,
                "test_rmse": test_rmse,
                "elapsed_s": time.perf_counter() - started, "gap": gap,
                "cg_iters": cg_iters, "eig_iters": eig.iterations,
            }
            trace.append(record)
            logger.info(
                "iter %d | objective %.6g | alpha %.4g | eig %.6g | "
                "train_rmse %.5f | test_rmse %s", t, state.objective, alpha,
                eig.value, train_rmse,
                "-" if test_rmse is None else f"{test_rmse:.5f}")
        if stop:
            logger.info("stopping at step %d: gap %.3g", t, gap)
            break

    # quad was updated incrementally; refit against fresh scores
    quad = quad_scores(X, Xsq, factors)
    final = _residual(y - quad, Z, lambda1, cg, state.w_hat, fit_linear)
    model = CfmModel(final.w_hat, factors, lambda1, train.d)
    logger.info("trained rank-%d model, objective %.6g", model.rank,
                final.objective)
    return model, trace


def ridge_fit(train: Dataset, lambda1: float = 0.0,
              cg: CgConfig | None = None) -> CfmModel:
    """Fits the linear model only: the baseline without interactions.

    :raises InputError: ``train`` is empty.
    :rtype: CfmModel
    """
    if train.n == 0:
        raise InputError("cannot train on an empty dataset")
    Z = with_bias_column(train.X)
    solved = solve_linear_term(Z, train.y, lambda1, None, cg)
    model = CfmModel(solved.solution, LowRankFactors.empty(train.d, 0.0),
                     lambda1, train.d)
    logger.info("ridge fit: train RMSE %.5f",
                rmse(train.y, linear_scores(model.linear, train.X)))
    return model
