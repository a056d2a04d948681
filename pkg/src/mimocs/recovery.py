"""Debiased lasso: complex lasso by accelerated proximal gradient, then least squares on the support."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .model import sgn
from .operator import SensingOperator
from .spectral import operator_norm_sq

logger = logging.getLogger(__name__)


class LassoDivergenceError(RuntimeError):
    """A non-accelerated proximal step increased the objective."""


class RankDeficiencyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LassoSettings:
    lam: float | None = None  # None: theorem default from sigma
    max_iters: int = 5000
    rel_tol: float = 1e-7
    step: float | str = "auto"
    accelerated: bool = True
    check_every: int = 10
    continuation: bool = True
    continuation_factor: float = 0.2
    stage_tol: float = 1e-2

    def __post_init__(self):
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.step != "auto" and not float(self.step) > 0:
            raise ValueError(f"step must be positive, got {self.step}")
        if not 0 < self.continuation_factor < 1:
            raise ValueError("continuation_factor must lie in (0, 1)")
        if self.lam is not None and self.lam < 0:
            raise ValueError("lambda must be non-negative")


@dataclass
class LassoSolution:
    x: np.ndarray
    iters: int
    kkt_residual: float
    objective: float
    converged: bool


@dataclass
class RecoveryResult:
    lasso_estimate: np.ndarray
    support: np.ndarray
    debiased_estimate: np.ndarray
    iters: int
    kkt_residual: float
    ls_residual: float
    lam: float
    converged: bool = True
    extras: dict = field(default_factory=dict)


def soft_threshold(z, t: float):
    """Complex soft thresholding, the prox of ``t * |.|``: shrink the modulus by ``t``, keep the phase."""
    if t < 0:
        raise ValueError("threshold must be non-negative")
    z = np.asarray(z)
    mag = np.abs(z)
    scale = np.maximum(mag - t, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(mag > t, z * (scale / np.where(mag > 0, mag, 1.0)), 0.0)
    return out.astype(np.result_type(z, complex)) if np.iscomplexobj(z) else out


def theorem_lambda(sigma: float, grid_size: int) -> float:
    """``2 sigma sqrt(2 log(grid size))``; the grid size includes Doppler bins when present."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    return 2.0 * sigma * math.sqrt(2.0 * math.log(grid_size))


def kkt_residual(op: SensingOperator, y: np.ndarray, x: np.ndarray, lam: float,
                 grad: np.ndarray | None = None) -> tuple[float, float]:
    """Optimality defect of ``x`` for ``1/2||Ax-y||^2 + lam ||x||_1``.

    Returns ``(stationarity, dual_excess)``: the largest ``|g_k + lam sgn(x_k)|``
    over nonzeros and the largest ``max(|g_k| - lam, 0)`` over zeros, where
    ``g = A^H (A x - y)``. Both are absolute.
    """
    if grad is None:
        grad = op.apply_adjoint(op.apply(x) - y)
    nz = x != 0
    stat = float(np.max(np.abs(grad[nz] + lam * sgn(x[nz])), initial=0.0))
    excess = float(np.max(np.abs(grad[~nz]) - lam, initial=0.0))
    return stat, max(excess, 0.0)


def _relative_kkt(stat: float, excess: float, lam: float, scale: float) -> float:
    return max(stat, excess) / (lam if lam > 0 else max(scale, 1e-300))


def _fista(op: SensingOperator, y: np.ndarray, lam: float, x: np.ndarray, step: float,
           settings: LassoSettings, tol: float, max_iters: int, scale: float):
    """Inner FISTA loop from warm start ``x``; returns ``(x, iters, relative kkt)``."""
    ax = op.apply(x)
    r = ax - y
    obj = 0.5 * float(np.vdot(r, r).real) + lam * float(np.sum(np.abs(x)))
    z, az = x, ax
    t = 1.0
    for it in range(1, max_iters + 1):
        grad = op.apply_adjoint(az - y)
        x_new = soft_threshold(z - step * grad, step * lam)
        ax_new = op.apply(x_new)
        r = ax_new - y
        obj_new = 0.5 * float(np.vdot(r, r).real) + lam * float(np.sum(np.abs(x_new)))
        if obj_new > obj * (1 + 1e-12):
            if z is x:
                raise LassoDivergenceError(
                    f"objective rose from {obj:.6e} to {obj_new:.6e} on a plain proximal step "
                    f"at iteration {it} (step={step:.3e}); the step exceeds 1/L"
                )
            z, az, t = x, ax, 1.0
            continue
        dx = float(np.linalg.norm(x_new - x))
        xn = float(np.linalg.norm(x_new))
        if settings.accelerated:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / t_new
            z = x_new + beta * (x_new - x)
            az = ax_new + beta * (ax_new - ax)
            t = t_new
        else:
            z, az = x_new, ax_new
        x, ax, obj = x_new, ax_new, obj_new
        if dx <= settings.rel_tol * max(xn, 1e-300) or it % settings.check_every == 0:
            kkt = _relative_kkt(*kkt_residual(op, y, x, lam, op.apply_adjoint(r)), lam, scale)
            if kkt <= tol:
                return x, it, kkt
    return x, max_iters, _relative_kkt(*kkt_residual(op, y, x, lam), lam, scale)


def lasso_solve(op: SensingOperator, y: np.ndarray, lam: float,
                settings: LassoSettings = LassoSettings(),
                lipschitz: float | None = None) -> LassoSolution:
    """Minimize ``1/2 ||A x - y||^2 + lam ||x||_1`` over complex ``x``.

    FISTA with fixed step ``1/L`` and a monotone function-value restart: a
    momentum step that raises the objective is discarded and the momentum
    reset. With ``settings.continuation`` the target ``lam`` is approached
    through a geometric sequence of larger values, each warm-starting the
    next and solved loosely; only the final problem is solved to tolerance.

    The run is declared converged once the KKT defect relative to ``lam`` is
    at most ``10 * rel_tol``. It is evaluated whenever the relative iterate
    change drops below ``rel_tol`` and every ``check_every`` steps.
    """
    y = np.asarray(y, dtype=complex)
    if y.shape != (op.shape[0],):
        raise ValueError(f"measurement must have length {op.shape[0]}")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if settings.step == "auto":
        if lipschitz is None:
            lipschitz = operator_norm_sq(op)
        # headroom for the power-iteration underestimate of the top eigenvalue
        step = 1.0 / (1.01 * lipschitz)
    else:
        step = float(settings.step)

    aty = op.apply_adjoint(y)
    scale = float(np.max(np.abs(aty), initial=0.0))
    x = np.zeros(op.shape[1], dtype=complex)
    if scale <= lam or scale == 0.0:
        kkt = _relative_kkt(*kkt_residual(op, y, x, lam, -aty), lam, scale)
        return LassoSolution(x, 0, kkt, 0.5 * float(np.vdot(y, y).real), True)

    stages = [lam]
    if settings.continuation:
        level = settings.continuation_factor * scale
        while level > lam:
            stages.insert(-1, level)
            level *= settings.continuation_factor
    tol = 10.0 * settings.rel_tol
    used = 0
    for stage_lam in stages[:-1]:
        x, its, _ = _fista(op, y, stage_lam, x, step, settings, settings.stage_tol,
                           settings.max_iters - used, scale)
        used += its
    x, its, kkt = _fista(op, y, lam, x, step, settings, tol, max(settings.max_iters - used, 1), scale)
    used += its
    r = op.apply(x) - y
    obj = 0.5 * float(np.vdot(r, r).real) + lam * float(np.sum(np.abs(x)))
    if kkt > tol:
        logger.warning("lasso stopped after %d iterations with relative KKT defect %.3e",
                       used, kkt)
    return LassoSolution(x, used, kkt, obj, kkt <= tol)


def extract_support(x_hat: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Indices where ``|x_k| > eps * max|x|``."""
    if eps < 0:
        raise ValueError("eps must be non-negative")
    mag = np.abs(np.asarray(x_hat))
    peak = float(np.max(mag, initial=0.0))
    if peak == 0.0:
        return np.zeros(0, dtype=np.int64)
    return np.flatnonzero(mag > eps * peak)


def debias(op: SensingOperator, y: np.ndarray, support) -> tuple[np.ndarray, float]:
    """Least-squares amplitudes on ``support``, zeros elsewhere; returns ``(x, ||A x - y||)``.

    A rank-deficient column set gives the minimum-norm solution and a
    ``RankDeficiencyWarning`` carrying the condition estimate.
    """
    y = np.asarray(y, dtype=complex)
    support = np.asarray(support, dtype=np.int64)
    x = np.zeros(op.shape[1], dtype=complex)
    if len(support) == 0:
        return x, float(np.linalg.norm(y))
    if len(support) > op.shape[0]:
        raise ValueError(f"support size {len(support)} exceeds the {op.shape[0]} measurements")
    cols = op.columns(support)
    coef, _, rank, sv = np.linalg.lstsq(cols, y, rcond=None)
    if rank < len(support):
        cond = sv[0] / sv[-1] if sv[-1] > 0 else math.inf
        warnings.warn(
            f"support submatrix has rank {rank} < {len(support)} (condition estimate {cond:.3e}); "
            "returning the minimum-norm solution",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    x[support] = coef
    return x, float(np.linalg.norm(cols @ coef - y))


def recover(op: SensingOperator, y: np.ndarray, sigma: float,
            settings: LassoSettings = LassoSettings(), *, normalized: bool = False,
            eps: float = 1e-6, lipschitz: float | None = None,
            lambda_floor: float = 1e-6) -> RecoveryResult:
    """Debiased lasso with the theorem's ``lam = 2 sigma sqrt(2 log(grid size))``.

    ``settings.lam`` overrides the default. With ``sigma = 0`` the default
    would be zero, which turns the lasso into plain least squares; the
    regularization is then ``lambda_floor * ||A^H y||_inf`` instead.
    ``normalized=True`` solves the lasso on ``A D^-1`` and maps the estimate
    back with ``D^-1``; debiasing always uses ``A``.  ``lipschitz`` is
    ``||.||_op^2`` of the operator actually handed to the lasso.
    """
    lam = settings.lam if settings.lam is not None else theorem_lambda(sigma, op.shape[1])
    solve_op = op
    if normalized:
        solve_op = op.normalized() if op.column_scale is None else op
    if lam == 0.0:
        lam = lambda_floor * float(np.max(np.abs(solve_op.apply_adjoint(y)), initial=0.0))
    sol = lasso_solve(solve_op, y, lam, settings, lipschitz=lipschitz)
    x_hat = sol.x * solve_op.column_scale if normalized else sol.x
    support = extract_support(x_hat, eps)
    base = SensingOperator(op.cfg, op.waveforms) if op.column_scale is not None else op
    x_tilde, ls_res = debias(base, y, support)
    return RecoveryResult(
        lasso_estimate=x_hat,
        support=support,
        debiased_estimate=x_tilde,
        iters=sol.iters,
        kkt_residual=sol.kkt_residual,
        ls_residual=ls_res,
        lam=lam,
        converged=sol.converged,
    )


__all__ = [
    "LassoSettings", "RecoveryResult", "LassoSolution", "soft_threshold", "lasso_solve",
    "extract_support", "debias", "recover", "theorem_lambda", "kkt_residual",
]
