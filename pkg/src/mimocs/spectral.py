"""Operator norm, coherence, and the recovery theorems' constants and bounds."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .model import RadarConfig, Stream, complex_normal, rng_for
from .operator import DEFAULT_DENSE_BUDGET, SensingOperator, check_budget, column_norms

logger = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    def __init__(self, msg, estimate, residual, vector):
        super().__init__(msg)
        self.estimate = estimate
        self.residual = residual
        self.vector = vector


def operator_norm_sq(op: SensingOperator, tol: float = 1e-8, max_iters: int = 5000,
                     seed: int | None = None) -> float:
    """Largest eigenvalue of ``A^H A`` by power iteration.

    The Rayleigh quotient converges geometrically; the observed contraction
    of successive increments gives an estimate of the remaining error, and
    iteration stops once that estimate is below ``tol`` (relative), or once
    the eigen-residual ``||A^H A v - rho v||`` is below ``tol rho``. The start
    vector is drawn from ``seed`` (default: the operator's seed).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    seed = op.cfg.seed if seed is None else seed
    v = complex_normal(rng_for(seed, Stream.POWER), op.shape[1])
    v /= np.linalg.norm(v)
    rho, prev_step = 0.0, math.inf
    w = v
    for _ in range(max_iters):
        w = op.apply_adjoint(op.apply(v))
        rho_new = float(np.vdot(v, w).real)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        if np.linalg.norm(w - rho_new * v) <= tol * rho_new:
            return rho_new  # v is already an eigenvector to working accuracy
        step = abs(rho_new - rho)
        ratio = min(step / prev_step, 0.999) if prev_step > 0 and math.isfinite(prev_step) else 0.5
        if step * max(ratio / (1.0 - ratio), 1.0) <= tol * rho_new:
            return rho_new
        rho, prev_step = rho_new, step
        v = w / nw
    residual = float(np.linalg.norm(w - rho * v))
    raise ConvergenceError(
        f"power iteration did not converge in {max_iters} iterations "
        f"(estimate {rho:.10e}, residual {residual:.3e})", rho, residual, v)


def max_offdiag_abs(gram: np.ndarray) -> float:
    """``max_{k != l} |G_kl|`` of a square matrix."""
    g = np.abs(gram)
    np.fill_diagonal(g, -np.inf)
    return float(g.max()) if g.size > 1 else 0.0


def coherence_of(mat: np.ndarray) -> float:
    """Mutual coherence of the columns of an explicit matrix."""
    norms = np.linalg.norm(mat, axis=0)
    gram = mat.conj().T @ mat
    return max_offdiag_abs(gram / np.outer(norms, norms))


@dataclass(frozen=True)
class AnalysisReport:
    op_norm_sq: float
    coherence: float
    coherence_normalized: float
    kappa_D: float
    max_inner_product: float


def gram_blocks(op: SensingOperator, block: int = 1024, budget: int = DEFAULT_DENSE_BUDGET):
    """Yield ``(start, G[start:stop, :])`` row blocks of the Gram matrix ``A^H A``."""
    dense = op.to_dense(budget)
    for start in range(0, dense.shape[1], block):
        yield start, dense[:, start:start + block].conj().T @ dense


def _reachable_lags(cfg: RadarConfig) -> np.ndarray:
    """Mask over ``tau - tau' (mod n_time)`` for delays in ``[0, n_delay)``."""
    lags = np.zeros(cfg.n_time, dtype=bool)
    lags[: cfg.n_delay] = True
    lags[cfg.n_time - cfg.n_delay + 1:] = True
    return lags


def pairwise_time_maxima(op: SensingOperator) -> np.ndarray:
    """``M[b, b'] = max |<M_f T_tau u_b, M_f' T_tau' u_b'>|`` over distinct reachable shifts.

    Only the delay lag ``tau - tau'`` and Doppler offset ``f - f'`` matter for
    the modulus, so the Doppler-free case is a circular cross-correlation and
    the Doppler case its Fourier transform along time (a cross-ambiguity
    function). The trivial pair (same azimuth, zero lag, zero offset) is
    excluded.
    """
    cfg = op.cfg
    lags = np.flatnonzero(_reachable_lags(cfg))
    if not cfg.doppler:
        # sum_l u_b(l - d) conj(u_b'(l)) = ifft(U_b conj(U_b'))[d]
        xcorr = np.abs(np.fft.ifft(op.steered_fft[:, None, :] * op.steered_fft[None, :, :].conj(),
                                   axis=2))
        xcorr = xcorr[:, :, lags]
        zero = int(np.flatnonzero(lags == 0)[0])
        diag = np.arange(cfg.n_beta)
        xcorr[diag, diag, zero] = -np.inf
        return xcorr.max(axis=2)
    out = np.empty((cfg.n_beta, cfg.n_beta))
    l = np.arange(cfg.n_time)
    conj_u = op.steered.conj()
    for b in range(cfg.n_beta):
        shifted = op.steered[b][(l[None, :] - lags[:, None]) % cfg.n_time]  # (lag, m)
        prod = shifted[None, :, :] * conj_u[:, None, :]  # (b', lag, m)
        amb = np.abs(np.fft.fft(prod, axis=2))  # every Doppler offset
        zero = int(np.flatnonzero(lags == 0)[0])
        amb[b, zero, 0] = -np.inf
        out[b] = amb.max(axis=(1, 2))
    return out


def _factorized_max(op: SensingOperator, normalized: bool) -> float:
    rx_ip = np.abs(op.rx @ op.rx.conj().T)
    vals = rx_ip * pairwise_time_maxima(op)
    if normalized:
        per_beta = np.sqrt(op.cfg.n_rx) * np.linalg.norm(op.steered, axis=1)
        vals = vals / np.outer(per_beta, per_beta)
    return float(vals.max())


def _dense_max(op: SensingOperator, normalized: bool, budget: int) -> float:
    cfg = op.cfg
    check_budget((cfg.grid_size, cfg.grid_size), budget, "Gram matrix")
    inv = 1.0 / column_norms(op).norms if normalized else np.ones(cfg.grid_size)
    best = 0.0
    for start, rows in gram_blocks(op, budget=budget):
        idx = np.arange(rows.shape[0])
        rows = np.abs(rows) * inv[start:start + len(idx), None] * inv[None, :]
        rows[idx, start + idx] = -np.inf
        best = max(best, float(rows.max()))
    return best


def _unscaled(op: SensingOperator) -> SensingOperator:
    return op if op.column_scale is None else SensingOperator(op.cfg, op.waveforms)


def max_inner_product(op: SensingOperator, method: str = "factorized",
                      budget: int = DEFAULT_DENSE_BUDGET) -> float:
    """``max |<A_k, A_l>|`` over distinct grid cells of the unscaled operator.

    ``method="factorized"`` uses ``<A_k, A_l> = <a_R, a_R'> <time parts>``;
    ``method="dense"`` scans the explicit Gram matrix.
    """
    op = _unscaled(op)
    if method == "factorized":
        return _factorized_max(op, normalized=False)
    if method == "dense":
        return _dense_max(op, False, budget)
    raise ValueError(f"unknown method {method!r}")


def normalized_coherence(op: SensingOperator, method: str = "factorized",
                         budget: int = DEFAULT_DENSE_BUDGET) -> float:
    """``mu(A D^-1)``, i.e. ``max |D^-1 G D^-1|`` off the diagonal."""
    op = _unscaled(op)
    if method == "factorized":
        return _factorized_max(op, normalized=True)
    if method == "dense":
        return _dense_max(op, True, budget)
    raise ValueError(f"unknown method {method!r}")


def coherence(op: SensingOperator, method: str = "factorized",
              budget: int = DEFAULT_DENSE_BUDGET) -> AnalysisReport:
    """Norm and coherence diagnostics of the unscaled operator."""
    base = _unscaled(op)
    mu = normalized_coherence(base, method, budget)
    return AnalysisReport(
        op_norm_sq=operator_norm_sq(base),
        # the coherence normalizes columns, so A and A D^-1 share it
        coherence=mu,
        coherence_normalized=mu,
        kappa_D=column_norms(base).kappa,
        max_inner_product=max_inner_product(base, method, budget),
    )


@dataclass(frozen=True)
class BoundsReport:
    k_max: int
    k_max_real: float
    lambda_default: float
    amplitude_floor: float
    snr_min: float
    snr_min_db: float
    op_norm_bound: float
    inner_product_bound: float
    normalized_coherence_bound: float
    n_time_ok: bool  # N_t >= 128
    delay_grid_ok: bool  # N_tau >= sqrt(N_beta), Doppler: max(N_tau, N_f, sqrt(N_tau N_f))
    log_cube_ok: bool  # (log(N_tau N_beta))^3 <= N_t

    @property
    def preconditions_ok(self) -> bool:
        return self.n_time_ok and self.delay_grid_ok and self.log_cube_ok


def theorem_bounds(cfg: RadarConfig, sigma: float = 1.0, c0: float = 1.0,
                   c_snr: float = 1.0) -> BoundsReport:
    """Evaluate the sparsity, regularization, amplitude and SNR constants, natural logs throughout.

    Doppler configurations use the delay-Doppler-azimuth versions (grid size
    ``N_tau N_f N_beta``, ``K_max`` with 6 in the denominator and no ``N_T``,
    operator-norm bound ``2 N_t N_f N_R N_T``).
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    log_grid = math.log(cfg.grid_size)
    log_delay_az = math.log(cfg.n_delay * cfg.n_beta)
    if cfg.doppler:
        k_real = c0 * cfg.n_delay * cfg.n_doppler * cfg.n_rx / (6.0 * log_grid)
        op_bound = 2.0 * cfg.n_time * cfg.n_doppler * cfg.n_rx * cfg.n_tx
        big_n = max(cfg.n_delay, cfg.n_doppler, math.sqrt(cfg.n_delay * cfg.n_doppler))
        delay_ok = big_n >= math.sqrt(cfg.n_beta)
    else:
        k_real = c0 * cfg.n_delay * cfg.n_rx / (3.0 * cfg.n_tx * log_grid)
        op_bound = cfg.n_time * cfg.n_rx * cfg.n_tx * (1.0 + math.log(cfg.n_time))
        delay_ok = cfg.n_delay >= math.sqrt(cfg.n_beta)
    snr_min = c_snr * log_grid
    return BoundsReport(
        k_max=int(math.floor(k_real)),
        k_max_real=k_real,
        lambda_default=2.0 * sigma * math.sqrt(2.0 * log_grid),
        amplitude_floor=10.0 * sigma / math.sqrt(cfg.n_rx * cfg.n_time) * math.sqrt(2.0 * log_grid),
        snr_min=snr_min,
        snr_min_db=10.0 * math.log10(snr_min) if snr_min > 0 else -math.inf,
        op_norm_bound=op_bound,
        inner_product_bound=3.0 * cfg.n_rx * math.sqrt(cfg.n_time * log_grid),
        normalized_coherence_bound=6.0 * math.sqrt(log_grid / cfg.n_time),
        n_time_ok=cfg.n_time >= 128,
        delay_grid_ok=delay_ok,
        log_cube_ok=log_delay_az**3 <= cfg.n_time,
    )


@dataclass(frozen=True)
class SeedRow:
    seed: int
    op_norm_sq: float
    op_norm_bound: float
    max_inner_product: float
    inner_product_bound: float
    coherence_normalized: float
    normalized_bound: float
    op_norm_ok: bool
    inner_product_ok: bool
    normalized_ok: bool
    energy_ok: bool  # sum ||s_k||^2 <= 2 N_t, the event the Doppler norm bound rests on


def verify_bounds(cfg: RadarConfig, n_seeds: int, seeds=None, warn: bool = True) -> list[SeedRow]:
    """Empirical norm and coherence quantities against their bounds, one row per waveform seed.

    Seeds default to ``cfg.seed, cfg.seed + 1, ...``. Bound satisfaction is
    a per-seed comparison only; callers aggregate it into rates.
    """
    bounds = theorem_bounds(cfg)
    if warn and not bounds.preconditions_ok:
        logger.warning("configuration violates the theorem's size conditions "
                       "(N_t >= 128: %s, delay grid: %s, log^3 <= N_t: %s)",
                       bounds.n_time_ok, bounds.delay_grid_ok, bounds.log_cube_ok)
    seeds = list(seeds) if seeds is not None else [cfg.seed + i for i in range(n_seeds)]
    rows = []
    for seed in seeds:
        op = SensingOperator(cfg.with_seed(seed))
        norm_sq = operator_norm_sq(op)
        ip = max_inner_product(op)
        mu = normalized_coherence(op)
        rows.append(SeedRow(
            seed=seed,
            op_norm_sq=norm_sq,
            op_norm_bound=bounds.op_norm_bound,
            max_inner_product=ip,
            inner_product_bound=bounds.inner_product_bound,
            coherence_normalized=mu,
            normalized_bound=bounds.normalized_coherence_bound,
            op_norm_ok=norm_sq <= bounds.op_norm_bound,
            inner_product_ok=ip <= bounds.inner_product_bound,
            normalized_ok=mu <= bounds.normalized_coherence_bound,
            energy_ok=float(op.waveforms.energies.sum()) <= 2.0 * cfg.n_time,
        ))
    return rows


def satisfaction_rates(rows: list[SeedRow]) -> dict[str, float]:
    n = len(rows)
    return {
        "op_norm": sum(r.op_norm_ok for r in rows) / n,
        "inner_product": sum(r.inner_product_ok for r in rows) / n,
        "normalized_coherence": sum(r.normalized_ok for r in rows) / n,
    }
