"""Matrix-free MIMO radar sensing operator.

Column ``(tau, [f,] beta)`` of the sensing matrix is

    a_R(beta) kron (M_f T_tau S a_T(beta))

so a measurement vector is laid out receive-antenna-major: entry
``i * n_time + l`` is antenna ``i`` at time sample ``l``.  For fixed
``(f, beta)`` the sum over delays is a circular convolution with the steered
waveform ``u_beta = S a_T(beta)``, which is what ``apply`` evaluates with
length-``n_time`` FFTs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import RadarConfig, WaveformSet, gen_waveforms, rx_manifold, tx_manifold

DEFAULT_DENSE_BUDGET = 2 * 1024**3


class DenseBudgetError(MemoryError):
    """Raised when materializing a dense matrix would exceed the memory budget."""


def check_budget(shape: tuple[int, int], budget: int, what: str = "dense matrix") -> None:
    nbytes = 16 * shape[0] * shape[1]
    if nbytes > budget:
        raise DenseBudgetError(
            f"{what} of shape {shape[0]}x{shape[1]} needs {nbytes / 2**20:.1f} MiB "
            f"(complex128), budget is {budget / 2**20:.1f} MiB"
        )


class SensingOperator:
    """Sensing matrix ``A`` (or ``A D^-1`` when ``column_scale`` is given) for one waveform draw.

    Parameters
    ----------
    cfg : RadarConfig
        Problem dimensions. ``cfg.n_doppler > 0`` selects the delay-Doppler-azimuth model.
    waveforms : WaveformSet, optional
        Transmit samples; drawn from ``cfg.seed`` when omitted.
    column_scale : ndarray, optional
        Positive per-column weights ``w``; the operator then represents ``A diag(w)``.

    All caches are built in the constructor, so instances are safe to share
    between threads once created.
    """

    def __init__(self, cfg: RadarConfig, waveforms: WaveformSet | None = None,
                 column_scale: np.ndarray | None = None):
        self.cfg = cfg
        self.waveforms = waveforms if waveforms is not None else gen_waveforms(cfg)
        if self.waveforms.samples.shape != (cfg.n_time, cfg.n_tx):
            raise ValueError("waveform matrix must be n_time x n_tx")
        betas = cfg.beta_grid()
        # steered transmit signals u_beta = S a_T(beta), one row per azimuth
        self.steered = (tx_manifold(cfg, betas) @ self.waveforms.samples.T)
        self.steered_fft = np.fft.fft(self.steered, axis=1)
        self.rx = rx_manifold(cfg, betas)  # (n_beta, n_rx)
        t = np.arange(cfg.n_time)
        self.modulation = np.exp(2j * np.pi * np.outer(np.arange(cfg.n_freq), t) / cfg.n_time)
        if column_scale is not None:
            column_scale = np.asarray(column_scale, dtype=float)
            if column_scale.shape != (cfg.grid_size,) or np.any(column_scale <= 0):
                raise ValueError("column_scale must be positive with one entry per grid cell")
            column_scale.setflags(write=False)
        self.column_scale = column_scale
        for arr in (self.steered, self.steered_fft, self.rx, self.modulation):
            arr.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.cfg.n_meas, self.cfg.grid_size)

    @property
    def doppler(self) -> bool:
        return self.cfg.doppler

    def normalized(self) -> "SensingOperator":
        """The column-normalized operator ``A D^-1`` with ``D = diag(||A_k||)``."""
        return SensingOperator(self.cfg, self.waveforms, 1.0 / column_norms(self).norms)

    def _grid(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape != (self.cfg.grid_size,):
            raise ValueError(f"expected a vector of length {self.cfg.grid_size}, got shape {x.shape}")
        if self.column_scale is not None:
            x = x * self.column_scale
        cfg = self.cfg
        return x.reshape(cfg.n_delay, cfg.n_freq, cfg.n_beta)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Forward product ``A x``."""
        cfg = self.cfg
        xg = self._grid(x)
        # (beta, f, tau) zero-padded to n_time for the circular convolution
        pad = np.zeros((cfg.n_beta, cfg.n_freq, cfg.n_time), dtype=complex)
        pad[:, :, : cfg.n_delay] = xg.transpose(2, 1, 0)
        conv = np.fft.ifft(np.fft.fft(pad, axis=2) * self.steered_fft[:, None, :], axis=2)
        if self.doppler:
            w = np.einsum("bfl,fl->bl", conv, self.modulation)
        else:
            w = conv[:, 0, :]
        return (self.rx.T @ w).reshape(-1)

    def apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        """Adjoint product ``A^H y``."""
        cfg = self.cfg
        y = np.asarray(y)
        if y.shape != (cfg.n_meas,):
            raise ValueError(f"expected a vector of length {cfg.n_meas}, got shape {y.shape}")
        w = self.rx.conj() @ y.reshape(cfg.n_rx, cfg.n_time)  # (beta, l)
        if self.doppler:
            v = w[:, None, :] * self.modulation.conj()[None, :, :]
        else:
            v = w[:, None, :]
        corr = np.fft.ifft(np.fft.fft(v, axis=2) * self.steered_fft.conj()[:, None, :], axis=2)
        x = corr[:, :, : cfg.n_delay].transpose(2, 1, 0).reshape(-1)
        if self.column_scale is not None:
            x = x * self.column_scale
        return x

    def columns(self, idx) -> np.ndarray:
        """Explicit columns for an array of grid indices, shape ``(n_meas, len(idx))``."""
        cfg = self.cfg
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        if np.any((idx < 0) | (idx >= cfg.grid_size)):
            raise IndexError(f"grid index out of range [0, {cfg.grid_size})")
        tau, f, b = np.unravel_index(idx, (cfg.n_delay, cfg.n_freq, cfg.n_beta))
        l = np.arange(cfg.n_time)
        shifted = self.steered[b[:, None], (l[None, :] - tau[:, None]) % cfg.n_time]
        time_part = shifted * self.modulation[f]  # (m, n_time)
        cols = self.rx[b][:, :, None] * time_part[:, None, :]  # (m, n_rx, n_time)
        cols = cols.reshape(len(idx), -1).T
        if self.column_scale is not None:
            cols = cols * self.column_scale[idx]
        return cols

    def column(self, idx: int) -> np.ndarray:
        return self.columns([idx])[:, 0]

    def to_dense(self, budget: int = DEFAULT_DENSE_BUDGET) -> np.ndarray:
        check_budget(self.shape, budget)
        return self.columns(np.arange(self.cfg.grid_size))


@dataclass(frozen=True)
class ColumnScaling:
    norms: np.ndarray  # ||A_k||_2 in grid order

    @property
    def kappa(self) -> float:
        """Condition number of ``D = diag(norms)``."""
        return float(self.norms.max() / self.norms.min())


def column_norms(op: SensingOperator) -> ColumnScaling:
    """Euclidean norms of all columns of the unscaled ``A``, in grid order.

    Uses ``||a_R kron u|| = sqrt(N_R) ||u||``; neither the circular shift nor the
    Doppler modulation changes ``||u_beta||``.
    """
    cfg = op.cfg
    per_beta = np.sqrt(cfg.n_rx * np.sum(np.abs(op.steered) ** 2, axis=1))
    norms = np.broadcast_to(per_beta, (cfg.n_delay * cfg.n_freq, cfg.n_beta)).reshape(-1).copy()
    norms.setflags(write=False)
    return ColumnScaling(norms)
