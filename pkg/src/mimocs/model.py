"""Problem configuration, array manifolds, random waveforms and scenes.

Grid conventions used throughout the package:

* azimuth ``beta_n = n * dbeta`` with ``dbeta = 2 / (n_rx * n_tx)`` and
  ``n = -n_beta // 2, ..., n_beta - 1 - n_beta // 2`` so the grid covers
  ``[-1, 1)`` (``beta = sin(theta)``);
* delays are integer sample shifts ``0, ..., n_delay - 1`` (``dtau = dt``);
* Doppler bins are ``0, ..., n_doppler - 1`` in units of ``1 / T``;
* a scene vector is the C-order flattening of a ``(n_delay, n_beta)`` or
  ``(n_delay, n_doppler, n_beta)`` array, azimuth varying fastest.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np


class Spacing(str, enum.Enum):
    """Element spacing choice giving a half-wavelength virtual array."""

    TX_HALF = "tx_half"  # d_T = 1/2, d_R = N_T/2
    RX_HALF = "rx_half"  # d_T = N_R/2, d_R = 1/2


class Stream(enum.IntEnum):
    """Purpose tags for the independent random streams derived from a seed."""

    WAVEFORMS = 0
    SCENE = 1
    NOISE = 2
    POWER = 3


def rng_for(seed: int, stream: Stream, index: int = 0) -> np.random.Generator:
    """Generator for ``(seed, stream, index)``; distinct tuples give independent streams."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Draw CN(0, var): real and imaginary parts i.i.d. N(0, var/2)."""
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    z = rng.standard_normal(shape + (2,))
    scale = math.sqrt(var / 2.0)
    return scale * (z[..., 0] + 1j * z[..., 1])


@dataclass(frozen=True)
class RadarConfig:
    n_tx: int
    n_rx: int
    n_time: int
    n_delay: int | None = None
    n_doppler: int = 0
    spacing: Spacing = Spacing.TX_HALF
    seed: int = 0

    def __post_init__(self):
        if self.n_delay is None:
            object.__setattr__(self, "n_delay", self.n_time)
        object.__setattr__(self, "spacing", Spacing(self.spacing))
        for name in ("n_tx", "n_rx", "n_time", "n_delay"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.n_delay > self.n_time:
            raise ValueError(
                f"n_delay ({self.n_delay}) must not exceed n_time ({self.n_time}); "
                "delays are circular shifts of length-n_time signals"
            )
        if self.n_doppler < 0:
            raise ValueError("n_doppler must be >= 0")
        if self.n_doppler and self.n_doppler != self.n_time:
            raise ValueError(
                f"n_doppler ({self.n_doppler}) must equal n_time ({self.n_time}) when Doppler "
                "is enabled: the Doppler grid step 1/T is only orthogonal over N_f = 2BT = N_t bins"
            )
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def n_beta(self) -> int:
        return self.n_rx * self.n_tx

    @property
    def dbeta(self) -> float:
        return 2.0 / (self.n_rx * self.n_tx)

    @property
    def doppler(self) -> bool:
        return self.n_doppler > 0

    @property
    def n_freq(self) -> int:
        """Number of Doppler bins, 1 for the Doppler-free model."""
        return self.n_doppler if self.n_doppler else 1

    @property
    def grid_shape(self) -> tuple[int, ...]:
        if self.doppler:
            return (self.n_delay, self.n_doppler, self.n_beta)
        return (self.n_delay, self.n_beta)

    @property
    def grid_size(self) -> int:
        return self.n_delay * self.n_freq * self.n_beta

    @property
    def n_meas(self) -> int:
        return self.n_rx * self.n_time

    @property
    def d_tx(self) -> float:
        return 0.5 if self.spacing is Spacing.TX_HALF else self.n_rx / 2.0

    @property
    def d_rx(self) -> float:
        return self.n_tx / 2.0 if self.spacing is Spacing.TX_HALF else 0.5

    def beta_grid(self) -> np.ndarray:
        n = np.arange(self.n_beta) - self.n_beta // 2
        return n * self.dbeta

    def with_seed(self, seed: int) -> "RadarConfig":
        return replace(self, seed=seed)

    def unravel(self, idx) -> tuple:
        """Grid index -> ``(tau, beta)`` or ``(tau, f, beta)`` integer coordinates."""
        return np.unravel_index(idx, self.grid_shape)


def _manifold(n: int, spacing: float, beta) -> np.ndarray:
    k = np.arange(n)
    beta = np.asarray(beta, dtype=float)
    return np.exp(2j * np.pi * spacing * np.multiply.outer(beta, k))


def tx_manifold(cfg: RadarConfig, beta) -> np.ndarray:
    """Transmit steering vector(s); entry k is exp(j 2 pi d_T beta k).

    A scalar ``beta`` gives shape ``(n_tx,)``, an array gives ``beta.shape + (n_tx,)``.
    """
    return _manifold(cfg.n_tx, cfg.d_tx, beta)


def rx_manifold(cfg: RadarConfig, beta) -> np.ndarray:
    """Receive steering vector(s); entry k is exp(j 2 pi d_R beta k)."""
    return _manifold(cfg.n_rx, cfg.d_rx, beta)


@dataclass(frozen=True)
class WaveformSet:
    """Sampled transmit signals, one column per transmit antenna."""

    samples: np.ndarray  # (n_time, n_tx)

    def __post_init__(self):
        self.samples.setflags(write=False)

    @property
    def energies(self) -> np.ndarray:
        """Squared norms ``||s_k||^2`` of the individual transmit signals."""
        return np.sum(np.abs(self.samples) ** 2, axis=0)


def gen_waveforms(cfg: RadarConfig) -> WaveformSet:
    """I.i.d. CN(0, 1/N_T) samples so the total transmit power does not depend on N_T."""
    rng = rng_for(cfg.seed, Stream.WAVEFORMS)
    return WaveformSet(complex_normal(rng, (cfg.n_time, cfg.n_tx), 1.0 / cfg.n_tx))


@dataclass(frozen=True)
class Scene:
    support: np.ndarray  # sorted grid indices
    amplitudes: np.ndarray  # complex, aligned with support
    grid_size: int = field(default=0)

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64)
        if len(np.unique(support)) != len(support):
            raise ValueError("support indices must be distinct")
        if len(support) and (support.min() < 0 or support.max() >= self.grid_size):
            raise ValueError("support index out of range")
        if len(self.amplitudes) != len(support):
            raise ValueError("amplitudes must align with support")
        order = np.argsort(support)
        object.__setattr__(self, "support", support[order])
        object.__setattr__(self, "amplitudes", np.asarray(self.amplitudes, dtype=complex)[order])

    @property
    def k(self) -> int:
        return len(self.support)

    def dense(self) -> np.ndarray:
        x = np.zeros(self.grid_size, dtype=complex)
        x[self.support] = self.amplitudes
        return x


def draw_scene(cfg: RadarConfig, k: int, amplitude: float = 1.0, seed: int = 0,
               index: int = 0) -> Scene:
    """Generic K-sparse scene: uniform random support, Steinhaus phases, fixed modulus."""
    if k < 0 or k > cfg.grid_size:
        raise ValueError(f"k={k} must lie in [0, {cfg.grid_size}]")
    rng = rng_for(seed, Stream.SCENE, index)
    support = rng.choice(cfg.grid_size, size=k, replace=False)
    phases = rng.uniform(0.0, 2 * np.pi, size=k)
    return Scene(support, amplitude * np.exp(1j * phases), cfg.grid_size)


def sgn(z) -> np.ndarray:
    """Complex sign: z/|z| where z != 0, else 0."""
    z = np.asarray(z, dtype=complex)
    mag = np.abs(z)
    out = np.zeros_like(z)
    nz = mag > 0
    out[nz] = z[nz] / mag[nz]
    return out


def sigma_from_snr(cfg: RadarConfig, snr_db: float, amplitude: float = 1.0) -> float:
    """Noise standard deviation giving output SNR ``N_R N_t |x|^2 / sigma^2 = snr_db``."""
    if amplitude <= 0:
        raise ValueError("amplitude must be positive")
    return amplitude * math.sqrt(cfg.n_rx * cfg.n_time / 10.0 ** (snr_db / 10.0))


def draw_noise(cfg: RadarConfig, sigma: float, seed: int, index: int = 0) -> np.ndarray:
    return complex_normal(rng_for(seed, Stream.NOISE, index), (cfg.n_meas,), sigma**2)
