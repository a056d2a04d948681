"""Reference computations written independently of the package internals.

They use explicit loops and dense linear algebra only, so agreement with the
fast paths is meaningful.
"""
import math

import numpy as np


def steering(n, spacing, beta):
    return np.array([np.exp(2j * np.pi * spacing * beta * k) for k in range(n)])


def beta_values(n_tx, n_rx):
    nb = n_tx * n_rx
    return [(n - nb // 2) * 2.0 / nb for n in range(nb)]


def spacings(n_tx, n_rx, mode):
    return (0.5, n_tx / 2.0) if mode == "tx_half" else (n_rx / 2.0, 0.5)


def brute_matrix(n_tx, n_rx, n_time, n_delay, n_doppler, mode, samples):
    """Sensing matrix assembled cell by cell from the signal model.

    Antenna ``i`` at sample ``l`` receives
    ``sum_k a_R[i] a_T[k] s_k((l - tau) mod N_t) exp(j 2 pi f l / N_t)``; the
    response matrix ``Z[i, l]`` is stacked antenna by antenna.
    """
    d_t, d_r = spacings(n_tx, n_rx, mode)
    betas = beta_values(n_tx, n_rx)
    n_f = n_doppler if n_doppler else 1
    cols = []
    for tau in range(n_delay):
        for f in range(n_f):
            for beta in betas:
                a_t = steering(n_tx, d_t, beta)
                a_r = steering(n_rx, d_r, beta)
                z = np.zeros((n_rx, n_time), dtype=complex)
                for i in range(n_rx):
                    for l in range(n_time):
                        acc = 0j
                        for k in range(n_tx):
                            acc += a_r[i] * a_t[k] * samples[(l - tau) % n_time, k]
                        if n_doppler:
                            acc *= np.exp(2j * np.pi * f * l / n_time)
                        z[i, l] = acc
                cols.append(z.reshape(-1))
    return np.array(cols).T


def circulant_norm_sq(samples, n_tx, n_rx):
    """``||A||_op^2`` for the Doppler-free model with every circular delay on the grid.

    ``A A^H`` is ``N_R`` copies of ``N_beta sum_k C_k C_k^H`` with ``C_k`` the
    circulant of ``s_k``, whose eigenvalues are ``|DFT(s_k)|^2``.
    """
    spectra = np.abs(np.fft.fft(samples, axis=0)) ** 2
    return n_tx * n_rx * float(spectra.sum(axis=1).max())


def k_max_doppler_free(n_delay, n_rx, n_tx, n_beta, c0=1.0):
    return c0 * n_delay * n_rx / (3 * n_tx * math.log(n_delay * n_beta))


def dense_kkt(dense, y, x, lam):
    """``(max stationarity, max dual excess)`` of ``1/2||Dx - y||^2 + lam ||x||_1`` at ``x``."""
    g = dense.conj().T @ (dense @ x - y)
    nz = np.abs(x) > 0
    stat = np.abs(g[nz] + lam * x[nz] / np.abs(x[nz]))
    excess = np.abs(g[~nz]) - lam
    return (float(stat.max()) if stat.size else 0.0,
            float(max(excess.max(), 0.0)) if excess.size else 0.0)


def ista_dense(dense, y, lam, iters=20000):
    """Plain proximal gradient on an explicit matrix, the slow-but-simple reference solver."""
    step = 1.0 / np.linalg.norm(dense, 2) ** 2
    x = np.zeros(dense.shape[1], dtype=complex)
    for _ in range(iters):
        z = x - step * (dense.conj().T @ (dense @ x - y))
        mag = np.abs(z)
        x = np.where(mag > step * lam, z * (1 - step * lam / np.maximum(mag, 1e-300)), 0)
    return x
