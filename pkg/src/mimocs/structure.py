"""Exact structural identities of the row Gram matrix ``A A^H``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operator import DEFAULT_DENSE_BUDGET, SensingOperator, check_budget


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    defect: float  # relative Frobenius defect
    tol: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.defect <= self.tol)


def row_gram(op: SensingOperator, budget: int = DEFAULT_DENSE_BUDGET) -> np.ndarray:
    """Dense ``A A^H``, of size ``n_meas x n_meas``."""
    check_budget(op.shape, budget)
    dense = op.to_dense(budget)
    return dense @ dense.conj().T


def _circulant_projection(block: np.ndarray) -> np.ndarray:
    """Nearest circulant matrix: average each wrapped diagonal."""
    n = block.shape[0]
    i, j = np.indices((n, n))
    lag = (i - j) % n
    means = np.bincount(lag.ravel(), weights=block.real.ravel(), minlength=n) / n
    means = means + 1j * np.bincount(lag.ravel(), weights=block.imag.ravel(), minlength=n) / n
    return means[lag]


def block_structure(op: SensingOperator, tol: float = 1e-9,
                    budget: int = DEFAULT_DENSE_BUDGET) -> list[IdentityCheck]:
    """``A A^H`` is block diagonal over receive antennas with identical circulant blocks.

    Reports three relative defects: off-block Frobenius mass, the spread of
    the diagonal blocks around their mean, and (when every circular delay is
    on the grid, ``n_delay = n_time``) the distance of the mean block from its
    circulant projection.
    """
    cfg = op.cfg
    g = row_gram(op, budget)
    n, nt = cfg.n_rx, cfg.n_time
    blocks = g.reshape(n, nt, n, nt).transpose(0, 2, 1, 3)
    total = np.linalg.norm(g)
    diag = np.stack([blocks[i, i] for i in range(n)])
    off_mask = ~np.eye(n, dtype=bool)
    off = np.linalg.norm(blocks[off_mask]) / total
    mean = diag.mean(axis=0)
    spread = np.linalg.norm(diag - mean) / np.linalg.norm(diag)
    checks = [
        IdentityCheck("block_diagonal", float(off), tol, f"off-block mass ratio over {n} blocks"),
        IdentityCheck("identical_blocks", float(spread), tol),
    ]
    if cfg.n_delay == cfg.n_time:
        circ = np.linalg.norm(mean - _circulant_projection(mean)) / np.linalg.norm(mean)
        checks.append(IdentityCheck("circulant_blocks", float(circ), tol, f"block size {nt}"))
    return checks


def doppler_identity_scale(op: SensingOperator) -> float:
    """``N_T N_R N_f sum_k ||s_k||^2``, the predicted multiple of the identity."""
    cfg = op.cfg
    return float(cfg.n_tx * cfg.n_rx * cfg.n_freq * op.waveforms.energies.sum())


def scaled_identity(op: SensingOperator, tol: float = 1e-9,
                    budget: int = DEFAULT_DENSE_BUDGET) -> IdentityCheck:
    """With Doppler bins ``N_f = N_t``, ``A A^H = c I``; the defect is relative to ``||c I||_F``."""
    c = doppler_identity_scale(op)
    g = row_gram(op, budget)
    ident = c * np.eye(g.shape[0])
    defect = np.linalg.norm(g - ident) / np.linalg.norm(ident)
    return IdentityCheck("scaled_identity", float(defect), tol, f"c = {c!r}")


def identity_suite(op: SensingOperator, tol: float = 1e-9,
                   budget: int = DEFAULT_DENSE_BUDGET) -> list[IdentityCheck]:
    """Structural checks applicable to ``op``'s model."""
    if op.doppler:
        return [scaled_identity(op, tol, budget)]
    return block_structure(op, tol, budget)
