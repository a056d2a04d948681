"""Monte-Carlo ROC experiments for the debiased-lasso detector.

Trial ``i`` of an experiment with master seed ``s`` draws its scene and noise
from streams keyed on ``(s, i)`` only, so the same trial index sees the same
support, phases and (unit-variance) noise realization at every SNR and the
scenes for different ``k`` are nested prefixes of one random ordering of the
grid. Waveforms are drawn once per experiment.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import RadarConfig, Scene, Stream, complex_normal, rng_for, sigma_from_snr
from .operator import SensingOperator
from .recovery import LassoSettings, RecoveryResult, recover
from .spectral import operator_norm_sq

logger = logging.getLogger(__name__)


@dataclass
class TrialOutcome:
    trial_id: int
    planted: Scene
    estimate: RecoveryResult
    sigma: float
    values_on_support: np.ndarray
    values_off_support: np.ndarray
    y_norm: float
    error_bound: float  # sigma sqrt(12 N_t N_R) / ||y||, the relative-error bound under exact support

    @property
    def exact_support(self) -> bool:
        return np.array_equal(self.estimate.support, self.planted.support)

    @property
    def relative_error(self) -> float:
        x = self.planted.dense()
        return float(np.linalg.norm(self.estimate.debiased_estimate - x) / np.linalg.norm(x))


@dataclass(frozen=True)
class TrialStats:
    """Per-trial summary kept by ``roc_sweep`` once the full outcome is reduced."""

    trial_id: int
    exact_support: bool
    relative_error: float
    error_bound: float
    kkt_residual: float
    iters: int
    converged: bool
    support_size: int


@dataclass
class RocCurve:
    thresholds: np.ndarray  # strictly descending
    pd: np.ndarray
    pfa: np.ndarray  # false alarms per planted scatterer
    pfa_per_cell: np.ndarray  # false alarms per empty cell
    snr_db: float
    k: int
    trials: int
    stats: list[TrialStats] = field(default_factory=list)


def default_thresholds(amplitude: float = 1.0, n: int = 64) -> np.ndarray:
    """``n`` log-spaced thresholds from ``2 a`` down to ``1e-3 a``."""
    return amplitude * np.logspace(math.log10(2.0), -3.0, n)


def nested_scene(cfg: RadarConfig, k: int, amplitude: float, seed: int, trial: int) -> Scene:
    """K-sparse scene whose support is the first ``k`` entries of a random grid ordering."""
    if k < 0 or k > cfg.grid_size:
        raise ValueError(f"k={k} must lie in [0, {cfg.grid_size}]")
    rng = rng_for(seed, Stream.SCENE, trial)
    order = rng.permutation(cfg.grid_size)
    phases = rng.uniform(0.0, 2 * np.pi, size=k)
    return Scene(order[:k], amplitude * np.exp(1j * phases), cfg.grid_size)


def run_trial(op: SensingOperator, k: int, snr_db: float, trial: int, *, seed: int | None = None,
              amplitude: float = 1.0, settings: LassoSettings = LassoSettings(),
              normalized: bool = True, lipschitz: float | None = None,
              eps: float = 1e-6) -> TrialOutcome:
    """One draw of scene and noise, debiased-lasso recovery, and per-cell magnitudes."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if op.column_scale is not None:
        raise ValueError("pass the unscaled operator; normalized=True selects the A D^-1 route")
    cfg = op.cfg
    seed = cfg.seed if seed is None else seed
    scene = nested_scene(cfg, k, amplitude, seed, trial)
    sigma = sigma_from_snr(cfg, snr_db, amplitude)
    noise = complex_normal(rng_for(seed, Stream.NOISE, trial), cfg.n_meas)
    y = op.apply(scene.dense()) + sigma * noise
    est = recover(op, y, sigma, settings, normalized=normalized, lipschitz=lipschitz, eps=eps)
    y_norm = float(np.linalg.norm(y))
    mags = np.abs(est.debiased_estimate)
    off = np.ones(cfg.grid_size, dtype=bool)
    off[scene.support] = False
    return TrialOutcome(
        trial_id=trial,
        planted=scene,
        estimate=est,
        sigma=sigma,
        values_on_support=mags[scene.support],
        values_off_support=mags[off],
        y_norm=y_norm,
        error_bound=sigma * math.sqrt(12 * cfg.n_time * cfg.n_rx) / y_norm,
    )


def exceedance_counts(values: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Number of ``values`` strictly greater than each threshold."""
    v = np.sort(np.asarray(values, dtype=float))
    return len(v) - np.searchsorted(v, np.asarray(thresholds, dtype=float), side="right")


def _counts(outcome: TrialOutcome, thresholds: np.ndarray):
    n_on = exceedance_counts(outcome.values_on_support, thresholds)
    n_off = exceedance_counts(outcome.values_off_support, thresholds)
    stats = TrialStats(
        trial_id=outcome.trial_id,
        exact_support=outcome.exact_support,
        relative_error=outcome.relative_error,
        error_bound=outcome.error_bound,
        kkt_residual=outcome.estimate.kkt_residual,
        iters=outcome.estimate.iters,
        converged=outcome.estimate.converged,
        support_size=len(outcome.estimate.support),
    )
    return n_on, n_off, stats


_WORKER: dict = {}


def _init_worker(cfg, samples, lipschitz):
    from .model import WaveformSet

    _WORKER["op"] = SensingOperator(cfg, WaveformSet(samples))
    _WORKER["lipschitz"] = lipschitz


def _work(args):
    k, snr_db, trial, seed, amplitude, settings, normalized, eps, thresholds = args
    out = run_trial(_WORKER["op"], k, snr_db, trial, seed=seed, amplitude=amplitude,
                    settings=settings, normalized=normalized, lipschitz=_WORKER["lipschitz"],
                    eps=eps)
    return _counts(out, thresholds)


def lipschitz_for(op: SensingOperator, normalized: bool) -> float:
    return operator_norm_sq(op.normalized() if normalized else op)


def roc_sweep(op: SensingOperator, k: int, snr_db: float, trials: int,
              thresholds: np.ndarray | None = None, *, seed: int | None = None,
              amplitude: float = 1.0, settings: LassoSettings = LassoSettings(),
              normalized: bool = True, lipschitz: float | None = None,
              eps: float = 1e-6, threads: int = 1, trial_ids=None,
              on_outcome=None) -> RocCurve:
    """Average detection and false-alarm counts over ``trials`` independent trials.

    At threshold ``t``: ``pd`` is the mean fraction of planted scatterers whose
    debiased magnitude exceeds ``t``; ``pfa`` is the mean number of empty
    cells exceeding ``t`` divided by ``k`` (so it can exceed one);
    ``pfa_per_cell`` divides by the number of empty cells instead.

    ``trial_ids`` replaces the default ``range(trials)``; ``on_outcome`` is
    called with every full ``TrialOutcome`` (single process only).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    trial_ids = list(range(trials)) if trial_ids is None else [int(i) for i in trial_ids]
    if len(trial_ids) != trials:
        raise ValueError("trial_ids must have one entry per trial")
    if on_outcome is not None and threads > 1:
        raise ValueError("on_outcome needs threads=1")
    thresholds = default_thresholds(amplitude) if thresholds is None else np.asarray(thresholds, float)
    if np.any(np.diff(thresholds) >= 0):
        raise ValueError("thresholds must be strictly descending")
    if lipschitz is None:
        lipschitz = lipschitz_for(op, normalized)
    seed = op.cfg.seed if seed is None else seed
    jobs = [(k, snr_db, i, seed, amplitude, settings, normalized, eps, thresholds) for i in trial_ids]
    if threads > 1:
        with ProcessPoolExecutor(threads, initializer=_init_worker,
                                 initargs=(op.cfg, np.array(op.waveforms.samples), lipschitz)) as pool:
            results = list(pool.map(_work, jobs, chunksize=max(1, trials // (4 * threads))))
    else:
        results = []
        for job in jobs:
            out = run_trial(op, k, snr_db, job[2], seed=seed, amplitude=amplitude,
                            settings=settings, normalized=normalized, lipschitz=lipschitz, eps=eps)
            if on_outcome is not None:
                on_outcome(out)
            results.append(_counts(out, thresholds))
    n_on = np.sum([r[0] for r in results], axis=0)
    n_off = np.sum([r[1] for r in results], axis=0)
    empty = op.cfg.grid_size - k
    return RocCurve(
        thresholds=thresholds,
        pd=n_on / (k * trials),
        pfa=n_off / (k * trials),
        pfa_per_cell=n_off / (empty * trials) if empty else np.zeros_like(thresholds),
        snr_db=snr_db,
        k=k,
        trials=trials,
        stats=[r[2] for r in results],
    )


def pd_at_pfa(curve: RocCurve, pfa: float = 0.1, per_cell: bool = False) -> float:
    """Largest detection rate over thresholds whose false-alarm rate stays within ``pfa``."""
    rates = curve.pfa_per_cell if per_cell else curve.pfa
    ok = rates <= pfa
    return float(curve.pd[ok].max()) if ok.any() else 0.0


AGGREGATE_COLUMNS = ("snr_db", "k", "threshold", "pd", "pfa", "pfa_per_cell")


def aggregate(curves: list[RocCurve]) -> list[dict]:
    """Long-form rows ``(snr_db, k, threshold, pd, pfa, pfa_per_cell)`` in input order."""
    if not curves:
        raise ValueError("need at least one curve")
    rows = []
    for c in curves:
        for t, pd, pfa, pfc in zip(c.thresholds, c.pd, c.pfa, c.pfa_per_cell):
            rows.append({"snr_db": float(c.snr_db), "k": int(c.k), "threshold": float(t),
                         "pd": float(pd), "pfa": float(pfa), "pfa_per_cell": float(pfc)})
    return rows
