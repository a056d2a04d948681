"""Compressed-sensing MIMO radar: sensing operator, coherence analysis, debiased lasso and ROC experiments."""
from .model import (RadarConfig, Scene, Spacing, Stream, WaveformSet, draw_noise, draw_scene,
                    gen_waveforms, rng_for, rx_manifold, sigma_from_snr, tx_manifold)
from .operator import ColumnScaling, DenseBudgetError, SensingOperator, column_norms
from .recovery import (LassoSettings, RecoveryResult, debias, extract_support, kkt_residual,
                       lasso_solve, recover, soft_threshold, theorem_lambda)
from .spectral import (AnalysisReport, BoundsReport, coherence, max_inner_product,
                       normalized_coherence, operator_norm_sq, theorem_bounds, verify_bounds)
from .experiment import RocCurve, TrialOutcome, aggregate, pd_at_pfa, roc_sweep, run_trial

__version__ = "0.1.0"
