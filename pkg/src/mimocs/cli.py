"""Command-line front end: ``validate``, ``bounds`` and ``roc``.

Exit codes: 0 success, 1 a check failed, 2 usage or configuration error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .experiment import AGGREGATE_COLUMNS, aggregate, lipschitz_for, pd_at_pfa, roc_sweep
from .operator import DenseBudgetError, SensingOperator
from .recovery import LassoDivergenceError
from .spectral import ConvergenceError, satisfaction_rates, theorem_bounds, verify_bounds
from .structure import doppler_identity_scale, identity_suite
from .svg import line_plot

logger = logging.getLogger("mimocs")

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

BOUNDS_COLUMNS = ("seed", "op_norm_sq", "op_norm_bound", "max_inner_product", "inner_product_bound",
                  "coherence_normalized", "normalized_bound", "op_norm_ok", "coherence_ok")
VALIDATE_DEFAULT = {"n_tx": 2, "n_rx": 2, "n_time": 16, "n_delay": 16}


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(header, rows) -> str:
    """RFC-4180 text (CRLF line ends) with shortest round-trip float formatting."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _config(args, default: dict | None = None) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig(**(default or {}))
    return cfg.with_overrides(seed=args.seed, output_dir=args.out)


def cmd_validate(args) -> int:
    cfg = _config(args, VALIDATE_DEFAULT)
    op = SensingOperator(cfg.radar())
    checks = identity_suite(op)
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        extra = f"  {c.detail}" if c.detail else ""
        print(f"{status} {c.name}: relative defect {c.defect:.3e} (tol {c.tol:.0e}){extra}")
    if op.doppler:
        print(f"scale constant N_T N_R N_f sum||s_k||^2 = {doppler_identity_scale(op)!r}")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_CHECK


def _bounds_one(args):
    radar, seed = args
    return verify_bounds(radar, 1, seeds=[seed], warn=False)[0]


def cmd_bounds(args) -> int:
    cfg = _config(args)
    radar = cfg.radar()
    report = theorem_bounds(radar, sigma=cfg.sigma, c0=cfg.c0, c_snr=cfg.c_snr)
    if not report.preconditions_ok:
        logger.warning("configuration violates the theorem's size conditions "
                       "(N_t >= 128: %s, delay grid: %s, log^3 <= N_t: %s)",
                       report.n_time_ok, report.delay_grid_ok, report.log_cube_ok)
    seeds = [cfg.seed + i for i in range(cfg.n_seeds)]
    if args.threads > 1:
        with ProcessPoolExecutor(args.threads) as pool:
            rows = list(pool.map(_bounds_one, [(radar, s) for s in seeds]))
    else:
        rows = verify_bounds(radar, cfg.n_seeds, seeds=seeds, warn=False)
    body = [(r.seed, r.op_norm_sq, r.op_norm_bound, r.max_inner_product, r.inner_product_bound,
             r.coherence_normalized, r.normalized_bound, r.op_norm_ok,
             r.inner_product_ok and r.normalized_ok) for r in rows]
    body.append(("k_max", report.k_max, "lambda", report.lambda_default, "amplitude_floor",
                 report.amplitude_floor, "snr_min_db", report.snr_min_db, ""))
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, "bounds.csv")
    _write(path, csv_text(BOUNDS_COLUMNS, body))
    rates = satisfaction_rates(rows)
    energy = sum(r.energy_ok for r in rows) / len(rows)
    print(f"wrote {path} ({len(rows)} seeds)")
    print("satisfaction rates: " + ", ".join(f"{k} {v:.3f}" for k, v in rates.items())
          + f", waveform energy <= 2 N_t {energy:.3f}")
    print(f"K_max = {report.k_max}, lambda = {report.lambda_default:.6g}, "
          f"amplitude floor = {report.amplitude_floor:.6g}, SNR_min = {report.snr_min_db:.4g} dB")
    return EXIT_OK


def cmd_roc(args) -> int:
    cfg = _config(args)
    radar = cfg.radar()
    ks = cfg.resolve_k()
    thresholds = cfg.threshold_grid()
    settings = cfg.lasso_settings()
    op = SensingOperator(radar)
    lipschitz = lipschitz_for(op, cfg.normalized)
    curves = []
    for snr in cfg.snr_db_list:
        for k in ks:
            curve = roc_sweep(op, k, snr, cfg.trials, thresholds, seed=cfg.seed,
                              amplitude=cfg.amplitude, settings=settings,
                              normalized=cfg.normalized, lipschitz=lipschitz, eps=cfg.eps,
                              threads=args.threads)
            curves.append(curve)
            unconverged = sum(not s.converged for s in curve.stats)
            if unconverged:
                logger.warning("snr %g dB, k %d: %d trials stopped before the KKT tolerance",
                               snr, k, unconverged)
            print(f"snr {snr:g} dB, k {k}: P_d at P_fa 0.1 = {pd_at_pfa(curve):.3f}")
    rows = aggregate(curves)
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, "roc.csv")
    _write(path, csv_text(AGGREGATE_COLUMNS, ([r[c] for c in AGGREGATE_COLUMNS] for r in rows)))
    print(f"wrote {path} ({len(curves)} curves)")
    if args.plot:
        for snr in cfg.snr_db_list:
            series = [(f"K = {c.k}", c.pfa, c.pd) for c in curves if c.snr_db == snr]
            xmax = max(1.0, min(2.0, max(float(np.max(s[1])) for s in series)))
            svg = line_plot(series, f"ROC at {snr:g} dB", "P_fa (false alarms / K)", "P_d",
                            xlim=(0.0, xmax))
            svg_path = os.path.join(cfg.output_dir, f"roc_snr{snr:g}.svg")
            _write(svg_path, svg)
            print(f"wrote {svg_path}")
    return EXIT_OK


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mimocs", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, helptext in (
        ("validate", cmd_validate, "check the exact Gram-matrix structure of the sensing matrix"),
        ("bounds", cmd_bounds, "compare norm and coherence with their bounds over waveform seeds"),
        ("roc", cmd_roc, "Monte-Carlo ROC sweep of the debiased lasso"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="JSON experiment configuration")
        p.add_argument("--seed", type=_u64, help="master seed (overrides the config)")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--threads", type=_positive, default=1, help="worker processes")
        if name == "roc":
            p.add_argument("--plot", action="store_true", help="write one SVG per SNR")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, LassoDivergenceError, DenseBudgetError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
