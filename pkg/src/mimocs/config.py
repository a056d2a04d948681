"""JSON experiment configuration.

Schema (all keys optional, defaults shown)::

    {
      "n_tx": 8, "n_rx": 8, "n_time": 64, "n_delay": null, "n_doppler": 0,
      "spacing": "tx_half",
      "seed": 0,
      "snr_db_list": [15, 20, 25, 30],
      "k_list": ["kmax/2", "kmax", "2kmax"],
      "trials": 100,
      "amplitude": 1.0,
      "thresholds": {"max": 2.0, "min": 0.001, "count": 64},
      "solver": {"max_iters": 5000, "rel_tol": 1e-7, "accelerated": true,
                 "normalized": true, "lam": null, "eps": 1e-6},
      "c0": 1.0, "c_snr": 1.0, "sigma": 1.0,
      "n_seeds": 50,
      "output_dir": "out"
    }

``thresholds`` may also be an explicit strictly descending list; its
``max``/``min`` are multiples of ``amplitude``. ``sigma`` only feeds the
noise-dependent constants in the bounds summary. Integer ``k_list`` entries
are used as is; the symbolic ones resolve against ``K_max`` and never drop
below 1.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .model import RadarConfig
from .recovery import LassoSettings
from .spectral import theorem_bounds


class ConfigError(ValueError):
    """Malformed or inconsistent configuration; ``line``/``column`` locate JSON syntax errors."""

    def __init__(self, msg: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(msg + where)
        self.line = line
        self.column = column


SYMBOLIC_K = {"kmax/2": lambda k: k // 2, "kmax": lambda k: k, "2kmax": lambda k: 2 * k}

_SOLVER_KEYS = {"max_iters", "rel_tol", "accelerated", "normalized", "lam", "eps", "check_every",
                "continuation", "continuation_factor", "stage_tol"}


@dataclass(frozen=True)
class ExperimentConfig:
    n_tx: int = 8
    n_rx: int = 8
    n_time: int = 64
    n_delay: int | None = None
    n_doppler: int = 0
    spacing: str = "tx_half"
    seed: int = 0
    snr_db_list: tuple = (15.0, 20.0, 25.0, 30.0)
    k_list: tuple = ("kmax/2", "kmax", "2kmax")
    trials: int = 100
    amplitude: float = 1.0
    thresholds: object = field(default_factory=lambda: {"max": 2.0, "min": 1e-3, "count": 64})
    solver: dict = field(default_factory=dict)
    c0: float = 1.0
    c_snr: float = 1.0
    sigma: float = 1.0
    n_seeds: int = 50
    output_dir: str = "out"

    def __post_init__(self):
        object.__setattr__(self, "snr_db_list", tuple(float(s) for s in self.snr_db_list))
        object.__setattr__(self, "k_list", tuple(self.k_list))
        unknown = set(self.solver) - _SOLVER_KEYS
        if unknown:
            raise ConfigError(f"unknown solver keys: {sorted(unknown)}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1")
        if self.amplitude <= 0:
            raise ConfigError("amplitude must be positive")
        if not self.snr_db_list:
            raise ConfigError("snr_db_list must not be empty")
        if not self.k_list:
            raise ConfigError("k_list must not be empty")
        for k in self.k_list:
            if isinstance(k, str):
                if k not in SYMBOLIC_K:
                    raise ConfigError(f"unknown symbolic k {k!r}; use one of {sorted(SYMBOLIC_K)}")
            elif isinstance(k, bool) or not isinstance(k, int) or k < 1:
                raise ConfigError(f"k entries must be integers >= 1 or symbolic, got {k!r}")
        try:
            self.radar()
            self.lasso_settings()
            self.threshold_grid()
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def radar(self) -> RadarConfig:
        return RadarConfig(self.n_tx, self.n_rx, self.n_time, self.n_delay, self.n_doppler,
                           self.spacing, self.seed)

    def with_overrides(self, seed: int | None = None, output_dir: str | None = None) -> "ExperimentConfig":
        changes = {}
        if seed is not None:
            changes["seed"] = seed
        if output_dir is not None:
            changes["output_dir"] = output_dir
        return replace(self, **changes) if changes else self

    def lasso_settings(self) -> LassoSettings:
        keys = {f.name for f in fields(LassoSettings)}
        return LassoSettings(**{k: v for k, v in self.solver.items() if k in keys})

    @property
    def normalized(self) -> bool:
        return bool(self.solver.get("normalized", True))

    @property
    def eps(self) -> float:
        return float(self.solver.get("eps", 1e-6))

    def threshold_grid(self) -> np.ndarray:
        rule = self.thresholds
        if isinstance(rule, dict):
            unknown = set(rule) - {"max", "min", "count"}
            if unknown:
                raise ConfigError(f"unknown threshold keys: {sorted(unknown)}")
            hi, lo = float(rule.get("max", 2.0)), float(rule.get("min", 1e-3))
            n = int(rule.get("count", 64))
            if not (hi > lo > 0) or n < 2:
                raise ConfigError("thresholds need max > min > 0 and count >= 2")
            return self.amplitude * np.logspace(math.log10(hi), math.log10(lo), n)
        grid = np.asarray(rule, dtype=float)
        if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) >= 0):
            raise ConfigError("an explicit threshold list must be non-empty and strictly descending")
        return grid

    def resolve_k(self) -> list[int]:
        """Integer sparsity levels, symbolic entries evaluated against ``K_max``."""
        k_max = theorem_bounds(self.radar(), c0=self.c0, c_snr=self.c_snr).k_max
        return [max(1, SYMBOLIC_K[k](k_max)) if isinstance(k, str) else int(k) for k in self.k_list]

    def to_json(self) -> str:
        d = asdict(self)
        d["snr_db_list"] = list(self.snr_db_list)
        d["k_list"] = list(self.k_list)
        return json.dumps(d, indent=2, sort_keys=True)


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from exc
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    try:
        return ExperimentConfig(**data)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
