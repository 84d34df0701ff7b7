"""Experiment configuration: flat ``key = value`` files, environment and flags.

Later sources override earlier ones: defaults, then the config file, then
``INTRADAYFTS_<KEY>`` environment variables, then command-line flags.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from datetime import time

from .curves import SessionSpec
from .errors import ConfigError
from .intervals import BootstrapConfig
from .simulate import Far1Spec
from .updating import DEFAULT_LAMBDA_GRID, METHODS

ENV_PREFIX = "INTRADAYFTS_"
DECOMPOSITIONS = ("fpca", "robust_fpca", "robrsvd")
SCORE_MODELS = ("arima", "var")


def _floats(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _ints(text) -> tuple:
    return tuple(int(round(v)) for v in _floats(text))


def _names(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(str(v).strip().upper() for v in text)
    return tuple(v.strip().upper() for v in str(text).split(",") if v.strip())


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one evaluation run.

    Either ``input`` (a panel CSV) is set or ``simulate`` is true, in which
    case the ``sim_*`` keys describe a FAR(1) panel. ``splits`` are relative
    sizes of the training, validation and test blocks. ``m0_blocks`` empty
    means interior deciles of the day; ``full_updating`` evaluates every m0.
    ``max_test_days`` of 0 keeps the whole test block.
    """

    input: str = ""
    simulate: bool = False
    sim_n: int = 125
    sim_m: int = 101
    sim_weights: tuple = (0.7, 0.2)
    sim_basis: str = "fourier"
    sim_noise_sd: float = 1.0
    sim_white_noise_sd: float = 0.05
    sim_seed: int = 0
    session_open: str = "09:30:00"
    session_close: str = "16:15:00"
    tick_seconds: int = 15
    decomp: str = "fpca"
    score_model: str = "arima"
    delta: float = 0.9
    updaters: tuple = METHODS
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    splits: tuple = (43.0, 42.0, 40.0)
    m0_blocks: tuple = ()
    full_updating: bool = False
    max_test_days: int = 0
    bands: bool = True
    B: int = 1000
    alpha: float = 0.2
    seed: int = 0
    out: str = "out"

    def __post_init__(self):
        conv = {
            "simulate": _bool, "full_updating": _bool, "bands": _bool,
            "sim_n": int, "sim_m": int, "sim_seed": int, "tick_seconds": int, "max_test_days": int,
            "B": int, "seed": int,
            "sim_noise_sd": float, "sim_white_noise_sd": float, "delta": float, "alpha": float,
            "sim_weights": _floats, "lambda_grid": _floats, "splits": _floats, "m0_blocks": _ints,
            "updaters": _names,
        }
        for name, fn in conv.items():
            try:
                object.__setattr__(self, name, fn(getattr(self, name)))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {name}: {getattr(self, name)!r}") from exc
        self.validate()

    def validate(self):
        bad = [u for u in self.updaters if u not in METHODS]
        if bad:
            raise ConfigError(f"unknown updater(s) {bad}; choose from {list(METHODS)}")
        if not self.updaters:
            raise ConfigError("no updaters selected")
        if self.decomp not in DECOMPOSITIONS:
            raise ConfigError(f"decomp must be one of {DECOMPOSITIONS}")
        if self.score_model not in SCORE_MODELS:
            raise ConfigError(f"score_model must be one of {SCORE_MODELS}")
        if len(self.splits) != 3 or any(s <= 0 for s in self.splits):
            raise ConfigError("splits needs three positive sizes (train, validation, test)")
        if not self.lambda_grid or any(v <= 0 for v in self.lambda_grid):
            raise ConfigError("lambda_grid needs positive values")
        if not 0 < self.delta <= 1:
            raise ConfigError("delta must lie in (0, 1]")
        if not self.simulate and not self.input:
            raise ConfigError("set input or simulate")
        try:
            self.bootstrap()
            self.session()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    # derived settings
    def fractions(self):
        total = sum(self.splits)
        return tuple(s / total for s in self.splits)

    def bootstrap(self, *stream) -> BootstrapConfig:
        return BootstrapConfig(self.B, self.alpha, (self.seed, *stream) if stream else self.seed)

    def session(self) -> SessionSpec:
        return SessionSpec(time.fromisoformat(self.session_open), time.fromisoformat(self.session_close),
                           self.tick_seconds)

    def far1(self) -> Far1Spec:
        return Far1Spec(n=self.sim_n, m=self.sim_m, kernel_rank=len(self.sim_weights),
                        kernel_weights=self.sim_weights, basis=self.sim_basis, noise_sd=self.sim_noise_sd,
                        seed=self.sim_seed, white_noise_sd=self.sim_white_noise_sd,
                        tick_seconds=self.tick_seconds)

    # serialisation
    def to_text(self, exclude=()) -> str:
        lines = []
        for f in fields(self):
            if f.name in exclude:
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    def with_updates(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


KEYS = tuple(f.name for f in fields(ExperimentConfig))


def parse_config_text(text: str) -> dict:
    out = {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {no}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in KEYS:
            raise ConfigError(f"line {no}: unknown key {key!r}")
        out[key] = value
    return out


def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    out = {}
    for key in KEYS:
        name = ENV_PREFIX + key.upper()
        if name in environ:
            out[key] = environ[name]
    return out


def load_config(path: str | None = None, flags: dict | None = None, environ=None) -> ExperimentConfig:
    values: dict = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            values.update(parse_config_text(fh.read()))
    values.update(env_overrides(environ))
    values.update({k: v for k, v in (flags or {}).items() if v is not None})
    unknown = set(values) - set(KEYS)
    if unknown:
        raise ConfigError(f"unknown settings {sorted(unknown)}")
    return ExperimentConfig(**values)
