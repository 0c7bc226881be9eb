"""Run configuration: ``key = value`` lines with ``#`` comments.

Absent keys take their defaults; unknown keys, unparseable values and
out-of-range settings are rejected with the offending line number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .encoding import METHODS, EncoderSpec
from .errors import ConfigError
from .neuron import LEAK_MODES, LifParams
from .stdp import WINDOW_MODES, StdpParams, SubsegmentSchedule
from .supervised import AdamConfig, HuberSpec, ResponseKernel

ALIASES = {"m": "input_neurons", "n": "output_neurons", "T": "sedsi_T", "D": "leak_D", "P_in": "p_inhibit"}


@dataclass
class RunConfig:
    # network hyperparameters
    input_neurons: int = 16384
    output_neurons: int = 3
    sedsi_T: int = 70
    t_ref: int = 20
    p_rest: float = 0.0
    p_reset: float = 0.0
    p_th: float = 80.0
    leak_D: float = -5.0
    p_inhibit: float = -500.0
    batch_size: int = 1
    max_steps: int = 30000
    lr_ini: float = 1e-3
    lr_mid: float = 1e-4
    # neuron model
    leak_mode: str = "constant"
    tau_m: float = 10.0
    r_m: float = 1.0
    # encoder
    encoding: str = "random"
    f_min: float = 1.0
    f_max: float = 20.0
    # STDP
    a_plus: float = 0.8
    a_minus: float = 0.3
    tau_plus: float = 5.0
    tau_minus: float = 5.0
    t_fore: int = 7
    t_back: int = 7
    silent_decay: float = 0.2
    w_min: float = -1.2
    w_max: float = 1.4
    stdp_window: str = "exponential"
    init_low: float = 0.6
    init_high: float = 0.8
    epochs: int = 20
    # bilayer
    hidden_neurons: int = 100
    subsegments: int = 10
    correlation_halfwidth: int = 3
    output_gain: float = 120.0
    # supervised
    tau_s: float = 10.0
    huber_delta: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    lr_switch_fraction: float = 0.6
    sup_epochs: int = 25
    sup_init_scale: float = 1e-3
    # data
    test_fraction: float = 0.25
    seed: int = 0

    explicit: dict = field(default_factory=dict, repr=False, compare=False)

    # parameter bundles

    def lif(self) -> LifParams:
        return LifParams(self.p_rest, self.p_reset, self.p_th, self.leak_D, self.t_ref, self.p_inhibit,
                         self.sedsi_T, self.leak_mode, self.tau_m, self.r_m)

    def stdp(self) -> StdpParams:
        return StdpParams(self.a_plus, self.a_minus, self.tau_plus, self.tau_minus, self.t_fore, self.t_back,
                          self.silent_decay, self.w_min, self.w_max, self.stdp_window)

    def encoder(self, seed: int | None = None) -> EncoderSpec:
        return EncoderSpec(self.encoding, self.sedsi_T, self.f_min, self.f_max, self.seed if seed is None else seed)

    def schedule(self) -> SubsegmentSchedule:
        return SubsegmentSchedule(self.subsegments, self.correlation_halfwidth)

    def kernel(self) -> ResponseKernel:
        return ResponseKernel(self.tau_s)

    def huber(self) -> HuberSpec:
        return HuberSpec(self.huber_delta)

    def adam(self) -> AdamConfig:
        return AdamConfig(self.lr_ini, self.lr_mid, self.max_steps, self.lr_switch_fraction,
                          self.beta1, self.beta2, self.epsilon)

    @property
    def init_range(self) -> tuple[float, float]:
        return (self.init_low, self.init_high)

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)


_FIELDS = {f.name: f for f in fields(RunConfig) if f.name != "explicit"}
_TYPES = {name: type(RunConfig.__dataclass_fields__[name].default) for name in _FIELDS}

# (keys involved, predicate, message)
_RULES = [
    (("p_th", "p_rest"), lambda c: c.p_th > c.p_rest, "p_th must exceed p_rest"),
    (("leak_D",), lambda c: c.leak_D <= 0, "leak_D must be <= 0"),
    (("p_inhibit",), lambda c: c.p_inhibit <= 0, "p_inhibit must be <= 0"),
    (("t_ref",), lambda c: c.t_ref >= 0, "t_ref must be >= 0"),
    (("sedsi_T",), lambda c: c.sedsi_T >= 1, "sedsi_T must be >= 1"),
    (("input_neurons",), lambda c: c.input_neurons >= 1, "input_neurons must be >= 1"),
    (("output_neurons",), lambda c: c.output_neurons >= 2, "output_neurons must be >= 2"),
    (("batch_size",), lambda c: c.batch_size == 1, "only batch_size = 1 is supported"),
    (("max_steps",), lambda c: c.max_steps >= 1, "max_steps must be >= 1"),
    (("lr_ini",), lambda c: c.lr_ini > 0, "lr_ini must be positive"),
    (("lr_mid",), lambda c: c.lr_mid > 0, "lr_mid must be positive"),
    (("leak_mode",), lambda c: c.leak_mode in LEAK_MODES, f"leak_mode must be one of {LEAK_MODES}"),
    (("tau_m",), lambda c: c.tau_m > 0, "tau_m must be positive"),
    (("encoding",), lambda c: c.encoding in METHODS, f"encoding must be one of {METHODS}"),
    (("f_min", "f_max"), lambda c: 0 < c.f_min < c.f_max, "need 0 < f_min < f_max"),
    (("a_plus",), lambda c: c.a_plus > 0, "a_plus must be positive"),
    (("a_minus",), lambda c: c.a_minus > 0, "a_minus must be positive"),
    (("tau_plus",), lambda c: c.tau_plus > 0, "tau_plus must be positive"),
    (("tau_minus",), lambda c: c.tau_minus > 0, "tau_minus must be positive"),
    (("t_fore",), lambda c: c.t_fore >= 1, "t_fore must be >= 1"),
    (("t_back",), lambda c: c.t_back >= 1, "t_back must be >= 1"),
    (("silent_decay",), lambda c: c.silent_decay >= 0, "silent_decay must be >= 0"),
    (("w_min", "w_max"), lambda c: c.w_min < c.w_max, "w_min must be below w_max"),
    (("stdp_window",), lambda c: c.stdp_window in WINDOW_MODES, f"stdp_window must be one of {WINDOW_MODES}"),
    (("init_low", "init_high"), lambda c: c.init_low <= c.init_high, "init_low must not exceed init_high"),
    (("epochs",), lambda c: c.epochs >= 0, "epochs must be >= 0"),
    (("hidden_neurons",), lambda c: c.hidden_neurons >= 1, "hidden_neurons must be >= 1"),
    (("subsegments", "sedsi_T"), lambda c: 1 <= c.subsegments <= c.sedsi_T,
     "subsegments must lie in [1, sedsi_T]"),
    (("correlation_halfwidth",), lambda c: c.correlation_halfwidth >= 0, "correlation_halfwidth must be >= 0"),
    (("output_gain",), lambda c: c.output_gain > 0, "output_gain must be positive"),
    (("tau_s",), lambda c: c.tau_s > 0, "tau_s must be positive"),
    (("huber_delta",), lambda c: c.huber_delta > 0, "huber_delta must be positive"),
    (("beta1",), lambda c: 0 <= c.beta1 < 1, "beta1 must lie in [0, 1)"),
    (("beta2",), lambda c: 0 <= c.beta2 < 1, "beta2 must lie in [0, 1)"),
    (("epsilon",), lambda c: c.epsilon > 0, "epsilon must be positive"),
    (("lr_switch_fraction",), lambda c: 0 <= c.lr_switch_fraction <= 1, "lr_switch_fraction must lie in [0, 1]"),
    (("sup_epochs",), lambda c: c.sup_epochs >= 0, "sup_epochs must be >= 0"),
    (("sup_init_scale",), lambda c: c.sup_init_scale >= 0, "sup_init_scale must be >= 0"),
    (("test_fraction",), lambda c: 0 <= c.test_fraction < 1, "test_fraction must lie in [0, 1)"),
]


def _convert(key: str, raw: str, line: int):
    kind = _TYPES[key]
    try:
        if kind is int:
            val = float(raw)
            if not val.is_integer():
                raise ValueError
            return int(val)
        if kind is float:
            val = float(raw)
            if not math.isfinite(val):
                raise ValueError
            return val
        if not raw:
            raise ValueError
        return raw
    except ValueError:
        raise ConfigError(f"cannot parse {raw!r} as {kind.__name__} for key {key!r}", line) from None


def parse_config_text(text: str) -> RunConfig:
    values: dict = {}
    lines: dict = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        content = raw_line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"expected 'key = value', got {content!r}", lineno)
        key, raw = (part.strip() for part in content.split("=", 1))
        key = ALIASES.get(key, key)
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in lines:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", lineno)
        values[key] = _convert(key, raw, lineno)
        lines[key] = lineno
    cfg = RunConfig(**values, explicit=lines)
    for keys, ok, message in _RULES:
        if not ok(cfg):
            set_lines = [lines[k] for k in keys if k in lines]
            raise ConfigError(message, max(set_lines) if set_lines else None)
    return cfg


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        return parse_config_text(text)
    except ConfigError as exc:
        err = ConfigError(f"{path}: {exc}")
        err.line = exc.line
        raise err from None


def write_config(cfg: RunConfig, path) -> None:
    lines = [f"{name} = {getattr(cfg, name)}" for name in _FIELDS]
    Path(path).write_text("\n".join(lines) + "\n")
