"""Run configuration read from ``key = value`` files.

Blank lines and ``#`` comments are ignored.  Recognised keys::

    train_window = 52            # >= 10
    horizon      = 10            # >= 1
    decomposition = fm           # fm | fmp
    k_rule       = evr           # evr | fixed:K
    kernel       = bartlett      # bartlett | flat_top
    bandwidth    = plugin        # plugin | fixed:<b>
    clr          = on            # on | off
    methods      = fm,fmp,gsy,naive
    seed         = 0
    windows      = rolling       # rolling | full
    gsy_p0       = 6
    gsy_r        = evr           # evr | fixed:r
    age_grid     = 0:110         # start:stop[:step], inclusive

Any other key is a :class:`~densityfts.errors.ConfigError` naming the key.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import ConfigError, DensityFTSError
from .panel import AgeGrid
from .pipeline import PipelineConfig

METHOD_NAMES = ("fm", "fmp", "gsy", "naive")
_ON = {"on": True, "true": True, "yes": True, "1": True, "off": False, "false": False, "no": False, "0": False}


@dataclass(frozen=True)
class RunConfig:
    train_window: int = 52
    horizon: int = 10
    decomposition: str = "fm"
    k_rule: str = "evr"
    kernel: str = "bartlett"
    bandwidth: str = "plugin"
    clr: bool = True
    methods: tuple = ("fm",)
    seed: int = 0
    windows: str = "rolling"
    gsy_p0: int = 6
    gsy_r: str = "evr"
    age_grid: str = "0:110"

    def __post_init__(self):
        if self.train_window < 10:
            raise ConfigError("train_window must be at least 10", "train_window")
        if self.horizon < 1:
            raise ConfigError("horizon must be at least 1", "horizon")
        if self.windows not in ("rolling", "full"):
            raise ConfigError("windows must be 'rolling' or 'full'", "windows")
        if self.gsy_p0 < 1:
            raise ConfigError("gsy_p0 must be at least 1", "gsy_p0")
        for m in self.methods:
            if m not in METHOD_NAMES:
                raise ConfigError(f"unknown method {m!r}", "methods")
        if not self.methods:
            raise ConfigError("methods must not be empty", "methods")
        self.grid()
        try:
            self.pipeline()
        except ConfigError:
            raise
        except DensityFTSError as exc:
            raise ConfigError(str(exc), _guess_key(str(exc))) from exc

    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(
            decomposition=self.decomposition,
            k_rule=_rule(self.k_rule),
            kernel=self.kernel,
            bandwidth=_bandwidth(self.bandwidth),
            horizon=self.horizon,
            clr=self.clr,
        )

    def grid(self) -> AgeGrid:
        parts = self.age_grid.split(":")
        try:
            nums = [float(x) for x in parts]
        except ValueError:
            nums = []
        if len(nums) not in (2, 3) or (len(nums) == 3 and not nums[2] > 0) or not nums[1] > nums[0]:
            raise ConfigError(f"age_grid must be 'start:stop[:step]' with stop > start, got {self.age_grid!r}", "age_grid")
        step = nums[2] if len(nums) == 3 else 1.0
        n = int(round((nums[1] - nums[0]) / step))
        if abs(nums[0] + n * step - nums[1]) > 1e-9 * max(1.0, abs(nums[1])):
            raise ConfigError("age_grid step must divide stop - start", "age_grid")
        return AgeGrid(nums[0] + step * np.arange(n + 1))

    @property
    def gsy_rule(self):
        return _rule(self.gsy_r)

    def echo(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        return d

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)


def _guess_key(message: str) -> str:
    for key in ("decomposition", "kernel", "bandwidth", "horizon"):
        if key in message:
            return key
    return "k_rule"


def _rule(text):
    text = str(text).strip()
    if text == "evr":
        return "evr"
    if text.startswith("fixed:"):
        try:
            k = int(text[6:])
        except ValueError:
            raise ConfigError(f"bad fixed order {text!r}", "k_rule") from None
        if k < 1:
            raise ConfigError(f"fixed order must be positive, got {k}", "k_rule")
        return ("fixed", k)
    raise ConfigError(f"rule must be 'evr' or 'fixed:K', got {text!r}", "k_rule")


def _bandwidth(text):
    text = str(text).strip()
    if text == "plugin":
        return "plugin"
    if text.startswith("fixed:"):
        try:
            b = float(text[6:])
        except ValueError:
            b = float("nan")
        if b > 0:
            return b
    raise ConfigError(f"bandwidth must be 'plugin' or 'fixed:<b>' with b > 0, got {text!r}", "bandwidth")


def _int(key, text):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {text!r}", key) from None


_PARSERS = {
    "train_window": _int,
    "horizon": _int,
    "seed": _int,
    "gsy_p0": _int,
    "decomposition": lambda k, v: v,
    "kernel": lambda k, v: v,
    "windows": lambda k, v: v,
    "k_rule": lambda k, v: (_rule(v), v)[1],
    "gsy_r": lambda k, v: v,
    "age_grid": lambda k, v: v,
    "bandwidth": lambda k, v: (_bandwidth(v), v)[1],
    "methods": lambda k, v: tuple(m.strip() for m in v.split(",") if m.strip()),
}


def _parse_clr(key, text):
    try:
        return _ON[text.lower()]
    except KeyError:
        raise ConfigError(f"clr must be on or off, got {text!r}", key) from None


_PARSERS["clr"] = _parse_clr


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    values = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'", line)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"unknown config key {key!r}", key)
        if key in values:
            raise ConfigError(f"duplicate config key {key!r}", key)
        values[key] = _PARSERS[key](key, value)
    base = RunConfig() if base is None else base
    return replace(base, **values)


def load_config(path: str | os.PathLike | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}", "--config") from None
    return parse_config(text)
