"""Flat key/value configuration files.

The file is TOML restricted to scalar and list values; dotted keys such as
``mbs.count = 12`` may also be written as ``[mbs]`` tables. Any key left
out takes the default listed in :data:`DEFAULTS`, which reproduces the
20 Mbps / 12-session reference cell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .engine import DEFAULT_HORIZON_S
from .errors import ConfigError
from .model import (PROPOSED, BackgroundClassProfile, LayerProfile, Scheme,
                    SchemeConfig, check_kbps, fixed_mbs)
from .traffic import TrafficRates

DEFAULTS = {
    "capacity_kbps": 20000,
    "voice_kbps": 64,
    "mbs.count": 12,
    "mbs.base_kbps": 500,
    "mbs.layer_kbps": [125, 125, 125, 125],
    "mbs.min_layers": 0,
    "mbs.popularity": [],  # rank per session, 1 = most popular; empty means 1..count
    "unicast.base_kbps": 300,
    "unicast.layer_kbps": [100, 100],
    "unicast.min_layers": 0,
    "background.max_kbps": [120],
    "background.degradation": ["1/2"],
    "background.share": [1],
    "arrival.ratio": [5, 1, 4],  # voice : unicast : background
    "duration.voice_s": 120.0,
    "duration.unicast_s": 300.0,
    "duration.background_s": [180.0],
    "dwell_s": 540.0,
    "sim.horizon_s": DEFAULT_HORIZON_S,
    "sim.warmup_s": None,  # 10% of the horizon
    "sweep.lambda": [0.2, 0.4, 0.6, 0.8, 1.0],
    "sweep.schemes": ["proposed", "fixed:6000", "fixed:14000"],
    "sweep.replications": 10,
    "sweep.seed": 1,
}


@dataclass(frozen=True)
class SweepSpec:
    lambda_values: tuple = tuple(DEFAULTS["sweep.lambda"])
    schemes: tuple = (PROPOSED, fixed_mbs(6000), fixed_mbs(14000))
    replications: int = 10
    seed: int = 1
    horizon_s: float = DEFAULT_HORIZON_S
    warmup_s: float = None

    def __post_init__(self):
        lams = tuple(float(x) for x in self.lambda_values)
        object.__setattr__(self, "lambda_values", lams)
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if not lams:
            raise ConfigError("sweep.lambda: at least one arrival rate is required")
        if any(not (x > 0 and math.isfinite(x)) for x in lams):
            raise ConfigError(f"sweep.lambda: rates must be positive, got {list(lams)}")
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise ConfigError("sweep.lambda: rates must be strictly increasing")
        if not self.schemes:
            raise ConfigError("sweep.schemes: at least one scheme is required")
        if self.replications < 1:
            raise ConfigError("sweep.replications must be >= 1")
        if not self.horizon_s > 0:
            raise ConfigError("sim.horizon_s must be positive")
        if self.warmup_s is None:
            object.__setattr__(self, "warmup_s", 0.1 * self.horizon_s)
        if not 0 <= self.warmup_s < self.horizon_s:
            raise ConfigError("sim.warmup_s must lie in [0, sim.horizon_s)")

    def seeds(self) -> list:
        return [self.seed + r for r in range(self.replications)]


@dataclass
class LoadedConfig:
    config: SchemeConfig
    rates: TrafficRates
    sweep: SweepSpec
    effective: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)  # keys given explicitly

    def __iter__(self):
        return iter((self.config, self.rates, self.sweep))


def _flatten(table: dict, prefix: str = "") -> dict:
    out = {}
    for key, value in table.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, path + "."))
        else:
            out[path] = value
    return out


def _as_list(key, value):
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _int(key, value, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{key}: must be >= {minimum}")
    return value


def _float(key, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    return float(value)


def _fraction(key, value) -> Fraction:
    try:
        return Fraction(str(value))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{key}: not a rational number: {value!r}") from None


def parse_settings(settings: dict) -> LoadedConfig:
    """Build the configuration objects from flat ``key -> value`` settings."""
    unknown = sorted(set(settings) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    eff = {**DEFAULTS, **settings}
    g = eff.__getitem__

    try:
        count = _int("mbs.count", g("mbs.count"), 0)
        profile = LayerProfile(
            check_kbps(g("mbs.base_kbps"), "mbs.base_kbps"),
            tuple(check_kbps(b, "mbs.layer_kbps") for b in _as_list("mbs.layer_kbps", g("mbs.layer_kbps"))),
            _int("mbs.min_layers", g("mbs.min_layers"), 0))
    except ConfigError as exc:
        raise ConfigError(f"mbs: {exc}") from None
    ranks = [_int("mbs.popularity", r, 1) for r in _as_list("mbs.popularity", g("mbs.popularity"))]
    if not ranks:
        ranks = list(range(1, count + 1))
    if len(ranks) != count:
        raise ConfigError(f"mbs.popularity: {len(ranks)} ranks for {count} sessions")

    try:
        unicast = LayerProfile(
            check_kbps(g("unicast.base_kbps"), "unicast.base_kbps"),
            tuple(check_kbps(b, "unicast.layer_kbps")
                  for b in _as_list("unicast.layer_kbps", g("unicast.layer_kbps"))),
            _int("unicast.min_layers", g("unicast.min_layers"), 0))
    except ConfigError as exc:
        raise ConfigError(f"unicast: {exc}") from None

    bg_max = [check_kbps(b, "background.max_kbps") for b in _as_list("", g("background.max_kbps"))]
    n_bg = len(bg_max)
    if n_bg == 0:
        raise ConfigError("background.max_kbps: at least one background class is required")
    xi = [_fraction("background.degradation", x) for x in _as_list("", g("background.degradation"))]
    if len(xi) == 1:
        xi = xi * n_bg
    share = [_fraction("background.share", x) for x in _as_list("", g("background.share"))]
    if len(share) == 1:
        share = share * n_bg
    if len(xi) != n_bg or len(share) != n_bg:
        raise ConfigError("background.*: one value per background class (or a single value)")
    try:
        backgrounds = tuple(BackgroundClassProfile(i, m, x) for i, (m, x) in enumerate(zip(bg_max, xi)))
    except ConfigError as exc:
        raise ConfigError(f"background.degradation: {exc}") from None

    capacity = check_kbps(g("capacity_kbps"), "capacity_kbps")
    try:
        config = SchemeConfig(
            scheme=PROPOSED,
            capacity_kbps=capacity,
            mbs_sessions=tuple((r, profile) for r in ranks),
            voice_kbps=check_kbps(g("voice_kbps"), "voice_kbps"),
            unicast_profile=unicast,
            background_classes=backgrounds,
        )
    except ConfigError as exc:
        raise ConfigError(f"capacity_kbps/mbs.*: {exc}") from None

    ratio = [_fraction("arrival.ratio", x) for x in _as_list("", g("arrival.ratio"))]
    if len(ratio) != 3:
        raise ConfigError("arrival.ratio: expected [voice, unicast, background]")
    if any(s < 0 for s in share) or sum(share) == 0:
        raise ConfigError("background.share: weights must be >= 0 with a positive sum")
    weights = ratio[:2] + [ratio[2] * s / sum(share) for s in share]
    bg_dur = [_float("duration.background_s", d) for d in _as_list("", g("duration.background_s"))]
    if len(bg_dur) == 1:
        bg_dur = bg_dur * n_bg
    if len(bg_dur) != n_bg:
        raise ConfigError("duration.background_s: one value per background class")
    durations = [_float("duration.voice_s", g("duration.voice_s")),
                 _float("duration.unicast_s", g("duration.unicast_s"))] + bg_dur

    lambdas = [_float("sweep.lambda", x) for x in _as_list("", g("sweep.lambda"))]
    schemes = [Scheme.parse(s) for s in _as_list("", g("sweep.schemes"))]
    for s in schemes:
        config.with_scheme(s)  # validates each reserve against the cell
    warmup = g("sim.warmup_s")
    sweep = SweepSpec(
        lambda_values=tuple(lambdas),
        schemes=tuple(schemes),
        replications=_int("sweep.replications", g("sweep.replications"), 1),
        seed=_int("sweep.seed", g("sweep.seed"), 0),
        horizon_s=_float("sim.horizon_s", g("sim.horizon_s")),
        warmup_s=None if warmup is None else _float("sim.warmup_s", warmup),
    )
    try:
        rates = TrafficRates(sweep.lambda_values[0], tuple(weights), tuple(durations),
                             _float("dwell_s", g("dwell_s")))
    except ConfigError as exc:
        raise ConfigError(f"arrival/duration: {exc}") from None
    if eff["sim.warmup_s"] is None:
        eff["sim.warmup_s"] = sweep.warmup_s
    return LoadedConfig(config, rates, sweep, eff, dict(settings))


def load_config(path) -> LoadedConfig:
    """Read a configuration file; unpacks as ``(config, rates, sweep)``."""
    text = Path(path).read_text()
    try:
        table = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_settings(_flatten(table))


def format_settings(settings: dict) -> list:
    """``key = value`` lines, sorted, for echoing into output headers."""
    def fmt(v):
        if isinstance(v, (list, tuple)):
            return "[" + ", ".join(fmt(x) for x in v) + "]"
        if isinstance(v, str):
            return f'"{v}"'
        if isinstance(v, Fraction):
            return f'"{v}"'
        return repr(v)
    return [f"{k} = {fmt(settings[k])}" for k in sorted(settings)]
