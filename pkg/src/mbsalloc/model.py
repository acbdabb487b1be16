"""Domain types shared by every module.

All bandwidth values are integer kbps; nothing in the package stores a
fractional kbps.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .errors import ConfigError, LayerRangeError

Bandwidth = int  # kbps

VOICE_CODE = 0
UNICAST_CODE = 1
BACKGROUND_CODE0 = 2  # background class i has code 2 + i


def check_kbps(value, name: str) -> int:
    """Return ``value`` as a non-negative int or raise ConfigError."""
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected integer kbps, got {value!r}")
    if isinstance(value, float):
        if not value.is_integer():
            raise ConfigError(f"{name}: non-integral kbps value {value!r}")
        value = int(value)
    if not isinstance(value, int):
        raise ConfigError(f"{name}: expected integer kbps, got {value!r}")
    if value < 0:
        raise ConfigError(f"{name}: negative bandwidth {value}")
    return value


class ClassKind(enum.Enum):
    VOICE = "voice"
    UNICAST = "unicast"
    BACKGROUND = "background"


@dataclass(frozen=True)
class TrafficClass:
    kind: ClassKind
    index: int = 0

    @property
    def code(self) -> int:
        if self.kind is ClassKind.VOICE:
            return VOICE_CODE
        if self.kind is ClassKind.UNICAST:
            return UNICAST_CODE
        return BACKGROUND_CODE0 + self.index

    @classmethod
    def from_code(cls, code: int) -> "TrafficClass":
        if code == VOICE_CODE:
            return VOICE
        if code == UNICAST_CODE:
            return UNICAST
        if code < 0:
            raise ValueError(f"bad class code {code}")
        return cls(ClassKind.BACKGROUND, code - BACKGROUND_CODE0)

    @property
    def label(self) -> str:
        if self.kind is ClassKind.BACKGROUND:
            return f"background{self.index}"
        return self.kind.value

    def __str__(self) -> str:
        return self.label


VOICE = TrafficClass(ClassKind.VOICE)
UNICAST = TrafficClass(ClassKind.UNICAST)


def background(index: int = 0) -> TrafficClass:
    return TrafficClass(ClassKind.BACKGROUND, index)


class Origin(enum.Enum):
    NEW = "new"
    HANDOVER = "handover"


@dataclass(frozen=True)
class LayerProfile:
    """Base layer plus an ordered ladder of enhanced layers."""

    base_kbps: int
    enhanced_layer_kbps: tuple = ()
    min_layers: int = 0

    def __post_init__(self):
        check_kbps(self.base_kbps, "base_kbps")
        object.__setattr__(self, "enhanced_layer_kbps",
                           tuple(check_kbps(b, "enhanced_layer_kbps")
                                 for b in self.enhanced_layer_kbps))
        if self.base_kbps <= 0:
            raise ConfigError("base_kbps must be positive")
        if any(b <= 0 for b in self.enhanced_layer_kbps):
            raise ConfigError("every enhanced layer must be positive")
        if not 0 <= self.min_layers <= self.max_layers:
            raise ConfigError(
                f"min_layers={self.min_layers} outside [0, {self.max_layers}]")

    @property
    def max_layers(self) -> int:
        return len(self.enhanced_layer_kbps)

    @property
    def min_kbps(self) -> int:
        return self.bandwidth(self.min_layers)

    @property
    def max_kbps(self) -> int:
        return self.bandwidth(self.max_layers)

    def bandwidth(self, layers: int) -> int:
        if not self.min_layers <= layers <= self.max_layers:
            raise LayerRangeError(
                f"{layers} layers outside [{self.min_layers}, {self.max_layers}]")
        return self.base_kbps + sum(self.enhanced_layer_kbps[:layers])


def session_bandwidth(profile: LayerProfile, layers: int) -> int:
    """Bandwidth of an MBS session carrying ``layers`` enhanced layers."""
    return profile.bandwidth(layers)


def unicast_bandwidth(profile: LayerProfile, k: int) -> int:
    """Bandwidth of a unicast video call carrying ``k`` enhanced layers."""
    return profile.bandwidth(k)


@dataclass(frozen=True)
class BackgroundClassProfile:
    class_index: int
    max_kbps: int
    degradation_fraction: Fraction = Fraction(1, 2)

    def __post_init__(self):
        check_kbps(self.max_kbps, "background max_kbps")
        frac = Fraction(self.degradation_fraction)
        if not 0 <= frac <= 1:
            raise ConfigError(f"degradation fraction {frac} outside [0, 1]")
        object.__setattr__(self, "degradation_fraction", frac)
        background_min(self)  # exact division check

    @property
    def min_kbps(self) -> int:
        return background_min(self)


def background_min(profile: BackgroundClassProfile) -> int:
    """Minimum allocation ``(1 - xi) * max`` of a background class."""
    frac = Fraction(profile.degradation_fraction)
    if not 0 <= frac <= 1:
        raise ConfigError(f"degradation fraction {frac} outside [0, 1]")
    value = (1 - frac) * profile.max_kbps
    if value.denominator != 1:
        raise ConfigError(
            f"background class {profile.class_index}: (1 - {frac}) * "
            f"{profile.max_kbps} kbps is not an integer")
    return int(value)


@dataclass(frozen=True)
class Scheme:
    """Either the adaptive scheme or a fixed MBS reservation."""

    reserved_kbps: Optional[int] = None

    @property
    def is_fixed(self) -> bool:
        return self.reserved_kbps is not None

    @property
    def name(self) -> str:
        return "proposed" if self.reserved_kbps is None else f"fixed:{self.reserved_kbps}"

    def __str__(self) -> str:
        return self.name

    @classmethod
    def parse(cls, text: str) -> "Scheme":
        text = str(text).strip().lower()
        if text in ("proposed", "adaptive"):
            return PROPOSED
        if text.startswith("fixed:"):
            try:
                kbps = int(text.split(":", 1)[1])
            except ValueError:
                raise ConfigError(f"bad scheme {text!r}") from None
            return cls(check_kbps(kbps, "scheme reserve"))
        raise ConfigError(f"unknown scheme {text!r} (use 'proposed' or 'fixed:KBPS')")


PROPOSED = Scheme()


def fixed_mbs(reserved_kbps: int) -> Scheme:
    return Scheme(check_kbps(reserved_kbps, "reserved_kbps"))


@dataclass(frozen=True)
class SchemeConfig:
    """Cell capacity, MBS sessions, per-class bandwidth profiles and scheme.

    ``mbs_sessions`` is a tuple of ``(popularity_rank, LayerProfile)``; the
    session id is the 1-based position in that tuple.
    """

    scheme: Scheme = PROPOSED
    capacity_kbps: int = 20_000
    mbs_sessions: tuple = ()
    voice_kbps: int = 64
    unicast_profile: LayerProfile = LayerProfile(300, (100, 100))
    background_classes: tuple = (BackgroundClassProfile(0, 120, Fraction(1, 2)),)

    def __post_init__(self):
        check_kbps(self.capacity_kbps, "capacity_kbps")
        check_kbps(self.voice_kbps, "voice_kbps")
        if self.voice_kbps <= 0:
            raise ConfigError("voice_kbps must be positive")
        object.__setattr__(self, "mbs_sessions", tuple(
            (int(rank), prof) for rank, prof in self.mbs_sessions))
        object.__setattr__(self, "background_classes", tuple(self.background_classes))
        for i, bg in enumerate(self.background_classes):
            if bg.class_index != i:
                raise ConfigError("background class indices must be 0..n-1 in order")
            if bg.min_kbps <= 0:
                raise ConfigError(f"background class {i}: minimum must be positive")
        if self.c_min_b > self.capacity_kbps:
            raise ConfigError(
                f"MBS floor {self.c_min_b} kbps exceeds capacity {self.capacity_kbps} kbps")
        if self.scheme.is_fixed:
            r = self.scheme.reserved_kbps
            if r < self.c_min_b:
                raise ConfigError(f"fixed reserve {r} kbps below MBS floor {self.c_min_b} kbps")
            if r > self.capacity_kbps:
                raise ConfigError(f"fixed reserve {r} kbps exceeds capacity")

    @property
    def n_sessions(self) -> int:
        return len(self.mbs_sessions)

    @property
    def c_max_b(self) -> int:
        return sum(p.max_kbps for _, p in self.mbs_sessions)

    @property
    def c_min_b(self) -> int:
        return sum(p.min_kbps for _, p in self.mbs_sessions)

    @property
    def c_min_nb(self) -> int:
        return self.capacity_kbps - self.c_max_b

    @property
    def c_max_nb(self) -> int:
        return self.capacity_kbps - self.c_min_b

    @property
    def n_classes(self) -> int:
        return BACKGROUND_CODE0 + len(self.background_classes)

    def classes(self) -> list:
        return [TrafficClass.from_code(c) for c in range(self.n_classes)]

    def class_range(self, cls: TrafficClass) -> tuple:
        """(min_kbps, max_kbps) of a call of class ``cls``."""
        if cls.kind is ClassKind.VOICE:
            return self.voice_kbps, self.voice_kbps
        if cls.kind is ClassKind.UNICAST:
            return self.unicast_profile.min_kbps, self.unicast_profile.max_kbps
        if not 0 <= cls.index < len(self.background_classes):
            raise ConfigError(f"no background class {cls.index}")
        bg = self.background_classes[cls.index]
        return bg.min_kbps, bg.max_kbps

    def with_scheme(self, scheme: Scheme) -> "SchemeConfig":
        from dataclasses import replace
        return replace(self, scheme=scheme)


def default_mbs_profile() -> LayerProfile:
    return LayerProfile(500, (125, 125, 125, 125), 0)


def reference_config(scheme: Scheme = PROPOSED, n_sessions: int = 12) -> SchemeConfig:
    """Default cell: 20 Mbps, 12 MBS sessions of 0.5 to 1 Mbps, 64 kbps voice,
    0.3 to 0.5 Mbps unicast, 60 to 120 kbps background."""
    prof = default_mbs_profile()
    return SchemeConfig(
        scheme=scheme,
        capacity_kbps=20_000,
        mbs_sessions=tuple((m + 1, prof) for m in range(n_sessions)),
        voice_kbps=64,
        unicast_profile=LayerProfile(300, (100, 100), 0),
        background_classes=(BackgroundClassProfile(0, 120, Fraction(1, 2)),),
    )


@dataclass
class MbsSessionState:
    session_id: int
    popularity_rank: int
    profile: LayerProfile
    active_layers: int

    @property
    def bandwidth(self) -> int:
        return self.profile.bandwidth(self.active_layers)


@dataclass
class CallState:
    call_id: int
    traffic_class: TrafficClass
    origin: Origin
    allocated_kbps: int
    min_kbps: int
    max_kbps: int
    active_layers: int = 0
    admit_time: float = 0.0
    end_time: float = float("inf")
    dwell_deadline: float = float("inf")

    @property
    def residual_duration(self) -> float:
        """Remaining holding time as of admission."""
        return self.end_time - self.admit_time


@dataclass(frozen=True)
class Request:
    traffic_class: TrafficClass
    origin: Origin
    req_max: int
    req_min: int
    carried_state: Optional[CallState] = None

    def __post_init__(self):
        if self.req_min > self.req_max:
            raise ConfigError("req_min exceeds req_max")

    @classmethod
    def for_class(cls, config: SchemeConfig, traffic_class: TrafficClass,
                  origin: Origin = Origin.NEW, carried_state=None) -> "Request":
        lo, hi = config.class_range(traffic_class)
        return cls(traffic_class, origin, hi, lo, carried_state)


@dataclass
class CellState:
    config: SchemeConfig
    sessions: list
    calls: dict = field(default_factory=dict)
    clock: float = 0.0
    next_call_id: int = 1

    @property
    def c_b(self) -> int:
        return sum(s.bandwidth for s in self.sessions)

    @property
    def c_nb(self) -> int:
        return sum(c.allocated_kbps for c in self.calls.values())

    @property
    def mbs_pool(self) -> int:
        """Bandwidth held for MBS: the reserve under a fixed scheme."""
        if self.config.scheme.is_fixed:
            return self.config.scheme.reserved_kbps
        return self.c_b

    @property
    def free(self) -> int:
        return self.config.capacity_kbps - self.mbs_pool - self.c_nb

    def check_invariants(self) -> None:
        cfg = self.config
        c_b, c_nb = self.c_b, self.c_nb
        assert c_b + c_nb <= cfg.capacity_kbps, "conservation violated"
        assert self.free >= 0, "negative free bandwidth"
        assert c_b >= cfg.c_min_b, "MBS floor violated"
        for s in self.sessions:
            assert s.profile.min_layers <= s.active_layers <= s.profile.max_layers
        for c in self.calls.values():
            assert c.min_kbps <= c.allocated_kbps <= c.max_kbps, f"call {c.call_id} out of range"
            if c.traffic_class.kind is ClassKind.VOICE:
                assert c.allocated_kbps == c.min_kbps == c.max_kbps
            elif c.traffic_class.kind is ClassKind.UNICAST:
                assert c.allocated_kbps == cfg.unicast_profile.bandwidth(c.active_layers)
            else:
                assert c.allocated_kbps in (c.min_kbps, c.max_kbps)
