"""Arrival, holding-time and dwell-time generation.

Handover uses a wrap-around model: when a call's dwell time in the cell
ends before the call does, the same call is offered back to the cell as a
handover request carrying its remaining duration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import ConfigError
from .model import CallState, Origin, Request, SchemeConfig, TrafficClass

DEFAULT_DURATIONS_S = (120.0, 300.0, 180.0)  # voice, unicast, background
DEFAULT_DWELL_S = 540.0


@dataclass(frozen=True)
class TrafficRates:
    """Offered traffic.

    ``class_weights`` and ``mean_duration_s`` are indexed by class code
    (voice, unicast, background 0, background 1, ...).
    """

    total_new_rate: float
    class_weights: tuple = (Fraction(5), Fraction(1), Fraction(4))
    mean_duration_s: tuple = DEFAULT_DURATIONS_S
    mean_dwell_s: float = DEFAULT_DWELL_S

    def __post_init__(self):
        if not self.total_new_rate >= 0 or math.isinf(self.total_new_rate):
            raise ConfigError(f"arrival rate must be finite and >= 0, got {self.total_new_rate}")
        weights = tuple(Fraction(w) for w in self.class_weights)
        object.__setattr__(self, "class_weights", weights)
        object.__setattr__(self, "mean_duration_s", tuple(float(d) for d in self.mean_duration_s))
        if any(w < 0 for w in weights) or sum(weights) == 0:
            raise ConfigError(f"class weights must be >= 0 with a positive sum: {weights}")
        if len(self.mean_duration_s) != len(weights):
            raise ConfigError("one mean duration per class weight is required")
        if any(not d > 0 for d in self.mean_duration_s):
            raise ConfigError("mean durations must be positive")
        if not self.mean_dwell_s > 0:
            raise ConfigError("mean dwell time must be positive")

    @property
    def n_classes(self) -> int:
        return len(self.class_weights)

    def probabilities(self) -> np.ndarray:
        total = sum(self.class_weights)
        return np.array([float(w / total) for w in self.class_weights])

    def with_rate(self, rate: float) -> "TrafficRates":
        from dataclasses import replace
        return replace(self, total_new_rate=rate)

    def offered_kbps(self, config: SchemeConfig) -> float:
        """Mean non-MBS bandwidth demand at full quality."""
        p = self.probabilities()
        return self.total_new_rate * sum(
            p[k] * config.class_range(TrafficClass.from_code(k))[1] * self.mean_duration_s[k]
            for k in range(self.n_classes))


def next_interarrival(rng: np.random.Generator, rate: float) -> float:
    if not rate > 0:
        raise ConfigError(f"arrival rate must be positive, got {rate}")
    return float(rng.exponential(1.0 / rate))


def pick_class(rng: np.random.Generator, weights) -> TrafficClass:
    w = np.array([float(Fraction(x)) for x in weights])
    if w.size == 0 or np.any(w < 0) or w.sum() <= 0:
        raise ConfigError(f"invalid class weights {tuple(weights)}")
    return TrafficClass.from_code(int(rng.choice(w.size, p=w / w.sum())))


def lifecycle_samples(rng: np.random.Generator, traffic_class: TrafficClass,
                      rates: TrafficRates) -> tuple:
    """(call duration, cell dwell time), independent exponentials."""
    duration = rng.exponential(rates.mean_duration_s[traffic_class.code])
    dwell = rng.exponential(rates.mean_dwell_s)
    return float(duration), float(dwell)


def handover_reoffer(call: CallState, config: SchemeConfig,
                     now: Optional[float] = None) -> Optional[Request]:
    """Handover request for a call whose dwell time ran out, else None.

    A call ending exactly at its dwell deadline completes instead.
    """
    if call.end_time <= call.dwell_deadline:
        return None
    now = call.dwell_deadline if now is None else now
    carried = CallState(**{**call.__dict__, "admit_time": now})
    return Request.for_class(config, call.traffic_class, Origin.HANDOVER, carried)


@dataclass
class TrafficTrace:
    """All random inputs of one replication.

    Arrivals, their classes and total call durations are drawn up front.
    Dwell times are consumed in admission order from ``dwell_pool``, which
    grows on demand from its own stream so a longer pool always extends the
    same sequence.
    """

    arrival_times: np.ndarray
    classes: np.ndarray
    durations: np.ndarray
    dwell_pool: np.ndarray
    mean_dwell_s: float
    _dwell_rng: np.random.Generator

    def extend_dwell_pool(self, extra: int) -> None:
        more = _exponentials(self._dwell_rng, self.mean_dwell_s, extra)
        self.dwell_pool = np.concatenate([self.dwell_pool, more])


def _exponentials(rng, mean, size):
    draws = rng.standard_exponential(size)
    if math.isinf(mean):
        return np.full(size, np.inf)
    return draws * mean


def generate_trace(rates: TrafficRates, horizon_s: float, seed: int) -> TrafficTrace:
    """Draw the arrival stream on ``[0, horizon_s]`` for one seed."""
    arr_rng, cls_rng, dur_rng, dwell_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4))
    rate = rates.total_new_rate
    if rate > 0:
        expected = rate * horizon_s
        chunk = int(expected + 10.0 * math.sqrt(expected) + 16)
        parts, t_end = [], 0.0
        while t_end <= horizon_s:
            times = t_end + np.cumsum(arr_rng.exponential(1.0 / rate, chunk))
            parts.append(times)
            t_end = times[-1]
        times = np.concatenate(parts)
        times = times[times <= horizon_s]
    else:
        times = np.empty(0)
    n = times.size
    classes = cls_rng.choice(rates.n_classes, size=n, p=rates.probabilities()).astype(np.int64)
    means = np.asarray(rates.mean_duration_s)
    durations = dur_rng.exponential(1.0, n) * means[classes]

    ratio = max(rates.mean_duration_s) / rates.mean_dwell_s
    pool_size = int(n * (1.5 + 2.0 * ratio)) + 1024
    pool = _exponentials(dwell_rng, rates.mean_dwell_s, pool_size)
    return TrafficTrace(times, classes, durations, pool, rates.mean_dwell_s, dwell_rng)
