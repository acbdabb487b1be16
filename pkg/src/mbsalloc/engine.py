"""Discrete-event simulation of one cell.

:func:`run` drives the array kernels in :mod:`mbsalloc.kernels`.
:func:`run_reference` replays the same random trace through the
object-level :func:`~mbsalloc.admission.admit` / :func:`~mbsalloc.admission.release`
API; it is slow and exists to cross-check the kernels.
"""
from __future__ import annotations

import hashlib
import heapq
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .admission import admit, new_cell, release
from .allocation import removal_order
from .errors import ConfigError
from .metrics import COUNTER_NAMES, MetricsRecord
from .model import ClassKind, Origin, Request, SchemeConfig, TrafficClass
from .traffic import TrafficRates, TrafficTrace, generate_trace

DEFAULT_HORIZON_S = 2.0e5


@dataclass(frozen=True)
class RunSpec:
    config: SchemeConfig
    rates: TrafficRates
    horizon_s: float = DEFAULT_HORIZON_S
    warmup_s: Optional[float] = None  # defaults to 10% of the horizon
    seed: int = 1

    def __post_init__(self):
        if not (self.horizon_s > 0 and math.isfinite(self.horizon_s)):
            raise ConfigError(f"horizon must be positive and finite, got {self.horizon_s}")
        if self.warmup_s is None:
            object.__setattr__(self, "warmup_s", 0.1 * self.horizon_s)
        if not 0 <= self.warmup_s < self.horizon_s:
            raise ConfigError("warm-up must lie in [0, horizon)")
        if self.rates.n_classes != self.config.n_classes:
            raise ConfigError(
                f"{self.rates.n_classes} traffic weights for {self.config.n_classes} classes")

    def with_seed(self, seed: int) -> "RunSpec":
        from dataclasses import replace
        return replace(self, seed=int(seed))

    def fingerprint(self) -> str:
        key = repr((self.config, self.rates, float(self.horizon_s), float(self.warmup_s)))
        return hashlib.sha256(key.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class KernelInputs:
    cfg_i: np.ndarray
    cls_kind: np.ndarray
    cls_min: np.ndarray
    cls_max: np.ndarray
    uni_cum: np.ndarray
    s_base: np.ndarray
    s_layers: np.ndarray
    s_min: np.ndarray
    s_max: np.ndarray
    s_order: np.ndarray
    max_calls: int


def kernel_inputs(config: SchemeConfig) -> KernelInputs:
    """Flatten a configuration into the arrays the kernels take."""
    classes = config.classes()
    kind_code = {ClassKind.VOICE: kernels.KIND_VOICE, ClassKind.UNICAST: kernels.KIND_UNI,
                 ClassKind.BACKGROUND: kernels.KIND_BG}
    ranges = [config.class_range(c) for c in classes]
    uni = config.unicast_profile
    uni_cum = uni.base_kbps + np.concatenate([[0], np.cumsum(uni.enhanced_layer_kbps)])

    profiles = [p for _, p in config.mbs_sessions]
    n_layers = max((p.max_layers for p in profiles), default=0)
    s_layers = np.zeros((len(profiles), n_layers), dtype=np.int64)
    for m, p in enumerate(profiles):
        s_layers[m, :p.max_layers] = p.enhanced_layer_kbps

    from .allocation import initial_sessions
    order = [s.session_id - 1 for s in removal_order(initial_sessions(config))]

    cfg_i = np.zeros(kernels.N_CFG, dtype=np.int64)
    cfg_i[kernels.CAP] = config.capacity_kbps
    cfg_i[kernels.FIXED] = int(config.scheme.is_fixed)
    cfg_i[kernels.RESERVE] = config.scheme.reserved_kbps or 0
    cfg_i[kernels.CMINB] = config.c_min_b
    cfg_i[kernels.UMIN] = uni.min_layers
    cfg_i[kernels.UMAX] = uni.max_layers
    smallest = min(lo for lo, _ in ranges)
    return KernelInputs(
        cfg_i=cfg_i,
        cls_kind=np.array([kind_code[c.kind] for c in classes], dtype=np.int64),
        cls_min=np.array([lo for lo, _ in ranges], dtype=np.int64),
        cls_max=np.array([hi for _, hi in ranges], dtype=np.int64),
        uni_cum=uni_cum.astype(np.int64),
        s_base=np.array([p.base_kbps for p in profiles], dtype=np.int64),
        s_layers=s_layers,
        s_min=np.array([p.min_layers for p in profiles], dtype=np.int64),
        s_max=np.array([p.max_layers for p in profiles], dtype=np.int64),
        s_order=np.array(order, dtype=np.int64),
        max_calls=config.capacity_kbps // smallest + 2,
    )


def _record(spec: RunSpec, config: SchemeConfig, counts, integ, events) -> MetricsRecord:
    return MetricsRecord(
        class_labels=tuple(c.label for c in config.classes()),
        counts=tuple(tuple(int(x) for x in row) for row in counts),
        mbs_kbps_s=float(integ[0]),
        non_mbs_kbps_s=float(integ[1]),
        capacity_kbps=config.capacity_kbps,
        horizon_s=float(spec.horizon_s),
        warmup_s=float(spec.warmup_s),
        seed=int(spec.seed),
        fingerprint=spec.fingerprint(),
        events=int(events),
    )


def run(spec: RunSpec, check: bool = False, trace: Optional[TrafficTrace] = None) -> MetricsRecord:
    """Simulate ``[0, horizon]`` and count events after the warm-up.

    ``check=True`` verifies every cell invariant after every event and
    raises AssertionError on the first violation.
    """
    trace = trace or generate_trace(spec.rates, spec.horizon_s, spec.seed)
    ki = kernel_inputs(spec.config)
    n_classes = spec.config.n_classes
    while True:
        counts = np.zeros((kernels.N_COUNTERS, n_classes), dtype=np.int64)
        integ = np.zeros(2)
        status, events, _ = kernels.simulate(
            ki.cfg_i, ki.cls_kind, ki.cls_min, ki.cls_max, ki.uni_cum,
            ki.s_base, ki.s_layers, ki.s_min, ki.s_max, ki.s_order,
            trace.arrival_times, trace.classes, trace.durations, trace.dwell_pool,
            float(spec.warmup_s), float(spec.horizon_s), bool(check), ki.max_calls,
            counts, integ)
        if status == kernels.STATUS_OK:
            return _record(spec, spec.config, counts, integ, events)
        trace.extend_dwell_pool(trace.dwell_pool.size)


def run_reference(spec: RunSpec, check: bool = False,
                  trace: Optional[TrafficTrace] = None) -> MetricsRecord:
    """Same simulation through the object-level admission API."""
    trace = trace or generate_trace(spec.rates, spec.horizon_s, spec.seed)
    cfg = spec.config
    cell = new_cell(cfg)
    counts = np.zeros((len(COUNTER_NAMES), cfg.n_classes), dtype=np.int64)
    row = {name: i for i, name in enumerate(COUNTER_NAMES)}
    integ = [0.0, 0.0]
    warmup, horizon = float(spec.warmup_s), float(spec.horizon_s)
    classes = [TrafficClass.from_code(k) for k in range(cfg.n_classes)]
    dwell_used = 0

    def next_dwell():
        nonlocal dwell_used
        if dwell_used >= trace.dwell_pool.size:
            trace.extend_dwell_pool(trace.dwell_pool.size)
        return float(trace.dwell_pool[dwell_used])

    heap, seq = [], 0
    if trace.arrival_times.size:
        heap.append((float(trace.arrival_times[0]), 0, -1))
        seq = 1
    last_t, events = 0.0, 0
    c_b, c_nb = cell.c_b, cell.c_nb
    while heap:
        t, _, ref = heapq.heappop(heap)
        if t > horizon:
            break
        if t > warmup:
            dt = t - max(last_t, warmup)
            integ[0] += c_b * dt
            integ[1] += c_nb * dt
        last_t = t
        measuring = t >= warmup
        events += 1
        cell.clock = t
        if ref < 0:
            idx = -1 - ref
            if idx + 1 < trace.arrival_times.size:
                heapq.heappush(heap, (float(trace.arrival_times[idx + 1]), seq, -2 - idx))
                seq += 1
            k = int(trace.classes[idx])
            req = Request.for_class(cfg, classes[k], Origin.NEW)
            dwell = next_dwell()
            _, decision = admit(cell, req, now=t, duration=float(trace.durations[idx]), dwell=dwell)
            if measuring:
                counts[row["offered_new"], k] += 1
            if decision.admitted:
                dwell_used += 1
                call = cell.calls[decision.call_id]
                heapq.heappush(heap, (min(call.end_time, call.dwell_deadline), seq, call.call_id))
                seq += 1
            if measuring:
                counts[row["admitted_new" if decision.admitted else "blocked_new"], k] += 1
        else:
            call = cell.calls[ref]
            k = call.traffic_class.code
            if call.end_time <= call.dwell_deadline:
                if measuring:
                    counts[row["completed"], k] += 1
            else:
                req = Request.for_class(cfg, call.traffic_class, Origin.HANDOVER, call)
                dwell = next_dwell()
                _, decision = admit(cell, req, now=t, end_time=call.end_time,
                                    dwell=dwell, exclude=call.call_id)
                if measuring:
                    counts[row["offered_handover"], k] += 1
                if decision.admitted:
                    dwell_used += 1
                    new = cell.calls[decision.call_id]
                    heapq.heappush(heap, (min(new.end_time, new.dwell_deadline), seq, new.call_id))
                    seq += 1
                    if measuring:
                        counts[row["admitted_handover"], k] += 1
                elif measuring:
                    counts[row["dropped_handover"], k] += 1
                    counts[row["forced_terminated"], k] += 1
            release(cell, ref)
        c_b, c_nb = cell.c_b, cell.c_nb
        if check:
            cell.check_invariants()
    if horizon > warmup:
        dt = horizon - max(last_t, warmup)
        integ[0] += c_b * dt
        integ[1] += c_nb * dt
    return _record(spec, cfg, counts, integ, events)


def replicate(spec: RunSpec, n: int, seeds, workers: Optional[int] = None,
              check: bool = False) -> list:
    """Run one replication per seed; results follow the order of ``seeds``."""
    seeds = [int(s) for s in seeds]
    if len(seeds) != n:
        raise ConfigError(f"expected {n} seeds, got {len(seeds)}")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("replication seeds must be distinct")
    specs = [spec.with_seed(s) for s in seeds]
    workers = workers or min(len(specs), os.cpu_count() or 1)
    if workers <= 1 or len(specs) <= 1:
        return [run(s, check=check) for s in specs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: run(s, check=check), specs))
