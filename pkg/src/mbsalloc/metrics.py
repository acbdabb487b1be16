"""Run counters, derived probabilities and replication statistics."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .errors import ConfigError

COUNTER_NAMES = ("offered_new", "admitted_new", "blocked_new", "offered_handover",
                 "admitted_handover", "dropped_handover", "completed", "forced_terminated")


@dataclass(frozen=True)
class MetricsRecord:
    """Counters of one replication, measured after the warm-up period.

    ``counts`` holds one tuple per entry of :data:`COUNTER_NAMES`, each
    indexed by class code. Bandwidth integrals are in kbps*s.
    """

    class_labels: tuple
    counts: tuple
    mbs_kbps_s: float
    non_mbs_kbps_s: float
    capacity_kbps: int
    horizon_s: float
    warmup_s: float
    seed: int
    fingerprint: str
    events: int = 0

    def counter(self, name: str) -> tuple:
        return self.counts[COUNTER_NAMES.index(name)]

    def total(self, name: str) -> int:
        return sum(self.counter(name))

    @property
    def measured_s(self) -> float:
        return self.horizon_s - self.warmup_s

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass(frozen=True)
class DerivedMetrics:
    p_block: dict         # class label -> new-call blocking probability
    p_drop_by_class: dict  # class label -> handover dropping probability
    p_drop: float
    p_forced: float
    p_forced_alt: float
    utilization: float

    def flat(self) -> dict:
        out = {f"P_block_{k}": v for k, v in self.p_block.items()}
        out.update({f"P_drop_{k}": v for k, v in self.p_drop_by_class.items()})
        out.update(P_drop=self.p_drop, P_forced=self.p_forced,
                   P_forced_alt=self.p_forced_alt, utilization=self.utilization)
        return out


def _ratio(num, den) -> float:
    return num / den if den else 0.0


def derive(record: MetricsRecord) -> DerivedMetrics:
    """Blocking, dropping, forced-termination and utilization figures.

    A dropped handover ends its call, so each call is forced-terminated at
    most once; ``p_forced`` divides those drops by admitted new calls.
    ``p_forced_alt`` counts blocked new calls as failures too.
    """
    labels = record.class_labels
    off_new, blk = record.counter("offered_new"), record.counter("blocked_new")
    off_ho, drp = record.counter("offered_handover"), record.counter("dropped_handover")
    dropped = sum(drp)
    duration = record.measured_s
    util = 0.0
    if duration > 0 and record.capacity_kbps > 0:
        util = (record.mbs_kbps_s + record.non_mbs_kbps_s) / (record.capacity_kbps * duration)
    return DerivedMetrics(
        p_block={lab: _ratio(b, o) for lab, b, o in zip(labels, blk, off_new)},
        p_drop_by_class={lab: _ratio(d, o) for lab, d, o in zip(labels, drp, off_ho)},
        p_drop=_ratio(dropped, sum(off_ho)),
        p_forced=_ratio(sum(record.counter("forced_terminated")),
                        record.total("admitted_new")),
        p_forced_alt=_ratio(sum(blk) + dropped, sum(off_new)),
        utilization=util,
    )


@dataclass(frozen=True)
class Summary:
    n: int
    mean: dict
    half_width: dict  # None where n < 2

    def ci(self, name: str) -> tuple:
        hw = self.half_width[name]
        m = self.mean[name]
        if hw is None:
            return (math.nan, math.nan)
        return (m - hw, m + hw)


def aggregate(records: list, confidence: float = 0.95) -> Summary:
    """Mean and Student-t confidence half-width of every derived metric."""
    if not records:
        raise ConfigError("cannot aggregate an empty list of records")
    prints = {r.fingerprint for r in records}
    if len(prints) != 1:
        raise ConfigError(f"records come from different configurations: {sorted(prints)}")
    rows = [derive(r).flat() for r in records]
    n = len(rows)
    mean, hw = {}, {}
    tq = stats.t.ppf(0.5 + confidence / 2, n - 1) if n > 1 else None
    for key in rows[0]:
        vals = np.array([row[key] for row in rows], dtype=float)
        mean[key] = float(vals.mean())
        hw[key] = float(tq * vals.std(ddof=1) / math.sqrt(n)) if n > 1 else None
    return Summary(n, mean, hw)
