"""Traffic-condition test and fair MBS layer removal."""
from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import InfeasibleMbsFloor
from .model import MbsSessionState, SchemeConfig


class TrafficCondition(enum.Enum):
    LOW = "low"
    CONGESTED = "congested"


def classify(config: SchemeConfig, c_nb: int) -> TrafficCondition:
    """LOW when every MBS session fits at full quality beside ``c_nb``."""
    if config.capacity_kbps - c_nb >= config.c_max_b:
        return TrafficCondition.LOW
    return TrafficCondition.CONGESTED


@dataclass(frozen=True)
class MbsAllocationPlan:
    per_session_layers: dict      # session_id -> enhanced layers kept
    removed_full_rounds: int      # P: fewest layers removed from any session
    sessions_with_P_removed: int  # M1
    total_kbps: int

    def removed(self, sessions) -> dict:
        return {s.session_id: s.profile.max_layers - self.per_session_layers[s.session_id]
                for s in sessions}


def removal_order(sessions) -> list:
    """Least popular first; equal ranks fall back to the higher session id."""
    return sorted(sessions, key=lambda s: (-s.popularity_rank, -s.session_id))


def plan_mbs_allocation(sessions: list, available_for_mbs: int) -> MbsAllocationPlan:
    """Largest round-robin degradation of the sessions that fits the budget.

    Starting from full quality, one top layer at a time is removed from the
    least popular session that still has a removable layer in the current
    round. Removal stops as soon as the total fits ``available_for_mbs``.
    Bandwidth left below one layer is not assigned.
    """
    floor = sum(s.profile.min_kbps for s in sessions)
    if available_for_mbs < floor:
        raise InfeasibleMbsFloor(
            f"{available_for_mbs} kbps available, MBS floor is {floor} kbps")
    order = removal_order(sessions)
    layers = {s.session_id: s.profile.max_layers for s in sessions}
    total = sum(s.profile.max_kbps for s in sessions)
    while total > available_for_mbs:
        for s in order:
            n = layers[s.session_id]
            if n > s.profile.min_layers:
                layers[s.session_id] = n - 1
                total -= s.profile.enhanced_layer_kbps[n - 1]
                if total <= available_for_mbs:
                    break

    removed = [s.profile.max_layers - layers[s.session_id] for s in sessions]
    p = min(removed, default=0)
    return MbsAllocationPlan(
        per_session_layers=layers,
        removed_full_rounds=p,
        sessions_with_P_removed=sum(1 for r in removed if r == p),
        total_kbps=total,
    )


def apply_plan(sessions: list, plan: MbsAllocationPlan) -> list:
    """Set each session's layer count from ``plan``; return (id, old, new) kbps changes."""
    changes = []
    for s in sessions:
        new = plan.per_session_layers[s.session_id]
        if new != s.active_layers:
            old_kbps = s.bandwidth
            s.active_layers = new
            changes.append((s.session_id, old_kbps, s.bandwidth))
    return changes


def initial_sessions(config: SchemeConfig) -> list:
    """Session states for an empty cell.

    The adaptive scheme starts at full quality when it fits; a fixed scheme
    fits the sessions into its reserve once and never changes them.
    """
    sessions = [MbsSessionState(m + 1, rank, prof, prof.max_layers)
                for m, (rank, prof) in enumerate(config.mbs_sessions)]
    budget = config.capacity_kbps
    if config.scheme.is_fixed:
        budget = config.scheme.reserved_kbps
    apply_plan(sessions, plan_mbs_allocation(sessions, budget))
    return sessions
