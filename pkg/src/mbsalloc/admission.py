"""Admission ladder, restoration on departure, and pool accounting.

These functions work on a :class:`~mbsalloc.model.CellState` in place and
return it, so a caller can chain them or keep its own reference. Callers
that need the previous state should ``copy.deepcopy`` it first.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .allocation import apply_plan, initial_sessions, plan_mbs_allocation
from .errors import NotFoundError
from .model import (CallState, CellState, ClassKind, Origin, Request,
                    SchemeConfig)


class Outcome(enum.Enum):
    ADMITTED = "admitted"
    BLOCKED = "blocked"
    DROPPED = "dropped"


@dataclass(frozen=True)
class Mutation:
    target_kind: str  # "mbs" or "call"
    target_id: int
    old_kbps: int
    new_kbps: int


@dataclass
class AdmissionDecision:
    outcome: Outcome
    call_id: Optional[int] = None
    initial_allocation: int = 0
    mutations: list = field(default_factory=list)

    @property
    def admitted(self) -> bool:
        return self.outcome is Outcome.ADMITTED


class Pools(NamedTuple):
    mbs: int
    non_mbs: int
    free: int
    idle_reserve: int = 0


def new_cell(config: SchemeConfig) -> CellState:
    return CellState(config=config, sessions=initial_sessions(config))


def snapshot_pools(state: CellState) -> Pools:
    """Split the capacity into MBS, non-MBS, free and idle reserve.

    The four parts always sum to the capacity. ``idle_reserve`` is non-zero
    only for a fixed reservation larger than the sessions can use.
    """
    c_b, c_nb = state.c_b, state.c_nb
    idle = state.mbs_pool - c_b
    return Pools(c_b, c_nb, state.config.capacity_kbps - c_b - c_nb - idle, idle)


def target_bandwidth(config: SchemeConfig, request: Request) -> int:
    if request.origin is Origin.HANDOVER and not config.scheme.is_fixed:
        return request.req_min
    return request.req_max


def _reject(request: Request) -> AdmissionDecision:
    if request.origin is Origin.HANDOVER:
        return AdmissionDecision(Outcome.DROPPED)
    return AdmissionDecision(Outcome.BLOCKED)


def _degradable_background(state: CellState, exclude):
    return [c for c in sorted(state.calls.values(), key=lambda c: c.call_id)
            if c.traffic_class.kind is ClassKind.BACKGROUND
            and c.call_id != exclude and c.allocated_kbps > c.min_kbps]


def _degradable_unicast(state: CellState, exclude):
    return [c for c in state.calls.values()
            if c.traffic_class.kind is ClassKind.UNICAST
            and c.call_id != exclude and c.allocated_kbps > c.min_kbps]


def admit(state: CellState, request: Request, *, now: Optional[float] = None,
          duration: float = float("inf"), dwell: float = float("inf"),
          end_time: Optional[float] = None, exclude: Optional[int] = None) -> tuple:
    """Try to admit ``request``; returns ``(state, AdmissionDecision)``.

    Under the adaptive scheme a call that does not fit the free bandwidth
    may reclaim, in order: MBS enhancement layers, background calls at
    their maximum (oldest first), and, for handovers only, unicast
    enhancement layers. New background calls never reclaim anything.
    ``exclude`` names a call that is leaving and must not be degraded.
    The admitted call ends at ``end_time``, or ``now + duration`` when not
    given. On rejection the state is untouched.
    """
    cfg = state.config
    proposed = not cfg.scheme.is_fixed
    handover = request.origin is Origin.HANDOVER
    target = target_bandwidth(cfg, request)
    mutations = []

    free = state.free
    if free < target:
        if not proposed:
            return state, _reject(request)
        kind = request.traffic_class.kind
        if not handover and kind is ClassKind.BACKGROUND:
            return state, _reject(request)

        bg_victims = _degradable_background(state, exclude)
        uni_victims = _degradable_unicast(state, exclude) if handover else []
        reclaimable = (state.c_b - cfg.c_min_b
                       + sum(c.allocated_kbps - c.min_kbps for c in bg_victims)
                       + sum(c.allocated_kbps - c.min_kbps for c in uni_victims))
        if free + reclaimable < target:
            return state, _reject(request)

        before = {s.session_id: s.bandwidth for s in state.sessions}
        c_nb = state.c_nb
        budget = max(cfg.capacity_kbps - c_nb - target, cfg.c_min_b)
        apply_plan(state.sessions, plan_mbs_allocation(state.sessions, budget))
        free = cfg.capacity_kbps - state.c_b - c_nb

        call_mutations = []
        for c in bg_victims:
            if free >= target:
                break
            call_mutations.append(Mutation("call", c.call_id, c.allocated_kbps, c.min_kbps))
            free += c.allocated_kbps - c.min_kbps
            c_nb -= c.allocated_kbps - c.min_kbps
            c.allocated_kbps = c.min_kbps

        prof = cfg.unicast_profile
        while free < target:
            victim = max(uni_victims, key=lambda c: (c.active_layers, -c.call_id))
            step = prof.enhanced_layer_kbps[victim.active_layers - 1]
            call_mutations.append(Mutation("call", victim.call_id, victim.allocated_kbps,
                                           victim.allocated_kbps - step))
            victim.active_layers -= 1
            victim.allocated_kbps -= step
            free += step
            c_nb -= step
            if victim.active_layers == prof.min_layers:
                uni_victims.remove(victim)

        if call_mutations:
            # hand back MBS layers that the call degradations made unnecessary
            apply_plan(state.sessions, plan_mbs_allocation(
                state.sessions, cfg.capacity_kbps - c_nb - target))
        mutations = [Mutation("mbs", s.session_id, before[s.session_id], s.bandwidth)
                     for s in state.sessions if s.bandwidth != before[s.session_id]]
        mutations += call_mutations

    lo, hi = cfg.class_range(request.traffic_class)
    layers = 0
    if request.traffic_class.kind is ClassKind.UNICAST:
        prof = cfg.unicast_profile
        layers = prof.min_layers if target == prof.min_kbps else prof.max_layers
    now = state.clock if now is None else now
    call = CallState(
        call_id=state.next_call_id,
        traffic_class=request.traffic_class,
        origin=request.origin,
        allocated_kbps=target,
        min_kbps=lo,
        max_kbps=hi,
        active_layers=layers,
        admit_time=now,
        end_time=now + duration if end_time is None else end_time,
        dwell_deadline=now + dwell,
    )
    state.calls[call.call_id] = call
    state.next_call_id += 1
    return state, AdmissionDecision(Outcome.ADMITTED, call.call_id, target, mutations)


def release(state: CellState, call_id: int) -> CellState:
    """Remove a call and hand its bandwidth back.

    Under the adaptive scheme freed bandwidth goes first to degraded unicast
    calls (fewest layers first, one layer at a time), then to degraded
    background calls (oldest first), and whatever is left to the MBS
    sessions via a fresh layer plan.
    """
    try:
        del state.calls[call_id]
    except KeyError:
        raise NotFoundError(call_id) from None
    cfg = state.config
    if cfg.scheme.is_fixed:
        return state

    free = state.free
    prof = cfg.unicast_profile
    degraded = [c for c in state.calls.values()
                if c.traffic_class.kind is ClassKind.UNICAST and c.allocated_kbps < c.max_kbps]
    while degraded:
        c = min(degraded, key=lambda c: (c.active_layers, c.call_id))
        step = prof.enhanced_layer_kbps[c.active_layers]
        if free < step:
            break
        c.active_layers += 1
        c.allocated_kbps += step
        free -= step
        if c.allocated_kbps == c.max_kbps:
            degraded.remove(c)

    for c in sorted(state.calls.values(), key=lambda c: c.call_id):
        if c.traffic_class.kind is ClassKind.BACKGROUND and c.allocated_kbps < c.max_kbps:
            gap = c.max_kbps - c.allocated_kbps
            if free >= gap:
                c.allocated_kbps = c.max_kbps
                free -= gap

    apply_plan(state.sessions, plan_mbs_allocation(
        state.sessions, cfg.capacity_kbps - state.c_nb))
    return state
