"""Analytic references for the non-adaptive special cases.

Erlang-B for one class, an exact CTMC solve for several classes sharing a
link, and a general finite-chain steady-state solver underneath.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg
from scipy.sparse.csgraph import connected_components

from .errors import CapacityError, ConfigError, NotIrreducible

MAX_STATES = 1_000_000
DENSE_LIMIT = 2_000


def erlang_b(servers: int, offered_load: float) -> float:
    """Blocking probability of an M/M/c/c system.

    Uses B(0) = 1, B(k) = a B(k-1) / (k + a B(k-1)).
    """
    if servers < 0 or offered_load < 0:
        raise ConfigError("servers and offered load must be non-negative")
    b = 1.0
    for k in range(1, int(servers) + 1):
        b = offered_load * b / (k + offered_load * b)
    return b


@dataclass
class CtmcSpec:
    """A finite continuous-time Markov chain.

    Give either ``rate(i, j)`` (called for every ordered pair, fine for
    small chains) or ``transitions(state)`` yielding ``(next_state, rate)``.
    """

    states: Sequence
    rate: Optional[Callable] = None
    transitions: Optional[Callable] = None

    def generator(self) -> sp.csr_matrix:
        n = len(self.states)
        index = {s: i for i, s in enumerate(self.states)}
        rows, cols, vals = [], [], []
        if self.transitions is not None:
            for i, s in enumerate(self.states):
                for t, r in self.transitions(s):
                    if r > 0 and t != s:
                        rows.append(i)
                        cols.append(index[t])
                        vals.append(float(r))
        elif self.rate is not None:
            for i, s in enumerate(self.states):
                for j, t in enumerate(self.states):
                    if i != j:
                        r = self.rate(s, t)
                        if r < 0:
                            raise ConfigError("negative transition rate")
                        if r > 0:
                            rows.append(i)
                            cols.append(j)
                            vals.append(float(r))
        else:
            raise ConfigError("CtmcSpec needs rate or transitions")
        q = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
        out = np.asarray(q.sum(axis=1)).ravel()
        return (q - sp.diags(out)).tocsr()


def steady_state(spec: CtmcSpec) -> np.ndarray:
    """Stationary distribution of an irreducible chain, by direct solve."""
    q = spec.generator()
    n = q.shape[0]
    if n == 0:
        raise NotIrreducible("empty chain")
    if n > 1:
        n_comp, _ = connected_components(q != 0, directed=True, connection="strong")
        if n_comp != 1:
            raise NotIrreducible(f"chain has {n_comp} strongly connected components")
    a = q.T.tolil()
    a[0, :] = np.ones(n)
    b = np.zeros(n)
    b[0] = 1.0
    if n <= DENSE_LIMIT:
        pi = scipy.linalg.solve(a.toarray(), b)
    else:
        pi = scipy.sparse.linalg.spsolve(a.tocsc(), b)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _count_states(capacity: int, demands: Sequence[int]) -> int:
    # ways[c] = number of occupancy vectors using exactly c units
    ways = np.zeros(capacity + 1, dtype=object)
    ways[0] = 1
    for d in demands:
        for c in range(d, capacity + 1):
            ways[c] += ways[c - d]
    return int(sum(ways))


def _enumerate(capacity: int, demands: Sequence[int]):
    if not demands:
        yield ()
        return
    d = demands[0]
    for n in range(capacity // d + 1):
        for rest in _enumerate(capacity - n * d, demands[1:]):
            yield (n,) + rest


def blocking_two_class(capacity: int, demands: Sequence[int], loads: Sequence[float]) -> np.ndarray:
    """Per-class blocking of a multi-rate loss link, from the full CTMC.

    ``demands`` are integer units per call, ``loads`` the offered Erlangs
    (arrival rate with unit mean holding time). Works for any number of
    classes despite the name.
    """
    demands = [int(d) for d in demands]
    loads = [float(a) for a in loads]
    if len(demands) != len(loads) or not demands:
        raise ConfigError("need one load per class demand")
    if capacity < 0 or any(d <= 0 for d in demands) or any(a < 0 for a in loads):
        raise ConfigError("capacity >= 0, demands > 0 and loads >= 0 required")
    if _count_states(capacity, demands) > MAX_STATES:
        raise CapacityError(f"more than {MAX_STATES} states")
    states = list(_enumerate(capacity, demands))
    used = {s: sum(n * d for n, d in zip(s, demands)) for s in states}

    def transitions(s):
        for k, (d, a) in enumerate(zip(demands, loads)):
            if used[s] + d <= capacity and a > 0:
                yield s[:k] + (s[k] + 1,) + s[k + 1:], a
            if s[k] > 0:
                yield s[:k] + (s[k] - 1,) + s[k + 1:], float(s[k])

    # classes with zero load never enter, so restrict to reachable states
    reachable = [s for s in states if all(n == 0 or a > 0 for n, a in zip(s, loads))]
    pi = steady_state(CtmcSpec(reachable, transitions=transitions))
    return np.array([
        sum(p for s, p in zip(reachable, pi) if used[s] + d > capacity)
        for d in demands])
