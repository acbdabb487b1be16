"""Exhaustive fair-plan search, kept independent of the greedy planner."""
import itertools


def _order_key(rank, sid):
    # removal priority: larger rank first, then larger id
    return (-rank, -sid)


def is_fair(removed, removable, ranks):
    """Round-robin fairness of a removal vector.

    Sessions that can still lose layers differ by at most one removal,
    exhausted sessions lost no more than the least-degraded open session
    plus one, an open session earlier in the removal order never lost fewer
    layers than an open session later in it, and a session later in the
    order never lost more than an open session earlier in it.
    """
    n = len(removed)
    open_ = [i for i in range(n) if removed[i] < removable[i]]
    if open_:
        lo = min(removed[i] for i in open_)
        if max(removed[i] for i in open_) - lo > 1:
            return False
        if any(removed[i] > lo + 1 for i in range(n) if i not in open_):
            return False
    keys = [_order_key(ranks[i], i + 1) for i in range(n)]
    for a in range(n):
        for b in open_:
            # a is removed from before b in each round, so it leads b
            if a in open_ and keys[a] < keys[b] and removed[a] < removed[b]:
                return False
            if keys[a] > keys[b] and removed[a] > removed[b]:
                return False
    return True


def fair_vectors(profiles, ranks):
    """All fair removal vectors as ``(removed, total_kbps)``."""
    removable = [len(p[1]) - p[2] for p in profiles]
    out = []
    for removed in itertools.product(*(range(r + 1) for r in removable)):
        if not is_fair(removed, removable, ranks):
            continue
        total = 0
        for (base, layers, _), r in zip(profiles, removed):
            total += base + sum(layers[:len(layers) - r])
        out.append((removed, total))
    return out


def best_fair(vectors, budget):
    """Fair vectors with the largest total that fits ``budget``."""
    fitting = [v for v in vectors if v[1] <= budget]
    if not fitting:
        return None, []
    top = max(t for _, t in fitting)
    return top, [r for r, t in fitting if t == top]
