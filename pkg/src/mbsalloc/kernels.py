"""Array kernels for the event loop.

Everything here is compiled by numba unless ``MBSALLOC_DISABLE_NUMBA`` is
set (see :mod:`mbsalloc._jit`). The kernels mirror the object-level logic in
:mod:`mbsalloc.allocation` and :mod:`mbsalloc.admission` on flat integer
arrays; the test suite runs both and requires identical counters.

Cell scalars travel in small int64 arrays so the helpers can update them in
place:

``cfg_i``  capacity, fixed flag, fixed reserve, MBS floor, unicast
           min/max layers
``st_i``   MBS total, non-MBS total, active calls, free slots,
           next call id, degraded unicast calls, degraded background
           calls, dwell samples consumed
"""
import heapq

import numpy as np

from ._jit import njit

CAP, FIXED, RESERVE, CMINB, UMIN, UMAX = 0, 1, 2, 3, 4, 5
N_CFG = 6

S_CB, S_CNB, S_NACT, S_NFREE, S_NEXTID, S_DEGUNI, S_DEGBG, S_DWELL = 0, 1, 2, 3, 4, 5, 6, 7
N_STATE = 8

CL_CLS, CL_ALLOC, CL_LAYERS, CL_ID = 0, 1, 2, 3
CL_END, CL_DWELL = 0, 1

KIND_VOICE, KIND_UNI, KIND_BG = 0, 1, 2

# rows of the counter matrix (columns are class codes)
OFF_NEW, ADM_NEW, BLK_NEW, OFF_HO, ADM_HO, DRP_HO, COMPLETED, FORCED = range(8)
N_COUNTERS = 8

STATUS_OK = 0
STATUS_DWELL_EXHAUSTED = 1


@njit
def plan_layers(s_base, s_layers, s_min, s_max, s_order, budget, out):
    """Round-robin layer removal into ``out``; returns the MBS total.

    The caller guarantees ``budget`` is at least the sessions' floor.
    """
    total = 0
    for m in range(s_base.shape[0]):
        out[m] = s_max[m]
        total += s_base[m]
        for j in range(s_max[m]):
            total += s_layers[m, j]
    while total > budget:
        progressed = False
        for i in range(s_order.shape[0]):
            m = s_order[i]
            n = out[m]
            if n > s_min[m]:
                out[m] = n - 1
                total -= s_layers[m, n - 1]
                progressed = True
                if total <= budget:
                    break
        if not progressed:
            break
    return total


@njit
def _free(cfg_i, st_i):
    if cfg_i[FIXED] != 0:
        return cfg_i[CAP] - cfg_i[RESERVE] - st_i[S_CNB]
    return cfg_i[CAP] - st_i[S_CB] - st_i[S_CNB]


@njit
def admit_call(cfg_i, st_i, k, handover, exclude, end, dwell,
               cls_kind, cls_min, cls_max, uni_cum,
               s_base, s_layers, s_min, s_max, s_order, s_n,
               cli, clf, act, pos, free_slots):
    """Admission ladder; returns the new call's slot or -1."""
    cap = cfg_i[CAP]
    fixed = cfg_i[FIXED] != 0
    kind = cls_kind[k]
    umin = cfg_i[UMIN]
    umax = cfg_i[UMAX]
    if handover and not fixed:
        target = cls_min[k]
    else:
        target = cls_max[k]
    n_act = st_i[S_NACT]

    free = _free(cfg_i, st_i)
    if free < target:
        if fixed:
            return -1
        if not handover and kind == KIND_BG:
            return -1
        reclaim = st_i[S_CB] - cfg_i[CMINB]
        for i in range(n_act):
            s = act[i]
            if s == exclude:
                continue
            c = cli[s, CL_CLS]
            ck = cls_kind[c]
            if ck == KIND_BG or (handover and ck == KIND_UNI):
                reclaim += cli[s, CL_ALLOC] - cls_min[c]
        if free + reclaim < target:
            return -1

        c_nb = st_i[S_CNB]
        budget = max(cap - c_nb - target, cfg_i[CMINB])
        c_b = plan_layers(s_base, s_layers, s_min, s_max, s_order, budget, s_n)
        st_i[S_CB] = c_b
        free = cap - c_b - c_nb

        degraded = False
        while free < target:
            best = -1
            for i in range(n_act):
                s = act[i]
                if s == exclude:
                    continue
                c = cli[s, CL_CLS]
                if cls_kind[c] == KIND_BG and cli[s, CL_ALLOC] > cls_min[c]:
                    if best < 0 or cli[s, CL_ID] < cli[best, CL_ID]:
                        best = s
            if best < 0:
                break
            c = cli[best, CL_CLS]
            gain = cli[best, CL_ALLOC] - cls_min[c]
            cli[best, CL_ALLOC] = cls_min[c]
            c_nb -= gain
            free += gain
            st_i[S_DEGBG] += 1
            degraded = True

        while free < target:
            best = -1
            for i in range(n_act):
                s = act[i]
                if s == exclude:
                    continue
                if cls_kind[cli[s, CL_CLS]] == KIND_UNI and cli[s, CL_LAYERS] > umin:
                    if best < 0 or cli[s, CL_LAYERS] > cli[best, CL_LAYERS] or (
                            cli[s, CL_LAYERS] == cli[best, CL_LAYERS]
                            and cli[s, CL_ID] < cli[best, CL_ID]):
                        best = s
            if best < 0:
                raise AssertionError("ladder ran out of reclaimable bandwidth")
            n = cli[best, CL_LAYERS]
            step = uni_cum[n] - uni_cum[n - 1]
            cli[best, CL_LAYERS] = n - 1
            cli[best, CL_ALLOC] -= step
            c_nb -= step
            free += step
            if n == umax:
                st_i[S_DEGUNI] += 1
            degraded = True

        st_i[S_CNB] = c_nb
        if degraded:
            st_i[S_CB] = plan_layers(s_base, s_layers, s_min, s_max, s_order,
                                     cap - c_nb - target, s_n)

    nfree = st_i[S_NFREE]
    if nfree == 0:
        raise AssertionError("call table full")
    slot = free_slots[nfree - 1]
    st_i[S_NFREE] = nfree - 1
    layers = 0
    if kind == KIND_UNI:
        layers = umin if target == cls_min[k] else umax
        if layers < umax:
            st_i[S_DEGUNI] += 1
    elif kind == KIND_BG and target < cls_max[k]:
        st_i[S_DEGBG] += 1
    cli[slot, CL_CLS] = k
    cli[slot, CL_ALLOC] = target
    cli[slot, CL_LAYERS] = layers
    cli[slot, CL_ID] = st_i[S_NEXTID]
    st_i[S_NEXTID] += 1
    clf[slot, CL_END] = end
    clf[slot, CL_DWELL] = dwell
    act[n_act] = slot
    pos[slot] = n_act
    st_i[S_NACT] = n_act + 1
    st_i[S_CNB] += target
    return slot


@njit
def release_call(cfg_i, st_i, slot, cls_kind, cls_min, cls_max, uni_cum,
                 s_base, s_layers, s_min, s_max, s_order, s_n,
                 cli, clf, act, pos, free_slots):
    """Remove a call, then restore unicast, background and MBS in that order."""
    n_act = st_i[S_NACT]
    i = pos[slot]
    last = act[n_act - 1]
    act[i] = last
    pos[last] = i
    n_act -= 1
    st_i[S_NACT] = n_act
    free_slots[st_i[S_NFREE]] = slot
    st_i[S_NFREE] += 1

    k = cli[slot, CL_CLS]
    umax = cfg_i[UMAX]
    c_nb = st_i[S_CNB] - cli[slot, CL_ALLOC]
    if cls_kind[k] == KIND_UNI and cli[slot, CL_LAYERS] < umax:
        st_i[S_DEGUNI] -= 1
    elif cls_kind[k] == KIND_BG and cli[slot, CL_ALLOC] < cls_max[k]:
        st_i[S_DEGBG] -= 1
    st_i[S_CNB] = c_nb
    if cfg_i[FIXED] != 0:
        return

    cap = cfg_i[CAP]
    free = cap - st_i[S_CB] - c_nb
    while st_i[S_DEGUNI] > 0:
        best = -1
        for j in range(n_act):
            s = act[j]
            if cls_kind[cli[s, CL_CLS]] == KIND_UNI and cli[s, CL_LAYERS] < umax:
                if best < 0 or cli[s, CL_LAYERS] < cli[best, CL_LAYERS] or (
                        cli[s, CL_LAYERS] == cli[best, CL_LAYERS]
                        and cli[s, CL_ID] < cli[best, CL_ID]):
                    best = s
        n = cli[best, CL_LAYERS]
        step = uni_cum[n + 1] - uni_cum[n]
        if free < step:
            break
        cli[best, CL_LAYERS] = n + 1
        cli[best, CL_ALLOC] += step
        c_nb += step
        free -= step
        if n + 1 == umax:
            st_i[S_DEGUNI] -= 1

    if st_i[S_DEGBG] > 0:
        slots = np.empty(st_i[S_DEGBG], dtype=np.int64)
        ids = np.empty(st_i[S_DEGBG], dtype=np.int64)
        m = 0
        for j in range(n_act):
            s = act[j]
            c = cli[s, CL_CLS]
            if cls_kind[c] == KIND_BG and cli[s, CL_ALLOC] < cls_max[c]:
                slots[m] = s
                ids[m] = cli[s, CL_ID]
                m += 1
        for j in np.argsort(ids):
            s = slots[j]
            c = cli[s, CL_CLS]
            gap = cls_max[c] - cli[s, CL_ALLOC]
            if free >= gap:
                cli[s, CL_ALLOC] = cls_max[c]
                c_nb += gap
                free -= gap
                st_i[S_DEGBG] -= 1

    st_i[S_CNB] = c_nb
    st_i[S_CB] = plan_layers(s_base, s_layers, s_min, s_max, s_order, cap - c_nb, s_n)


@njit
def check_state(cfg_i, st_i, counts, cls_kind, cls_min, cls_max, uni_cum,
                s_base, s_layers, s_min, s_max, s_order, s_n, s_tmp,
                cli, act):
    """Raise AssertionError if any cell invariant is broken."""
    cap = cfg_i[CAP]
    c_b = 0
    for m in range(s_base.shape[0]):
        if s_n[m] < s_min[m] or s_n[m] > s_max[m]:
            raise AssertionError("session layer count out of range")
        c_b += s_base[m]
        for j in range(s_n[m]):
            c_b += s_layers[m, j]
    if c_b != st_i[S_CB]:
        raise AssertionError("MBS total out of sync")
    if c_b < cfg_i[CMINB]:
        raise AssertionError("MBS floor violated")

    c_nb = 0
    deg_uni = 0
    deg_bg = 0
    for i in range(st_i[S_NACT]):
        s = act[i]
        c = cli[s, CL_CLS]
        a = cli[s, CL_ALLOC]
        if a < cls_min[c] or a > cls_max[c]:
            raise AssertionError("call allocation out of range")
        if cls_kind[c] == KIND_UNI:
            if a != uni_cum[cli[s, CL_LAYERS]]:
                raise AssertionError("unicast allocation does not match its layers")
            if cli[s, CL_LAYERS] < cfg_i[UMAX]:
                deg_uni += 1
        elif cls_kind[c] == KIND_BG:
            if a != cls_min[c] and a != cls_max[c]:
                raise AssertionError("background call between levels")
            if a < cls_max[c]:
                deg_bg += 1
        c_nb += a
    if c_nb != st_i[S_CNB]:
        raise AssertionError("non-MBS total out of sync")
    if deg_uni != st_i[S_DEGUNI] or deg_bg != st_i[S_DEGBG]:
        raise AssertionError("degraded-call counters out of sync")
    if c_b + c_nb > cap:
        raise AssertionError("conservation violated")
    if _free(cfg_i, st_i) < 0:
        raise AssertionError("negative free bandwidth")
    if cfg_i[FIXED] == 0:
        total = plan_layers(s_base, s_layers, s_min, s_max, s_order, cap - c_nb, s_tmp)
        for m in range(s_base.shape[0]):
            if s_tmp[m] != s_n[m]:
                raise AssertionError("MBS layers differ from the plan for the current load")
        if total != c_b:
            raise AssertionError("MBS total differs from the plan")
    for k in range(counts.shape[1]):
        if counts[OFF_NEW, k] != counts[ADM_NEW, k] + counts[BLK_NEW, k]:
            raise AssertionError("new-call counts do not balance")
        if counts[OFF_HO, k] != counts[ADM_HO, k] + counts[DRP_HO, k]:
            raise AssertionError("handover counts do not balance")


@njit
def simulate(cfg_i, cls_kind, cls_min, cls_max, uni_cum,
             s_base, s_layers, s_min, s_max, s_order,
             arr_t, arr_cls, arr_dur, dwell_pool,
             warmup, horizon, check, max_calls, counts, integ):
    """Run one replication; fills ``counts`` and ``integ`` in place.

    Returns ``(status, events processed, dwell samples used)``. A status of
    STATUS_DWELL_EXHAUSTED means ``dwell_pool`` was too short and the run
    must be repeated with a longer pool.
    """
    n_arr = arr_t.shape[0]
    n_pool = dwell_pool.shape[0]
    st_i = np.zeros(N_STATE, dtype=np.int64)
    s_n = np.empty(s_base.shape[0], dtype=np.int64)
    s_tmp = np.empty(s_base.shape[0], dtype=np.int64)
    budget0 = cfg_i[RESERVE] if cfg_i[FIXED] != 0 else cfg_i[CAP]
    st_i[S_CB] = plan_layers(s_base, s_layers, s_min, s_max, s_order, budget0, s_n)
    st_i[S_NEXTID] = 1

    cli = np.zeros((max_calls, 4), dtype=np.int64)
    clf = np.zeros((max_calls, 2), dtype=np.float64)
    act = np.zeros(max_calls, dtype=np.int64)
    pos = np.zeros(max_calls, dtype=np.int64)
    free_slots = np.arange(max_calls - 1, -1, -1).astype(np.int64)
    st_i[S_NFREE] = max_calls

    # (time, insertion seq, ref); ref >= 0 is a call slot, ref < 0 encodes
    # arrival index -1 - ref
    heap = [(0.0, 0, 0)]
    heap.pop()
    seq = 0
    pending = 0
    if n_arr > 0:
        heapq.heappush(heap, (arr_t[0], seq, -1))
        seq += 1
        pending = 1

    last_t = 0.0
    n_events = 0
    while len(heap) > 0:
        ev = heapq.heappop(heap)
        t = ev[0]
        ref = ev[2]
        if t > horizon:
            break
        if t < last_t:
            raise AssertionError("event scheduled in the past")
        if t > warmup:
            dt = t - max(last_t, warmup)
            integ[0] += st_i[S_CB] * dt
            integ[1] += st_i[S_CNB] * dt
        last_t = t
        measuring = t >= warmup
        n_events += 1

        if ref < 0:
            idx = -1 - ref
            pending = 0
            if idx + 1 < n_arr:
                heapq.heappush(heap, (arr_t[idx + 1], seq, -2 - idx))
                seq += 1
                pending = 1
            k = arr_cls[idx]
            if st_i[S_DWELL] >= n_pool:
                return STATUS_DWELL_EXHAUSTED, n_events, st_i[S_DWELL]
            end = t + arr_dur[idx]
            dwell = t + dwell_pool[st_i[S_DWELL]]
            slot = admit_call(cfg_i, st_i, k, False, -1, end, dwell,
                              cls_kind, cls_min, cls_max, uni_cum,
                              s_base, s_layers, s_min, s_max, s_order, s_n,
                              cli, clf, act, pos, free_slots)
            if measuring:
                counts[OFF_NEW, k] += 1
            if slot >= 0:
                st_i[S_DWELL] += 1
                heapq.heappush(heap, (min(end, dwell), seq, slot))
                seq += 1
                if measuring:
                    counts[ADM_NEW, k] += 1
            elif measuring:
                counts[BLK_NEW, k] += 1
        else:
            s = ref
            k = cli[s, CL_CLS]
            end = clf[s, CL_END]
            if end <= clf[s, CL_DWELL]:
                if measuring:
                    counts[COMPLETED, k] += 1
            else:
                if st_i[S_DWELL] >= n_pool:
                    return STATUS_DWELL_EXHAUSTED, n_events, st_i[S_DWELL]
                dwell = t + dwell_pool[st_i[S_DWELL]]
                new = admit_call(cfg_i, st_i, k, True, s, end, dwell,
                                 cls_kind, cls_min, cls_max, uni_cum,
                                 s_base, s_layers, s_min, s_max, s_order, s_n,
                                 cli, clf, act, pos, free_slots)
                if measuring:
                    counts[OFF_HO, k] += 1
                if new >= 0:
                    st_i[S_DWELL] += 1
                    heapq.heappush(heap, (min(end, dwell), seq, new))
                    seq += 1
                    if measuring:
                        counts[ADM_HO, k] += 1
                elif measuring:
                    counts[DRP_HO, k] += 1
                    counts[FORCED, k] += 1
            release_call(cfg_i, st_i, s, cls_kind, cls_min, cls_max, uni_cum,
                         s_base, s_layers, s_min, s_max, s_order, s_n,
                         cli, clf, act, pos, free_slots)

        if check:
            check_state(cfg_i, st_i, counts, cls_kind, cls_min, cls_max, uni_cum,
                        s_base, s_layers, s_min, s_max, s_order, s_n, s_tmp, cli, act)
            if len(heap) != st_i[S_NACT] + pending:
                raise AssertionError("event queue out of sync with active calls")

    if horizon > warmup:
        dt = horizon - max(last_t, warmup)
        integ[0] += st_i[S_CB] * dt
        integ[1] += st_i[S_CNB] * dt
    return STATUS_OK, n_events, st_i[S_DWELL]
