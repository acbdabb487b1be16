import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mbsalloc import _jit, kernels
from mbsalloc.allocation import initial_sessions, plan_mbs_allocation
from mbsalloc.engine import kernel_inputs
from mbsalloc.model import LayerProfile, SchemeConfig, reference_config

SCRIPT = """
from mbsalloc import _jit
from mbsalloc.cli import run_sweep
from mbsalloc.config import parse_settings
print(_jit.backend_name())
print(run_sweep(parse_settings({"sweep.lambda": [0.4, 0.9], "sweep.replications": 2,
                                "sim.horizon_s": 4000.0})), end="")
"""


def _run(disable):
    env = dict(os.environ)
    env.pop("MBSALLOC_DISABLE_NUMBA", None)
    if disable:
        env["MBSALLOC_DISABLE_NUMBA"] = "1"
    return subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True,
                          text=True, check=True).stdout


@pytest.mark.slow
def test_python_fallback_matches_compiled():
    fast, slow = _run(False), _run(True)
    assert fast.splitlines()[0] == "numba" and slow.splitlines()[0] == "python"
    assert fast.split("\n", 1)[1] == slow.split("\n", 1)[1]


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 8), base=st.integers(1, 500),
       layers=st.lists(st.integers(1, 200), max_size=4), k_min=st.integers(0, 4),
       ranks=st.lists(st.integers(1, 4), min_size=8, max_size=8), frac=st.floats(0, 1))
def test_plan_layers_matches_planner(n, base, layers, k_min, ranks, frac):
    prof = LayerProfile(base, tuple(layers), min(k_min, len(layers)))
    cfg = SchemeConfig(capacity_kbps=n * prof.max_kbps,
                       mbs_sessions=tuple((ranks[m], prof) for m in range(n)))
    ki = kernel_inputs(cfg)
    floor, top = n * prof.min_kbps, n * prof.max_kbps
    budget = floor + int(frac * (top - floor))
    out = np.zeros(n, dtype=np.int64)
    total = kernels.plan_layers(ki.s_base, ki.s_layers, ki.s_min, ki.s_max, ki.s_order, budget, out)
    sessions = initial_sessions(cfg)
    plan = plan_mbs_allocation(sessions, budget)
    assert total == plan.total_kbps
    assert out.tolist() == [plan.per_session_layers[s.session_id] for s in sessions]


def test_backend_flag():
    assert _jit.backend_name() in ("numba", "python")


def _empty_cell_arrays():
    ki = kernel_inputs(reference_config())
    st = np.zeros(kernels.N_STATE, dtype=np.int64)
    st[kernels.S_CB] = 12000
    s_n = ki.s_max.copy()
    counts = np.zeros((kernels.N_COUNTERS, 3), dtype=np.int64)
    cli = np.zeros((4, 4), dtype=np.int64)
    act = np.zeros(4, dtype=np.int64)
    return ki, st, s_n, counts, cli, act


def _check(ki, st, s_n, counts, cli, act):
    kernels.check_state(ki.cfg_i, st, counts, ki.cls_kind, ki.cls_min, ki.cls_max, ki.uni_cum,
                        ki.s_base, ki.s_layers, ki.s_min, ki.s_max, ki.s_order, s_n,
                        np.zeros_like(s_n), cli, act)


def test_check_state_accepts_consistent_cell():
    _check(*_empty_cell_arrays())


@pytest.mark.parametrize("corrupt, message", [
    (lambda st, s_n, counts, cli: st.__setitem__(kernels.S_CB, 11999), "out of sync"),
    (lambda st, s_n, counts, cli: (s_n.__setitem__(11, 3), st.__setitem__(kernels.S_CB, 11875)),
     "plan"),
    (lambda st, s_n, counts, cli: counts.__setitem__((kernels.OFF_NEW, 0), 1), "balance"),
    (lambda st, s_n, counts, cli: (cli.__setitem__((0, kernels.CL_ALLOC), 65), st.__setitem__(
        kernels.S_NACT, 1), st.__setitem__(kernels.S_CNB, 65)), "range"),
])
def test_check_state_detects_corruption(corrupt, message):
    ki, st, s_n, counts, cli, act = _empty_cell_arrays()
    corrupt(st, s_n, counts, cli)
    with pytest.raises(AssertionError, match=message):
        _check(ki, st, s_n, counts, cli, act)
