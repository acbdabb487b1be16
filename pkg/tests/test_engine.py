import numpy as np
import pytest

from mbsalloc.engine import RunSpec, replicate, run, run_reference
from mbsalloc.errors import ConfigError
from mbsalloc.metrics import derive
from mbsalloc.model import PROPOSED, fixed_mbs, reference_config
from mbsalloc.traffic import TrafficRates, generate_trace

SCHEMES = [PROPOSED, fixed_mbs(6000), fixed_mbs(14000)]


def spec(scheme=PROPOSED, rate=0.5, horizon=20_000.0, seed=1):
    return RunSpec(reference_config(scheme), TrafficRates(rate), horizon, None, seed)


@pytest.mark.parametrize("scheme, util", [(PROPOSED, 0.6), (fixed_mbs(6000), 0.3)])
def test_idle_cell(scheme, util):
    d = derive(run(spec(scheme, rate=0.0)))
    assert d.utilization == pytest.approx(util)
    assert d.p_drop == d.p_forced == 0.0
    assert set(d.p_block.values()) == {0.0}


def test_same_seed_same_record():
    assert run(spec()).to_json() == run(spec()).to_json()
    assert run(spec(seed=2)).to_json() != run(spec()).to_json()


@pytest.mark.parametrize("scheme", SCHEMES, ids=lambda s: s.name)
@pytest.mark.parametrize("rate", [0.3, 0.9])
def test_kernel_matches_object_engine(scheme, rate):
    s = spec(scheme, rate, horizon=6_000.0, seed=3)
    trace = generate_trace(s.rates, s.horizon_s, s.seed)
    fast = run(s, check=True, trace=trace)
    trace = generate_trace(s.rates, s.horizon_s, s.seed)
    slow = run_reference(s, check=True, trace=trace)
    assert fast.counts == slow.counts
    assert fast.events == slow.events
    assert fast.mbs_kbps_s == pytest.approx(slow.mbs_kbps_s, rel=1e-12)
    assert fast.non_mbs_kbps_s == pytest.approx(slow.non_mbs_kbps_s, rel=1e-12)


@pytest.mark.parametrize("scheme", SCHEMES, ids=lambda s: s.name)
def test_counter_identities(scheme):
    r = run(spec(scheme, rate=0.8), check=True)
    for k in range(3):
        assert r.counter("offered_new")[k] == r.counter("admitted_new")[k] + r.counter("blocked_new")[k]
        assert r.counter("offered_handover")[k] == (r.counter("admitted_handover")[k]
                                                    + r.counter("dropped_handover")[k])
    assert r.counter("forced_terminated") == r.counter("dropped_handover")
    assert r.mbs_kbps_s + r.non_mbs_kbps_s <= 20000 * r.measured_s * (1 + 1e-12)
    d = derive(r)
    assert all(0.0 <= v <= 1.0 for v in d.flat().values())


def test_dwell_pool_growth_is_transparent():
    s = spec(rate=0.4, horizon=5_000.0, seed=4)
    base = run(s)
    trace = generate_trace(s.rates, s.horizon_s, s.seed)
    # restart the dwell stream with only 10 draws so the run has to grow it
    rng = np.random.default_rng(np.random.SeedSequence(s.seed).spawn(4)[3])
    trace.dwell_pool = rng.standard_exponential(10) * 540.0
    trace._dwell_rng = rng
    assert run(s, trace=trace).counts == base.counts


@pytest.mark.slow
def test_flow_balance():
    # each admission hands over with probability eta / (eta + mu)
    s = RunSpec(reference_config(), TrafficRates(0.3), 1_600_000.0, None, 5)
    r = run(s)
    assert r.events > 1_000_000
    for k, mean in enumerate((120.0, 300.0, 180.0)):
        admitted = r.counter("admitted_new")[k] + r.counter("admitted_handover")[k]
        expected = admitted * (1 / 540.0) / (1 / 540.0 + 1 / mean)
        assert abs(r.counter("offered_handover")[k] - expected) / expected < 0.03


def test_forced_bound():
    r = run(spec(fixed_mbs(14000), rate=0.8))
    d = derive(r)
    ho_per_call = r.total("offered_handover") / r.total("admitted_new")
    assert d.p_forced <= d.p_drop * ho_per_call + 1e-12


def test_replicate_edge_cases():
    s = spec(horizon=3_000.0)
    assert replicate(s, 0, []) == []
    assert [r.to_json() for r in replicate(s, 1, [7])] == [run(s.with_seed(7)).to_json()]
    with pytest.raises(ConfigError):
        replicate(s, 2, [3, 3])
    with pytest.raises(ConfigError):
        replicate(s, 2, [3])


def test_replicate_parallel_equals_sequential():
    s = spec(horizon=5_000.0)
    seeds = list(range(10, 20))
    seq = [r.to_json() for r in replicate(s, 10, seeds, workers=1)]
    par = [r.to_json() for r in replicate(s, 10, seeds, workers=4)]
    assert seq == par


@pytest.mark.parametrize("kwargs", [
    dict(horizon_s=0.0),
    dict(horizon_s=100.0, warmup_s=100.0),
    dict(horizon_s=float("inf")),
])
def test_runspec_validation(kwargs):
    with pytest.raises(ConfigError):
        RunSpec(reference_config(), TrafficRates(1.0), **kwargs)


def test_runspec_class_count_mismatch():
    with pytest.raises(ConfigError):
        RunSpec(reference_config(), TrafficRates(1.0, (1, 1), (120.0, 300.0)))


def test_warmup_default():
    assert spec(horizon=1000.0).warmup_s == pytest.approx(100.0)
