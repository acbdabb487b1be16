"""Time one simulation run on the compiled and the pure-Python kernel path.

Each backend runs in its own interpreter because the backend is chosen at
import time from ``MBSALLOC_DISABLE_NUMBA``. Usage::

    python benchmarks/bench_kernels.py [--lambda 0.6] [--horizon 20000] [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
from mbsalloc import _jit
from mbsalloc.engine import RunSpec, run
from mbsalloc.model import reference_config
from mbsalloc.traffic import TrafficRates

lam, horizon, repeat = float(sys.argv[1]), float(sys.argv[2]), int(sys.argv[3])
spec = RunSpec(reference_config(), TrafficRates(lam), horizon, None, 1)
t0 = time.perf_counter()
first = run(spec)
warm = time.perf_counter() - t0
times = []
for _ in range(repeat):
    t0 = time.perf_counter()
    rec = run(spec)
    times.append(time.perf_counter() - t0)
    assert rec == first
print(json.dumps({"backend": _jit.backend_name(), "first_s": warm, "best_s": min(times),
                  "events": rec.events, "record": rec.to_json()}))
"""


def measure(disable: bool, lam: float, horizon: float, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("MBSALLOC_DISABLE_NUMBA", None)
    if disable:
        env["MBSALLOC_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", CHILD, str(lam), str(horizon), str(repeat)],
                         env=env, capture_output=True, text=True, check=True).stdout
    return json.loads(out)


def main() -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--lambda", dest="lam", type=float, default=0.6)
    p.add_argument("--horizon", type=float, default=20_000.0)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()

    results = [measure(d, args.lam, args.horizon, args.repeat) for d in (False, True)]
    print(f"lambda={args.lam} horizon={args.horizon:g}s events={results[0]['events']}")
    for r in results:
        rate = r["events"] / r["best_s"]
        print(f"{r['backend']:>7}: first run {r['first_s']:.3f}s, best {r['best_s']:.4f}s "
              f"({rate:,.0f} events/s)")
    print(f"speedup: {results[1]['best_s'] / results[0]['best_s']:.1f}x")
    if results[0]["record"] != results[1]["record"]:
        print("records differ between backends", file=sys.stderr)
        return 1
    print("records identical")
    return 0


if __name__ == "__main__":
    sys.exit(main())
