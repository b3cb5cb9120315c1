"""Time the compiled and numpy kernels on the same workloads.

    python benchmarks/bench_kernel.py [--trials 100000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from eprlab import kernel
from eprlab.harness import RunConfig, ScheduleKind
from eprlab.model import InstructionSet, SourceDistribution, StationId
from eprlab.strategies import InstructionSetStrategy


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    L = max(1, args.trials // 9)
    strategy = InstructionSetStrategy("ggr", (InstructionSet.parse("GGR"),))
    sched = RunConfig(strategy, ScheduleKind.ALL_NINE_UNIFORM, L=L, seed=1).schedule()
    ticks, pairs = sched.ticks.astype(np.int64), sched.pairs.astype(np.int8)
    cdf = SourceDistribution.uniform(8).cdf
    p1, p2 = strategy.program(StationId.STATION1, 8), strategy.program(StationId.STATION2, 8)

    workloads = {
        "resolve_choices": lambda k: k.resolve_choices(1, ticks, pairs),
        "simulate_local": lambda k: k.simulate_local(1, ticks, pairs, cdf, p1, 0, p2, 0),
        "simulate_joint": lambda k: k.simulate_joint(1, ticks, pairs, cdf, 1.0, 0.25),
    }
    names = sorted(kernel.BACKENDS)
    print(f"{len(ticks)} trials, best of {args.repeat}")
    print(f"{'kernel':<16}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) == 2 else ""))
    for label, fn in workloads.items():
        t = {n: best_of(lambda: fn(kernel.get(n)), args.repeat) for n in names}
        row = f"{label:<16}" + "".join(f"{t[n] * 1e3:>10.2f}ms" for n in names)
        if len(names) == 2:
            row += f"{t['numpy'] / t['cython']:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
