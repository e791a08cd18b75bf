"""Time the coordination phase under each available kernel backend.

    python benchmarks/bench_kernels.py --agents 1000 --iterations 50 --repeats 3
"""

import argparse
import time

import numpy as np

from slotexchange import kernels
from slotexchange.plans import Population
from slotexchange.synthetic import synthetic_plan_sets
from slotexchange.tree import build_tree, run_coordination


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--agents", type=int, default=1000)
    parser.add_argument("--slots", type=int, default=144)
    parser.add_argument("--plans", type=int, default=10)
    parser.add_argument("--iterations", type=int, default=50)
    parser.add_argument("--beta", type=float, default=0.0)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args(argv)

    pop = Population.from_plan_sets(
        synthetic_plan_sets(args.agents, args.slots, args.plans, seed=0), beta=args.beta
    )
    topo = build_tree(pop.n, seed=1)
    results = {}
    for name in kernels.available_backends():
        times = []
        for _ in range(args.repeats):
            pop.reset_to_preferred()
            start = time.perf_counter()
            trace = run_coordination(pop, topo, args.iterations, backend=name)
            times.append(time.perf_counter() - start)
        results[name] = (min(times), trace.global_cost[-1], trace.selections[-1])
        print(f"{name:8s} best of {args.repeats}: {min(times):8.3f}s  final cost {trace.global_cost[-1]!r}")
    if len(results) > 1:
        py, cy = results["python"], results["cython"]
        print(f"speedup  {py[0] / cy[0]:.1f}x; identical selections: {np.array_equal(py[2], cy[2])}")


if __name__ == "__main__":
    main()
