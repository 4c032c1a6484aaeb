"""Wall-clock comparison of the compiled and numpy HMC integrators.

Samples the first open-loop plan of each shipped experiment with every
available backend and prints one CSV row per (case, backend)::

    python benchmarks/bench_hmc.py --repeats 5 --samples 200
"""

import argparse
import csv
import statistics
import sys
import time

import numpy as np

from lodempc import thmc
from lodempc.config import load_config
from lodempc.lodegp import posterior
from lodempc.mpc import prepare_kernel
from lodempc.reweight import CostSpec, gaussian_product

CASES = (("experiment1", "gpmo"), ("experiment2", "gpmo"), ("experiment2", "gpse"))


def first_plan(name, model):
    problem = load_config(name).with_overrides(model=model).to_problem()
    kernel = prepare_kernel(problem)
    grid = problem.grid
    belief = posterior(kernel, problem.dataset(grid[0], np.r_[problem.x0, problem.u0], grid), grid)
    if problem.model.reweights:
        ref = problem.reference.on_grid(problem.bounds, grid, problem.system.n_x)
        belief = gaussian_product(belief, CostSpec(ref, np.repeat(problem.s_diag, grid.size)))
    box = problem.bounds.on_grid(grid)
    return belief, box, thmc.clamp_to_box(belief.mean, box)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=200)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["case", "dim", "backend", "median_s", "min_s", "mean_bounces", "speedup"])
    for name, model in CASES:
        belief, box, init = first_plan(name, model)
        medians = {}
        rows = []
        for backend in sorted(thmc.BACKENDS):
            times = []
            for _ in range(args.repeats):
                start = time.perf_counter()
                batch = thmc.sample_truncated(belief, box, init, args.samples, seed=args.seed, backend=backend)
                times.append(time.perf_counter() - start)
            medians[backend] = statistics.median(times)
            rows.append((backend, min(times), float(batch.bounces.mean())))
        base = medians["python"]
        for backend, best, bounces in rows:
            out.writerow([f"{name}/{model}", belief.mean.size, backend, f"{medians[backend]:.4f}",
                          f"{best:.4f}", f"{bounces:.1f}", f"{base / medians[backend]:.1f}"])


if __name__ == "__main__":
    main()
