"""Compare the compiled and pure-Python simplex kernels on typical programs.

Builds one full-horizon deterministic program and one scenario program of
the shape the closed-loop simulator solves every step, then times both
kernels on each (median of --repeats runs) and checks that they agree on
the objective. Run from the repository root:

    python3 benchmarks/bench_solver.py
    python3 benchmarks/bench_solver.py --days 14 --scenarios 51
"""
import argparse
import statistics
import time

import numpy as np

from peakshaver.core import (
    BatteryParams,
    PeakCalendar,
    ScenarioEnsemble,
    Tariff,
)
from peakshaver.lp import active_kernel_name, solve
from peakshaver.problems import (
    IntraPeakWeighting,
    MpcState,
    PeakStrategy,
    PolicyStructure,
    build_full_horizon,
    build_stochastic,
)
from peakshaver.synth import SynthSpec, generate


def _cases(days: int, scenarios: int, horizon: int):
    truth, _, weather = generate(SynthSpec(days=days, seed=5))
    n = truth.n_steps
    tariff = Tariff.day_night(weather.grid, 0.14, 0.09, 3.0,
                              extra_steps=horizon)
    battery = BatteryParams(30.0, 10.0, 10.0, 0.92, 0.92)
    calendar = PeakCalendar.uniform(n, 48)
    full = build_full_horizon(truth, tariff, battery, calendar, e0=10.0)

    rng = np.random.default_rng(8)
    base = truth.window(24, horizon).net
    nets = np.maximum(base + rng.normal(0.0, 4.0, (scenarios, horizon)), 0.0)
    stoch = build_stochastic(ScenarioEnsemble(nets), MpcState(t=24, e0=10.0),
                             PolicyStructure.affine_first_step(),
                             PeakStrategy.FULL_FULL, IntraPeakWeighting.off(),
                             tariff, battery, calendar)
    return ((f"full horizon ({days} days)", full),
            (f"stochastic ({scenarios} x {horizon})", stoch))


def _time(problem, kernel: str, repeats: int):
    runs = []
    solution = None
    for _ in range(repeats):
        started = time.perf_counter()
        solution = solve(problem, kernel=kernel)
        runs.append(time.perf_counter() - started)
    return statistics.median(runs), solution


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--days", type=int, default=7)
    parser.add_argument("--scenarios", type=int, default=21)
    parser.add_argument("--horizon", type=int, default=24)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    kernels = ["python"]
    if active_kernel_name() == "compiled":
        kernels.insert(0, "compiled")
    else:
        print("compiled extension not built; timing the python kernel only")

    header = f"{'program':<28} {'vars':>6} {'rows':>6}"
    for name in kernels:
        header += f" {name + ' (s)':>14} {'iters':>7}"
    if len(kernels) == 2:
        header += f" {'speedup':>8}"
    print(header)
    for label, problem in _cases(args.days, args.scenarios, args.horizon):
        line = f"{label:<28} {problem.n:>6} {problem.m:>6}"
        results = {}
        for name in kernels:
            seconds, solution = _time(problem, name, args.repeats)
            if solution.status.name != "OPTIMAL":
                raise SystemExit(f"{label}: {name} returned "
                                 f"{solution.status.name}")
            results[name] = (seconds, solution)
            line += f" {seconds:>14.4f} {solution.iterations:>7}"
        if len(kernels) == 2:
            fast = results["compiled"][1].objective
            slow = results["python"][1].objective
            if abs(fast - slow) > 1e-6 * max(1.0, abs(slow)):
                raise SystemExit(f"{label}: kernels disagree, "
                                 f"{fast!r} vs {slow!r}")
            line += (f" {results['python'][0] / results['compiled'][0]:>7.1f}x")
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
