"""Compare the compiled and pure-Python propagation engines.

    python benchmarks/bench_kernel.py [--hosts N] [--nodes N] [--steps N] [--repeat R]

Two measurements per engine: a kernel-only loop of assign/propagate/undo
over the compiled randc problem, and an end-to-end enumeration with a node
budget.  Both engines must explore the same tree, so node counts match.
"""
import argparse
import random
import time
from pathlib import Path

from adme.compiler import compile_goal
from adme.deladas import parse_goal
from adme.solver import ALL, CEngine, PyEngine, SolveOptions, solve
from adme.solver.search import _flat

RANDC = Path(__file__).resolve().parent.parent / "src" / "adme" / "data" / "randc.dld"


def kernel_loop(cls, problem, steps, seed):
    rng = random.Random(seed)
    engine = cls(problem.num_vars, *_flat(problem))
    engine.propagate_all()
    decisions = list(problem.decision_vars)
    start = time.perf_counter()
    for _ in range(steps):
        mark = engine.trail_size()
        var = rng.choice(decisions)
        if engine.value(var) == 0:
            engine.assign(var if rng.random() < 0.5 else -var)
        engine.undo(mark)
    return time.perf_counter() - start


def end_to_end(cls, problem, nodes):
    start = time.perf_counter()
    out = solve(problem, options=SolveOptions(max_solutions=ALL, node_limit=nodes), engine=cls)
    return time.perf_counter() - start, out.stats.nodes, len(out.solutions)


def best(fn, repeat):
    runs = [fn() for _ in range(repeat)]
    return min(runs, key=lambda r: r if isinstance(r, float) else r[0])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--hosts", type=int, default=6)
    ap.add_argument("--nodes", type=int, default=20000)
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    goal = parse_goal(RANDC.read_text())
    goal = goal.with_hosts(goal.hosts[:args.hosts])
    problem = compile_goal(goal)
    print(f"randc/{args.hosts}: {problem.num_vars} vars, {len(problem.constraints)} constraints")

    engines = [("python", PyEngine)] + ([("cython", CEngine)] if CEngine is not None else [])
    if CEngine is None:
        print("compiled kernel not built; only the Python engine is measured")
    results = {}
    for name, cls in engines:
        k = best(lambda: kernel_loop(cls, problem, args.steps, 1), args.repeat)
        e, n, s = best(lambda: end_to_end(cls, problem, args.nodes), args.repeat)
        results[name] = (k, e)
        print(f"{name:7s} kernel {args.steps} steps {k:7.3f} s   solve {n} nodes / {s} solutions {e:7.3f} s")
    if len(results) == 2:
        (pk, pe), (ck, ce) = results["python"], results["cython"]
        print(f"speedup kernel x{pk / ck:.1f}   solve x{pe / ce:.1f}")


if __name__ == "__main__":
    main()
