"""Compare the compiled and numpy Q-network kernels.

    python benchmarks/bench_kernels.py [--hidden 32] [--inputs 12] [--actions 3]

Prints microseconds per call for each kernel and backend, the speedup, and the
largest absolute disagreement between the two backends' outputs. Also times a
short end-to-end training session under each backend.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from ril import kernels


def make_inputs(d, H, A, batch=32, memory=2000, seed=0):
    rng = np.random.default_rng(seed)
    net = [rng.normal(0, 0.3, (H, d)), rng.normal(0, 0.1, H),
           rng.normal(0, 0.3, (A, H)), rng.normal(0, 0.1, A)]
    target = [p.copy() for p in net]
    S = rng.normal(size=(memory, d))
    S2 = rng.normal(size=(memory, d))
    A_ = rng.integers(0, A, memory).astype(np.int64)
    R = rng.normal(size=memory)
    D = (rng.random(memory) < 0.1).astype(np.uint8)
    idx = rng.integers(0, memory, batch).astype(np.int64)
    return net, target, S, A_, R, S2, D, idx


def time_call(fn, number):
    best = min(timeit.repeat(fn, number=number, repeat=5))
    return 1e6 * best / number


def bench_backend(mod, inputs, number):
    net, target, S, A_, R, S2, D, idx = inputs
    x = np.ascontiguousarray(S[0])
    X = np.ascontiguousarray(S[idx])
    acts = np.ascontiguousarray(A_[idx])
    y = np.ascontiguousarray(R[idx])
    work = [p.copy() for p in net]
    return {
        "greedy": time_call(lambda: mod.greedy(*net, x), number),
        "q_forward_batch": time_call(lambda: mod.q_forward_batch(*net, X), number),
        "loss_and_grad": time_call(lambda: mod.loss_and_grad(*net, X, acts, y), number),
        "dqn_update": time_call(
            lambda: mod.dqn_update(*work, *target, S, A_, R, S2, D, idx, 0.99, 1e-6), number),
    }


def agreement(inputs):
    net, target, S, A_, R, S2, D, idx = inputs
    py, cy = kernels.load("python"), kernels.load("cython")
    X, acts, y = S[idx], A_[idx], R[idx]
    a = py.loss_and_grad(*net, X, acts, y)
    b = cy.loss_and_grad(*net, X, acts, y)
    err = max(float(np.max(np.abs(np.asarray(u) - np.asarray(v)))) for u, v in zip(a, b))
    w_py, w_cy = [p.copy() for p in net], [p.copy() for p in net]
    for _ in range(50):
        py.dqn_update(*w_py, *target, S, A_, R, S2, D, idx, 0.99, 0.01)
        cy.dqn_update(*w_cy, *target, S, A_, R, S2, D, idx, 0.99, 0.01)
    err = max(err, max(float(np.max(np.abs(u - v))) for u, v in zip(w_py, w_cy)))
    return err


SESSION = ("import time; from ril.config import build_config; from ril.harness import train; "
           "cfg = build_config(env='spacewar', mode='ril-accel', seed=0, episodes=10**6, "
           "budget_steps={steps}); t = time.perf_counter(); train(cfg); "
           "print(time.perf_counter() - t)")


def session_time(backend, steps):
    env = dict(os.environ)
    env.pop("RIL_PURE_PYTHON", None)
    if backend == "python":
        env["RIL_PURE_PYTHON"] = "1"
    out = subprocess.run([sys.executable, "-c", SESSION.format(steps=steps)], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--inputs", type=int, default=12)
    ap.add_argument("--hidden", type=int, default=32)
    ap.add_argument("--actions", type=int, default=3)
    ap.add_argument("--number", type=int, default=2000)
    ap.add_argument("--session-steps", type=int, default=20000)
    args = ap.parse_args(argv)

    try:
        kernels.load("cython")
    except ImportError:
        print("compiled extension not built; run `pip install -e .` with Cython available")
        return 1

    inputs = make_inputs(args.inputs, args.hidden, args.actions)
    py = bench_backend(kernels.load("python"), inputs, args.number)
    cy = bench_backend(kernels.load("cython"), inputs, args.number)
    print(f"network {args.inputs}-{args.hidden}-{args.actions}, batch 32")
    print(f"{'kernel':<18}{'python us':>12}{'cython us':>12}{'speedup':>10}")
    for k in py:
        print(f"{k:<18}{py[k]:>12.2f}{cy[k]:>12.2f}{py[k] / cy[k]:>9.1f}x")
    print(f"max |python - cython| over gradients and 50 updates: {agreement(inputs):.2e}")

    tp = session_time("python", args.session_steps)
    tc = session_time("cython", args.session_steps)
    n = args.session_steps
    print(f"spacewar session, {n} steps: python {1e6 * tp / n:.1f} us/step, "
          f"cython {1e6 * tc / n:.1f} us/step ({tp / tc:.1f}x)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
