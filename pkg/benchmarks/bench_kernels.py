"""Compare the numba and numpy kernel paths on representative workloads.

Times the two hot kernels (interior-point Schur assembly, pure-state
coordinate ascent) at the sizes the solver actually produces, plus an
end-to-end measure evaluation under each backend via subprocess (backend
selection happens at import time through DYNCOH_BACKEND).

Run:  python3 benchmarks/bench_kernels.py
"""

import os
import subprocess
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from dyncoh import channels as ch  # noqa: E402
from dyncoh import kernels  # noqa: E402
from dyncoh import measures as ms  # noqa: E402
from dyncoh import sdp as sd  # noqa: E402
from dyncoh import search as se  # noqa: E402


def _time(fn, repeats):
    fn()  # warm-up (jit compile, caches)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def _program_constraints(theta, phi_dim):
    cfg = ms.GameConfig(0.5, np.linspace(0.0, 2.0, phi_dim))
    prob = sd.build_sign_program(theta, cfg, (1,) * theta.dim_out)
    mats, _, n = sd._split_constraints(prob)
    return kernels.SparseConstraints(mats), 2 * n


def bench_schur():
    rng = np.random.default_rng(0)
    rows = []
    cases = [
        ("qubit program", ch.hadamard(), 2),
        ("ancilla program", ch.tensor(ch.hadamard(), ch.identity_channel(2)), 4),
    ]
    for label, theta, phi_dim in cases:
        sc, nreal = _program_constraints(theta, phi_dim)
        g = rng.standard_normal((sc.n, sc.n))
        w = g @ g.T + np.eye(sc.n)
        t_np = _time(lambda: kernels.schur_numpy(sc.dense, w), 200)
        if kernels._HAVE_NUMBA:
            t_nb = _time(
                lambda: kernels._schur_numba(sc.rows, sc.cols, sc.vals, sc.offsets, w), 200
            )
        else:
            t_nb = float("nan")
        rows.append((f"schur {label} (m={sc.m}, n={sc.n})", t_np, t_nb))
    return rows


def bench_ascent():
    rng = np.random.default_rng(1)
    rows = []
    for d, label in ((2, "qubit state"), (4, "two-qubit state")):
        stack = np.stack([
            0.5 * (m + m.conj().T)
            for m in (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
                      for _ in range(d))
        ])
        x0 = rng.standard_normal(2 * d)
        t_np = _time(lambda: kernels.ascent_numpy(stack, x0, 40, 0.3, 1e-6), 20)
        if kernels._HAVE_NUMBA:
            t_nb = _time(lambda: kernels._ascent_numba(stack, x0, 40, 0.3, 1e-6), 20)
        else:
            t_nb = float("nan")
        rows.append((f"ascent {label} (d={d})", t_np, t_nb))
    return rows


def bench_end_to_end():
    code = (
        "import time, numpy as np;"
        "from dyncoh import channels as ch, measures as ms, search as se;"
        "from dyncoh.sdp import preprocessed_improvement;"
        "cfg = ms.GameConfig(0.5, np.array([2*np.pi/3, 0.0]));"
        "preprocessed_improvement(ch.hadamard(), cfg);"  # warm-up / jit
        "t0 = time.perf_counter();"
        "[preprocessed_improvement(ch.hadamard_mixture(p), cfg, extract=False)"
        " for p in np.linspace(0.1, 0.9, 10)];"
        "t1 = time.perf_counter();"
        "se.brute_force_game_value(ch.hadamard(), cfg,"
        " se.SearchBudget(random_samples=4000, rng_seed=1));"
        "t2 = time.perf_counter();"
        "print(f'{t1-t0:.4f} {t2-t1:.4f}')"
    )
    rows = []
    for backend in ("numpy", "numba"):
        env = dict(os.environ, DYNCOH_BACKEND=backend)
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True)
        if out.returncode != 0:
            rows.append((backend, float("nan"), float("nan")))
            continue
        sweep_t, brute_t = (float(x) for x in out.stdout.split())
        rows.append((backend, sweep_t, brute_t))
    return rows


def main():
    print(f"numba available: {kernels._HAVE_NUMBA}; active backend: "
          f"{'numba' if kernels.USE_NUMBA else 'numpy'}")
    print()
    print(f"{'kernel':44s} {'numpy':>12s} {'numba':>12s} {'speedup':>9s}")
    for label, t_np, t_nb in bench_schur() + bench_ascent():
        ratio = t_np / t_nb if t_nb == t_nb and t_nb > 0 else float("nan")
        print(f"{label:44s} {t_np*1e6:10.1f}us {t_nb*1e6:10.1f}us {ratio:8.1f}x")
    print()
    print(f"{'end-to-end (per backend subprocess)':44s} {'sweep x10':>12s} {'brute force':>12s}")
    for backend, sweep_t, brute_t in bench_end_to_end():
        print(f"{backend:44s} {sweep_t*1e3:10.1f}ms {brute_t*1e3:10.1f}ms")


if __name__ == "__main__":
    main()
