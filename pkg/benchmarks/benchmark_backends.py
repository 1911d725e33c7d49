"""Time the Lindblad right-hand-side kernels: numba versus pure numpy.

Usage: python3 benchmarks/benchmark_backends.py [--repeats 20]

Builds the dissipative master-equation RHS for a few problem sizes and
reports per-call wall time for both backends, plus a full small evolution
timed end to end.  The same env flag the library honors, GPSQUEEZE_NO_NUMBA,
selects the numpy path in normal use; here both are exercised explicitly.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from gpsqueeze._kernels import LindbladRHS, default_backend
from gpsqueeze.dynamics import EvolutionSpec, evolve_master, lambda_from_theta
from gpsqueeze.hilbert import HilbertSpace, build_spin_operators, ground_state
from gpsqueeze.metrics import theta_opt
from gpsqueeze.model import DickeParams, build_dicke_hamiltonian


def bench_rhs(n_atoms: int, n_max: int, repeats: int) -> dict:
    space = HilbertSpace(n_atoms, n_max)
    params = DickeParams(
        omega_c=1.0, omega_q=0.0,
        lam=lambda_from_theta(theta_opt(n_atoms), 1.0),
        N_a=n_atoms, kappa=0.1, Gamma_phi=0.01,
    )
    h = build_dicke_hamiltonian(params, space)
    jz = np.diag(build_spin_operators(space)["J_z"].toarray()).real

    psi = np.asarray(ground_state(space)).ravel()
    rho = np.outer(psi, psi.conj())

    timings = {}
    for backend in ("numba", "numpy"):
        try:
            rhs = LindbladRHS(h.mat, space.spin_dim, n_max, params.kappa,
                              params.Gamma_phi, jz, backend=backend)
        except RuntimeError:
            timings[backend] = None  # numba unavailable
            continue
        rhs(rho)  # warm-up (jit compile / allocation)
        t0 = time.perf_counter()
        for _ in range(repeats):
            rhs(rho)
        timings[backend] = (time.perf_counter() - t0) / repeats
    return timings


def bench_evolution(n_atoms: int, n_max: int) -> dict:
    params = DickeParams(
        omega_c=1.0, omega_q=0.0,
        lam=lambda_from_theta(theta_opt(n_atoms), 1.0),
        N_a=n_atoms, kappa=0.1, Gamma_phi=0.0,
    )
    out = {}
    for backend in ("numba", "numpy"):
        space = HilbertSpace(n_atoms, n_max)
        t0 = time.perf_counter()
        result = evolve_master(EvolutionSpec(dicke=params, space=space,
                                             backend=backend))
        out[backend] = (time.perf_counter() - t0, result.n_rhs_evals)
    return out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    print(f"default backend: {default_backend()}")
    print(f"\nper-call RHS time ({args.repeats} repeats):")
    print(f"{'N_a':>5} {'n_max':>6} {'dim':>6} {'numba':>12} {'numpy':>12} {'speedup':>8}")
    for n_atoms, n_max in ((16, 12), (50, 16), (100, 16)):
        t = bench_rhs(n_atoms, n_max, args.repeats)
        dim = (n_atoms + 1) * n_max
        tn = "n/a" if t["numba"] is None else f"{t['numba'] * 1e3:9.2f} ms"
        tp = f"{t['numpy'] * 1e3:9.2f} ms"
        ratio = "" if t["numba"] is None else f"{t['numpy'] / t['numba']:7.2f}x"
        print(f"{n_atoms:>5} {n_max:>6} {dim:>6} {tn:>12} {tp:>12} {ratio:>8}")

    print("\nfull evolution to t_1 (N_a=16, kappa=0.1 omega_c):")
    for backend, (secs, evals) in bench_evolution(16, 12).items():
        print(f"  {backend:>6}: {secs:6.2f} s  ({evals} RHS evaluations)")


if __name__ == "__main__":
    main()
