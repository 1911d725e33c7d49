"""Open-system propagation and the exact geometric-phase evolution.

The master equation

    drho/dt = -i [H_Dicke, rho] + D[sqrt(Gamma_phi/2) J_z] rho
              + D[sqrt(kappa) c] rho

is integrated with an adaptive embedded Runge-Kutta pair (Dormand-Prince via
scipy), with trace / Hermiticity / Fock-tail diagnostics recorded along the
way.  In the decoherence-free case the evolution is also available in closed
form: the cavity traverses a loop in phase space conditioned on J_x and the
spins pick up the one-axis-twisting phase theta(t).
"""

from __future__ import annotations

import gc
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.integrate import RK45

from ._kernels import LindbladRHS
from .hilbert import (
    HilbertSpace,
    QOperator,
    build_cavity_operators,
    build_spin_operators,
    ground_state,
    spin_reduced,
    tensor_lift,
)
from .model import DickeParams, build_dicke_hamiltonian

TRACE_DRIFT_LIMIT = 1e-6
TAIL_POPULATION_LIMIT = 1e-4


def theta_of_t(t: float, lam: float, omega_c: float) -> float:
    """Accumulated geometric phase (2 lambda/omega_c)^2 (omega_c t - sin omega_c t)."""
    if omega_c == 0:
        raise ValueError("omega_c must be nonzero")
    wt = omega_c * t
    return (2.0 * lam / omega_c) ** 2 * (wt - np.sin(wt))


def alpha_of_t(t: float, omega_c: float) -> complex:
    """Cavity loop coefficient alpha(t) = 1 - e^{i omega_c t}."""
    return 1.0 - np.exp(1j * omega_c * t)


def lambda_from_theta(theta_target: float, omega_c: float) -> float:
    """Coupling that accumulates theta_target over one period t_1 = 2 pi/omega_c."""
    if theta_target < 0:
        raise ValueError("theta_target must be nonnegative")
    return 0.5 * abs(omega_c) * np.sqrt(theta_target / (2.0 * np.pi))


def decoupling_time(omega_c: float, m: int = 1) -> float:
    """t_m = 2 m pi / omega_c, where the cavity disentangles from the spins."""
    return 2.0 * m * np.pi / omega_c


def lindblad_rhs(rho: np.ndarray, H: QOperator, collapse_ops) -> np.ndarray:
    """Reference Liouvillian action (generic, unfused).

    The production integrator uses the fused kernels in ``_kernels``; this
    form exists as the independent cross-check and for arbitrary collapse
    operators.
    """
    for op in collapse_ops:
        if op.basis_tag != H.basis_tag:
            raise ValueError(
                f"collapse operator on {op.basis_tag} does not match H on {H.basis_tag}"
            )
    hm = H.toarray()
    out = -1j * (hm @ rho - rho @ hm)
    for op in collapse_ops:
        lm = op.toarray()
        ld = lm.conj().T
        ldl = ld @ lm
        out += lm @ rho @ ld - 0.5 * (ldl @ rho + rho @ ldl)
    return out


def collapse_operators(d: DickeParams, space: HilbertSpace) -> list:
    """Collapse operators of the reduced dynamics on the joint space."""
    ops = []
    if d.kappa > 0:
        c = build_cavity_operators(space)["c"]
        ops.append(np.sqrt(d.kappa) * tensor_lift(c, space, "cavity"))
    if d.Gamma_phi > 0:
        jz = build_spin_operators(space)["J_z"]
        ops.append(np.sqrt(d.Gamma_phi / 2.0) * tensor_lift(jz, space, "spin"))
    return ops


@dataclass(frozen=True)
class EvolutionSpec:
    dicke: DickeParams
    space: HilbertSpace
    t_final: float | None = None  # defaults to t_1 = 2 pi / omega_c
    rtol: float = 1e-8
    atol: float = 1e-10
    initial_state: np.ndarray | None = None  # vector or density matrix
    frame: str = "lab"  # "lab" | "interaction"
    n_samples: int | None = None  # default: 200 per period t_1
    store_states: bool = False
    method: str = "auto"  # "auto" | "master" | "pure"
    allow_retry: bool = True
    backend: str | None = None  # kernel backend override

    def __post_init__(self):
        if self.frame not in ("lab", "interaction"):
            raise ValueError(f"unknown frame {self.frame!r}")
        if self.method not in ("auto", "master", "pure"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.t_final is not None and self.t_final <= 0:
            raise ValueError("t_final must be positive")

    def resolved_t_final(self) -> float:
        return self.t_final if self.t_final is not None else self.dicke.t1

    def resolved_n_samples(self) -> int:
        if self.n_samples is not None:
            return self.n_samples
        periods = self.resolved_t_final() / self.dicke.t1
        return max(20, int(np.ceil(200 * periods)))


@dataclass
class EvolutionResult:
    spec: EvolutionSpec
    space: HilbertSpace  # may differ from spec.space after a truncation retry
    times: np.ndarray
    final_state: np.ndarray  # density matrix on `space`
    cavity_photons: np.ndarray
    tail_population: np.ndarray  # top-two Fock-level occupancy per sample
    trace_drift: float
    hermiticity_drift: float
    status: str  # "ok" | "failed-trace" | "truncation-unsafe" | "integrator-failed"
    pure_path: bool
    retried: bool = False
    states: list | None = None
    n_rhs_evals: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def max_tail_population(self) -> float:
        return float(np.max(self.tail_population))

    def final_spin_state(self) -> np.ndarray:
        return spin_reduced(self.final_state, self.space)

    def min_eigenvalue(self) -> float:
        return float(np.min(la.eigvalsh(self.final_state)))


def _normalize_initial(spec: EvolutionSpec, space: HilbertSpace):
    """Return (psi or None, rho or None) on the given space."""
    d = space.total_dim
    state = spec.initial_state
    if state is None:
        return ground_state(space), None
    state = np.asarray(state, dtype=np.complex128)
    if state.ndim == 1:
        if state.shape[0] != d:
            state = _embed_vector(state, spec.space, space)
        norm = np.linalg.norm(state)
        if abs(norm - 1.0) > 1e-8:
            raise ValueError(f"initial state norm {norm} deviates from 1")
        return state, None
    if state.shape[0] != d:
        state = _embed_matrix(state, spec.space, space)
    tr = np.trace(state).real
    if abs(tr - 1.0) > 1e-10:
        raise ValueError(f"initial density matrix trace {tr} deviates from 1")
    w = la.eigvalsh(state)
    if w.min() < -1e-8:
        raise ValueError(f"initial density matrix is not positive (min eig {w.min()})")
    return None, state


def _embed_vector(psi, old: HilbertSpace, new: HilbertSpace):
    if old.spin_dim != new.spin_dim or new.n_max < old.n_max:
        raise ValueError("cannot embed state into the target space")
    out = np.zeros(new.total_dim, dtype=np.complex128)
    out[: old.total_dim] = psi
    return out


def _embed_matrix(rho, old: HilbertSpace, new: HilbertSpace):
    if old.spin_dim != new.spin_dim or new.n_max < old.n_max:
        raise ValueError("cannot embed state into the target space")
    out = np.zeros((new.total_dim, new.total_dim), dtype=np.complex128)
    out[: old.total_dim, : old.total_dim] = rho
    return out


class _FrameHamiltonian:
    """Static or periodically modulated Hamiltonian with a frozen CSR pattern."""

    def __init__(self, d: DickeParams, space: HilbertSpace, frame: str):
        self.frame = frame
        self.omega_c = d.omega_c
        if frame == "lab":
            self.h0 = build_dicke_hamiltonian(d, space).mat
            self.time_dependent = False
            return
        self.time_dependent = True
        cav = build_cavity_operators(space)
        spn = build_spin_operators(space)
        hq = (d.omega_q * tensor_lift(spn["J_z"], space, "spin")).mat
        p_up = (2.0 * d.lam * tensor_lift(cav["c_dag"], space, "cavity")
                @ tensor_lift(spn["J_x"], space, "spin")).mat
        p_dn = p_up.conj().T.tocsr()

        def pattern(mat):
            out = mat.copy().tocsr()
            out.data = np.ones_like(out.data, dtype=np.float64)
            return out

        # union pattern built from all-ones copies so no entry cancels away
        template = (pattern(hq) + pattern(p_up) + pattern(p_dn)).tocsr()
        template.sort_indices()
        template = template.astype(np.complex128)
        template.data[:] = 0.0
        self.h0 = template.copy()

        def aligned(mat):
            # expand component values onto the union sparsity pattern
            out = np.zeros(template.nnz, dtype=np.complex128)
            coo = mat.tocoo()
            for r, c, v in zip(coo.row, coo.col, coo.data):
                lo, hi = template.indptr[r], template.indptr[r + 1]
                pos = lo + np.searchsorted(template.indices[lo:hi], c)
                if pos >= hi or template.indices[pos] != c:
                    raise RuntimeError("component entry missing from CSR template")
                out[pos] += v
            return out

        self._dq = aligned(hq)
        self._dup = aligned(p_up)
        self._ddn = aligned(p_dn)

    def data_at(self, t: float) -> np.ndarray:
        ph = np.exp(1j * self.omega_c * t)
        return self._dq + ph * self._dup + np.conj(ph) * self._ddn


def evolve_master(spec: EvolutionSpec) -> EvolutionResult:
    """Propagate the master equation (or its pure-state reduction) to t_final.

    On a Fock-truncation violation the run is retried once with n_max
    doubled; if still unsafe, the result carries status "truncation-unsafe".
    """
    try:
        result = _evolve_once(spec, spec.space)
        if result.status == "truncation-unsafe" and spec.allow_retry:
            bigger = HilbertSpace(spec.space.n_atoms, 2 * spec.space.n_max)
            retry = _evolve_once(spec, bigger)
            retry.retried = True
            return retry
        return result
    finally:
        # scipy's OdeSolver wraps the RHS in a closure that references the
        # solver itself, so each integration strands its state arrays in a
        # reference cycle; without an explicit collection, long sweeps
        # exhaust memory before the generational GC runs.
        gc.collect()


def _evolve_once(spec: EvolutionSpec, space: HilbertSpace) -> EvolutionResult:
    d = space.total_dim
    s = space.spin_dim
    psi0, rho0 = _normalize_initial(spec, space)

    use_pure = spec.method == "pure" or (
        spec.method == "auto"
        and psi0 is not None
        and spec.dicke.kappa == 0
        and spec.dicke.Gamma_phi == 0
    )
    if spec.method == "pure":
        if psi0 is None:
            raise ValueError("pure-state propagation needs a state vector")
        if spec.dicke.kappa != 0 or spec.dicke.Gamma_phi != 0:
            raise ValueError("pure-state propagation requires kappa = Gamma_phi = 0")

    ham = _FrameHamiltonian(spec.dicke, space, spec.frame)
    nphot = np.repeat(np.arange(space.n_max, dtype=float), s)
    tail_mask = nphot >= space.n_max - 2

    n_evals = [0]

    if use_pure:
        h_csr = ham.h0.copy()

        def fun(t, y):
            n_evals[0] += 1
            if ham.time_dependent:
                h_csr.data[:] = ham.data_at(t)
            return -1j * (h_csr @ y)

        y0 = psi0
    else:
        jz_diag = np.arange(s) - space.j
        rhs = LindbladRHS(
            ham.h0, spin_dim=s, n_max=space.n_max,
            kappa=spec.dicke.kappa, gamma_phi=spec.dicke.Gamma_phi,
            jz_diag=jz_diag, backend=spec.backend,
        )

        def fun(t, y):
            n_evals[0] += 1
            if ham.time_dependent:
                rhs.set_hamiltonian_data(ham.data_at(t))
            return rhs(y.reshape(d, d)).ravel()

        y0 = (rho0 if rho0 is not None else np.outer(psi0, psi0.conj())).ravel()

    t_final = spec.resolved_t_final()
    n_samples = spec.resolved_n_samples()
    sample_times = np.linspace(0.0, t_final, n_samples + 1)

    photons = np.empty(n_samples + 1)
    tail = np.empty(n_samples + 1)
    trace_drift = 0.0
    herm_drift = 0.0
    states = [] if spec.store_states else None

    def record(idx, y):
        nonlocal trace_drift, herm_drift
        if use_pure:
            pops = np.abs(y) ** 2
            trace_drift = max(trace_drift, abs(pops.sum() - 1.0))
            rho_full = None
        else:
            rho_full = y.reshape(d, d)
            pops = np.diag(rho_full).real
            trace_drift = max(trace_drift, abs(pops.sum() - 1.0))
            herm_drift = max(herm_drift, np.max(np.abs(rho_full - rho_full.conj().T)))
        photons[idx] = float(nphot @ pops)
        tail[idx] = float(pops[tail_mask].sum())
        if states is not None:
            states.append(np.outer(y, y.conj()) if use_pure else rho_full.copy())

    record(0, y0)
    integ = RK45(fun, 0.0, y0, t_bound=t_final, rtol=spec.rtol, atol=spec.atol)
    next_idx = 1
    status = "ok"
    while integ.status == "running":
        integ.step()
        if integ.status == "failed":
            status = "integrator-failed"
            break
        while next_idx <= n_samples and sample_times[next_idx] <= integ.t + 1e-300:
            if sample_times[next_idx] < integ.t:
                y_s = integ.dense_output()(sample_times[next_idx])
            else:
                y_s = integ.y
            record(next_idx, y_s)
            next_idx += 1

    y_end = integ.y
    if use_pure:
        # integrator norm error is recorded in trace_drift; the returned
        # state is renormalized (Schrodinger flow is exactly norm-preserving)
        y_end = y_end / np.linalg.norm(y_end)
        final = np.outer(y_end, y_end.conj())
    else:
        final = y_end.reshape(d, d).copy()

    if status == "ok":
        if np.max(tail[: next_idx]) > TAIL_POPULATION_LIMIT:
            status = "truncation-unsafe"
        elif trace_drift > TRACE_DRIFT_LIMIT:
            status = "failed-trace"

    return EvolutionResult(
        spec=spec,
        space=space,
        times=sample_times,
        final_state=final,
        cavity_photons=photons,
        tail_population=tail,
        trace_drift=float(trace_drift),
        hermiticity_drift=float(herm_drift),
        status=status,
        pure_path=use_pure,
        states=states,
        n_rhs_evals=n_evals[0],
    )


# ---------------------------------------------------------------------------
# exact geometric-phase evolution
# ---------------------------------------------------------------------------


def apply_geometric_unitary(state: np.ndarray, theta: float, alpha_coeff: complex,
                            lam: float, omega_c: float, space: HilbertSpace) -> np.ndarray:
    """Apply U(t) = e^{i theta J_x^2} e^{(2 lam/omega_c)(alpha c^dag - alpha* c) J_x}.

    The twisting factor is diagonal in the J_x eigenbasis; the displacement
    factor is a cavity displacement conditioned on the J_x eigenvalue.
    Spin-only states (dimension N_a + 1) are accepted when alpha_coeff = 0.
    """
    state = np.asarray(state, dtype=np.complex128)
    jx = build_spin_operators(space)["J_x"].toarray()
    evals, v = np.linalg.eigh(jx)
    twist_spin = (v * np.exp(1j * theta * evals**2)) @ v.conj().T

    spin_only = state.shape[0] == space.spin_dim
    if spin_only:
        if abs(alpha_coeff) > 1e-14:
            raise ValueError("spin-only states require alpha_coeff = 0")
        u = twist_spin
    elif state.shape[0] == space.total_dim:
        n = space.n_max
        c = build_cavity_operators(space)["c"].toarray()
        u_disp = np.zeros((space.total_dim, space.total_dim), dtype=np.complex128)
        for k, x in enumerate(evals):
            beta = (2.0 * lam / omega_c) * alpha_coeff * x
            disp = la.expm(beta * c.conj().T - np.conj(beta) * c)
            proj = np.outer(v[:, k], v[:, k].conj())
            u_disp += np.kron(disp, proj)
        u = np.kron(np.eye(n), twist_spin) @ u_disp
    else:
        raise ValueError(
            f"state dimension {state.shape[0]} matches neither the spin ({space.spin_dim}) "
            f"nor the joint ({space.total_dim}) space"
        )

    if state.ndim == 1:
        return u @ state
    return u @ state @ u.conj().T


def decoupling_check(result: EvolutionResult) -> dict:
    """Residual cavity excitation and spin purity at the end of the run."""
    rho_spin = result.final_spin_state()
    purity = float(np.trace(rho_spin @ rho_spin).real)
    photons_final = float(result.cavity_photons[-1])
    ideal = (result.spec.dicke.kappa == 0 and result.spec.dicke.Gamma_phi == 0)
    return {
        "cavity_photons_final": photons_final,
        "spin_purity": purity,
        "ideal_run": ideal,
        "decoupled": photons_final < 1e-6 and purity > 0.999,
    }


# ---------------------------------------------------------------------------
# adiabatic-elimination cross-check against the full double-Lambda model
# ---------------------------------------------------------------------------


def _symmetric_ground_map(n_atoms: int, n_max: int) -> np.ndarray:
    """Isometry from the full cavity (x) 4^N space onto cavity (x) Dicke space.

    Maps the symmetric ground-manifold combinations onto |J, m>; everything
    outside the ground manifold (or antisymmetric) is annihilated.
    """
    if n_atoms == 1:
        spin_map = np.zeros((2, 4))
        spin_map[0, 0] = 1.0  # g -> m = -1/2
        spin_map[1, 1] = 1.0  # e -> m = +1/2
    elif n_atoms == 2:
        spin_map = np.zeros((3, 16))
        spin_map[0, 0] = 1.0  # gg -> m = -1
        spin_map[1, 1] = spin_map[1, 4] = 1.0 / np.sqrt(2.0)  # (ge+eg)/sqrt2
        spin_map[2, 5] = 1.0  # ee -> m = +1
    else:
        raise ValueError("ground-manifold map is defined for N_a <= 2")
    return np.kron(np.eye(n_max), spin_map)


def full_model_check(p, n_atoms: int = 1, n_max: int = 8,
                     rtol: float = 1e-8, atol: float = 1e-10) -> dict:
    """Co-propagate the full double-Lambda model and the effective model.

    Reports the peak excited-state population (leakage out of the ground
    manifold, which adiabatic elimination assumes small) and the fidelity
    between the two ground-manifold states after one period t_1.
    """
    from .model import build_full_lambda_hamiltonian, effective_params

    eff = effective_params(p)
    dicke = replace(eff.dicke, N_a=n_atoms, kappa=0.0, Gamma_phi=0.0)
    t1 = dicke.t1

    h_full = build_full_lambda_hamiltonian(p, n_atoms, n_max).mat
    atom_dim = 4**n_atoms
    psi = np.zeros(n_max * atom_dim, dtype=np.complex128)
    psi[0] = 1.0  # vacuum, all atoms in |g>

    # excited-state projector diagonal: any atom in |r> or |s>
    def atom_excited(idx):
        for _ in range(n_atoms):
            if idx % 4 >= 2:
                return True
            idx //= 4
        return False

    excited_mask = np.array(
        [atom_excited(i % atom_dim) for i in range(n_max * atom_dim)]
    )

    def fun(t, y):
        return -1j * (h_full @ y)

    integ = RK45(fun, 0.0, psi, t_bound=t1, rtol=rtol, atol=atol)
    max_excited = 0.0
    while integ.status == "running":
        integ.step()
        if integ.status == "failed":
            raise RuntimeError("full-model integration failed")
        max_excited = max(
            max_excited, float(np.sum(np.abs(integ.y[excited_mask]) ** 2))
        )
    psi_full = integ.y

    iso = _symmetric_ground_map(n_atoms, n_max)
    projected = iso @ psi_full
    leakage = 1.0 - float(np.linalg.norm(projected) ** 2)
    projected = projected / np.linalg.norm(projected)

    space = HilbertSpace(n_atoms, n_max)
    eff_result = evolve_master(EvolutionSpec(
        dicke=dicke, space=space, rtol=rtol, atol=atol, allow_retry=False,
    ))
    fidelity = float(
        np.real(projected.conj() @ eff_result.final_state @ projected)
    )

    ratios = p.adiabaticity_ratios()
    bound = 5.0 * ratios["Omega_r/2Delta_r"] ** 2
    return {
        "n_atoms": n_atoms,
        "t1": t1,
        "max_excited_population": max_excited,
        "excited_population_bound": bound,
        "within_bound": bool(max_excited < bound),
        "ground_manifold_leakage_at_t1": leakage,
        "fidelity_effective_vs_full": fidelity,
        "effective_omega_c": dicke.omega_c,
        "effective_omega_q": dicke.omega_q,
        "effective_lambda": dicke.lam,
    }


def state_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity F(rho, sigma) = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    sr = la.sqrtm(rho)
    inner = sr @ sigma @ sr
    w = la.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)
