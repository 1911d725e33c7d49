"""Spin-squeezing figures of merit for states on the Dicke ladder.

All metrics take the spin-reduced density matrix in the |J, m> basis
(m ascending) produced by :func:`gpsqueeze.hilbert.spin_reduced`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hilbert import HilbertSpace, build_spin_operators, hp_boson_observables


@dataclass(frozen=True)
class SqueezingReport:
    xi_s_sq: float
    xi_R_sq: float
    xi_R_sq_db: float
    j_vector: tuple
    n_a: float
    n_a_sq: float
    xi_min_var_sq: float
    delta_phi: float


def theta_opt(n_atoms: int) -> float:
    """Twisting phase minimizing the squeezing parameter, 6^(-1/6) (N/2)^(-2/3)."""
    if n_atoms < 2:
        raise ValueError("theta_opt requires at least 2 atoms")
    return 6.0 ** (-1.0 / 6.0) * (n_atoms / 2.0) ** (-2.0 / 3.0)


def db(xi_sq: float) -> float:
    """Squeezing in decibels, -10 log10(xi^2); positive means squeezed."""
    if xi_sq <= 0:
        raise ValueError(f"squeezing parameter must be positive, got {xi_sq}")
    return -10.0 * np.log10(xi_sq)


def _expect(op, rho):
    return complex(np.trace(op.toarray() @ rho))


def transverse_variance_min(rho_spin: np.ndarray, n_atoms: int) -> float:
    """Minimal variance of the spin component perpendicular to <J>.

    Solved in closed form from the 2x2 covariance matrix in the transverse
    plane.
    """
    space = HilbertSpace(n_atoms, n_max=2)  # cavity factor unused here
    ops = build_spin_operators(space)
    jx, jy, jz = (ops[k].toarray() for k in ("J_x", "J_y", "J_z"))
    jvec = np.array([np.trace(a @ rho_spin).real for a in (jx, jy, jz)])
    norm = np.linalg.norm(jvec)
    if norm < 1e-12:
        raise ValueError("mean spin vector vanishes; transverse plane undefined")
    u = jvec / norm
    # orthonormal transverse frame
    trial = np.array([1.0, 0.0, 0.0])
    if abs(u @ trial) > 0.9:
        trial = np.array([0.0, 1.0, 0.0])
    e1 = np.cross(u, trial)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(u, e1)

    a1 = e1[0] * jx + e1[1] * jy + e1[2] * jz
    a2 = e2[0] * jx + e2[1] * jy + e2[2] * jz
    m1 = np.trace(a1 @ rho_spin).real
    m2 = np.trace(a2 @ rho_spin).real
    c11 = np.trace(a1 @ a1 @ rho_spin).real - m1 * m1
    c22 = np.trace(a2 @ a2 @ rho_spin).real - m2 * m2
    c12 = 0.5 * np.trace((a1 @ a2 + a2 @ a1) @ rho_spin).real - m1 * m2
    # eigenvalues of [[c11, c12], [c12, c22]]
    half_tr = 0.5 * (c11 + c22)
    disc = np.sqrt(0.25 * (c11 - c22) ** 2 + c12**2)
    return half_tr - disc


def squeezing_report(rho_spin: np.ndarray, n_atoms: int) -> SqueezingReport:
    """Evaluate the squeezing parameters for a spin density matrix.

    xi_s^2 uses the bosonic-moment form
        xi_s^2 = 1 + 2<n> - 2<n^2>/N - (2/N)|<J_+^2>|
    which reduces to the Kitagawa-Ueda minimal transverse variance for
    states polarized along z; the direction-free minimal-variance value
    is reported alongside as a cross-check.
    """
    n = n_atoms
    space = HilbertSpace(n, n_max=2)
    ops = build_spin_operators(space)
    jx = ops["J_x"].toarray()
    jy = ops["J_y"].toarray()
    jz = ops["J_z"].toarray()
    jp = ops["J_plus"].toarray()

    hp = hp_boson_observables(rho_spin, n)
    jvec = tuple(np.trace(a @ rho_spin).real for a in (jx, jy, jz))
    jnorm = np.linalg.norm(jvec)
    if jnorm < 1e-12:
        raise ValueError("mean spin vector vanishes; xi_R^2 undefined")

    jp2 = np.trace(jp @ jp @ rho_spin)
    xi_s_sq = 1.0 + 2.0 * hp["n_a"] - 2.0 * hp["n_a_sq"] / n - 2.0 * abs(jp2) / n
    xi_R_sq = (n / (2.0 * jnorm)) ** 2 * xi_s_sq
    xi_min = 4.0 * transverse_variance_min(rho_spin, n) / n

    return SqueezingReport(
        xi_s_sq=float(xi_s_sq),
        xi_R_sq=float(xi_R_sq),
        xi_R_sq_db=db(xi_R_sq),
        j_vector=jvec,
        n_a=hp["n_a"],
        n_a_sq=hp["n_a_sq"],
        xi_min_var_sq=float(xi_min),
        delta_phi=float(np.sqrt(xi_R_sq / n)),
    )
