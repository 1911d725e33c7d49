"""Joint cavity (x) collective-spin Hilbert space and sparse operator algebra.

Everything lives in the symmetric Dicke sector J = N_a/2, so the spin factor
has dimension N_a + 1 with basis |J, m>, m ascending from -J.  The cavity
factor is a truncated Fock space of n_max levels.  Tensor ordering is fixed:
cavity index varies slowest, i.e. joint index = n * spin_dim + s.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

HERMITICITY_ATOL = 1e-12


class BasisMismatchError(ValueError):
    """Operators on incompatible bases were combined."""


@dataclass(frozen=True)
class HilbertSpace:
    """Descriptor of the joint cavity (x) Dicke space."""

    n_atoms: int
    n_max: int = 16

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ValueError(f"n_atoms must be >= 1, got {self.n_atoms}")
        if self.n_max < 2:
            raise ValueError(f"n_max must be >= 2, got {self.n_max}")

    @property
    def j(self) -> float:
        return self.n_atoms / 2.0

    @property
    def spin_dim(self) -> int:
        return self.n_atoms + 1

    @property
    def total_dim(self) -> int:
        return self.n_max * self.spin_dim

    @property
    def m_values(self) -> np.ndarray:
        """Dicke projections m = -J ... +J, ascending."""
        return np.arange(self.spin_dim) - self.j

    @property
    def spin_tag(self) -> str:
        return f"spin[N={self.n_atoms}]"

    @property
    def cavity_tag(self) -> str:
        return f"cavity[n_max={self.n_max}]"

    @property
    def joint_tag(self) -> str:
        return f"joint[n_max={self.n_max},N={self.n_atoms}]"

    def subspace_tag(self, which: str) -> str:
        if which == "cavity":
            return self.cavity_tag
        if which == "spin":
            return self.spin_tag
        raise ValueError(f"unknown subspace {which!r}")


class QOperator:
    """Sparse complex operator tagged with the basis it acts on."""

    __slots__ = ("mat", "basis_tag")

    def __init__(self, mat, basis_tag: str, check_hermitian: bool = False):
        mat = sp.csr_matrix(mat, dtype=np.complex128)
        if mat.shape[0] != mat.shape[1]:
            raise ValueError(f"operator must be square, got shape {mat.shape}")
        self.mat = mat
        self.basis_tag = basis_tag
        if check_hermitian and not self.is_hermitian():
            raise ValueError(f"operator tagged {basis_tag} is not Hermitian")

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def _require_same_basis(self, other: "QOperator"):
        if not isinstance(other, QOperator):
            raise TypeError(f"expected QOperator, got {type(other).__name__}")
        if self.basis_tag != other.basis_tag:
            raise BasisMismatchError(
                f"cannot combine {self.basis_tag} with {other.basis_tag}"
            )

    def __add__(self, other):
        self._require_same_basis(other)
        return QOperator(self.mat + other.mat, self.basis_tag)

    def __sub__(self, other):
        self._require_same_basis(other)
        return QOperator(self.mat - other.mat, self.basis_tag)

    def __mul__(self, scalar):
        return QOperator(self.mat * complex(scalar), self.basis_tag)

    __rmul__ = __mul__

    def __neg__(self):
        return QOperator(-self.mat, self.basis_tag)

    def __matmul__(self, other):
        self._require_same_basis(other)
        return QOperator(self.mat @ other.mat, self.basis_tag)

    def dag(self) -> "QOperator":
        return QOperator(self.mat.conj().T.tocsr(), self.basis_tag)

    def toarray(self) -> np.ndarray:
        return self.mat.toarray()

    def is_hermitian(self, atol: float = HERMITICITY_ATOL) -> bool:
        diff = self.mat - self.mat.conj().T
        if diff.nnz == 0:
            return True
        scale = max(1.0, abs(self.mat.max()))
        return np.max(np.abs(diff.data)) < atol * scale

    def expect(self, rho: np.ndarray) -> complex:
        """Tr(A rho) for a dense density matrix on the same basis."""
        if rho.shape != self.mat.shape:
            raise BasisMismatchError(
                f"density matrix shape {rho.shape} does not match dim {self.dim}"
            )
        return complex((self.mat.multiply(rho.T)).sum())

    def __repr__(self):
        return f"QOperator(dim={self.dim}, basis={self.basis_tag!r}, nnz={self.mat.nnz})"


def build_spin_operators(space: HilbertSpace) -> dict:
    """Collective spin operators in the Dicke basis |J, m>, m ascending.

    Returns J_x, J_y, J_z, J_plus, J_minus and the normalized
    Jbar_x = J_x / sqrt(N_a).
    """
    j = space.j
    m = space.m_values
    tag = space.spin_tag
    dim = space.spin_dim

    # <J, m+1| J_+ |J, m> = sqrt(J(J+1) - m(m+1)); with ascending-m ordering
    # the raising operator sits on the subdiagonal (row = m+1, col = m).
    ladder = np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1))
    jp = sp.diags(ladder, offsets=-1, shape=(dim, dim), format="csr")
    jm = sp.diags(ladder, offsets=+1, shape=(dim, dim), format="csr")
    jz = sp.diags(m, format="csr")
    jx = 0.5 * (jp + jm)
    jy = -0.5j * (jp - jm)

    return {
        "J_x": QOperator(jx, tag),
        "J_y": QOperator(jy, tag),
        "J_z": QOperator(jz, tag),
        "J_plus": QOperator(jp, tag),
        "J_minus": QOperator(jm, tag),
        "Jbar_x": QOperator(jx / np.sqrt(space.n_atoms), tag),
    }


def build_cavity_operators(space: HilbertSpace) -> dict:
    """Truncated cavity ladder operators: c, c_dag and the number operator."""
    n = space.n_max
    tag = space.cavity_tag
    c = sp.diags(np.sqrt(np.arange(1, n)), offsets=1, shape=(n, n), format="csr")
    c_dag = c.conj().T.tocsr()
    n_op = sp.diags(np.arange(n, dtype=float), format="csr")
    return {
        "c": QOperator(c, tag),
        "c_dag": QOperator(c_dag, tag),
        "n_op": QOperator(n_op, tag),
    }


def tensor_lift(op: QOperator, space: HilbertSpace, which: str) -> QOperator:
    """Lift a subspace operator to the joint space (cavity factor first)."""
    expected = space.subspace_tag(which)
    if op.basis_tag != expected:
        raise BasisMismatchError(
            f"operator on {op.basis_tag} cannot be lifted as {which} "
            f"(expected {expected})"
        )
    if which == "cavity":
        full = sp.kron(op.mat, sp.identity(space.spin_dim, format="csr"), format="csr")
    else:
        full = sp.kron(sp.identity(space.n_max, format="csr"), op.mat, format="csr")
    return QOperator(full, space.joint_tag)


def tensor(op_cavity: QOperator, op_spin: QOperator, space: HilbertSpace) -> QOperator:
    """Full tensor product op_cavity (x) op_spin on the joint space."""
    if op_cavity.basis_tag != space.cavity_tag:
        raise BasisMismatchError(f"first factor must be cavity, got {op_cavity.basis_tag}")
    if op_spin.basis_tag != space.spin_tag:
        raise BasisMismatchError(f"second factor must be spin, got {op_spin.basis_tag}")
    return QOperator(sp.kron(op_cavity.mat, op_spin.mat, format="csr"), space.joint_tag)


def ground_state(space: HilbertSpace) -> np.ndarray:
    """|0>_cav (x) |J, -J>: cavity vacuum, all spins down."""
    psi = np.zeros(space.total_dim, dtype=np.complex128)
    psi[0] = 1.0  # index n=0, m=-J is the very first joint basis state
    return psi


def spin_reduced(rho: np.ndarray, space: HilbertSpace) -> np.ndarray:
    """Partial trace over the cavity factor."""
    s = space.spin_dim
    r = rho.reshape(space.n_max, s, space.n_max, s)
    return np.einsum("asat->st", r)


def cavity_reduced(rho: np.ndarray, space: HilbertSpace) -> np.ndarray:
    """Partial trace over the spin factor."""
    s = space.spin_dim
    r = rho.reshape(space.n_max, s, space.n_max, s)
    return np.einsum("asbs->ab", r)


def hp_boson_observables(rho_spin: np.ndarray, n_atoms: int) -> dict:
    """First two moments of the collective bosonic excitation number.

    |J, m> corresponds to the Fock state |J + m> of the collective boson,
    so the number operator is diagonal with eigenvalue J + m.
    """
    dim = n_atoms + 1
    if rho_spin.shape != (dim, dim):
        raise ValueError(
            f"expected a {dim}x{dim} spin density matrix, got {rho_spin.shape}"
        )
    tr = np.trace(rho_spin).real
    if abs(tr - 1.0) > 1e-8:
        raise ValueError(f"density matrix trace {tr} deviates from 1 by > 1e-8")
    pops = np.diag(rho_spin).real
    n_vals = np.arange(dim, dtype=float)  # J + m for ascending m
    return {
        "n_a": float(pops @ n_vals),
        "n_a_sq": float(pops @ n_vals**2),
    }
