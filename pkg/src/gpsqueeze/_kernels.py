"""Hot inner loops of the Lindblad right-hand side.

Two interchangeable backends compute the same map:

    drho = -i [H, rho] + kappa D[c (x) I] rho + (Gamma_phi/2) D[I (x) J_z] rho

* ``numba``: a fused @njit kernel (CSR matmul + elementwise dissipators).
* ``numpy``: scipy sparse matmul plus vectorized elementwise terms.

The backend is picked automatically; set the environment variable
``GPSQUEEZE_NO_NUMBA=1`` to force the pure-numpy path.

Both dissipators act elementwise in the joint basis (J_z lifted is diagonal;
the cavity jump is a block shift), so no collapse-operator matmuls are
needed.  For Hermitian H and Hermitian rho the commutator needs a single
sparse matmul, [H, rho] = A - A^dag with A = H rho; the kernels rely on this
(rho stays Hermitian to rounding along the flow because the map itself
produces exactly Hermitian output).
"""

from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp

NUMBA_ENV_FLAG = "GPSQUEEZE_NO_NUMBA"

try:
    from numba import njit, prange

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False


def numba_disabled() -> bool:
    return os.environ.get(NUMBA_ENV_FLAG, "").lower() in ("1", "true", "yes")


def default_backend() -> str:
    return "numpy" if (numba_disabled() or not _HAVE_NUMBA) else "numba"


if _HAVE_NUMBA:

    @njit(cache=True)
    def _rhs_kernel(indptr, indices, hdata, rho, damp, has_damp, kappa, spin_dim,
                    jump_w, scratch_a, out):
        d = rho.shape[0]
        # scratch_a = H @ rho
        for i in range(d):
            for k in range(d):
                scratch_a[i, k] = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                h = hdata[p]
                for k in range(d):
                    scratch_a[i, k] += h * rho[j, k]
        # -i [H, rho] = -i (A - A^dag), plus elementwise damping; tiled so the
        # transposed read of A stays cache-resident
        tile = 64
        for ib in range(0, d, tile):
            i_hi = min(ib + tile, d)
            for kb in range(0, d, tile):
                k_hi = min(kb + tile, d)
                for i in range(ib, i_hi):
                    for k in range(kb, k_hi):
                        val = -1j * (scratch_a[i, k] - np.conj(scratch_a[k, i]))
                        if has_damp:
                            val += damp[i, k] * rho[i, k]
                        out[i, k] = val
        # cavity jump: kappa * sqrt((n_i+1)(n_k+1)) rho[i+S, k+S]
        if kappa != 0.0:
            d_shift = d - spin_dim
            for i in range(d_shift):
                wi = kappa * jump_w[i]
                for k in range(d_shift):
                    out[i, k] += wi * jump_w[k] * rho[i + spin_dim, k + spin_dim]


class LindbladRHS:
    """Callable drho/dt for a fixed joint-space structure.

    H may be swapped per call (interaction-frame propagation) via
    ``set_hamiltonian_data``; the dissipator structure is frozen at build
    time.  Input density matrices are assumed Hermitian (see module notes).
    """

    def __init__(self, h_csr, spin_dim: int, n_max: int, kappa: float,
                 gamma_phi: float, jz_diag: np.ndarray, backend: str | None = None):
        d = h_csr.shape[0]
        if d != spin_dim * n_max:
            raise ValueError("Hamiltonian dimension does not match the space")
        self.dim = d
        self.spin_dim = spin_dim
        self.n_max = n_max
        self.kappa = float(kappa)
        self.gamma_phi = float(gamma_phi)
        self.backend = backend or default_backend()
        if self.backend not in ("numba", "numpy"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.backend == "numba" and not _HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable")

        self.set_hamiltonian(h_csr)

        # photon number and J_z eigenvalue per joint index (cavity slowest)
        nphot = np.repeat(np.arange(n_max, dtype=float), spin_dim)
        z = np.tile(np.asarray(jz_diag, dtype=float), n_max)

        self._has_damp = (self.kappa != 0.0) or (self.gamma_phi != 0.0)
        if self._has_damp:
            coef = -0.25 * self.gamma_phi * (z[:, None] - z[None, :]) ** 2
            coef = coef - 0.5 * self.kappa * (nphot[:, None] + nphot[None, :])
            self._damp = np.ascontiguousarray(coef)
        else:
            self._damp = np.zeros((1, 1))

        # sqrt(n+1) weights for indices below the top Fock block
        self._jump_w = np.sqrt(nphot[: d - spin_dim] + 1.0)
        if self.kappa != 0.0 and self.backend == "numpy":
            self._jump_outer = self.kappa * np.outer(self._jump_w, self._jump_w)

        if self.backend == "numba":
            self._scratch_a = np.empty((d, d), dtype=np.complex128)
        self._out = np.empty((d, d), dtype=np.complex128)

    def set_hamiltonian(self, h_csr):
        h = sp.csr_matrix(h_csr, dtype=np.complex128)
        h.sort_indices()
        self._h = h
        self._h_indptr = h.indptr
        self._h_indices = h.indices
        self._h_data = h.data

    def set_hamiltonian_data(self, data: np.ndarray):
        """Swap coefficient values on the frozen sparsity pattern."""
        if data.shape != self._h_data.shape:
            raise ValueError("data length does not match the frozen CSR pattern")
        self._h_data[:] = data

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        if self.backend == "numba":
            _rhs_kernel(self._h_indptr, self._h_indices, self._h_data, rho,
                        self._damp, self._has_damp, self.kappa, self.spin_dim,
                        self._jump_w, self._scratch_a, self._out)
            return self._out
        return self._numpy_rhs(rho)

    def _numpy_rhs(self, rho: np.ndarray) -> np.ndarray:
        a = self._h @ rho
        out = -1j * (a - a.conj().T)
        if self._has_damp:
            out += self._damp * rho
        if self.kappa != 0.0:
            s = self.spin_dim
            out[: -s, : -s] += self._jump_outer * rho[s:, s:]
        self._out = out
        return out
