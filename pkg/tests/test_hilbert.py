"""Operator algebra on the joint cavity (x) Dicke space."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpsqueeze.hilbert import (
    BasisMismatchError,
    HilbertSpace,
    QOperator,
    build_cavity_operators,
    build_spin_operators,
    cavity_reduced,
    ground_state,
    hp_boson_observables,
    spin_reduced,
    tensor,
    tensor_lift,
)


def test_space_dimensions():
    space = HilbertSpace(n_atoms=5, n_max=8)
    assert space.j == 2.5
    assert space.spin_dim == 6
    assert space.total_dim == 48
    np.testing.assert_allclose(space.m_values, np.arange(6) - 2.5)


def test_space_bounds_rejected():
    with pytest.raises(ValueError):
        HilbertSpace(n_atoms=0, n_max=4)
    with pytest.raises(ValueError):
        HilbertSpace(n_atoms=3, n_max=1)


class TestSpinOperators:
    def test_single_spin_jz_eigenvalues(self):
        ops = build_spin_operators(HilbertSpace(1, 2))
        np.testing.assert_allclose(
            np.diag(ops["J_z"].toarray()).real, [-0.5, 0.5]
        )

    def test_two_spin_ladder_elements(self):
        # ladder formula sqrt(J(J+1) - m(m+1)) with J=1 gives sqrt(2) twice
        jp = build_spin_operators(HilbertSpace(2, 2))["J_plus"].toarray()
        root2 = np.sqrt(2.0)
        assert jp[1, 0] == pytest.approx(root2, abs=1e-14)
        assert jp[2, 1] == pytest.approx(root2, abs=1e-14)
        assert np.count_nonzero(jp) == 2

    @given(st.integers(min_value=1, max_value=20))
    @settings(max_examples=20, deadline=None)
    def test_su2_algebra(self, n_atoms):
        ops = build_spin_operators(HilbertSpace(n_atoms, 2))
        jx, jy, jz = (ops[k].toarray() for k in ("J_x", "J_y", "J_z"))
        np.testing.assert_allclose(jx @ jy - jy @ jx, 1j * jz, atol=1e-12)
        np.testing.assert_allclose(jy @ jz - jz @ jy, 1j * jx, atol=1e-12)
        np.testing.assert_allclose(jz @ jx - jx @ jz, 1j * jy, atol=1e-12)
        j = n_atoms / 2.0
        j_sq = jx @ jx + jy @ jy + jz @ jz
        np.testing.assert_allclose(
            j_sq, j * (j + 1) * np.eye(n_atoms + 1), atol=1e-12
        )

    def test_ladder_adjoints(self):
        ops = build_spin_operators(HilbertSpace(7, 2))
        assert (ops["J_plus"].dag().mat != ops["J_minus"].mat).nnz == 0

    def test_jbar_x_normalization(self):
        ops = build_spin_operators(HilbertSpace(9, 2))
        np.testing.assert_allclose(
            ops["Jbar_x"].toarray(), ops["J_x"].toarray() / 3.0, atol=1e-14
        )


class TestCavityOperators:
    def test_two_level_annihilation(self):
        c = build_cavity_operators(HilbertSpace(1, 2))["c"].toarray()
        expected = np.zeros((2, 2))
        expected[0, 1] = 1.0
        np.testing.assert_allclose(c, expected)

    def test_truncated_commutator(self):
        # [c, c^dag] = I except the top corner, which is 1 - n_max
        n_max = 7
        ops = build_cavity_operators(HilbertSpace(1, n_max))
        c, cd = ops["c"].toarray(), ops["c_dag"].toarray()
        comm = c @ cd - cd @ c
        expected = np.eye(n_max)
        expected[-1, -1] = 1 - n_max
        np.testing.assert_allclose(comm, expected, atol=1e-12)

    def test_number_operator_eigenvalue(self):
        n_op = build_cavity_operators(HilbertSpace(1, 6))["n_op"].toarray()
        fock3 = np.zeros(6)
        fock3[3] = 1.0
        np.testing.assert_allclose(n_op @ fock3, 3.0 * fock3)

    def test_n_op_equals_cdag_c(self):
        ops = build_cavity_operators(HilbertSpace(1, 9))
        np.testing.assert_allclose(
            ops["n_op"].toarray(),
            ops["c_dag"].toarray() @ ops["c"].toarray(),
            atol=1e-12,
        )


class TestTensorLift:
    def test_identity_lifts_to_identity(self):
        space = HilbertSpace(3, 5)
        eye_spin = QOperator(np.eye(space.spin_dim), space.spin_tag)
        lifted = tensor_lift(eye_spin, space, "spin")
        np.testing.assert_allclose(lifted.toarray(), np.eye(space.total_dim))

    def test_disjoint_factors_commute(self):
        space = HilbertSpace(4, 6)
        n_l = tensor_lift(build_cavity_operators(space)["n_op"], space, "cavity")
        jz_l = tensor_lift(build_spin_operators(space)["J_z"], space, "spin")
        comm = n_l.mat @ jz_l.mat - jz_l.mat @ n_l.mat
        assert abs(comm).max() == 0.0

    def test_trace_scales_by_other_dim(self):
        space = HilbertSpace(3, 5)
        jz = build_spin_operators(space)["J_z"]
        lifted = tensor_lift(jz, space, "spin")
        assert np.trace(lifted.toarray()) == pytest.approx(
            np.trace(jz.toarray()) * space.n_max
        )

    def test_wrong_subspace_rejected(self):
        space = HilbertSpace(3, 5)
        jz = build_spin_operators(space)["J_z"]
        with pytest.raises(BasisMismatchError):
            tensor_lift(jz, space, "cavity")

    def test_product_state_expectation_factorizes(self):
        space = HilbertSpace(2, 4)
        rng = np.random.default_rng(7)
        psi_c = rng.normal(size=space.n_max) + 1j * rng.normal(size=space.n_max)
        psi_s = rng.normal(size=space.spin_dim) + 1j * rng.normal(size=space.spin_dim)
        psi_c /= np.linalg.norm(psi_c)
        psi_s /= np.linalg.norm(psi_s)
        joint = np.kron(psi_c, psi_s)
        rho = np.outer(joint, joint.conj())
        n_op = build_cavity_operators(space)["n_op"]
        jx = build_spin_operators(space)["J_x"]
        prod = tensor(n_op, jx, space)
        lhs = prod.expect(rho)
        rhs = (psi_c.conj() @ n_op.toarray() @ psi_c) * (
            psi_s.conj() @ jx.toarray() @ psi_s
        )
        assert lhs == pytest.approx(rhs, abs=1e-12)


class TestQOperator:
    def test_basis_mismatch_on_add(self):
        a = QOperator(np.eye(2), "spin[N=1]")
        b = QOperator(np.eye(2), "cavity[n_max=2]")
        with pytest.raises(BasisMismatchError):
            a + b

    def test_hermiticity_check(self):
        herm = QOperator([[0, 1j], [-1j, 0]], "t")
        assert herm.is_hermitian()
        skew = QOperator([[0, 1j], [1j, 0]], "t")
        assert not skew.is_hermitian()

    def test_nonsquare_rejected(self):
        with pytest.raises(ValueError):
            QOperator(np.zeros((2, 3)), "t")


class TestPartialTraces:
    def test_ground_state_reductions(self):
        space = HilbertSpace(3, 4)
        psi = ground_state(space)
        rho = np.outer(psi, psi.conj())
        rho_s = spin_reduced(rho, space)
        rho_c = cavity_reduced(rho, space)
        assert rho_s[0, 0] == pytest.approx(1.0)
        assert rho_c[0, 0] == pytest.approx(1.0)
        assert np.trace(rho_s) == pytest.approx(1.0)
        assert np.trace(rho_c) == pytest.approx(1.0)

    def test_partial_traces_preserve_trace(self):
        space = HilbertSpace(2, 3)
        rng = np.random.default_rng(0)
        a = rng.normal(size=(space.total_dim, space.total_dim))
        rho = a @ a.T
        rho = rho / np.trace(rho)
        assert np.trace(spin_reduced(rho, space)) == pytest.approx(1.0)
        assert np.trace(cavity_reduced(rho, space)) == pytest.approx(1.0)


class TestHPObservables:
    def test_ground_dicke_is_vacuum(self):
        n = 6
        rho = np.zeros((n + 1, n + 1))
        rho[0, 0] = 1.0
        obs = hp_boson_observables(rho, n)
        assert obs["n_a"] == 0.0
        assert obs["n_a_sq"] == 0.0

    def test_fully_excited(self):
        n = 6
        rho = np.zeros((n + 1, n + 1))
        rho[-1, -1] = 1.0
        assert hp_boson_observables(rho, n)["n_a"] == pytest.approx(n)

    def test_equal_mixture_of_lowest_two(self):
        n = 4
        rho = np.zeros((n + 1, n + 1))
        rho[0, 0] = rho[1, 1] = 0.5
        obs = hp_boson_observables(rho, n)
        assert obs["n_a"] == pytest.approx(0.5)
        assert obs["n_a_sq"] == pytest.approx(0.5)

    def test_unnormalized_rejected(self):
        rho = np.eye(3)  # trace 3
        with pytest.raises(ValueError):
            hp_boson_observables(rho, 2)

    @given(st.integers(min_value=1, max_value=12), st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_jz_consistency(self, n_atoms, seed):
        # <J_z> from the spin matrix equals n_a - N/2 from the HP moments
        rng = np.random.default_rng(seed)
        dim = n_atoms + 1
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        rho = a @ a.conj().T
        rho /= np.trace(rho).real
        jz = build_spin_operators(HilbertSpace(n_atoms, 2))["J_z"].toarray()
        lhs = np.trace(jz @ rho).real
        rhs = hp_boson_observables(rho, n_atoms)["n_a"] - n_atoms / 2.0
        assert lhs == pytest.approx(rhs, abs=1e-10)
