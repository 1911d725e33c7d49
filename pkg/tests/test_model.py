"""Effective-model reduction, Hamiltonian assembly, and presets."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpsqueeze.hilbert import HilbertSpace
from gpsqueeze.model import (
    TWO_PI,
    DickeParams,
    PhysicalParams,
    build_dicke_hamiltonian,
    build_full_lambda_hamiltonian,
    build_interaction_picture_coupling,
    effective_params,
    load_preset,
    rb_physical_params,
)


def _symmetric_physical(omega=1.0, g=0.01, delta=10.0, n_atoms=4, delta_cav=1.0):
    return PhysicalParams(
        g_r=g, g_s=g, Omega_r=omega, Omega_s=omega,
        Delta_r=delta, Delta_s=delta, delta_cav=delta_cav, N_a=n_atoms,
    )


class TestEffectiveParams:
    def test_rb_numbers_reproduce_quoted_coupling(self):
        eff = effective_params(rb_physical_params())
        assert eff.dicke.lam / TWO_PI == pytest.approx(-12.7e3, abs=100.0)
        assert eff.balanced

    def test_symmetric_input_cancels_omega_q(self):
        eff = effective_params(_symmetric_physical())
        assert eff.dicke.omega_q == 0.0
        assert eff.balanced

    def test_zero_couplings(self):
        eff = effective_params(_symmetric_physical(g=0.0, delta_cav=3.25))
        assert eff.dicke.lam == 0.0
        assert eff.dicke.omega_c == pytest.approx(3.25)

    def test_unbalanced_warns(self):
        p = PhysicalParams(
            g_r=0.01, g_s=0.02, Omega_r=1.0, Omega_s=1.0,
            Delta_r=10.0, Delta_s=10.0, delta_cav=1.0, N_a=2,
        )
        eff = effective_params(p)
        assert not eff.balanced
        assert any("unbalanced" in w for w in eff.warnings)

    def test_stark_shift(self):
        p = _symmetric_physical(g=0.1, delta=10.0, n_atoms=6, delta_cav=2.0)
        # omega_c = delta_cav - N/2 (g^2/Delta + g^2/Delta)
        assert effective_params(p).dicke.omega_c == pytest.approx(
            2.0 - 3.0 * 2 * 0.01 / 10.0
        )

    @given(st.floats(min_value=0.1, max_value=5.0))
    @settings(max_examples=20, deadline=None)
    def test_drive_scaling_homogeneity(self, s):
        # scaling both drives by s scales omega_q by s^2 and lambda by s
        base = PhysicalParams(
            g_r=0.01, g_s=0.012, Omega_r=0.8, Omega_s=1.1,
            Delta_r=9.0, Delta_s=11.0, delta_cav=1.0, N_a=3,
        )
        scaled = PhysicalParams(
            g_r=0.01, g_s=0.012, Omega_r=s * 0.8, Omega_s=s * 1.1,
            Delta_r=9.0, Delta_s=11.0, delta_cav=1.0, N_a=3,
        )
        e0, e1 = effective_params(base), effective_params(scaled)
        assert e1.dicke.omega_q == pytest.approx(s**2 * e0.dicke.omega_q, rel=1e-12)
        assert e1.dicke.lam == pytest.approx(s * e0.dicke.lam, rel=1e-12)
        assert e1.dicke.omega_c == e0.dicke.omega_c

    def test_zero_detuning_rejected(self):
        with pytest.raises(ValueError):
            _symmetric_physical(delta=0.0)

    def test_adiabaticity_warning_flag(self):
        strong = _symmetric_physical(omega=5.0, delta=10.0)  # Omega/2Delta = 0.25
        assert strong.adiabaticity_warning
        weak = _symmetric_physical(omega=0.1, delta=10.0)
        assert not weak.adiabaticity_warning


class TestDickeHamiltonian:
    def test_decoupled_spectrum(self):
        space = HilbertSpace(3, 5)
        d = DickeParams(omega_c=2.0, omega_q=0.0, lam=0.0, N_a=3)
        h = build_dicke_hamiltonian(d, space).toarray()
        evals = np.sort(np.linalg.eigvalsh(h))
        expected = np.sort(np.repeat(2.0 * np.arange(5), 4))
        np.testing.assert_allclose(evals, expected, atol=1e-12)

    def test_hand_assembled_4x4(self):
        # N=1, n_max=2, omega_c=1, omega_q=0, lam=0.1; basis
        # {|0,-1/2>, |0,+1/2>, |1,-1/2>, |1,+1/2>}; J_x couples m with
        # element 1/2, so the coupling entries are 2*lam*(1/2) = 0.1
        space = HilbertSpace(1, 2)
        d = DickeParams(omega_c=1.0, omega_q=0.0, lam=0.1, N_a=1)
        h = build_dicke_hamiltonian(d, space).toarray()
        expected = np.array([
            [0.0, 0.0, 0.0, 0.1],
            [0.0, 0.0, 0.1, 0.0],
            [0.0, 0.1, 1.0, 0.0],
            [0.1, 0.0, 0.0, 1.0],
        ])
        np.testing.assert_allclose(h, expected, atol=1e-14)

    @given(
        st.floats(0.1, 10.0), st.floats(-1.0, 1.0), st.floats(-0.5, 0.5),
        st.integers(1, 6),
    )
    @settings(max_examples=25, deadline=None)
    def test_hermitian_for_parameter_draws(self, omega_c, omega_q, lam, n_atoms):
        space = HilbertSpace(n_atoms, 4)
        d = DickeParams(omega_c=omega_c, omega_q=omega_q, lam=lam, N_a=n_atoms)
        assert build_dicke_hamiltonian(d, space).is_hermitian()

    def test_space_mismatch_rejected(self):
        d = DickeParams(omega_c=1.0, omega_q=0.0, lam=0.1, N_a=3)
        with pytest.raises(ValueError):
            build_dicke_hamiltonian(d, HilbertSpace(4, 4))


class TestInteractionPictureCoupling:
    def test_t0_equals_static_coupling(self):
        space = HilbertSpace(2, 4)
        d = DickeParams(omega_c=1.3, omega_q=0.0, lam=0.2, N_a=2)
        v0 = build_interaction_picture_coupling(d, space, 0.0).toarray()
        bare = build_dicke_hamiltonian(
            DickeParams(omega_c=0.0, omega_q=0.0, lam=0.2, N_a=2), space
        ).toarray()
        np.testing.assert_allclose(v0, bare, atol=1e-14)

    def test_half_period_sign_flip(self):
        space = HilbertSpace(2, 4)
        d = DickeParams(omega_c=1.0, omega_q=0.0, lam=0.2, N_a=2)
        v = build_interaction_picture_coupling(d, space, np.pi).toarray()
        v0 = build_interaction_picture_coupling(d, space, 0.0).toarray()
        np.testing.assert_allclose(v, -v0, atol=1e-12)

    def test_hermitian_at_generic_time(self):
        space = HilbertSpace(3, 4)
        d = DickeParams(omega_c=1.0, omega_q=0.0, lam=0.2, N_a=3)
        v = build_interaction_picture_coupling(d, space, 0.37)
        assert v.is_hermitian()


class TestFullLambdaHamiltonian:
    def test_bare_diagonal(self):
        p = PhysicalParams(
            g_r=0.0, g_s=0.0, Omega_r=0.0, Omega_s=0.0,
            Delta_r=3.0, Delta_s=4.0, delta_cav=0.0, N_a=1,
        )
        h = build_full_lambda_hamiltonian(p, 1, 2).toarray()
        # atomic ordering g, e, r, s per cavity block
        np.testing.assert_allclose(
            np.diag(h).real, [0, 0, 3, 4, 0, 0, 3, 4], atol=1e-14
        )
        assert np.count_nonzero(h - np.diag(np.diag(h))) == 0

    def test_single_atom_dimension(self):
        p = rb_physical_params(n_atoms=1)
        assert build_full_lambda_hamiltonian(p, 1, 6).dim == 24

    def test_hermitian(self):
        p = rb_physical_params(n_atoms=2)
        assert build_full_lambda_hamiltonian(p, 2, 4).is_hermitian()

    def test_large_n_rejected(self):
        p = rb_physical_params(n_atoms=3)
        with pytest.raises(ValueError):
            build_full_lambda_hamiltonian(p, 3, 4)


class TestPresets:
    def test_rb_numbers(self):
        rb = load_preset("rb_atoms")
        assert rb.dicke.omega_c == pytest.approx(TWO_PI * 5.88e6, rel=1e-9)
        assert rb.dicke.kappa == pytest.approx(TWO_PI * 70e3)
        assert rb.dicke.omega_q == 0.0
        assert rb.dicke.Gamma_phi == 0.0
        assert rb.theta_max_factor == 1.0
        assert rb.physical is not None

    def test_siv_numbers(self):
        siv = load_preset("siv_centers")
        assert siv.dicke.Gamma_phi == pytest.approx(TWO_PI * 3.5e6)
        assert siv.dicke.omega_c == pytest.approx(TWO_PI * 350e6)
        assert siv.dicke.kappa == pytest.approx(TWO_PI * 1e6)
        assert siv.theta_max_factor == 0.5

    def test_bec_numbers(self):
        bec = load_preset("bec")
        assert bec.dicke.omega_q == pytest.approx(TWO_PI * 28.6e3)
        assert bec.dicke.omega_c == pytest.approx(TWO_PI * 500e3)
        assert bec.theta_max_factor == 0.8

    def test_unknown_preset(self):
        with pytest.raises(ValueError, match="unknown preset"):
            load_preset("nope")

    def test_rb_is_ideal_protocol(self):
        assert load_preset("rb_atoms").dicke.ideal_protocol
        assert not load_preset("bec").dicke.ideal_protocol
