"""Spin-operator algebra, propagators, and state validation."""

import numpy as np
import pytest

from spindyad.linalg import (
    SpinKind,
    assert_density_matrix,
    assert_unitary,
    expectation,
    expm_hermitian,
    eye,
    full_operators,
    reduced_operators,
    spin_operators,
    tensor,
)


def taylor_expm(h, t, terms=20, squarings=24):
    """Independent propagator oracle: scaled 20-term Taylor series.

    exp(-i h t) = [exp(-i h t / 2^k)]^(2^k) with the bracket evaluated by
    a plain truncated series; no eigendecomposition involved.
    """
    a = -1j * np.asarray(h, dtype=complex) * t / (2.0**squarings)
    acc = np.eye(h.shape[0], dtype=complex)
    term = np.eye(h.shape[0], dtype=complex)
    for k in range(1, terms + 1):
        term = term @ a / k
        acc = acc + term
    for _ in range(squarings):
        acc = acc @ acc
    return acc


class TestSpinOperators:
    def test_spin_half_z_eigenvalues(self):
        s = spin_operators(SpinKind.SPIN_HALF)
        assert np.allclose(np.diag(s.z), [0.5, -0.5])

    def test_spin_one_z_trace_square(self):
        s = spin_operators(SpinKind.SPIN_ONE)
        assert np.trace(s.z @ s.z).real == pytest.approx(2.0)
        assert np.allclose(np.diag(s.z), [1.0, 0.0, -1.0])

    def test_spin_half_anticommutator_vanishes(self):
        s = spin_operators(SpinKind.SPIN_HALF)
        assert np.max(np.abs(s.x @ s.y + s.y @ s.x)) < 1e-15

    @pytest.mark.parametrize(
        "kind", [SpinKind.SPIN_ONE, SpinKind.SPIN_HALF, SpinKind.FICTITIOUS_HALF]
    )
    def test_commutation_relations(self, kind):
        s = spin_operators(kind)
        for a, b, c in [(s.x, s.y, s.z), (s.y, s.z, s.x), (s.z, s.x, s.y)]:
            assert np.max(np.abs(a @ b - b @ a - 1j * c)) < 1e-14

    @pytest.mark.parametrize(
        "kind", [SpinKind.SPIN_ONE, SpinKind.SPIN_HALF]
    )
    def test_ladder_definition(self, kind):
        s = spin_operators(kind)
        assert np.allclose(s.plus, s.x + 1j * s.y)
        assert np.allclose(s.minus, s.x - 1j * s.y)

    def test_operators_read_only(self):
        s = spin_operators(SpinKind.SPIN_HALF)
        with pytest.raises(ValueError):
            s.z[0, 0] = 9.0


class TestTensor:
    def test_identity_product(self):
        assert np.allclose(tensor(eye(2), eye(2)), eye(4))

    def test_spin_one_z_with_identity(self):
        s1 = spin_operators(SpinKind.SPIN_ONE)
        vals = np.sort(np.linalg.eigvalsh(tensor(s1.z, eye(2))))
        assert np.allclose(vals, [-1, -1, 0, 0, 1, 1])

    def test_mixed_product_property(self):
        s1 = spin_operators(SpinKind.SPIN_ONE)
        sh = spin_operators(SpinKind.SPIN_HALF)
        lhs = tensor(s1.z, eye(2)) @ tensor(eye(3), sh.z)
        assert np.allclose(lhs, tensor(s1.z, sh.z))

    def test_rejects_non_square(self):
        with pytest.raises(ValueError):
            tensor(np.ones((2, 3)), eye(2))


class TestExpmHermitian:
    def test_zero_time_is_identity(self):
        rng = np.random.default_rng(1)
        h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        h = h + h.conj().T
        assert np.allclose(expm_hermitian(h, 0.0), eye(4))

    def test_spin_half_phase_rotation(self):
        omega = 2 * np.pi * 1e6
        s = spin_operators(SpinKind.SPIN_HALF)
        u = expm_hermitian(omega * s.z, np.pi / omega)
        expect = np.diag([np.exp(-1j * np.pi / 2), np.exp(1j * np.pi / 2)])
        assert np.max(np.abs(u - expect)) < 1e-12

    def test_matches_taylor_series_oracle(self):
        rng = np.random.default_rng(7)
        h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        h = h + h.conj().T
        u = expm_hermitian(h, 1.0)
        assert np.max(np.abs(u - taylor_expm(h, 1.0))) < 1e-9

    def test_rejects_non_hermitian_with_diagnostic(self):
        h = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
        with pytest.raises(ValueError, match="not Hermitian"):
            expm_hermitian(h, 1.0)

    def test_rejects_negative_time(self):
        with pytest.raises(ValueError):
            expm_hermitian(np.eye(2, dtype=complex), -1.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_unitarity_and_composition(self, seed):
        rng = np.random.default_rng(100 + seed)
        h = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        h = (h + h.conj().T) * 1e6
        t1, t2 = rng.uniform(0.0, 1e-3, size=2)
        u1 = expm_hermitian(h, t1)
        assert_unitary(u1, tol=1e-10)
        u12 = expm_hermitian(h, t1 + t2)
        assert np.max(np.abs(u1 @ expm_hermitian(h, t2) - u12)) < 1e-10

    @pytest.mark.parametrize("seed", range(3))
    def test_density_sanity_preserved_by_conjugation(self, seed):
        rng = np.random.default_rng(200 + seed)
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = a @ a.conj().T
        rho = rho / np.trace(rho)
        h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        h = (h + h.conj().T) * 1e7
        u = expm_hermitian(h, rng.uniform(0, 1e-3))
        assert_density_matrix(u @ rho @ u.conj().T)


class TestExpectation:
    def test_maximally_mixed_tilde_z(self):
        ops = reduced_operators()
        assert expectation(ops.identity / 4.0, ops.tilde_z) == pytest.approx(0.0, abs=1e-15)

    def test_projector_on_pure_state(self):
        ops = reduced_operators()
        rho = np.zeros((4, 4), dtype=complex)
        rho[2, 2] = 1.0  # |0,-1/2>
        assert expectation(rho, ops.proj_ms0) == pytest.approx(1.0)

    def test_transferred_state_partner_polarization(self):
        # state I/4 - Pz/2 carries full inverted partner polarization
        ops = reduced_operators()
        rho = ops.identity / 4.0 - ops.prime_z / 2.0
        assert expectation(rho, ops.prime_z) == pytest.approx(-0.5)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            expectation(np.eye(4) / 4.0, np.eye(6))

    def test_imaginary_residue_flagged(self):
        rho = np.eye(2, dtype=complex) / 2.0
        non_herm = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
        rho_off = rho + 0.3 * np.array([[0, 1], [1j, 0]])
        with pytest.raises(ValueError, match="imaginary"):
            expectation(rho_off, non_herm + non_herm.T * 0)


class TestReducedBasis:
    def test_declared_ordering(self):
        ops = reduced_operators()
        # |0,+1/2>, |-1,+1/2>, |0,-1/2>, |-1,-1/2>
        assert np.allclose(np.diag(ops.tilde_z).real, [0.5, -0.5, 0.5, -0.5])
        assert np.allclose(np.diag(ops.prime_z).real, [0.5, 0.5, -0.5, -0.5])
        assert np.allclose(np.diag(ops.proj_ms0).real, [1, 0, 1, 0])

    def test_zq_operators(self):
        ops = reduced_operators()
        # protected coherence connects |-1,+1/2> and |0,-1/2>
        expect = np.zeros((4, 4), dtype=complex)
        expect[1, 2] = -0.5j
        expect[2, 1] = 0.5j
        assert np.allclose(ops.zq_antisym, expect)
        plus_minus = (ops.tilde_minus @ ops.prime_plus - ops.tilde_plus @ ops.prime_minus) / 2j
        assert np.allclose(ops.zq_antisym, plus_minus)

    def test_full_manifold_indices(self):
        f = full_operators()
        sz = np.diag(f.s_z).real
        pz = np.diag(f.p_z).real
        labels = [(round(sz[i]), pz[i]) for i in f.reduced_indices]
        assert labels == [(0, 0.5), (-1, 0.5), (0, -0.5), (-1, -0.5)]
