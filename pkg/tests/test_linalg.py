import numpy as np
import pytest

from lindbladrate.linalg import (
    choi_matrix,
    devectorize,
    hamiltonian_superop,
    hermitian_eigs,
    kraus_superop,
    matrix_exp,
    psd_check,
    sandwich_superop,
    trace_vector,
    vectorize,
)
from lindbladrate.qubit import SIGMA_X, SIGMA_Y, SIGMA_Z

from conftest import random_hermitian, vec_oracle


class TestVectorize:
    def test_identity(self):
        np.testing.assert_array_equal(vectorize(np.eye(2)), [1, 0, 0, 1])

    def test_column_convention(self):
        x = np.array([[0.0, 1.0], [0.0, 0.0]])
        np.testing.assert_array_equal(vectorize(x), [0, 0, 1, 0])

    def test_roundtrip_bit_exact(self, rng):
        x = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        assert np.array_equal(devectorize(vectorize(x)), x)

    def test_matches_longhand_convention(self, rng):
        x = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        np.testing.assert_array_equal(vectorize(x), vec_oracle(x))

    def test_rejects_nonsquare(self):
        with pytest.raises(ValueError):
            vectorize(np.ones((2, 3)))


class TestSandwich:
    def test_identity_pair(self):
        np.testing.assert_allclose(sandwich_superop(np.eye(2), np.eye(2)), np.eye(4))

    def test_sigma_z_flips_offdiagonals(self):
        s = sandwich_superop(SIGMA_Z, SIGMA_Z)
        x = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_allclose(devectorize(s @ vectorize(x)), [[1, -2], [-3, 4]], atol=1e-14)

    def test_random_triple_product(self, rng):
        for _ in range(100):
            a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            b = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            x = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            lhs = devectorize(sandwich_superop(a, b) @ vectorize(x))
            np.testing.assert_allclose(lhs, a @ x @ b, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            sandwich_superop(np.eye(2), np.eye(3))


class TestHermitianEigs:
    def test_sigma_z(self):
        w, _ = hermitian_eigs(SIGMA_Z)
        np.testing.assert_allclose(w, [-1.0, 1.0])

    def test_diagonal_sorted_ascending(self):
        w, _ = hermitian_eigs(np.diag([3.0, 1.0, 2.0]))
        np.testing.assert_allclose(w, [1.0, 2.0, 3.0])

    def test_reconstruction_and_unitarity(self, rng):
        m = random_hermitian(rng, 4)
        w, u = hermitian_eigs(m)
        scale = np.linalg.norm(m)
        assert np.linalg.norm((u * w) @ u.conj().T - m) < 1e-10 * scale
        assert np.linalg.norm(u.conj().T @ u - np.eye(4)) < 1e-10

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            hermitian_eigs(np.array([[0.0, 1.0], [0.0, 0.0]]))


class TestMatrixExp:
    def test_t_zero_is_identity(self, rng):
        g = rng.normal(size=(3, 3))
        np.testing.assert_array_equal(matrix_exp(g, 0.0), np.eye(3))

    def test_diagonal_case(self):
        out = matrix_exp(np.diag([-1.0, -2.0]), 1.0)
        np.testing.assert_allclose(out, np.diag([np.exp(-1.0), np.exp(-2.0)]), rtol=1e-12)

    def test_semigroup_property(self, rng):
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        lhs = matrix_exp(g, 0.7) @ matrix_exp(g, 0.4)
        np.testing.assert_allclose(lhs, matrix_exp(g, 1.1), atol=1e-9)

    def test_trace_preserving_generator(self, rng):
        # dephasing dissipator annihilates the trace functional
        gen = kraus_superop([SIGMA_Z]) - np.eye(4)
        tau = trace_vector(2)
        prop = matrix_exp(gen, 2.3)
        for _ in range(10):
            x = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            out = devectorize(prop @ vectorize(x))
            assert abs(np.trace(out) - np.trace(x)) < 1e-10
        assert np.linalg.norm(tau @ gen) < 1e-12


class TestPsdCheck:
    def test_indefinite(self):
        ok, min_eig = psd_check(np.diag([1.0, -1.0]))
        assert not ok
        assert min_eig == pytest.approx(-1.0)

    def test_zero_matrix(self):
        ok, min_eig = psd_check(np.zeros((3, 3)))
        assert ok
        assert min_eig == pytest.approx(0.0, abs=1e-15)

    def test_gram_construction(self, rng):
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        ok, min_eig = psd_check(np.outer(v, v.conj()))
        assert ok
        assert min_eig >= -1e-12


class TestSuperopHelpers:
    def test_hamiltonian_superop_action(self, rng):
        h = random_hermitian(rng, 3)
        x = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        out = devectorize(hamiltonian_superop(h) @ vectorize(x))
        np.testing.assert_allclose(out, -1j * (h @ x - x @ h), atol=1e-12)

    def test_choi_of_kraus_map(self):
        kraus = [SIGMA_X / np.sqrt(2), SIGMA_Y / np.sqrt(2)]
        choi = choi_matrix(kraus_superop(kraus))
        expected = sum(np.outer(vectorize(k), vectorize(k).conj()) for k in kraus)
        np.testing.assert_allclose(choi, expected, atol=1e-14)
        ok, _ = psd_check(choi)
        assert ok

    def test_choi_reshuffle_is_involution(self, rng):
        s = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
        np.testing.assert_array_equal(choi_matrix(choi_matrix(s)), s)
