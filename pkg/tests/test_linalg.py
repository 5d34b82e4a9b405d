"""Oracle and property tests for the complex matrix primitives."""

import numpy as np
import pytest

from risae.errors import DimensionMismatch, NotPSD, SingularSystem
from risae.linalg import default_ridge, hermitian_sqrt, kron, ls_solve


def crand(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def kron_oracle(a, b):
    """Direct-definition Kronecker product looping over all index quadruples."""
    ra, ca = a.shape
    rb, cb = b.shape
    out = np.zeros((ra * rb, ca * cb), dtype=complex)
    for m in range(ra):
        for n in range(ca):
            for p in range(rb):
                for q in range(cb):
                    out[m * rb + p, n * cb + q] = a[m, n] * b[p, q]
    return out


def random_psd(rng, dim):
    a = crand(rng, dim, dim)
    return a @ a.conj().T


class TestKron:
    def test_scalar_scaling(self):
        rng = np.random.default_rng(0)
        b = crand(rng, 3, 2)
        assert np.allclose(kron(np.array([[2.0 + 0j]]), b), 2.0 * b)

    def test_identity(self):
        assert np.allclose(kron(np.eye(2), np.eye(2)), np.eye(4))

    def test_matches_direct_definition(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            a = crand(rng, 2, 2)
            b = crand(rng, 2, 2)
            assert np.allclose(kron(a, b), kron_oracle(a, b), atol=1e-13)

    def test_bilinear_in_first_argument(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a = crand(rng, 2, 2)
            b = crand(rng, 2, 2)
            alpha = complex(rng.standard_normal(), rng.standard_normal())
            assert np.allclose(kron(alpha * a, b), alpha * kron(a, b), atol=1e-12)

    def test_rejects_empty(self):
        with pytest.raises(DimensionMismatch):
            kron(np.zeros((0, 2)), np.eye(2))


class TestHermitianSqrt:
    def test_identity(self):
        assert np.allclose(hermitian_sqrt(np.eye(3)), np.eye(3))

    def test_diagonal(self):
        assert np.allclose(hermitian_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))

    def test_square_and_compare(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            h = random_psd(rng, 8)
            s = hermitian_sqrt(h)
            rel = np.linalg.norm(s @ s - h) / np.linalg.norm(h)
            assert rel < 1e-10

    def test_commutes_with_input(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            h = random_psd(rng, 6)
            s = hermitian_sqrt(h)
            assert np.linalg.norm(s @ h - h @ s) / np.linalg.norm(h) < 1e-9

    def test_clamps_tiny_negative_eigenvalues(self):
        h = np.diag([1.0, -5e-11])
        s = hermitian_sqrt(h)
        assert np.allclose(s @ s, np.diag([1.0, 0.0]), atol=1e-10)

    def test_rejects_indefinite(self):
        with pytest.raises(NotPSD):
            hermitian_sqrt(np.diag([1.0, -1e-6]))


class TestLsSolve:
    def test_identity_system(self):
        rng = np.random.default_rng(5)
        v = crand(rng, 4)
        assert np.allclose(ls_solve(np.eye(4), v), v)

    def test_scaled_identity(self):
        rng = np.random.default_rng(6)
        v = crand(rng, 4)
        assert np.allclose(ls_solve(2.0 * np.eye(4), v), v / 2.0)

    def test_normal_equation_residual(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            g = crand(rng, 8, 4)
            v = crand(rng, 8)
            p = ls_solve(g, v)
            residual = np.linalg.norm(g.conj().T @ (g @ p - v))
            assert residual < 1e-9

    def test_ridge_keeps_rank_deficient_finite(self):
        rng = np.random.default_rng(8)
        col = crand(rng, 6, 1)
        g = np.hstack([col, col])  # rank 1
        p = ls_solve(g, crand(rng, 6), ridge=1e-6)
        assert np.all(np.isfinite(p.view(np.float64)))

    def test_singular_without_ridge(self):
        rng = np.random.default_rng(9)
        col = crand(rng, 6, 1)
        g = np.hstack([col, col])
        with pytest.raises(SingularSystem):
            ls_solve(g, crand(rng, 6), ridge=0.0)

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            ls_solve(np.eye(3), np.zeros(4))

    def test_default_ridge_scale(self):
        g = 3.0 * np.eye(5)
        assert default_ridge(g) == pytest.approx(1e-8 * 9.0)
