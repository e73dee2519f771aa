import numpy as np
import pytest
import scipy.linalg

from distobs import (
    full_rank_factorize,
    is_negative_definite,
    min_symmetric_eigenvalue,
    observability_decomposition,
    observability_matrix,
    solve_lyapunov,
    spectral_abscissa,
)
from distobs.linalg import numerical_rank


class TestFullRankFactorize:
    def test_rank_one_by_inspection(self):
        c = np.array([[1.0, 0.0], [2.0, 0.0]])
        frf = full_rank_factorize(c)
        assert frf.rank == 1
        np.testing.assert_allclose(frf.d_factor @ frf.f_factor, c, atol=1e-12)
        # D proportional to (1,2)^T, F proportional to (1,0)
        assert abs(frf.d_factor[1, 0] / frf.d_factor[0, 0] - 2.0) < 1e-12
        assert abs(frf.f_factor[0, 1]) < 1e-12

    def test_identity(self):
        frf = full_rank_factorize(np.eye(2))
        assert frf.rank == 2
        np.testing.assert_allclose(frf.d_factor @ frf.f_factor, np.eye(2), atol=1e-12)
        np.testing.assert_allclose(frf.d_factor, np.eye(2))  # full row rank: skipped

    def test_rank_two_reconstruction(self):
        c = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [0.0, 0.0, 3.0]])
        frf = full_rank_factorize(c)
        assert frf.rank == np.count_nonzero(
            scipy.linalg.svdvals(c) > 1e-9 * scipy.linalg.svdvals(c)[0]
        )
        assert frf.rank == 2
        resid = np.linalg.norm(frf.d_factor @ frf.f_factor - c)
        assert resid <= 1e-10 * np.linalg.norm(c)

    def test_zero_matrix_rejected(self):
        with pytest.raises(ValueError, match="no effective output"):
            full_rank_factorize(np.zeros((2, 3)))

    def test_random_matrices_match_svd_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            m, n = int(rng.integers(1, 6)), int(rng.integers(1, 6))
            r = int(rng.integers(1, min(m, n) + 1))
            c = rng.standard_normal((m, r)) @ rng.standard_normal((r, n))
            frf = full_rank_factorize(c)
            s = scipy.linalg.svdvals(c)
            assert frf.rank == np.count_nonzero(s > 1e-9 * s[0])
            assert np.linalg.norm(frf.d_factor @ frf.f_factor - c) <= 1e-10 * max(
                1.0, np.linalg.norm(c)
            )
            assert numerical_rank(frf.d_factor) == frf.rank
            assert numerical_rank(frf.f_factor) == frf.rank


class TestObservabilityDecomposition:
    def test_already_in_form(self):
        a = np.array([[0.0, 1.0], [0.0, 0.0]])
        f = np.array([[1.0, 0.0]])
        dec = observability_decomposition(a, f)
        assert dec.v_dim == 2
        np.testing.assert_allclose(dec.t_orth, np.eye(2), atol=1e-12)
        np.testing.assert_allclose(dec.e_mat, [[1.0]], atol=1e-12)
        np.testing.assert_allclose(dec.a11, [[0.0]], atol=1e-12)
        np.testing.assert_allclose(dec.a12, [[1.0]], atol=1e-12)
        np.testing.assert_allclose(dec.a21, [[0.0]], atol=1e-12)
        np.testing.assert_allclose(dec.a22, [[0.0]], atol=1e-12)
        assert dec.a_u.shape == (0, 0)

    def test_decoupled_modes(self):
        a = np.diag([1.0, 2.0])
        dec = observability_decomposition(a, np.array([[1.0, 0.0]]))
        assert dec.v_dim == 1
        np.testing.assert_allclose(dec.a_u, [[2.0]], atol=1e-12)
        assert abs(abs(dec.e_mat[0, 0]) - 1.0) < 1e-12

    def test_random_structure(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            n = 5
            a = rng.standard_normal((n, n))
            q, _ = np.linalg.qr(rng.standard_normal((n, n)))
            f = q[:2, :]
            dec = observability_decomposition(a, f)
            t = dec.t_orth
            assert np.linalg.norm(t.T @ t - np.eye(n)) <= 1e-12
            assert dec.v_dim == numerical_rank(observability_matrix(f, a))
            at = t.T @ a @ t
            v = dec.v_dim
            if v < n:
                assert np.max(np.abs(at[:v, v:])) <= 1e-10 * np.linalg.norm(a)
            # F T = [E 0 0]
            ft = f @ t
            np.testing.assert_allclose(ft[:, :2], dec.e_mat, atol=1e-10)
            assert np.max(np.abs(ft[:, 2:])) <= 1e-10 * max(1.0, np.linalg.norm(f))
            # observable sub-pairs
            assert numerical_rank(observability_matrix(dec.f_io, dec.a_io)) == v
            if v > dec.p_dim:
                pair_rank = numerical_rank(
                    observability_matrix(dec.e_mat @ dec.a12, dec.a22)
                )
                assert pair_rank == v - dec.p_dim

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        a = rng.standard_normal((4, 4))
        f = rng.standard_normal((1, 4))
        d1 = observability_decomposition(a, f)
        d2 = observability_decomposition(a, f)
        np.testing.assert_array_equal(d1.t_orth, d2.t_orth)

    def test_rank_deficient_f_rejected(self):
        with pytest.raises(ValueError):
            observability_decomposition(np.eye(3), np.array([[1.0, 0, 0], [2.0, 0, 0]]))


class TestSolveLyapunov:
    def test_scalar_balance(self):
        np.testing.assert_allclose(
            solve_lyapunov(-np.eye(2), np.eye(2)), 0.5 * np.eye(2), atol=1e-12
        )

    def test_decoupled_scalars(self):
        np.testing.assert_allclose(
            solve_lyapunov(np.diag([-1.0, -2.0]), np.eye(2)),
            np.diag([0.5, 0.25]),
            atol=1e-12,
        )

    def test_random_stable_integral_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(5):
            a = rng.standard_normal((4, 4))
            a -= (spectral_abscissa(a) + 1.0) * np.eye(4)
            p = solve_lyapunov(a, np.eye(4))
            resid = np.linalg.norm(a.T @ p + p @ a + np.eye(4))
            assert resid <= 1e-9 * (
                np.linalg.norm(a) * np.linalg.norm(p) + np.linalg.norm(np.eye(4))
            )
            assert np.min(np.linalg.eigvalsh(p)) > 0
            # independent oracle: P = integral of expm(a^T t) expm(a t) dt
            from scipy.integrate import quad_vec

            oracle, _ = quad_vec(
                lambda t: scipy.linalg.expm(a.T * t) @ scipy.linalg.expm(a * t),
                0.0,
                60.0,
                epsabs=1e-12,
                epsrel=1e-12,
            )
            np.testing.assert_allclose(p, oracle, atol=1e-7 * np.linalg.norm(p))

    def test_unstable_rejected(self):
        with pytest.raises(ValueError, match="unstable"):
            solve_lyapunov(np.array([[0.1]]), np.eye(1))


class TestEigenUtilities:
    def test_abscissa_diagonal(self):
        assert spectral_abscissa(np.diag([-1.0, -3.0])) == pytest.approx(-1.0)

    def test_abscissa_imaginary_pair(self):
        assert spectral_abscissa(np.array([[0.0, 1.0], [-1.0, 0.0]])) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_abscissa_characteristic_roots(self):
        assert spectral_abscissa(np.array([[0.0, 1.0], [-2.0, -3.0]])) == pytest.approx(
            -1.0, abs=1e-10
        )

    def test_abscissa_similarity_invariant(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            k = int(rng.integers(2, 7))
            m = rng.standard_normal((k, k))
            s = np.eye(k) + 0.3 * rng.standard_normal((k, k))
            sim = s @ m @ np.linalg.inv(s)
            assert spectral_abscissa(m) == pytest.approx(
                spectral_abscissa(sim), abs=1e-8
            )

    def test_min_symmetric_eigenvalue(self):
        assert min_symmetric_eigenvalue(np.eye(3)) == pytest.approx(1.0)
        assert min_symmetric_eigenvalue(np.diag([2.0, -5.0])) == pytest.approx(-5.0)

    def test_min_symmetric_eigenvalue_mirror_cycle(self):
        mirror = np.array([[2.0, -1, -1], [-1, 2, -1], [-1, -1, 2]])
        assert abs(min_symmetric_eigenvalue(mirror)) <= 1e-10

    def test_min_symmetric_rejects_asymmetry(self):
        with pytest.raises(ValueError, match="symmetric"):
            min_symmetric_eigenvalue(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_negative_definite(self):
        assert is_negative_definite(-np.eye(2))
        assert not is_negative_definite(np.diag([-1.0, 1e-3]))
        assert is_negative_definite(np.array([[-2.0, 1.0], [1.0, -2.0]]), margin=0.5)
