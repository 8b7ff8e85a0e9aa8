"""
Unit tests for the decomposability-semigroup machinery.
"""

from fractions import Fraction

import numpy as np
import pytest

from osdmix.core import linalg, semigroup
from osdmix.core.models import GaussianLaw
from osdmix.utils.errors import (
    DegenerateSampleError,
    DomainError,
    HorizonError,
    NotCompactError,
    PreconditionError,
)


def _rotation(theta: float) -> np.ndarray:
    return np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])


@pytest.mark.unit
class TestGaussianMembership:
    """Tests for the D(law) and symmetry-group oracles."""

    def test_contraction_is_member(self, std_law):
        result = semigroup.gaussian_membership(std_law, 0.5 * np.eye(2))
        assert result.member
        assert result.margin == pytest.approx(0.75)
        np.testing.assert_allclose(result.residual_cov, 0.75 * np.eye(2))

    def test_expansion_is_not_member(self, std_law):
        result = semigroup.gaussian_membership(std_law, 1.1 * np.eye(2))
        assert not result.member
        assert result.margin == pytest.approx(1.0 - 1.21)

    def test_residual_mean(self):
        law = GaussianLaw(mean=np.array([1.0, 2.0]), cov=np.eye(2))
        result = semigroup.gaussian_membership(law, 0.5 * np.eye(2))
        np.testing.assert_allclose(result.residual_mean, [0.5, 1.0])

    def test_dimension_mismatch(self, std_law):
        with pytest.raises(DomainError):
            semigroup.gaussian_membership(std_law, np.eye(3))

    def test_rotation_is_symmetry(self, std_law):
        assert semigroup.symmetry_membership(std_law, _rotation(0.3))
        assert not semigroup.symmetry_membership(std_law, 0.9 * np.eye(2))

    def test_symmetry_and_inverse_are_members(self, std_law):
        margin, inverse_margin = semigroup.largest_group_check(std_law, _rotation(1.1))
        assert margin == pytest.approx(0.0, abs=1e-10)
        assert inverse_margin == pytest.approx(0.0, abs=1e-10)

    def test_largest_group_rejects_non_symmetry(self, std_law):
        with pytest.raises(PreconditionError):
            semigroup.largest_group_check(std_law, 0.5 * np.eye(2))

    def test_member_norm_bound(self):
        law = GaussianLaw(mean=np.zeros(2), cov=np.diag([4.0, 1.0]))
        assert semigroup.member_norm_bound(law) == pytest.approx(4.0)

    def test_idempotent_factorization(self, std_law):
        J = linalg.make_idempotent(np.diag([1.0, 0.0]))
        assert semigroup.check_idempotent_factorization(std_law, J)
        full = linalg.make_idempotent(np.eye(2))
        assert semigroup.check_idempotent_factorization(std_law, full, under=J)

    def test_factorization_requires_under(self, std_law):
        J = linalg.make_idempotent(np.diag([1.0, 0.0]))
        with pytest.raises(PreconditionError):
            semigroup.check_idempotent_factorization(std_law, J, under=J)


@pytest.mark.unit
class TestNumakuraKernel:
    """Tests for the unit of the kernel group."""

    def test_contraction_has_zero_unit(self):
        result = semigroup.numakura_kernel(0.5 * np.eye(2))
        assert result.converged
        assert result.unit.rank == 0
        np.testing.assert_allclose(result.unit.mat, np.zeros((2, 2)))

    def test_rotation_has_identity_unit(self):
        result = semigroup.numakura_kernel(_rotation(0.4))
        assert result.converged
        assert result.unit.rank == 2
        np.testing.assert_allclose(result.unit.mat, np.eye(2), atol=1e-10)

    def test_mixed_spectrum_projects_along_contraction(self):
        T = np.array([[1.0, 0.3], [0.0, 0.5]])
        result = semigroup.numakura_kernel(T)
        L = result.unit.mat
        assert result.converged
        assert result.unit.rank == 1
        np.testing.assert_allclose(L @ L, L, atol=1e-10)
        np.testing.assert_allclose(L @ T, T @ L, atol=1e-10)
        # T^k converges to the projector itself
        np.testing.assert_allclose(np.linalg.matrix_power(T, 80), L, atol=1e-8)

    def test_expanding_matrix_not_compact(self):
        with pytest.raises(NotCompactError, match="not conditionally compact"):
            semigroup.numakura_kernel(np.diag([1.2, 0.5]))

    def test_jordan_block_not_compact(self):
        with pytest.raises(NotCompactError):
            semigroup.numakura_kernel(np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_contraction_beside_rotation(self):
        T = np.zeros((3, 3))
        T[0, 0] = 0.9
        T[1:, 1:] = _rotation(1.0)
        result = semigroup.numakura_kernel(T, tol=1e-6, max_iter=10_000)
        assert result.converged
        assert result.iterations <= 10_000
        np.testing.assert_allclose(result.unit.mat, np.diag([0.0, 1.0, 1.0]), atol=1e-6)


def _random_law(rng, d):
    M = rng.standard_normal((d, d))
    return GaussianLaw(mean=rng.standard_normal(d), cov=M @ M.T / d + 0.5 * np.eye(d))


def _random_member(rng, law):
    """W C W^-1 with W = cov^{1/2} and ||C|| < 1 lies in D(law)."""
    W, W_inv = semigroup.whiten(law)
    C = rng.standard_normal((law.dim, law.dim))
    C /= linalg.op_norm(C) * rng.uniform(1.0, 1.5)
    return W @ C @ W_inv


@pytest.mark.unit
class TestSemigroupInvariants:
    """Randomized membership and kernel properties, 1000 trials each."""

    TRIALS = 1000

    def test_zero_and_identity_are_members(self):
        rng = np.random.default_rng(201)
        for _ in range(100):
            law = _random_law(rng, int(rng.integers(1, 5)))
            assert semigroup.gaussian_membership(law, np.zeros((law.dim, law.dim))).member
            assert semigroup.gaussian_membership(law, np.eye(law.dim)).member

    def test_products_of_members_are_members(self):
        rng = np.random.default_rng(202)
        for _ in range(self.TRIALS):
            law = _random_law(rng, int(rng.integers(2, 5)))
            A, B = _random_member(rng, law), _random_member(rng, law)
            assert semigroup.gaussian_membership(law, A).member
            assert semigroup.gaussian_membership(law, B).member
            assert semigroup.gaussian_membership(law, A @ B).member

    def test_accepted_members_obey_norm_bound(self):
        rng = np.random.default_rng(203)
        accepted = 0
        for _ in range(self.TRIALS):
            law = _random_law(rng, int(rng.integers(2, 5)))
            bound = semigroup.member_norm_bound(law)
            A = rng.standard_normal((law.dim, law.dim)) * rng.uniform(0.1, 1.0)
            for candidate in (A, _random_member(rng, law)):
                if semigroup.gaussian_membership(law, candidate).member:
                    accepted += 1
                    assert linalg.op_norm(candidate) ** 2 <= bound + 1e-7
        assert accepted >= self.TRIALS

    def test_symmetries_and_inverses_are_members(self):
        rng = np.random.default_rng(204)
        for _ in range(self.TRIALS):
            law = _random_law(rng, int(rng.integers(2, 5)))
            W, W_inv = semigroup.whiten(law)
            U, _ = np.linalg.qr(rng.standard_normal((law.dim, law.dim)))
            margin, inverse_margin = semigroup.largest_group_check(law, W @ U @ W_inv)
            assert margin >= -linalg.DEFAULT_TOL
            assert inverse_margin >= -linalg.DEFAULT_TOL

    def test_kernel_unit_is_invariant_projector(self):
        rng = np.random.default_rng(205)
        for _ in range(self.TRIALS):
            G = rng.standard_normal((3, 3))
            S = np.eye(3) + 0.4 * G / max(2.0, linalg.op_norm(G))
            S_inv = np.linalg.inv(S)
            block = np.zeros((3, 3))
            block[:2, :2] = _rotation(rng.uniform(0.3, 2.8))
            block[2, 2] = rng.uniform(0.0, 0.8)
            T = S @ block @ S_inv

            result = semigroup.numakura_kernel(T)
            L = result.unit.mat
            assert result.converged
            assert result.unit.rank == 2
            np.testing.assert_allclose(L @ L, L, atol=1e-8)
            power = np.linalg.matrix_power(T, 50)
            np.testing.assert_allclose(L @ power, power @ L, atol=1e-6)
            np.testing.assert_allclose(L, S @ np.diag([1.0, 1.0, 0.0]) @ S_inv, atol=1e-6)


def _scalar_track(ns, d=2):
    """Normalizers A_n = n^{-1/2} I, so b_{m,n} = (n/m)^{d/2}."""
    return {n: np.eye(d) / np.sqrt(n) for n in ns}


@pytest.mark.unit
class TestKcExtraction:
    """Tests for K_c extraction from a normalizer track."""

    def test_crossing_on_scalar_track(self):
        J = linalg.make_idempotent(np.eye(2))
        track = _scalar_track(range(100, 201))
        m, b, K = semigroup.kc_crossing(track, J, 0.81, 100)
        # 100 / m >= 0.81 iff m <= 123
        assert m == 123
        assert b == pytest.approx(100 / 123)
        np.testing.assert_allclose(K, np.sqrt(100 / 123) * np.eye(2))

    def test_extract_uses_largest_observed_base(self):
        J = linalg.make_idempotent(np.eye(2))
        track = _scalar_track(range(100, 201))
        K = semigroup.extract_kc(track, J, 0.8)
        assert linalg.det_sub(J, K) >= 0.8
        assert linalg.det_sub(J, K) == pytest.approx(0.8, abs=0.01)

    def test_sequence_track_is_one_based(self):
        J = linalg.make_idempotent(np.eye(1))
        track = [np.array([[1.0 / n]]) for n in range(1, 11)]
        m, b, _ = semigroup.kc_crossing(track, J, 0.5, 2)
        assert m == 4
        assert b == pytest.approx(0.5)

    def test_closed_form_at_large_base(self):
        J = linalg.make_idempotent(np.eye(2))
        track = _scalar_track(range(10_000, 20_002))
        K = semigroup.extract_kc(track, J, 0.5, 10_000)
        assert linalg.det_sub(J, K) == pytest.approx(0.5, abs=1e-3)

    def test_short_track_raises_horizon(self):
        J = linalg.make_idempotent(np.eye(2))
        with pytest.raises(HorizonError, match="insufficient normalizer horizon"):
            semigroup.extract_kc(_scalar_track(range(100, 110)), J, 0.5, 100)

    def test_invalid_c(self):
        J = linalg.make_idempotent(np.eye(2))
        with pytest.raises(DomainError):
            semigroup.extract_kc(_scalar_track(range(1, 10)), J, 1.0)

    def test_unknown_base(self):
        J = linalg.make_idempotent(np.eye(2))
        with pytest.raises(DomainError):
            semigroup.kc_crossing(_scalar_track(range(10, 40)), J, 0.5, 5)

    def test_singular_normalizer(self):
        J = linalg.make_idempotent(np.eye(2))
        track = {1: np.zeros((2, 2)), 2: np.eye(2)}
        with pytest.raises(DegenerateSampleError):
            semigroup.kc_crossing(track, J, 0.5, 1)

    def test_increments_shrink_on_regular_track(self):
        J = linalg.make_idempotent(np.eye(2))
        track = _scalar_track(range(100, 400))
        increments = semigroup.kc_increments(track, J, 0.7, [100, 150, 200, 250])
        assert len(increments) == 3
        assert max(increments) < 0.02


@pytest.mark.unit
class TestIdempotentApproach:
    """Tests for approach_idempotent and primitive_decomposition."""

    def test_approach_within_distance(self, std_law):
        J = linalg.make_idempotent(np.diag([1.0, 0.0]))
        T = semigroup.approach_idempotent(std_law, J, 10)
        assert linalg.op_norm(T - J.mat) <= 0.1 + 1e-12
        assert semigroup.gaussian_membership(std_law, T).member

    def test_approach_rejects_non_member(self):
        law = GaussianLaw(mean=np.zeros(2), cov=np.array([[1.0, 0.9], [0.9, 1.0]]))
        J = linalg.make_idempotent(np.diag([1.0, 0.0]))
        with pytest.raises(PreconditionError):
            semigroup.approach_idempotent(law, J, 5)

    def test_approach_rejects_zero_n(self, std_law):
        J = linalg.make_idempotent(np.eye(2))
        with pytest.raises(DomainError):
            semigroup.approach_idempotent(std_law, J, 0)

    def test_primitive_decomposition(self):
        law = GaussianLaw(mean=np.zeros(2), cov=np.array([[2.0, 0.5], [0.5, 1.0]]))
        parts = semigroup.primitive_decomposition(law)
        assert len(parts) == 2
        np.testing.assert_allclose(sum(J.mat for J in parts), np.eye(2), atol=1e-12)
        np.testing.assert_allclose(parts[0].mat @ parts[1].mat, np.zeros((2, 2)), atol=1e-12)
        for J in parts:
            assert J.rank == 1
            assert semigroup.gaussian_membership(law, J.mat).member

    def test_primitive_decomposition_requires_full_law(self):
        law = GaussianLaw(mean=np.zeros(2), cov=np.diag([1.0, 0.0]))
        with pytest.raises(PreconditionError, match="not full"):
            semigroup.primitive_decomposition(law)


@pytest.mark.unit
class TestGeneratorRecovery:
    """Tests for C_w construction and generator extraction."""

    def test_integer_part_gap(self):
        assert semigroup.integer_part_gap(0.6, 0.6) == 1
        assert semigroup.integer_part_gap(0.2, 0.3) == 0
        grid = np.linspace(-3.0, 3.0, 61)
        gaps = {semigroup.integer_part_gap(a, b) for a in grid for b in grid}
        assert gaps <= {0, 1}

    def test_cw_limit_of_scalar_steps(self):
        n = 10_000
        J = linalg.make_idempotent(np.eye(1))
        C = semigroup.build_cw([(J, np.array([[1.0 - 1.0 / n]]))], 1, n)
        assert C[0, 0] == pytest.approx(np.exp(-1.0), abs=1e-3)

    @pytest.mark.parametrize("q", [1, 2, 3])
    def test_cw_determinant_law(self, q):
        n = 10_000
        law = GaussianLaw.standard(q)
        blocks = [(J, (1.0 - 1.0 / n) * J.mat) for J in semigroup.primitive_decomposition(law)]
        for w in (Fraction(1, 2), Fraction(1), Fraction(2)):
            det = np.linalg.det(semigroup.build_cw(blocks, w, n))
            assert det == pytest.approx(np.exp(-q * float(w)), abs=1e-3)
        half = semigroup.build_cw(blocks, Fraction(1, 2), n)
        assert linalg.op_norm(half @ half - semigroup.build_cw(blocks, 1, n)) <= 1e-2

    def test_cw_zero_is_identity(self, std_law):
        blocks = [(J, 0.9 * J.mat) for J in semigroup.primitive_decomposition(std_law)]
        np.testing.assert_allclose(semigroup.build_cw(blocks, 0), np.eye(2))

    def test_cw_exponent(self, std_law):
        blocks = [(J, 0.95 * J.mat) for J in semigroup.primitive_decomposition(std_law)]
        # d_r = floor(1 / -log 0.95) = 19
        C = semigroup.build_cw(blocks, Fraction(1, 2))
        np.testing.assert_allclose(C, 0.95**9 * np.eye(2), rtol=1e-12)

    def test_cw_rejects_negative_w(self, std_law):
        blocks = [(J, 0.9 * J.mat) for J in semigroup.primitive_decomposition(std_law)]
        with pytest.raises(DomainError):
            semigroup.build_cw(blocks, -1)

    def test_cw_rejects_det_outside_unit_interval(self, std_law):
        blocks = [(J, 1.5 * J.mat) for J in semigroup.primitive_decomposition(std_law)]
        with pytest.raises(PreconditionError):
            semigroup.build_cw(blocks, 1)

    def test_extract_generator_from_exact_semigroup(self, std_law):
        Q = np.array([[1.0, 0.3], [-0.3, 0.8]])
        samples = {w: linalg.mat_exp(Q, -float(w)) for w in ("1/4", "1/2", "1", "2")}
        cert = semigroup.extract_generator(samples, std_law, t_grid=[0.5, 1.0])
        np.testing.assert_allclose(cert.Q, Q, atol=1e-8)
        assert cert.consistency_residual < 1e-8
        assert not cert.consistency_flagged
        assert cert.spectral_margin == pytest.approx(0.9)
        assert cert.decay_horizon == pytest.approx(20.0 / 0.9)
        assert cert.decay_norm < 1e-6
        assert cert.inverse_integral_residual < 1e-6
        assert cert.certified()

    def test_extract_generator_needs_two_positive_w(self, std_law):
        with pytest.raises(DomainError):
            semigroup.extract_generator({0: np.eye(2), 1: 0.5 * np.eye(2)}, std_law)

    def test_extract_generator_rejects_singular_sample(self, std_law):
        samples = {1: np.diag([0.5, 0.0]), 2: 0.25 * np.eye(2)}
        with pytest.raises(DegenerateSampleError):
            semigroup.extract_generator(samples, std_law)

    def test_inconsistent_samples_flagged(self, std_law):
        samples = {1: 0.5 * np.eye(2), 2: 0.5 * np.eye(2)}
        cert = semigroup.extract_generator(samples, std_law)
        assert cert.consistency_flagged

    def test_decay_horizon_rejects_non_decaying(self):
        with pytest.raises(DomainError):
            semigroup.decay_horizon(np.diag([1.0, -0.1]))

    def test_inverse_integral(self):
        Q = np.array([[2.0, 0.5], [0.0, 1.0]])
        integral, residual = semigroup.generator_inverse_integral(Q)
        np.testing.assert_allclose(integral, np.linalg.inv(Q), atol=1e-6)
        assert residual < 1e-6
