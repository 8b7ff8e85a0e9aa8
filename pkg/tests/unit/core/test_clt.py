"""
Unit tests for the partial-sum limit harness.
"""

import numpy as np
import pytest

from osdmix.core import clt, mixing
from osdmix.core.models import DeltaSchedule, GaussianLaw, NormalizerTrack, PathBatch
from osdmix.utils.errors import DegenerateSampleError, DomainError, InfinitesimalityError


def _rotation(theta: float) -> np.ndarray:
    return np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])


def _scalar_track(ns) -> NormalizerTrack:
    return NormalizerTrack(
        checkpoints=list(ns),
        A={n: np.eye(2) / np.sqrt(n) for n in ns},
        b={n: np.zeros(2) for n in ns},
    )


@pytest.mark.unit
class TestNormalizers:
    """Tests for partial sums and normalizer choice."""

    def test_partial_sums_of_constant_paths(self, iid_spec):
        batch = PathBatch(data=np.ones((3, 10, 2)), seed=0, spec=iid_spec)
        sums = clt.partial_sums(batch, [2, 5, 10])
        np.testing.assert_allclose(sums[5], 5.0 * np.ones((3, 2)))
        np.testing.assert_allclose(sums[10], 10.0 * np.ones((3, 2)))

    def test_checkpoint_beyond_length(self, iid_spec):
        batch = PathBatch(data=np.ones((3, 10, 2)), seed=0, spec=iid_spec)
        with pytest.raises(DomainError):
            clt.partial_sums(batch, [5, 11])

    def test_iid_normalizers_scale_like_root_n(self, iid_spec):
        batch = mixing.generate(iid_spec, 64, 4000, seed=12)
        track = clt.choose_normalizers(clt.partial_sums(batch, [16, 64]))
        np.testing.assert_allclose(track.A[16], np.eye(2) / 4.0, atol=0.02)
        np.testing.assert_allclose(track.A[64], np.eye(2) / 8.0, atol=0.01)

    def test_normalized_sums_are_standardized(self, ar1_spec):
        batch = mixing.generate(ar1_spec, 32, 2000, seed=5)
        sums = clt.partial_sums(batch, [32])
        track = clt.choose_normalizers(sums)
        Z = clt.normalized_sums(sums, track, 32)
        np.testing.assert_allclose(Z.mean(axis=0), np.zeros(2), atol=1e-10)
        np.testing.assert_allclose(np.cov(Z, rowvar=False, bias=True), np.eye(2), atol=1e-10)

    def test_degenerate_sums(self):
        S = np.column_stack([np.arange(10.0), np.zeros(10)])
        with pytest.raises(DegenerateSampleError, match="law not full"):
            clt.choose_normalizers({4: S})

    def test_regularization_removes_rotation(self):
        ns = [16, 32, 64, 128]
        rotating = NormalizerTrack(
            checkpoints=ns,
            A={n: _rotation(0.7 * k) / np.sqrt(n) for k, n in enumerate(ns)},
            b={n: np.zeros(2) for n in ns},
        )
        regular = clt.regularize_normalizers(rotating, GaussianLaw.standard(2))
        assert regular.regularized
        for prev, cur in zip(ns, ns[1:]):
            ratio = regular.A[cur] @ np.linalg.inv(regular.A[prev])
            np.testing.assert_allclose(ratio, np.sqrt(prev / cur) * np.eye(2), atol=1e-10)
            # the symmetry factor leaves A^T A unchanged
            np.testing.assert_allclose(
                regular.A[cur].T @ regular.A[cur], rotating.A[cur].T @ rotating.A[cur], atol=1e-12
            )

    def test_diagnostics_on_scalar_track(self):
        report = clt.normalizer_diagnostics(_scalar_track([16, 32, 64, 128]))
        assert report.flags == []
        assert report.ratio_bound == pytest.approx(1.0)
        for exponent in report.det_exponents.values():
            assert exponent == pytest.approx(-1.0)

    def test_diagnostics_flag_growing_norms(self):
        ns = [16, 32, 64]
        track = NormalizerTrack(
            checkpoints=ns,
            A={n: np.eye(2) * n for n in ns},
            b={n: np.zeros(2) for n in ns},
        )
        report = clt.normalizer_diagnostics(track)
        assert "norm_not_decreasing" in report.flags
        assert "ratio_bound_exceeds_limit" in report.flags


@pytest.mark.unit
class TestInfinitesimality:
    """Tests for exceedance counts and the threshold schedule."""

    def test_counts_merge_across_chunks(self, ar1_spec):
        track = _scalar_track([8, 16])
        full = mixing.generate(ar1_spec, 16, 40, seed=2)
        whole = clt.exceedance_counts(full, track, [1.0, 0.5])
        parts = [
            clt.exceedance_counts(chunk, track, [1.0, 0.5])
            for chunk in mixing.iter_chunks(ar1_spec, 16, 40, seed=2, chunk_size=16)
        ]
        np.testing.assert_array_equal(clt.merge_counts(parts), whole)

    def test_tails_are_frequencies(self, iid_spec):
        data = np.zeros((4, 4, 2))
        data[0, 1] = [10.0, 0.0]
        batch = PathBatch(data=data, seed=0, spec=iid_spec)
        tails = clt.infinitesimality_check(batch, _scalar_track([4]), [1.0])
        assert tails[(4, 1.0)] == pytest.approx(0.25)

    def test_tails_decrease_for_iid(self, iid_spec):
        batch = mixing.generate(iid_spec, 256, 1000, seed=3)
        track = _scalar_track([16, 64, 256])
        tails = clt.infinitesimality_check(batch, track, [0.5])
        assert tails[(256, 0.5)] < tails[(16, 0.5)]

    def test_schedule_from_function(self):
        ns = [2**k for k in range(11)]
        schedule = clt.delta_schedule(lambda n, eps: min(1.0, 1.0 / (n * eps)), ns)
        assert schedule.breakpoints[:3] == [(1, 1), (4, 2), (16, 3)]
        deltas = [schedule.delta(n) for n in ns]
        assert all(b <= a for a, b in zip(deltas, deltas[1:]))
        for n in ns[2:]:
            assert min(1.0, 1.0 / (n * schedule.delta(n))) <= schedule.delta(n)

    def test_schedule_from_table_uses_smaller_eps(self):
        table = {}
        for n in (10, 20, 40):
            table[(n, 1.0)] = 0.0
            table[(n, 0.5)] = 0.6 if n == 10 else 0.1
            table[(n, 0.25)] = 0.4 if n < 40 else 0.2
        schedule = clt.delta_schedule(table)
        # level 1/3 reads the 0.25 column, which only reaches 1/3 at n = 40
        assert schedule.breakpoints == [(10, 1), (20, 2), (40, 3)]

    def test_not_infinitesimal(self):
        with pytest.raises(InfinitesimalityError, match="not infinitesimal at horizon"):
            clt.delta_schedule(lambda n, eps: 0.5, [1, 2, 4])


@pytest.mark.unit
class TestBlockSums:
    """Tests for the block-sum bound."""

    def test_iid_block_sums_hold(self, iid_spec):
        batch = mixing.generate(iid_spec, 64, 2000, seed=17)
        schedule = DeltaSchedule(breakpoints=[(16, 1), (64, 4)])
        report = clt.block_sum_check(batch, _scalar_track([16, 64]), schedule, windows=8)
        assert report.holds
        assert report.windows == 8

    def test_counts_merge_across_chunks(self, ma_spec):
        track = _scalar_track([8, 16])
        schedule = DeltaSchedule(breakpoints=[(8, 1), (16, 2)])
        full = mixing.generate(ma_spec, 16, 30, seed=4)
        whole = clt.block_sum_counts(full, track, schedule, windows=5)
        chunks = list(mixing.iter_chunks(ma_spec, 16, 30, seed=4, chunk_size=7))
        parts = [clt.block_sum_counts(c, track, schedule, windows=5) for c in chunks]
        for n in (8, 16):
            np.testing.assert_array_equal(clt.merge_counts(p[n] for p in parts), whole[n])


@pytest.mark.unit
class TestLimitDistance:
    """Tests for energy and CF distances and the CF independence residual."""

    def test_default_grid(self):
        grid = clt.default_cf_grid(3)
        assert grid.shape == (12, 3)

    def test_empirical_cf_at_origin(self):
        samples = np.random.default_rng(0).standard_normal((50, 2))
        np.testing.assert_allclose(clt.empirical_cf(samples, np.zeros((1, 2))), [1.0])

    def test_gaussian_sample_within_null(self):
        law = GaussianLaw.standard(2)
        samples = np.random.default_rng(1).standard_normal((600, 2))
        result = clt.limit_distance(samples, law, clt.default_cf_grid(2), seed=3, shuffles=100)
        assert result.energy <= result.null_quantile + 2.0 * result.null_spread
        assert result.cf_sup < 0.15

    def test_shifted_sample_outside_null(self):
        law = GaussianLaw.standard(2)
        samples = np.random.default_rng(1).standard_normal((600, 2)) + 1.0
        result = clt.limit_distance(samples, law, seed=3, shuffles=100)
        assert not result.within_null
        assert result.energy > result.null_quantile

    def test_energy_sample_cap_is_recorded(self):
        samples = np.random.default_rng(4).standard_normal((600, 2))
        law = GaussianLaw.standard(2)
        assert clt.limit_distance(samples, law, shuffles=0, max_points=200).points == 200
        assert clt.limit_distance(samples, law, shuffles=0).points == 600

    def test_no_band_without_shuffles(self):
        samples = np.random.default_rng(2).standard_normal((200, 2))
        result = clt.limit_distance(samples, GaussianLaw.standard(2), shuffles=0)
        assert result.null_quantile is None

    def test_too_few_samples(self):
        with pytest.raises(DomainError):
            clt.limit_distance(np.zeros((50, 2)), GaussianLaw.standard(2))

    def test_cf_independence_for_iid(self, iid_spec):
        batch = mixing.generate(iid_spec, 64, 3000, seed=8)
        track = _scalar_track([64])
        result = clt.cf_independence_residual(batch, track, 64, 4)
        assert result.split == 30
        assert result.within_bound

    def test_cf_independence_invalid_split(self, iid_spec):
        batch = mixing.generate(iid_spec, 8, 10, seed=8)
        with pytest.raises(DomainError):
            clt.cf_independence_residual(batch, _scalar_track([8]), 8, 7)


@pytest.mark.unit
@pytest.mark.slow
class TestCfIndependenceAtScale:
    """CF residual against 16 alpha(q + 1) + 5/sqrt(R) on every process variant."""

    @pytest.mark.parametrize("fixture", ["iid_spec", "ma_spec", "ar1_spec"])
    def test_residual_within_bound(self, fixture, request):
        spec = request.getfixturevalue(fixture)
        batch = mixing.generate(spec, 64, 20000, seed=31)
        track = clt.choose_normalizers(clt.partial_sums(batch, [64]))
        for gap in (1, 4, 16):
            result = clt.cf_independence_residual(batch, track, 64, gap)
            assert result.gap == gap
            assert result.within_bound, result
