"""Tests for the exact samplers: CUE, thinning, windowed processes."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst
from scipy import stats

from dpplab import sampler


class TestSampleCue:
    def test_requires_positive_n(self):
        with pytest.raises(ValueError):
            sampler.sample_cue(0, seed=1)

    def test_determinism(self):
        a = sampler.sample_cue(32, seed=99)
        b = sampler.sample_cue(32, seed=99)
        assert np.array_equal(a.points, b.points)
        c = sampler.sample_cue(32, seed=100)
        assert not np.array_equal(a.points, c.points)

    def test_points_sorted_in_range(self):
        s = sampler.sample_cue(64, seed=3)
        assert len(s) == 64
        assert np.all(np.diff(s.points) > 0)
        assert np.all((s.points >= -np.pi) & (s.points < np.pi + 1e-12))

    def test_n1_uniform_phase(self):
        # Haar on U(1) is a uniform phase
        vals = np.array(
            [sampler.sample_cue(1, seed=i).points[0] for i in range(30000)]
        )
        ks = stats.kstest(vals, stats.uniform(loc=-np.pi, scale=2 * np.pi).cdf)
        assert ks.statistic < 0.01

    def test_mean_arc_count_n64(self):
        # density n / 2pi: arc [0, pi/2] holds n/4 points on average
        reps = 4000
        counts = np.empty(reps)
        for i in range(reps):
            p = sampler.sample_cue(64, seed=10_000 + i).points
            counts[i] = np.sum((p >= 0.0) & (p <= np.pi / 2))
        se = counts.std() / np.sqrt(reps)
        assert abs(counts.mean() - 16.0) < 3 * se

    def test_n2_gap_matches_weyl_density(self):
        # sorted-difference gap density by direct Weyl-formula normalization:
        # (2 pi - u) sin^2(u/2) / pi^2 on [0, 2 pi); the (2 pi - u) factor is
        # the phase-space volume of the ordered pair at fixed difference
        from scipy import integrate

        reps = 30000
        rng = np.random.Generator(np.random.Philox(key=23))
        z = rng.standard_normal((reps, 2, 2)) + 1j * rng.standard_normal((reps, 2, 2))
        q, r = np.linalg.qr(z)
        d = np.diagonal(r, axis1=1, axis2=2)
        q = q * (d / np.abs(d))[:, None, :]
        angles = np.sort(np.angle(np.linalg.eigvals(q)), axis=1)
        gaps = angles[:, 1] - angles[:, 0]

        def density(u):
            return (2 * np.pi - u) * np.sin(u / 2) ** 2 / np.pi**2

        edges = np.linspace(0.0, 2 * np.pi, 25)
        observed, _ = np.histogram(gaps, bins=edges)
        probs = np.array(
            [integrate.quad(density, a, b)[0] for a, b in zip(edges[:-1], edges[1:])]
        )
        res = stats.chisquare(observed, probs * reps)
        assert res.pvalue > 0.01


class TestCmvPath:
    def test_cmv_count_moments_match_kernel(self):
        n = 16
        kernel = sampler.RestrictedCueKernel(n, (0.0, np.pi / 2), order=96)
        mean_th, var_th = kernel.count_moments(1.0)
        reps = 4000
        counts = np.empty(reps)
        for i in range(reps):
            p = sampler.sample_cue(n, seed=i, method="cmv").points
            counts[i] = np.sum((p >= 0.0) & (p <= np.pi / 2))
        se = counts.std() / np.sqrt(reps)
        assert abs(counts.mean() - mean_th) < 4 * se

    def test_cmv_vs_ginibre_spacings(self):
        # cross-validation of the fast path against the Haar baseline
        def spacings(method, reps, n=256):
            out = []
            for i in range(reps):
                p = sampler.sample_cue(n, seed=5000 + i, method=method).points
                gaps = np.diff(np.concatenate([p, [p[0] + 2 * np.pi]]))
                out.append(gaps)
            return np.concatenate(out) * n / (2 * np.pi)

        a = spacings("ginibre", 150)
        b = spacings("cmv", 150)
        assert stats.ks_2samp(a, b).pvalue > 0.001

    def test_auto_threshold_routes_to_cmv(self):
        s = sampler.sample_cue(8, seed=1, method="auto", cmv_threshold=4)
        assert len(s) == 8


class TestThin:
    def test_gamma_one_identity(self):
        s = sampler.sample_cue(16, seed=5)
        t = sampler.thin(s, 1.0, seed=9)
        assert np.array_equal(t.points, s.points)

    def test_gamma_zero_empty(self):
        s = sampler.sample_cue(16, seed=5)
        t = sampler.thin(s, 0.0, seed=9)
        assert len(t) == 0

    def test_gamma_out_of_range(self):
        s = sampler.sample_cue(4, seed=5)
        with pytest.raises(ValueError):
            sampler.thin(s, 1.5, seed=0)

    def test_binomial_mean(self):
        # independent of the underlying process: re-thin one fixed sample
        base = sampler.sample_cue(128, seed=2)
        reps = 10000
        counts = np.array(
            [len(sampler.thin(base, 0.3, seed=i)) for i in range(reps)]
        )
        se = np.sqrt(128 * 0.3 * 0.7 / reps)
        assert abs(counts.mean() - 38.4) < 3 * se

    @given(seed=hst.integers(min_value=0, max_value=2**62))
    @settings(max_examples=25, deadline=None)
    def test_determinism_property(self, seed):
        base = sampler.sample_cue(32, seed=11)
        a = sampler.thin(base, 0.55, seed=seed)
        b = sampler.thin(base, 0.55, seed=seed)
        assert np.array_equal(a.points, b.points)

    def test_composed_gamma_recorded(self):
        base = sampler.sample_cue(64, seed=1)
        t = sampler.thin(sampler.thin(base, 0.8, seed=2), 0.5, seed=3)
        assert t.thinned_gamma == pytest.approx(0.4)


class TestSineWindow:
    def test_kernel_invariants(self):
        k = sampler.RestrictedSineKernel((-30.0, 30.0))
        assert np.all(k.eigenvalues >= 0.0)
        assert np.all(k.eigenvalues <= 1.0 + 1e-8)
        assert k.trace == pytest.approx(60.0 / np.pi, rel=1e-10)

    def test_small_gamma_small_counts(self):
        total = sum(
            len(sampler.sample_sine_window((-20, 20), 0.02, seed=i))
            for i in range(200)
        )
        # expected count per draw = 0.02 * 40 / pi = 0.255
        assert total < 120

    def test_mean_count(self):
        reps = 2000
        counts = np.array(
            [len(sampler.sample_sine_window((-50, 50), 1.0, seed=i)) for i in range(reps)]
        )
        se = counts.std() / np.sqrt(reps)
        assert abs(counts.mean() - 100.0 / np.pi) < 3 * se

    def test_count_variance_eigenvalue_formula(self):
        kernel = sampler.RestrictedSineKernel((-20.0, 20.0))
        _, var_th = kernel.count_moments(1.0)
        reps = 3000
        counts = np.array(
            [
                len(sampler.sample_sine_window((-20, 20), 1.0, seed=1000 + i))
                for i in range(reps)
            ]
        )
        # SE of a sample variance ~ var * sqrt(2/(reps-1)) for near-Gaussian counts
        se = counts.var() * np.sqrt(2.0 / (reps - 1))
        assert abs(counts.var() - var_th) < 5 * se

    def test_window_cap(self):
        with pytest.raises(ValueError, match="exceeds maximum"):
            sampler.sample_sine_window((-400, 400), 1.0, seed=0)

    def test_gamma_validation(self):
        with pytest.raises(ValueError):
            sampler.sample_sine_window((-10, 10), 0.0, seed=0)

    def test_determinism(self):
        a = sampler.sample_sine_window((-25, 25), 0.7, seed=42)
        b = sampler.sample_sine_window((-25, 25), 0.7, seed=42)
        assert np.array_equal(a.points, b.points)


class TestCueWindow:
    def test_count_moments_against_kernel(self):
        n, gamma = 1024, 0.85
        window = (-np.pi / 32, np.pi / 32)
        kernel = sampler.RestrictedCueKernel(n, window)
        mean_th, var_th = kernel.count_moments(gamma)
        reps = 3000
        counts = np.array(
            [
                len(sampler.sample_cue_window(n, window, gamma, seed=i))
                for i in range(reps)
            ]
        )
        assert abs(counts.mean() - mean_th) < 4 * counts.std() / np.sqrt(reps)
        assert abs(counts.var() - var_th) < 5 * counts.var() * np.sqrt(2.0 / reps)

    def test_thinning_commutes_with_restriction(self):
        # thin-then-restrict must match the window sampler with folded gamma
        n, gamma = 64, 0.6
        window = (-0.4, 0.4)
        reps = 4000
        a = np.empty(reps)
        for i in range(reps):
            s = sampler.thin(sampler.sample_cue(n, seed=i), gamma, seed=10**6 + i)
            a[i] = np.sum((s.points >= window[0]) & (s.points <= window[1]))
        b = np.array(
            [
                len(sampler.sample_cue_window(n, window, gamma, seed=i))
                for i in range(reps)
            ]
        )
        se_mean = np.sqrt(a.var() / reps + b.var() / reps)
        assert abs(a.mean() - b.mean()) < 4 * se_mean
        se_var = (a.var() + b.var()) * np.sqrt(2.0 / reps)
        assert abs(a.var() - b.var()) < 4 * se_var

    def test_rotation_invariance_of_arc_counts(self):
        # counts over arcs of fixed length are rotation invariant
        n, width = 64, 0.8
        reps = 2500
        at_zero = np.empty(reps)
        rotated = np.empty(reps)
        for i in range(reps):
            p = sampler.sample_cue(n, seed=i).points
            at_zero[i] = np.sum((p >= 0.0) & (p < width))
            q = np.sort((p + 1.9 + np.pi) % (2 * np.pi) - np.pi)
            rotated[i] = np.sum((q >= 0.0) & (q < width))
        assert stats.ks_2samp(at_zero, rotated).pvalue > 0.001


class TestBinaryDump:
    def test_round_trip_cue(self, tmp_path):
        s = sampler.thin(sampler.sample_cue(32, seed=8), 0.5, seed=9)
        path = tmp_path / "sample.dpps"
        sampler.write_sample(path, s)
        back = sampler.read_sample(path)
        assert back.kind == "cue"
        assert back.n == 32
        assert back.seed == 9
        assert back.thinned_gamma == pytest.approx(0.5)
        np.testing.assert_array_equal(back.points, s.points)

    def test_round_trip_sine(self, tmp_path):
        s = sampler.sample_sine_window((-12.5, 12.5), 0.9, seed=77)
        path = tmp_path / "sine.dpps"
        sampler.write_sample(path, s)
        back = sampler.read_sample(path)
        assert back.kind == "sine"
        assert back.window == (-12.5, 12.5)
        assert back.thinned_gamma == pytest.approx(0.9)
        np.testing.assert_array_equal(back.points, s.points)

    def test_magic_check(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 40)
        with pytest.raises(ValueError, match="not a DPPS"):
            sampler.read_sample(path)


class TestReplicateStreams:
    def test_streams_independent_of_order(self):
        a = [sampler.replicate_rng(123, i).random() for i in (0, 1, 2, 3)]
        b = [sampler.replicate_rng(123, i).random() for i in (3, 1, 0, 2)]
        assert a[0] == b[2] and a[1] == b[1] and a[3] == b[0]
        assert len(set(a)) == 4
