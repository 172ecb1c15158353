"""Statistical harness: process construction, blocks, and experiments."""

import math

import numpy as np
import pytest

import expmap as em
from expmap import experiments, families, sampling
from expmap.errors import DegenerateObservableError, DepthCapError

import oracles


@pytest.fixture(scope="module")
def doubling():
    return em.make_family("constant_doubling")


@pytest.fixture(scope="module")
def tent19():
    return em.make_family("tent_slope", s0=1.9)


class TestXiProcess:
    def test_doubling_two_steps(self, doubling):
        phi = em.erdos_fortet_observable()
        proc = em.xi_process(doubling, phi, 0.3, 2, grid_count=2048)
        expect = np.array([float(phi(0.6)), float(phi(0.2))]) / math.sqrt(2.0)
        assert np.allclose(proc.values, expect, atol=1e-5)
        assert proc.sigma_a == pytest.approx(math.sqrt(2.0), abs=1e-5)
        assert proc.mean_a == pytest.approx(0.0, abs=1e-12)

    def test_empty(self, doubling):
        proc = em.xi_process(doubling, em.cos1(), 0.1, 0, grid_count=1024)
        assert proc.values.size == 0

    def test_constant_degenerate(self, doubling):
        with pytest.raises(DegenerateObservableError):
            em.xi_process(doubling, em.const(1.0), 0.1, 5, grid_count=1024)

    def test_mean_decay_along_orbit(self, tent19):
        # normalization consistency: |mean of xi_i| <= 5 sigma / sqrt(n)
        n = 20000
        proc = em.xi_process(tent19, em.cos1(), 0.02, n, grid_count=2048)
        assert abs(np.mean(proc.values)) <= 5.0 / math.sqrt(n)


class TestBlocks:
    def test_single(self):
        blocks = em.build_blocks(1)
        assert blocks.M == 1
        assert list(blocks.blocks()[0]) == [1]

    def test_ten(self):
        blocks = em.build_blocks(10)
        assert list(blocks.sizes) == [1, 1, 2, 2, 2, 3]
        assert blocks.M == 6
        assert list(blocks.blocks()[5]) == [9, 10, 11]

    def test_sizes_match_floor_rule(self):
        blocks = em.build_blocks(5000)
        assert list(blocks.sizes) == oracles.block_sizes_brute(blocks.M)

    @pytest.mark.parametrize("n", [10, 100, 10**4, 10**6])
    def test_m_growth_window(self, n):
        blocks = em.build_blocks(n)
        assert blocks.M <= 4.0 * n ** 0.6
        assert blocks.M >= 0.25 * n ** 0.6

    def test_cover_without_gaps(self):
        blocks = em.build_blocks(500)
        seen = []
        for rng in blocks.blocks():
            seen.extend(rng)
        assert seen == list(range(1, seen[-1] + 1))
        assert seen[-1] >= 500
        assert seen[-1] - 500 < blocks.sizes[-1]


class TestStepFunctionChi:
    def test_r_index_arithmetic(self, doubling):
        phi = em.indicator(0.0, 0.5)
        moments = experiments._moments(doubling, phi, grid_count=1024)
        cache = em.PartitionCache(doubling)
        assert em.step_function_chi(doubling, phi, 1, 0.3, cache,
                                    moments).depth == 2

    def test_conditional_expectation_of_measurable(self, doubling):
        # dyadic indicator is cell-measurable at depth > i, so chi_i = xi_i
        phi = em.indicator(0.0, 0.5)
        moments = experiments._moments(doubling, phi, grid_count=1024)
        cache = em.PartitionCache(doubling)
        chi = em.step_function_chi(doubling, phi, 2, 0.3, cache, moments)
        rng = np.random.default_rng(5)
        aa = rng.random(300)
        pts, _ = families.orbit_batch(doubling, aa, 2)
        xi = (np.asarray(phi(pts[2])) - moments.mean(aa)) / moments.sigma(aa)
        assert np.max(np.abs(xi - chi(aa))) < 1e-12

    def test_depth_cap_error(self, doubling):
        phi = em.indicator(0.0, 0.5)
        moments = experiments._moments(doubling, phi, grid_count=1024)
        cache = em.PartitionCache(doubling)
        with pytest.raises(DepthCapError):
            em.step_function_chi(doubling, phi, 24, 0.3, cache, moments)

    def test_tent_exceedance_shrinks_with_depth_offset(self, tent19):
        # measure of {a: |xi_i - chi_i| > lambda^(-i^delta / 8)} drops once
        # the partition depth offset floor(i^delta) increments
        phi = em.cos1()
        moments = experiments._moments(tent19, phi, grid_count=1024)
        cache = em.PartitionCache(tent19)
        lam, delta = 1.9, 0.3
        measures = {}
        for i in (4, 12):
            chi = em.step_function_chi(tent19, phi, i, delta, cache, moments)
            aa = np.linspace(1e-7, tent19.window - 1e-7, 20001)
            pts, _ = families.orbit_batch(tent19, aa, i)
            xi = (np.asarray(phi(pts[i])) - moments.mean(aa)) \
                / moments.sigma(aa)
            thr = lam ** (-(i ** delta) / 8.0)
            measures[i] = float(np.mean(np.abs(xi - chi(aa)) > thr))
        assert measures[12] < measures[4]


class TestCLT:
    def test_doubling_reduction(self, doubling):
        rep = em.clt_experiment(doubling, em.cos1(), 4000, 500, 3,
                                threads=2, grid_count=1024)
        assert rep.statistics["ks_distance"] <= 0.08
        assert rep.verdict in (True, False)

    def test_insufficient_samples_flagged(self, doubling):
        rep = em.clt_experiment(doubling, em.cos1(), 1000, 1, 0,
                                grid_count=1024)
        assert rep.statistics["insufficient_samples"]
        assert rep.verdict is False

    def test_fixed_map_start_mode(self, tent19):
        rep = em.clt_experiment(tent19, em.cos1(), 4000, 600, 1, threads=2,
                                grid_count=1024, vary="start", fixed_a=0.02)
        assert rep.statistics["ks_distance"] <= 0.08

    def test_reproducible_across_threads(self, doubling):
        reps = [em.clt_experiment(doubling, em.cos1(), 500, 300, 11,
                                  threads=t, grid_count=1024)
                for t in (1, 4)]
        assert reps[0].statistics == reps[1].statistics


class TestLIL:
    def test_small_run_monotone_curves(self, doubling):
        rep = em.lil_experiment(doubling, em.cos1(), 20000, 40, 2,
                                threads=2, grid_count=1024)
        curve = rep.arrays["running_max"]
        assert np.all(np.diff(curve, axis=0) >= 0.0)
        assert rep.statistics["curves_nondecreasing"]

    def test_checkpoints_start_at_sixteen(self):
        cps = experiments.lil_checkpoints(10**5, 1.5)
        assert cps[0] >= 16
        assert cps[-1] <= 10**5
        assert np.all(np.diff(cps) > 0)

    def test_no_checkpoints_below_sixteen(self, doubling):
        rep = em.lil_experiment(doubling, em.cos1(), 10, 5, 0,
                                grid_count=1024)
        assert rep.statistics.get("no_checkpoints")
        assert rep.verdict is None

    def test_seeded_determinism(self, doubling):
        r1 = em.lil_experiment(doubling, em.cos1(), 30000, 20, 9,
                               grid_count=1024)
        r2 = em.lil_experiment(doubling, em.cos1(), 30000, 20, 9, threads=3,
                               grid_count=1024)
        assert np.array_equal(r1.arrays["finals"], r2.arrays["finals"])


class TestVarianceGrowth:
    def test_empty_sum(self, doubling):
        rep = em.variance_growth(doubling, em.cos1(), 50, 0, 128)
        assert rep.statistics["second_moment"] == 0.0

    def test_single_term_near_one(self, doubling):
        rep = em.variance_growth(doubling, em.cos1(), 100, 1, 4096,
                                 grid_count=1024)
        assert rep.statistics["second_moment"] == pytest.approx(1.0, abs=0.1)

    def test_doubling_window(self, doubling):
        rep = em.variance_growth(doubling, em.cos1(), 100, 10, 4096,
                                 grid_count=1024)
        assert rep.statistics["deviation"] <= 1.0
        assert rep.statistics["in_range"]

    def test_out_of_range_labeled(self, doubling):
        rep = em.variance_growth(doubling, em.cos1(), 10, 50, 256,
                                 grid_count=1024)
        assert not rep.statistics["in_range"]


class TestBlockLLN:
    def test_single_block(self, doubling):
        d = em.block_lln_check(doubling, em.cos1(), 0.37, 1, 0.41,
                               grid_count=1024)
        assert np.isfinite(d)

    def test_rejects_small_gamma(self, doubling):
        with pytest.raises(ValueError):
            em.block_lln_check(doubling, em.cos1(), 0.3, 100, 0.39,
                               grid_count=1024)

    def test_seeded_repeat_identical(self, doubling):
        args = (doubling, em.cos1(), 0.123, 2000, 0.41)
        d1 = em.block_lln_check(*args, seed=5, grid_count=1024)
        d2 = em.block_lln_check(*args, seed=5, grid_count=1024)
        assert d1 == d2

    def test_doubling_ensemble(self, doubling):
        rep = em.block_lln_experiment(doubling, em.cos1(), 20000, 0.41,
                                      50, 1, threads=2, grid_count=1024)
        assert rep.statistics["fraction_within"] >= 0.9

    def test_chi_mode_matches_raw_for_measurable_observable(self, doubling):
        # with a dyadic indicator, chi_i equals xi_i exactly, so the
        # chi-route block sums reproduce the deterministic orbit sums
        phi = em.indicator(0.0, 0.5)
        a = 0.6173
        blocks = experiments.block_decomposition_at(
            doubling, phi, a, 12, mode="chi", grid_count=1024)
        assert blocks.mode == "chi"
        moments = experiments._moments(doubling, phi, grid_count=1024)
        pts, _ = families.orbit_batch(doubling, np.array([a]),
                                      int(blocks.ends[-1]))
        xi = (np.asarray(phi(pts[1:, 0])) - float(moments.mean(a))) \
            / float(moments.sigma(a))
        raw_y = [float(np.sum(xi[s - 1:s - 1 + z]))
                 for s, z in zip(blocks.starts, blocks.sizes)]
        assert np.allclose(blocks.y, raw_y, atol=1e-10)

    def test_chi_mode_check_finite(self, doubling):
        d = em.block_lln_check(doubling, em.indicator(0.0, 0.5), 0.3, 8,
                               0.41, mode="chi", grid_count=1024)
        assert np.isfinite(d)


class TestErdosFortet:
    def test_power_variant_gaussian(self):
        rep = em.erdos_fortet(1000, 20000, "power", 0, threads=2)
        assert rep.statistics["ks_to_normal_var2"] <= 0.02
        assert abs(rep.statistics["excess_kurtosis"]) <= 0.15
        assert rep.verdict

    def test_power_minus_one_fails_normality(self):
        rep = em.erdos_fortet(1000, 20000, "power_minus_one", 0, threads=2)
        assert (rep.statistics["ks_to_normal_var2"] >= 0.03
                or abs(rep.statistics["excess_kurtosis"]) >= 0.3)
        assert rep.verdict

    def test_variance_mixture_signature(self):
        # conditional variance 2 cos^2(pi x): overall variance 1, excess
        # kurtosis 3 E[4 cos^4]/1 - 3 = 1.5
        rep = em.erdos_fortet(1500, 30000, "power_minus_one", 2, threads=2)
        assert rep.statistics["sample_variance"] == pytest.approx(1.0,
                                                                  abs=0.05)
        assert rep.statistics["excess_kurtosis"] == pytest.approx(1.5,
                                                                  abs=0.25)

    def test_single_sample_degenerate(self):
        rep = em.erdos_fortet(1000, 1, "power", 0)
        assert rep.statistics["degenerate"]
        assert rep.verdict is None

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            em.erdos_fortet(100, 100, "squares", 0)

    def test_seeded_determinism(self):
        r1 = em.erdos_fortet(500, 4000, "power", 8, threads=1)
        r2 = em.erdos_fortet(500, 4000, "power", 8, threads=4)
        assert r1.statistics == r2.statistics


class TestTypicality:
    def test_full_interval_zero_discrepancy(self):
        fam = em.make_family("tent_slope", s0=2.0)
        rep = em.typicality_check(fam, [(0.0, 1.0)], 0.0, 5000,
                                  grid_count=1024)
        assert rep.statistics["max_discrepancy"] <= 1e-12

    def test_doubling_half_interval(self, doubling):
        rep = em.typicality_check(doubling, [(0.0, 0.5)], 0.37, 10**6,
                                  seed=0, grid_count=1024)
        assert rep.statistics["max_discrepancy"] <= 3e-3
        # ergodic averaging: discrepancy at the final horizon beats the
        # earliest recorded checkpoint
        curve = rep.arrays["discrepancy_curve"]
        assert np.median(curve[-1]) <= np.median(curve[0])

    def test_empty_run(self, doubling):
        rep = em.typicality_check(doubling, [(0.0, 0.5)], 0.3, 0,
                                  grid_count=1024)
        assert rep.statistics.get("empty")
        assert rep.verdict is None

    def test_dyadic_indicator_generator(self):
        inds = em.dyadic_indicators(16, 0)
        assert len(inds) == 16
        for lo, hi in inds:
            assert 0.0 <= lo < hi <= 1.0
            # endpoints sit on a dyadic grid
            for p in (lo, hi):
                q = p * 64
                assert q == pytest.approx(round(q), abs=1e-12)


class TestSamplingEngine:
    def test_stratified_layout(self):
        xs = sampling.stratified_parameters(0.0, 1.0, 50, 0)
        bins = np.floor(xs * 50).astype(int)
        assert np.array_equal(bins, np.arange(50))

    def test_bit_orbit_window_identity(self):
        orb = sampling.DoublingBitOrbit(3, range(4), 100)
        prev = orb.x.copy()
        for _ in range(100):
            cur = orb.step()
            d = 2 * prev - cur
            # 2 x_i - x_{i+1} must be the integer bit up to the injected
            # tail bit at 2^-53
            assert np.all(np.abs(d - np.round(d)) <= 2.0 ** -53)
            assert np.all(cur >= 0.0) and np.all(cur < 1.0)
            prev = cur.copy()

    def test_bit_orbit_does_not_collapse(self):
        orb = sampling.DoublingBitOrbit(0, range(8), 400)
        for _ in range(400):
            x = orb.step()
        assert np.all(x > 0.0)  # plain float64 iteration would be 0 here

    def test_plain_float_doubling_collapses(self):
        # the failure mode motivating the bit orbit
        x = np.random.default_rng(0).random(8)
        for _ in range(100):
            x = np.mod(2.0 * x, 1.0)
        assert np.all(x == 0.0)

    def test_parallel_map_order(self):
        out = sampling.parallel_map(lambda v: v * v, range(10), threads=4)
        assert out == [v * v for v in range(10)]
