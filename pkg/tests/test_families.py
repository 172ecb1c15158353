"""Map family evaluation, derivatives, orbits, and their invariants."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import expmap as em
from expmap import families
from expmap.errors import (
    BranchBoundaryError,
    DegenerateSeedError,
    DomainError,
)

import oracles


@pytest.fixture(scope="module")
def tent19():
    return em.make_family("tent_slope", s0=1.9)


@pytest.fixture(scope="module")
def tent2():
    return em.make_family("tent_slope", s0=2.0)


@pytest.fixture(scope="module")
def doubling():
    return em.make_family("constant_doubling")


@pytest.fixture(scope="module")
def beta_golden():
    return em.make_family("beta")


@pytest.fixture(scope="module")
def markov():
    return em.make_family("markov_full_branch", amplitude=0.1, window=1.0)


class TestEval:
    def test_full_tent(self, tent2):
        assert em.eval_map(tent2, 0.0, 0.25) == pytest.approx(0.5)

    def test_doubling(self, doubling):
        assert em.eval_map(doubling, 0.7, 0.3) == pytest.approx(0.6)

    def test_beta_golden_high(self, beta_golden):
        expected = oracles.beta_eval_mp(float(oracles.golden_mp()), 0.0, 0.9)
        got = float(em.eval_map(beta_golden, 0.0, 0.9))
        assert got == pytest.approx(expected, abs=1e-12)
        assert got == pytest.approx(0.4562306, abs=1e-6)

    def test_parameter_outside_window(self, tent19):
        with pytest.raises(DomainError):
            em.eval_map(tent19, 0.5, 0.3)

    def test_mod_one_wrap_clamped(self, doubling):
        # values within 1e-15 of 1 are pulled back to 0
        x = np.nextafter(0.5, 0.0)
        assert float(em.eval_map(doubling, 0.0, x)) == 0.0


class TestDerivatives:
    def test_tent_deriv_signs(self, tent2):
        assert em.deriv_x_at(tent2, 0.0, 0.25) == pytest.approx(2.0)
        assert em.deriv_x_at(tent2, 0.0, 0.75) == pytest.approx(-2.0)

    def test_markov_deriv_finite_difference(self, markov):
        f = lambda x: float(em.eval_map(markov, 0.5, x))
        got = em.deriv_x_at(markov, 0.5, 0.25)
        assert got == pytest.approx(oracles.finite_difference(f, 0.25),
                                    rel=1e-6)
        assert got == pytest.approx(2.0)

    def test_markov_deriv_a_finite_difference(self, markov):
        g = lambda a: float(em.eval_map(markov, a, 0.3))
        got = em.deriv_a_at(markov, 0.5, 0.3)
        assert got == pytest.approx(oracles.finite_difference(g, 0.5),
                                    rel=1e-6)

    def test_tent_deriv_a(self, tent2):
        assert em.deriv_a_at(tent2, 0.0, 0.25) == pytest.approx(0.25)

    def test_doubling_deriv_a_zero(self, doubling):
        assert em.deriv_a_at(doubling, 0.4, 0.3) == 0.0

    def test_beta_deriv_a(self, beta_golden):
        assert em.deriv_a_at(beta_golden, 0.0, 0.9) == pytest.approx(0.9)

    def test_branch_boundary_error(self, tent2):
        with pytest.raises(BranchBoundaryError):
            em.deriv_x_at(tent2, 0.0, 0.5 + 1e-14)


class TestBranchPoints:
    def test_tent(self, tent19):
        assert np.allclose(em.branch_points(tent19, 0.0), [0.0, 0.5, 1.0])

    def test_beta_golden(self, beta_golden):
        b = float(oracles.golden_mp())
        pts = em.branch_points(beta_golden, 0.0)
        assert pts[0] == 0.0 and pts[-1] == 1.0
        assert pts[1] == pytest.approx(1.0 / b, abs=1e-15)

    def test_doubling(self, doubling):
        assert np.allclose(em.branch_points(doubling, 0.3), [0.0, 0.5, 1.0])

    @pytest.mark.parametrize("kind", families.FAMILY_KINDS)
    def test_strictly_increasing_across_window(self, kind):
        fam = em.make_family(kind)
        for a in np.linspace(0.0, fam.window, 7):
            pts = em.branch_points(fam, float(a))
            assert pts.size == fam.p0 + 1
            assert np.all(np.diff(pts) > 0)


class TestOrbit:
    def test_doubling_identity(self, doubling):
        rec = em.orbit(doubling, 0.3, 2)
        assert np.allclose(rec.points, [0.3, 0.6, 0.2])
        assert np.allclose(rec.a_derivative, [1.0, 2.0, 4.0])

    def test_full_tent_endpoint_fixed(self, tent2):
        rec = em.orbit(tent2, 0.0, 2)
        assert np.allclose(rec.points, [1.0, 0.0, 0.0])

    def test_tent_19_extended_precision(self, tent19):
        rec = em.orbit(tent19, 0.0, 3)
        expected = oracles.tent_orbit_mp(1.9, 0.95, 3)
        assert np.allclose(rec.points, expected, atol=1e-14)
        assert np.allclose(rec.points, [0.95, 0.095, 0.1805, 0.34295])

    def test_points_stay_in_unit_interval(self, beta_golden):
        rec = em.orbit(beta_golden, 0.02, 500)
        assert np.all(rec.points >= 0.0) and np.all(rec.points < 1.0)

    def test_chain_rule_product(self, tent19):
        rec = em.orbit(tent19, 0.013, 30)
        prod = 1.0
        for j in range(30):
            prod *= em.deriv_x_at(tent19, 0.013, float(rec.points[j]))
            assert prod == pytest.approx(rec.x_derivative[j + 1], rel=1e-12)

    def test_derivative_bounds(self, tent19):
        rec = em.orbit(tent19, 0.04, 25)
        mags = np.abs(rec.x_derivative[1:])
        js = np.arange(1, 26)
        assert np.all(mags >= tent19.lambda_min ** js * (1 - 1e-12))
        assert np.all(mags <= tent19.lambda_max ** js * (1 + 1e-12))

    @settings(max_examples=20, deadline=None)
    @given(a=st.floats(0.001, 0.099))
    def test_recursion_vs_finite_difference(self, a):
        fam = em.make_family("tent_slope", s0=1.85)
        h = 1e-7
        n = 8
        rec = em.orbit(fam, a, n)
        lo = em.orbit(fam, a - h, n)
        hi = em.orbit(fam, a + h, n)
        if not np.array_equal(lo.itinerary, hi.itinerary):
            return  # itinerary changed inside [a-h, a+h]; oracle invalid
        fd = (hi.points[n] - lo.points[n]) / (2 * h)
        assert rec.a_derivative[n] == pytest.approx(fd, rel=1e-4)

    def test_boundary_hit_flagged(self, tent2):
        # x_0 = 1 -> orbit [1, 0, 0] grazes the endpoint branch point 0
        rec = em.orbit(tent2, 0.0, 3)
        assert rec.boundary_hits  # hits x = 0 exactly

    def test_markov_images_cover_unit_interval(self, markov):
        # Markov property: each branch image is [0, 1] up to 1e-12
        for a in np.linspace(0.0, 1.0, 5):
            for k, (lo, hi) in enumerate([(0.0, 0.5), (0.5, 1.0)]):
                xs = np.linspace(lo + 1e-9, hi - 1e-9, 4001)
                ys = np.asarray(em.eval_map(markov, float(a), xs))
                assert ys.min() < 1e-3 and ys.max() > 1.0 - 1e-3
                # the branch formula pins the endpoint limits exactly
                f = lambda x: 2 * x - k + 0.1 * a * np.sin(2 * np.pi * x)
                assert f(lo) == pytest.approx(0.0, abs=1e-12)
                assert f(hi) == pytest.approx(1.0, abs=1e-12)


class TestSeeds:
    def test_postcritical_tent(self, tent19):
        assert float(families.x0_value(tent19, 0.0)) == pytest.approx(0.95)
        assert families.x0_deriv(tent19, 0.0) == 0.5

    def test_affine_seed(self):
        fam = em.make_family("beta", x0_xstar=0.3, x0_kappa=10.0)
        assert float(families.x0_value(fam, 0.01)) == pytest.approx(0.4)
        assert families.x0_deriv(fam, 0.01) == 10.0

    def test_affine_seed_leaving_interval(self):
        fam = em.make_family("beta", x0_xstar=0.99, x0_kappa=10.0)
        with pytest.raises(DomainError):
            families.x0_value(fam, 0.05)

    def test_degenerate_seed(self):
        fam = em.make_family("constant_doubling", x0="affine",
                             x0_xstar=0.3, x0_kappa=0.0)
        with pytest.raises(DegenerateSeedError):
            families.seed_derivative_or_raise(fam)


class TestWindows:
    def test_tent_window_clipped_at_slope_two(self):
        fam = em.make_family("tent_slope", s0=1.95)
        assert fam.window == pytest.approx(0.05)

    def test_tent_slope_out_of_range(self):
        with pytest.raises(DomainError):
            em.make_family("tent_slope", s0=1.2)

    def test_beta_window_crossing_integer(self):
        with pytest.raises(DomainError):
            em.make_family("beta", beta0=1.99, window=0.05)

    def test_unknown_kind(self):
        with pytest.raises(DomainError):
            em.make_family("lorenz")
