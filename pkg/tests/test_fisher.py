import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from infotrans.diagnostics import recording
from infotrans.diffeo import DiffeoMap, jacobian, pullback
from infotrans.errors import DegenerateAngle, NotDensity, NotDiffeo, NotTangent
from infotrans.fisher import (
    Density,
    fisher_distance,
    fisher_inner,
    geodesic,
    pullback_density,
    slerp_coefficients,
    sphere_angle,
    sqrt_lift,
    unlift,
)
from infotrans.presets import density_preset, random_density, random_map, random_scalar
from infotrans.selftest import FISHER_ORACLE
from infotrans.spectral import Grid, ScalarField, integrate

TWO_PI = 2 * np.pi


@pytest.fixture
def bump():
    return density_preset("bump", Grid((128,)))


def _triple(seed, grid):
    rng = np.random.default_rng(seed)
    return tuple(random_density(grid, rng) for _ in range(3))


class TestDensity:
    def test_rejects_nonpositive(self, grid1):
        with pytest.raises(NotDensity):
            Density(ScalarField.from_function(grid1, lambda x: 1 + np.sin(TWO_PI * x)))

    def test_rejects_wrong_mass(self, grid1):
        with pytest.raises(NotDensity):
            Density(ScalarField.constant(grid1, 1.01))

    def test_normalised_reports(self, grid2):
        with recording() as events:
            nu = Density.normalised(ScalarField.constant(grid2, 0.0), floor=1e-3)
        assert np.allclose(nu.ratio.values, 1.0)
        assert events[0]["event"] == "normalise"


class TestFisherInner:
    def test_zero(self, grid):
        z = ScalarField.zeros(grid)
        assert fisher_inner(z, z, Density.uniform(grid)) == 0.0

    def test_uniform_reduces_to_l2(self, grid1):
        a = ScalarField.from_function(grid1, lambda x: np.sin(TWO_PI * x))
        assert fisher_inner(a, a, Density.uniform(grid1)) == pytest.approx(0.5, abs=1e-14)

    def test_not_tangent(self, grid1):
        a = ScalarField.constant(grid1, 0.1)
        with pytest.raises(NotTangent):
            fisher_inner(a, a, Density.uniform(grid1))

    @given(seed=st.integers(0, 2**32 - 1))
    def test_symmetric_positive(self, seed):
        g = Grid((64,))
        rng = np.random.default_rng(seed)
        nu = random_density(g, rng)
        a, b = random_scalar(g, rng), random_scalar(g, rng)
        assert fisher_inner(a, b, nu) == pytest.approx(fisher_inner(b, a, nu), rel=1e-14)
        assert fisher_inner(a, a, nu) > 0

    def test_invariant_under_pullback(self, rng):
        g = Grid((128,))
        nu = random_density(g, rng)
        a, b = random_scalar(g, rng), random_scalar(g, rng)
        phi = random_map(g, rng)
        pa, pb, pn = pullback(a, phi), pullback(b, phi), pullback(nu.ratio, phi)
        lhs = float(np.mean(pa.values * pb.values / pn.values))
        assert lhs == pytest.approx(fisher_inner(a, b, nu), abs=5e-4)


class TestSqrtLift:
    def test_uniform(self, grid):
        assert np.all(sqrt_lift(Density.uniform(grid)).values == 1.0)

    def test_bump(self, bump):
        x = bump.grid.coords[0]
        f = sqrt_lift(bump)
        assert np.max(np.abs(f.values - np.sqrt(1 + 0.5 * np.sin(TWO_PI * x)))) < 1e-14
        assert integrate(f * f) == pytest.approx(1.0, abs=1e-12)

    def test_round_trip(self, grid, rng):
        nu = random_density(grid, rng)
        assert np.max(np.abs(unlift(sqrt_lift(nu)).ratio.values - nu.ratio.values)) < 1e-14


class TestSlerp:
    @pytest.mark.parametrize("theta", [0.0, 1e-12, 1e-6, 0.3, 1.5])
    def test_endpoints(self, theta):
        a0, b0, _, _ = slerp_coefficients(theta, 0.0)
        a1, b1, _, _ = slerp_coefficients(theta, 1.0)
        assert (a0, b0) == (1.0, 0.0)
        assert a1 == pytest.approx(0.0, abs=1e-15) and b1 == pytest.approx(1.0, rel=1e-15)

    @pytest.mark.parametrize("t", [0.1, 0.5, 0.9])
    def test_matches_sine_form(self, t):
        theta = 0.7
        a, b, da, db = slerp_coefficients(theta, t)
        assert a == pytest.approx(math.sin((1 - t) * theta) / math.sin(theta), rel=1e-14)
        assert b == pytest.approx(math.sin(t * theta) / math.sin(theta), rel=1e-14)
        assert da == pytest.approx(-theta * math.cos((1 - t) * theta) / math.sin(theta), rel=1e-14)
        assert db == pytest.approx(theta * math.cos(t * theta) / math.sin(theta), rel=1e-14)

    def test_zero_angle_limit(self):
        assert slerp_coefficients(0.0, 0.3) == pytest.approx((0.7, 0.3, -1.0, 1.0))


class TestDistance:
    def test_identical(self, grid, rng):
        nu = random_density(grid, rng)
        assert fisher_distance(nu, nu) == 0.0

    def test_oracle(self, bump):
        assert abs(fisher_distance(Density.uniform(bump.grid), bump) - FISHER_ORACLE) < 1e-8

    def test_degenerate_angle(self, grid1):
        f = np.ones(grid1.shape)
        with pytest.raises(DegenerateAngle):
            sphere_angle(f, -f)

    @given(seed=st.integers(0, 2**32 - 1), two_d=st.booleans())
    def test_metric_axioms(self, seed, two_d):
        g = Grid((16, 16) if two_d else (64,))
        a, b, c = _triple(seed, g)
        ab, bc, ac = fisher_distance(a, b), fisher_distance(b, c), fisher_distance(a, c)
        assert 0 < ab < math.pi / 2
        assert ab == pytest.approx(fisher_distance(b, a), rel=1e-12)
        assert ac <= ab + bc + 1e-9

    def test_near_diameter(self, grid1):
        # nearly disjoint supports approach pi/2 from below
        x = grid1.coords[0]
        p = Density.normalised(ScalarField(grid1, (x < 0.5).astype(float)), floor=1e-9)
        q = Density.normalised(ScalarField(grid1, (x >= 0.5).astype(float)), floor=1e-9)
        assert 1.5 < fisher_distance(p, q) < math.pi / 2


class TestGeodesic:
    def test_endpoints_exact(self, grid, rng):
        a, b = random_density(grid, rng), random_density(grid, rng)
        assert geodesic(a, b, 0.0) is a
        assert geodesic(a, b, 1.0) is b
        mid = geodesic(a, b, 1.0 - 1e-15).ratio.values
        assert np.max(np.abs(mid - b.ratio.values)) < 1e-12

    def test_constant_when_equal(self, grid1, rng):
        nu = random_density(grid1, rng)
        for t in (0.25, 0.5, 0.75):
            assert np.max(np.abs(geodesic(nu, nu, t).ratio.values - nu.ratio.values)) < 1e-14

    def test_midpoint_is_density(self, bump):
        mid = geodesic(Density.uniform(bump.grid), bump, 0.5)
        assert abs(integrate(mid.ratio) - 1) < 1e-10
        assert mid.ratio.values.min() > 0

    @given(seed=st.integers(0, 2**32 - 1), t=st.floats(0.0, 1.0))
    def test_sphere_norm_and_distance_split(self, seed, t):
        g = Grid((64,))
        a, b, _ = _triple(seed, g)
        theta = fisher_distance(a, b)
        f, h = sqrt_lift(a).values, sqrt_lift(b).values
        ca, cb, _, _ = slerp_coefficients(theta, t)
        assert abs(np.mean((ca * f + cb * h) ** 2) - 1) < 1e-10
        mid = geodesic(a, b, t)
        assert fisher_distance(a, mid) == pytest.approx(t * theta, abs=1e-9)

    def test_chordal_length(self, bump):
        vol = Density.uniform(bump.grid)
        pts = [sqrt_lift(geodesic(vol, bump, t)).values for t in np.linspace(0, 1, 64)]
        length = sum(math.sqrt(np.mean((q - p) ** 2)) for p, q in zip(pts, pts[1:]))
        assert abs(length - fisher_distance(vol, bump)) < 1e-4

    def test_fisher_speed_is_four_times_lifted_speed(self, bump):
        vol = Density.uniform(bump.grid)
        t, h = 0.4, 1e-5
        lo, mid, hi = (geodesic(vol, bump, s) for s in (t - h, t, t + h))
        nudot = (hi.ratio - lo.ratio) / (2 * h)
        fdot = (sqrt_lift(hi) - sqrt_lift(lo)) / (2 * h)
        assert fisher_inner(nudot, nudot, mid) == pytest.approx(4 * integrate(fdot * fdot), rel=1e-8)
        assert 4 * integrate(fdot * fdot) == pytest.approx(4 * fisher_distance(vol, bump) ** 2, rel=1e-8)


class TestPullbackDensity:
    def test_identity(self, grid, rng):
        nu = random_density(grid, rng)
        out = pullback_density(nu, DiffeoMap.identity(grid))
        assert np.max(np.abs(out.ratio.values - nu.ratio.values)) < 1e-13

    def test_uniform_gives_jacobian(self, grid, rng):
        phi = random_map(grid, rng)
        out = pullback_density(Density.uniform(grid), phi)
        assert np.max(np.abs(out.ratio.values - jacobian(phi).values)) < 1e-12

    def test_mass_before_renormalising(self, rng):
        g = Grid((128,))
        nu, phi = random_density(g, rng), random_map(g, rng)
        with recording() as events:
            pullback_density(nu, phi)
        (ev,) = [e for e in events if e["event"] == "pullback_mass"]
        assert abs(ev["mass"] - 1) < 2e-6

    def test_rejects_fold(self, grid1):
        fold = DiffeoMap.from_displacement(grid1, lambda x: [0.3 * np.sin(TWO_PI * x)])
        with pytest.raises(NotDiffeo):
            pullback_density(Density.uniform(grid1), fold)
