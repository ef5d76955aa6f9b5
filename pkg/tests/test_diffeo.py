import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from infotrans.diffeo import DiffeoMap, compose, invert, jacobian, map_distance, pullback, require_diffeo
from infotrans.errors import NotDiffeo
from infotrans.presets import random_map, random_scalar
from infotrans.spectral import Grid, ScalarField, integrate

TWO_PI = 2 * np.pi


@pytest.fixture
def sine_map():
    g = Grid((128,))
    return DiffeoMap.from_displacement(g, lambda x: [0.1 * np.sin(TWO_PI * x)])


class TestJacobian:
    def test_identity(self, grid):
        assert np.all(jacobian(DiffeoMap.identity(grid)).values == 1.0)

    def test_sine_map(self, sine_map):
        x = sine_map.grid.coords[0]
        expected = 1 + 0.2 * np.pi * np.cos(TWO_PI * x)
        assert np.max(np.abs(jacobian(sine_map).values - expected)) < 1e-12

    @given(seed=st.integers(0, 2**32 - 1), two_d=st.booleans())
    def test_unit_integral(self, seed, two_d):
        g = Grid((32, 32) if two_d else (64,))
        phi = random_map(g, np.random.default_rng(seed))
        assert abs(integrate(jacobian(phi)) - 1.0) < 1e-10

    def test_fold_rejected(self):
        g = Grid((64,))
        fold = DiffeoMap.from_displacement(g, lambda x: [0.3 * np.sin(TWO_PI * x)])
        with pytest.raises(NotDiffeo):
            require_diffeo(fold)


class TestCompose:
    def test_right_identity_exact(self, grid, rng):
        f = random_map(grid, rng)
        assert map_distance(compose(f, DiffeoMap.identity(grid)), f) < 1e-15

    def test_translations_add(self, grid2):
        a = DiffeoMap.translation(grid2, [0.3, 0.9])
        b = DiffeoMap.translation(grid2, [0.8, 0.25])
        ab = compose(a, b)
        assert map_distance(ab, DiffeoMap.translation(grid2, [0.1, 0.15])) < 1e-15

    def test_integer_shift_is_identity(self, grid1):
        assert map_distance(DiffeoMap.translation(grid1, 2.0), DiffeoMap.identity(grid1)) == 0.0

    def test_inverse_round_trip(self, rng):
        g = Grid((128,))
        f = random_map(g, rng)
        assert map_distance(compose(f, invert(f)), DiffeoMap.identity(g)) < 1e-6

    def test_associative(self, rng):
        g = Grid((64, 64))
        f, h, k = (random_map(g, rng, amplitude=0.05) for _ in range(3))
        lhs = compose(compose(f, h), k)
        rhs = compose(f, compose(h, k))
        assert map_distance(lhs, rhs) < 1e-4


class TestInvert:
    def test_identity(self, grid):
        assert map_distance(invert(DiffeoMap.identity(grid)), DiffeoMap.identity(grid)) == 0.0

    def test_translation(self, grid2):
        t = DiffeoMap.translation(grid2, [0.2, -0.35])
        assert map_distance(invert(t), DiffeoMap.translation(grid2, [-0.2, 0.35])) < 1e-15

    def test_sine_map_forward_check(self, sine_map):
        inv = invert(sine_map)
        x = sine_map.grid.coords
        y = inv.positions()
        # evaluate phi analytically at phi^{-1}(x)
        back = y + 0.1 * np.sin(TWO_PI * y)
        assert np.max(np.abs(back - x)) < 1e-8


class TestPullback:
    def test_identity(self, grid, rng):
        f = random_scalar(grid, rng)
        assert np.max(np.abs(pullback(f, DiffeoMap.identity(grid)).values - f.values)) < 1e-13

    def test_unit_density_gives_jacobian(self, grid, rng):
        phi = random_map(grid, rng)
        out = pullback(ScalarField.constant(grid, 1.0), phi)
        assert np.max(np.abs(out.values - jacobian(phi).values)) < 1e-13
