import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from critwave.fields import (BoostParams, Field3D, RadialField, ResolutionError,
                             State, boost_matrix, eval_W, eval_W_dr,
                             load_radial_field, load_state, sample_W_family,
                             save_radial_field, save_state)
from critwave.functionals import h1_seminorm_sq
from critwave.grids import Box3DGrid, RadialGrid


class TestGroundStateClosedForm:
    def test_origin_value(self):
        assert eval_W(3, 0.0) == 1.0
        assert eval_W(5, 0.0) == 1.0

    def test_characteristic_radius(self):
        # |x|^2 = d(d-2) gives 2^(1-d/2)
        assert eval_W(3, 3.0) == pytest.approx(2.0 ** -0.5, rel=1e-15)
        assert eval_W(5, 15.0) == pytest.approx(2.0 ** -1.5, rel=1e-15)

    def test_positive_decreasing(self):
        r = np.linspace(0.0, 50.0, 400)
        for d in (3, 5):
            w = np.asarray(eval_W(d, r * r))
            assert np.all(w > 0)
            assert np.all(np.diff(w) < 0)
            dw = np.asarray(eval_W_dr(d, r[1:]))
            assert np.all(dw < 0)

    def test_rejects_bad_dimension(self):
        with pytest.raises(ValueError):
            eval_W(4, 1.0)

    def test_derivative_consistent(self):
        r = np.linspace(0.1, 30.0, 200)
        h = 1e-6
        fd = (np.asarray(eval_W(3, (r + h) ** 2))
              - np.asarray(eval_W(3, (r - h) ** 2))) / (2 * h)
        assert np.max(np.abs(fd - eval_W_dr(3, r))) < 1e-8


class TestContainers:
    def test_radial_field_validation(self, static_grid):
        with pytest.raises(ValueError):
            RadialField(static_grid, np.zeros(7))
        bad = np.zeros(static_grid.n)
        bad[3] = np.inf
        with pytest.raises(ValueError):
            RadialField(static_grid, bad)

    def test_state_checks_grids(self, static_grid):
        other = RadialGrid(3, 100.0, 4096, "sinh", 6.0)
        a = RadialField(static_grid, np.zeros(static_grid.n))
        b = RadialField(other, np.zeros(other.n))
        with pytest.raises(ValueError):
            State(a, b)

    def test_state_representation_and_reversal(self, static_grid):
        a = RadialField(static_grid, np.exp(-static_grid.r))
        b = RadialField(static_grid, 0.5 * np.exp(-static_grid.r))
        s = State(a, b)
        assert s.representation == "radial"
        rev = s.time_reversed()
        assert np.array_equal(rev.u2.values, -b.values)

    def test_boost_params(self):
        p = BoostParams(0.1, (0.3, 0.0, 0.4), (1.0, 0.0, 0.0))
        assert p.p_norm == pytest.approx(0.5)
        assert p.lorentz_factor == pytest.approx(math.sqrt(1.25))
        with pytest.raises(ValueError):
            BoostParams(math.nan)


class TestBoostMatrix:
    def test_identity_at_zero(self):
        assert np.allclose(boost_matrix(np.zeros(3)), np.eye(3))

    def test_small_p_continuity(self):
        # the p -> 0 limit is regular: no 0/0 blow-up
        a = boost_matrix(np.array([1e-12, 0, 0]))
        assert np.allclose(a, np.eye(3), atol=1e-12)

    def test_contraction_factor(self):
        p = np.array([0.5, 0.0, 0.0])
        a = boost_matrix(p)
        assert a[0, 0] == pytest.approx(math.sqrt(1.25), rel=1e-14)
        assert a[1, 1] == 1.0


class TestSampleFamily:
    def test_identity_parameters(self, static_grid):
        s = sample_W_family(BoostParams(), static_grid)
        w = np.asarray(eval_W(3, static_grid.r ** 2))
        assert np.array_equal(s.u1.values, w)
        assert np.all(s.u2.values == 0.0)

    def test_scaling_preserves_h1(self, static_grid):
        base = sample_W_family(BoostParams(), static_grid)
        scaled = sample_W_family(BoostParams(sigma=0.3), static_grid)
        a = h1_seminorm_sq(base.u1)
        b = h1_seminorm_sq(scaled.u1)
        assert b == pytest.approx(a, rel=1e-8)

    def test_radial_requires_centered(self, static_grid):
        with pytest.raises(ValueError):
            sample_W_family(BoostParams(p=(0.1, 0, 0)), static_grid)

    def test_resolution_guard(self):
        g = RadialGrid(3, 200.0, 64, "uniform")  # cells of ~3
        with pytest.raises(ResolutionError):
            sample_W_family(BoostParams(sigma=3.0), g)

    def test_boosted_on_box(self):
        box = Box3DGrid(20.0, 64)
        s = sample_W_family(BoostParams(0.0, (0.2, 0.0, 0.0)), box)
        assert s.representation == "box3d"
        # u2 = -grad u1 . p/<p> is odd along the boost axis
        assert abs(np.sum(s.u2.values)) < 1e-10


class TestSerialization:
    def test_radial_round_trip(self, tmp_path):
        g = RadialGrid(3, 50.0, 128, "sinh", 4.0)
        fld = RadialField(g, np.exp(-g.r) * np.cos(g.r))
        path = tmp_path / "field.dat"
        save_radial_field(path, fld)
        header = path.read_text().splitlines()[0]
        assert header.startswith("# d=3 n=128 r_max=")
        back = load_radial_field(path)
        assert back.grid == g
        assert np.array_equal(back.values, fld.values)

    def test_state_round_trip_radial(self, tmp_path):
        g = RadialGrid(3, 50.0, 128, "uniform")
        s = State(RadialField(g, np.exp(-g.r)),
                  RadialField(g, np.sin(g.r) * np.exp(-g.r)))
        save_state(tmp_path / "st", s)
        back = load_state(tmp_path / "st")
        assert np.array_equal(back.u1.values, s.u1.values)
        assert np.array_equal(back.u2.values, s.u2.values)

    def test_state_round_trip_box(self, tmp_path):
        g = Box3DGrid(5.0, 16)
        x, y, z = g.meshgrid
        s = State(Field3D(g, np.exp(-(x * x + y * y + z * z))),
                  Field3D(g, x * np.exp(-(x * x + y * y + z * z))))
        save_state(tmp_path / "st3", s)
        back = load_state(tmp_path / "st3", representation="box3d")
        assert np.array_equal(back.u1.values, s.u1.values)
        assert back.u1.grid == g

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 2 ** 31 - 1))
    def test_round_trip_random_values(self, tmp_path_factory, seed):
        g = RadialGrid(3, 30.0, 64, "uniform")
        vals = np.random.default_rng(seed).normal(size=g.n)
        path = tmp_path_factory.mktemp("hyp") / "f.dat"
        save_radial_field(path, RadialField(g, vals))
        assert np.array_equal(load_radial_field(path).values, vals)
