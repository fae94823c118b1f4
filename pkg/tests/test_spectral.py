import numpy as np
import pytest
from hypothesis import given, strategies as st

from amalgam import spectral
from amalgam.errors import AliasingError, GridSizeError, ValidationError
from amalgam.oracles import brute_convolution
from amalgam.spectral import (DEFAULT_BUMP, DataPair, SpectralField, box_op, cube_index,
                              cube_restrict, forward_transform, inverse_transform,
                              make_grid, pointwise_product)

from conftest import random_field


class TestGrid:
    def test_torus_1d(self):
        g = make_grid(1, 64, "torus", 1)
        assert g.size == 129
        assert g.axis_frequencies()[0] == -64 and g.axis_frequencies()[-1] == 64

    def test_torus_2d(self):
        assert make_grid(2, 8).shape == (17, 17)

    def test_euclidean_spacing(self):
        g = make_grid(1, 64, "TruncatedEuclidean", 4)
        assert g.size == 513
        assert g.spacing == 0.25
        assert np.allclose(np.diff(g.axis_frequencies()), 0.25)

    @pytest.mark.parametrize("args", [(0, 4), (4, 4), (1, 0)])
    def test_invalid(self, args):
        with pytest.raises(ValidationError):
            make_grid(*args)

    def test_torus_requires_unit_mesh(self):
        with pytest.raises(ValidationError):
            make_grid(1, 4, "torus", 2)

    def test_memory_cap(self, monkeypatch):
        monkeypatch.setattr(spectral, "MAX_LATTICE_POINTS", 1000)
        with pytest.raises(GridSizeError):
            make_grid(2, 20)
        make_grid(1, 20)


class TestField:
    def test_shape_checked(self):
        with pytest.raises(ValidationError):
            SpectralField(make_grid(1, 4), np.zeros(5))

    def test_immutable(self):
        f = SpectralField.delta(make_grid(1, 4), 1)
        with pytest.raises(ValueError):
            f.coeffs[0] = 1.0

    def test_input_not_aliased(self):
        c = np.zeros(9, dtype=complex)
        f = SpectralField(make_grid(1, 4), c)
        c[0] = 5
        assert f.coeffs[0] == 0

    def test_real_even_flag_validated(self):
        g = make_grid(1, 4)
        with pytest.raises(ValidationError):
            SpectralField(g, SpectralField.delta(g, 1).coeffs, real_even=True)
        c = np.zeros(9)
        c[[3, 5]] = 2.0
        assert SpectralField(g, c, real_even=True).is_real_even()

    def test_pair_grids_match(self):
        with pytest.raises(ValidationError):
            DataPair(SpectralField.zeros(make_grid(1, 4)), SpectralField.zeros(make_grid(1, 5)))

    def test_regrid_roundtrip(self, rng):
        g = make_grid(1, 6)
        f = random_field(g, rng, 3)
        back = f.regrid(make_grid(1, 20)).regrid(g)
        assert np.array_equal(back.coeffs, f.coeffs)


class TestCubes:
    def test_singleton_cube(self):
        g = make_grid(1, 8)
        f = SpectralField.delta(g, 3)
        assert np.array_equal(cube_restrict(f, [3]).coeffs, f.coeffs)
        assert cube_restrict(f, [2]).is_zero()

    def test_upper_face_inclusive(self):
        g = make_grid(1, 4, "euclidean", 2)
        f = SpectralField.delta(g, 2.5)
        assert not cube_restrict(f, [2]).is_zero()
        assert cube_restrict(f, [3]).is_zero()

    @pytest.mark.parametrize("M", [1, 2, 3, 4, 5])
    def test_every_point_in_exactly_one_cube(self, M):
        dom = "torus" if M == 1 else "euclidean"
        g = make_grid(1, 5, dom, M)
        lab = cube_index(g)
        xi = g.axis_frequencies()
        assert np.all((lab - 0.5 < xi + 1e-12) & (xi <= lab + 0.5 + 1e-12))
        assert np.all(lab - 0.5 < xi)

    def test_partition_2d(self, rng):
        g = make_grid(2, 3, "euclidean", 2)
        f = random_field(g, rng)
        total = sum(cube_restrict(f, [a, b]).coeffs for a in range(-3, 4) for b in range(-3, 4))
        assert np.array_equal(total, f.coeffs)


class TestWindows:
    def test_profile(self):
        x = np.linspace(-1.5, 1.5, 3001)
        h = DEFAULT_BUMP.h(x)
        assert np.all((0 <= h) & (h <= 1))
        assert np.allclose(h, h[::-1])
        assert np.all(h[np.abs(x) <= 0.5] == 1.0)
        assert np.all(h[np.abs(x) >= 1.0] == 0.0)

    def test_delta_at_lattice_point(self):
        g = make_grid(1, 6, "euclidean", 4)
        f = SpectralField.delta(g, 2.0)
        assert np.allclose(box_op(f, [2]).coeffs, f.coeffs, atol=0)
        assert box_op(f, [1]).is_zero() and box_op(f, [3]).is_zero()

    @pytest.mark.parametrize("M", [1, 3, 4, 8])
    def test_partition_of_unity(self, rng, M):
        g = make_grid(1, 6, "torus" if M == 1 else "euclidean", M)
        f = random_field(g, rng)
        tot = sum(box_op(f, [n]).coeffs for n in range(-6, 7))
        inner = slice(M, g.side - M)
        assert np.abs(tot[inner] - f.coeffs[inner]).max() < 1e-10

    def test_partition_2d(self, rng):
        g = make_grid(2, 3, "euclidean", 3)
        f = random_field(g, rng)
        tot = sum(box_op(f, [a, b]).coeffs for a in range(-3, 4) for b in range(-3, 4))
        inner = (slice(3, g.side - 3),) * 2
        assert np.abs(tot[inner] - f.coeffs[inner]).max() < 1e-10

    def test_far_windows_vanish(self):
        g = make_grid(1, 8, "euclidean", 4)
        c = np.zeros(g.shape, complex)
        xi = g.axis_frequencies()
        c[np.abs(xi - 2) < 0.5] = 1.0
        f = SpectralField(g, c)
        for m in range(-8, 9):
            if abs(m - 2) >= 2:
                assert box_op(f, [m]).is_zero()
        assert not box_op(f, [2]).is_zero()


class TestTransforms:
    def test_roundtrip_100(self, rng):
        for dim, K in [(1, 16), (2, 5), (3, 2)]:
            g = make_grid(dim, K)
            for _ in range(34):
                f = random_field(g, rng)
                back = forward_transform(inverse_transform(f), g)
                assert np.abs(back.coeffs - f.coeffs).max() < 1e-12 * np.abs(f.coeffs).max()

    def test_plane_wave(self):
        g = make_grid(1, 8)
        x = 2 * np.pi * np.arange(g.side) / g.side
        f = forward_transform(np.exp(3j * x), g)
        assert np.allclose(f.coeffs, SpectralField.delta(g, 3).coeffs, atol=1e-14)

    def test_parseval(self, rng):
        g = make_grid(1, 10)
        f = random_field(g, rng)
        u = inverse_transform(f)
        assert np.isclose(np.sum(np.abs(f.coeffs) ** 2), np.mean(np.abs(u) ** 2), rtol=1e-12)

    def test_euclidean_roundtrip(self, rng):
        g = make_grid(1, 6, "euclidean", 4)
        f = random_field(g, rng)
        assert np.allclose(forward_transform(inverse_transform(f), g).coeffs, f.coeffs, atol=1e-12)

    def test_sample_count_checked(self):
        with pytest.raises(ValidationError):
            forward_transform(np.zeros(5), make_grid(1, 4))


class TestProducts:
    def test_delta_sum(self):
        g = make_grid(1, 8)
        p = pointwise_product(SpectralField.delta(g, 1), SpectralField.delta(g, 2))
        assert np.allclose(p.coeffs, SpectralField.delta(g, 3).coeffs, atol=1e-15)

    def test_conjugate_reflects(self):
        g = make_grid(1, 8)
        p = pointwise_product(SpectralField.delta(g, 1), SpectralField.delta(g, 2), conjugate_g=True)
        assert np.allclose(p.coeffs, SpectralField.delta(g, -1).coeffs, atol=1e-15)

    def test_aliasing_error_without_padding(self):
        g = make_grid(1, 8)
        f = SpectralField.delta(g, 5)
        with pytest.raises(AliasingError):
            pointwise_product(f, f, antialias=False)
        p = pointwise_product(f, f)
        assert p.is_zero()

    def test_native_lattice_when_it_fits(self, rng):
        g = make_grid(1, 16)
        a, b = random_field(g, rng, 6), random_field(g, rng, 6)
        assert np.allclose(pointwise_product(a, b, antialias=False).coeffs,
                           brute_convolution(a, b).coeffs, atol=1e-12)

    @given(st.integers(1, 32), st.integers(0, 32), st.integers(0, 32), st.booleans(),
           st.integers(0, 2 ** 32 - 1))
    def test_matches_brute_force(self, K, ra, rb, conj, seed):
        g = make_grid(1, K)
        r = np.random.default_rng(seed)
        a = random_field(g, r, min(ra, K))
        b = random_field(g, r, min(rb, K))
        ref = brute_convolution(a, b, conjugate_b=conj).coeffs
        got = pointwise_product(a, b, conjugate_g=conj).coeffs
        assert np.abs(got - ref).max() <= 1e-10 * max(np.abs(ref).max(), 1e-300)

    def test_2d_and_euclidean(self, rng):
        for g in (make_grid(2, 6), make_grid(1, 8, "euclidean", 4), make_grid(2, 3, "euclidean", 2)):
            a, b = random_field(g, rng), random_field(g, rng)
            ref = brute_convolution(a, b).coeffs
            assert np.abs(pointwise_product(a, b).coeffs - ref).max() < 1e-10 * np.abs(ref).max()
