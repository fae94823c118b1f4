import math
import warnings

import numpy as np
import pytest

from amalgam import engine
from amalgam.engine import (NlwProblem, compositions, duhamel, envelope_terms, nonlinearity,
                            nonzero_orders, picard_iterates, propagate_linear,
                            series_tail_bound, solve_fixed_point, solve_series, support_size)
from amalgam.errors import (NoConvergenceError, NonContractionError, QuadratureWarning,
                            SmallnessError, ValidationError)
from amalgam.norms import fl_norm
from amalgam.oracles import rk4_frequency_oracle, s2_closed_form
from amalgam.quadrature import TimeMesh
from amalgam.spectral import DataPair, SpectralField, make_grid

from conftest import random_field


def real_even_field(grid, rng, radius, amp=1.0):
    f = random_field(grid, rng, radius, amp)
    c = 0.5 * (f.coeffs + f.coeffs[::-1]).real
    return SpectralField(grid, c, real_even=True)


class TestProblem:
    @pytest.mark.parametrize("args", [(1, 1, 1), (2, 3, 1), (3, -1, 1), (3, 3, 0), (2.5, 2, 1)])
    def test_invalid(self, args):
        with pytest.raises(ValidationError):
            NlwProblem(*args, make_grid(1, 4))

    def test_orders(self):
        assert nonzero_orders(3, 9) == [1, 3, 5, 7, 9]
        assert nonzero_orders(2, 4) == [1, 2, 3, 4]
        assert sorted(compositions(5, 3)) == [(1, 1, 3), (1, 3, 1), (3, 1, 1)]
        assert len(compositions(3, 2)) == 2


class TestLinear:
    def test_propagate_deltas(self):
        g = make_grid(1, 8)
        t = 0.7
        u = propagate_linear(DataPair(SpectralField.delta(g, 3), SpectralField.zeros(g)), t)
        assert math.isclose(u.coeffs[g.index_of(3)].real, math.cos(3 * t), rel_tol=1e-15)
        v = propagate_linear(DataPair(SpectralField.zeros(g), SpectralField.delta(g, 0)), t)
        assert v.coeffs[g.index_of(0)] == t

    def test_negative_time(self):
        with pytest.raises(ValidationError):
            propagate_linear(DataPair.zeros(make_grid(1, 4)), -1.0)

    def test_nonlinearity_conjugates(self):
        g = make_grid(1, 8)
        d = SpectralField.delta(g, 1)
        assert abs(nonlinearity([d, d, d], 3).coeffs[g.index_of(3)] - 1) < 1e-14
        assert abs(nonlinearity([d, d, d], 2).coeffs[g.index_of(1)] - 1) < 1e-14


class TestDuhamel:
    def test_constant_integrand(self):
        g = make_grid(1, 16)
        out = duhamel(SpectralField(g, np.ones(g.shape)), 0.9)
        a = g.abs_frequency()
        ref = np.where(a == 0, 0.405, (1 - np.cos(0.9 * a)) / np.where(a == 0, 1, a) ** 2)
        assert np.abs(out.coeffs - ref).max() < 1e-12

    def test_time_dependent(self):
        g = make_grid(1, 4)
        d = SpectralField.delta(g, 0)
        out, err = duhamel(lambda tau: tau * d, 1.3, return_error=True)
        assert abs(out.coeffs[g.index_of(0)] - 1.3 ** 3 / 6) < 1e-13 and err < 1e-12

    def test_underresolved_warns(self):
        g = make_grid(1, 64)
        with pytest.warns(QuadratureWarning):
            duhamel(lambda tau: SpectralField(g, np.exp(1j * 60 * tau) * np.ones(g.shape)),
                    3.0, mesh=TimeMesh("gl", 4))


class TestPicard:
    def test_s2_closed_form(self):
        prob = NlwProblem(2, 2, 1, make_grid(1, 6))
        pair = DataPair(SpectralField.delta(prob.grid, 2), SpectralField.zeros(prob.grid))
        for t in (0.1, 0.5, 1.7):
            v = picard_iterates(pair, prob, 2, t).iterates[2].coeffs[prob.grid.index_of(4)]
            assert abs(v - s2_closed_form(2, t)) < 1e-12

    def test_vanishing_orders(self, rng):
        prob = NlwProblem(3, 1, -1, make_grid(1, 40))
        pair = DataPair(random_field(prob.grid, rng, 3, 0.2), random_field(prob.grid, rng, 2, 0.2))
        ser = picard_iterates(pair, prob, 7, 0.4)
        for k in (2, 4, 6):
            assert ser.fl1_norms[k] == 0.0 and ser.iterates[k].is_zero()
        assert ser.fl1_norms[3] > 0 and ser.fl1_norms[7] > 0

    def test_zero_data(self):
        prob = NlwProblem(3, 3, 1, make_grid(1, 8))
        ser = picard_iterates(DataPair.zeros(prob.grid), prob, 7, 1.0)
        assert all(v == 0.0 for v in ser.fl1_norms.values())

    def test_frequency_support(self, rng):
        prob = NlwProblem(3, 2, 1, make_grid(1, 30))
        pair = DataPair(random_field(prob.grid, rng, 2), SpectralField.zeros(prob.grid))
        ser = picard_iterates(pair, prob, 7, 0.3)
        for k in (1, 3, 5, 7):
            r = ser.iterates[k].support_radii()[0]
            assert r <= 2 * k

    def test_real_even_preserved(self, rng):
        prob = NlwProblem(3, 3, 1, make_grid(1, 24))
        pair = DataPair(real_even_field(prob.grid, rng, 3), real_even_field(prob.grid, rng, 2))
        ser = picard_iterates(pair, prob, 7, 0.5)
        for k in (3, 5, 7):
            c = ser.iterates[k].coeffs
            scale = np.abs(c).max()
            assert np.abs(c.imag).max() < 1e-10 * scale
            assert np.abs(c - c[::-1]).max() < 1e-10 * scale

    def test_envelope_dominates(self, rng):
        prob = NlwProblem(3, 3, 1, make_grid(1, 40))
        pair = DataPair(random_field(prob.grid, rng, 2, 0.3), random_field(prob.grid, rng, 2, 0.3))
        T = 0.8
        ser = picard_iterates(pair, prob, 9, T)
        M = engine._s1_bound(pair, T)
        e = envelope_terms(3, T ** 2 * M ** 2, 9)
        for k in ser.orders:
            assert ser.fl1_norms[k] <= M * e[k] * (1 + 1e-10)

    def test_support_size(self):
        g = make_grid(1, 8, "euclidean", 2)
        c = np.zeros(g.shape)
        c[:5] = 1.0
        assert support_size(SpectralField(g, c)) == 2.5
        assert support_size(SpectralField.zeros(g)) == 0.0

    def test_validation(self):
        prob = NlwProblem(3, 3, 1, make_grid(1, 4))
        with pytest.raises(ValidationError):
            picard_iterates(DataPair.zeros(prob.grid), prob, 0, 1.0)
        with pytest.raises(ValidationError):
            picard_iterates(DataPair.zeros(prob.grid), prob, 3, 0.0)
        with pytest.raises(ValidationError):
            picard_iterates(DataPair.zeros(make_grid(1, 5)), prob, 3, 1.0)


class TestSolvers:
    def _data(self, rng, amp=0.01):
        g = make_grid(1, 12)
        return NlwProblem(3, 2, -1, g), DataPair(random_field(g, rng, 3, amp),
                                                 random_field(g, rng, 3, amp))

    def test_three_way_agreement(self, rng):
        prob, pair = self._data(rng)
        a = solve_series(pair, prob, 0.5, kmax=13)
        b = solve_fixed_point(pair, prob, 0.5)
        c = rk4_frequency_oracle(pair, prob, 0.5, 0.05 / 12)
        n = fl_norm(b, 1, 0)
        assert fl_norm(a.solution - b, 1, 0) < 1e-10 * n
        assert fl_norm(a.solution - c, 1, 0) < 1e-8 * n
        assert 0 < a.tail_bound < 1e-6

    def test_gauss_legendre_endpoint(self, rng):
        prob, pair = self._data(rng)
        a = solve_fixed_point(pair, prob, 0.5)
        b = solve_fixed_point(pair, prob, 0.5, mesh=TimeMesh("gl"))
        assert fl_norm(a - b, 1, 0) < 1e-10 * fl_norm(a, 1, 0)

    def test_zero_data(self):
        prob = NlwProblem(3, 3, 1, make_grid(1, 4))
        assert solve_series(DataPair.zeros(prob.grid), prob, 1.0).solution.is_zero()
        assert solve_fixed_point(DataPair.zeros(prob.grid), prob, 1.0).is_zero()

    def test_smallness(self, rng):
        prob, pair = self._data(rng, amp=1.0)
        with pytest.raises(SmallnessError):
            solve_series(pair, prob, 1.0)
        with pytest.raises(SmallnessError):
            solve_fixed_point(pair, prob, 1.0)

    def test_itermax(self, rng):
        prob, pair = self._data(rng)
        with pytest.raises(NoConvergenceError):
            solve_fixed_point(pair, prob, 0.5, itermax=2)

    def test_non_contraction(self, rng, monkeypatch):
        monkeypatch.setattr(engine, "_check_small", lambda *a: 0.0)
        prob, pair = self._data(rng, amp=3.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises((NonContractionError, NoConvergenceError)):
                solve_fixed_point(pair, prob, 2.0, itermax=40)

    def test_tail_bound_diverges(self):
        with pytest.raises(NoConvergenceError):
            series_tail_bound(3, 2.0, 5.0, 7)
        assert series_tail_bound(3, 1.0, 0.0, 7) == 0.0
