import math
import re
import warnings
from fractions import Fraction

import numpy as np
import pytest

from amalgam import spectral
from amalgam.engine import NlwProblem, picard_iterates
from amalgam.errors import InvalidDeltaError, OverlapError, RegimeWarning, ValidationError
from amalgam.inflation import (InflationConfig, PerturbationSpec, build_perturbation,
                               check_regime, lower_bound_check, perturbation_grid,
                               regime_onset, run_inflation, select_parameters,
                               tail_and_cross_terms)
from amalgam.norms import SpaceSpec, pair_norm
from amalgam.spectral import DataPair, make_grid

from conftest import smooth_data


class TestPerturbation:
    def test_support_n8(self):
        g = make_grid(1, 40)
        phi = build_perturbation(PerturbationSpec(8, 2.0), g)
        xi = g.axis_frequencies()
        on = sorted(int(x) for x in xi[phi.u0.coeffs != 0])
        expect = sorted(v * sgn for v in (7, 8, 9, 15, 16, 17) for sgn in (1, -1))
        assert on == expect
        assert np.all(phi.u0.coeffs[phi.u0.coeffs != 0] == 2.0)
        assert phi.u1.is_zero() and phi.u0.real_even

    def test_symmetric(self):
        g = make_grid(2, 30)
        c = build_perturbation(PerturbationSpec(6, 1.5, 2), g).u0.coeffs
        assert np.array_equal(c, c[::-1, ::-1]) and not np.any(c.imag)

    def test_euclidean_faces_closed(self):
        g = make_grid(1, 20, "euclidean", 4)
        c = build_perturbation(PerturbationSpec(4, 1.0), g).u0.coeffs
        assert np.count_nonzero(c) == 4 * 9

    def test_overlap(self):
        with pytest.raises(OverlapError):
            PerturbationSpec(3, 1.0)

    def test_grid_too_small(self):
        with pytest.raises(ValidationError):
            build_perturbation(PerturbationSpec(8, 1.0), make_grid(1, 16))

    def test_pair_norm_scaling(self):
        ratios = []
        for N in (64, 128, 256):
            g = perturbation_grid(N, 1)
            phi = build_perturbation(PerturbationSpec(N, 3.0), g)
            ratios.append(pair_norm(phi, SpaceSpec("amalgam", 2, 2, -0.5)) / (3.0 * N ** -0.5))
        assert max(ratios) / min(ratios) < 1.05
        assert all(2.0 < r < 4.0 for r in ratios)


class TestParameters:
    def test_case_a_exact(self):
        p = select_parameters(-0.4, 3, 0.1, 2 ** 20)
        assert p.case == "A" and p.R == 64.0 and p.T == 2.0 ** -7

    def test_case_b(self):
        N = 2 ** 20
        p = select_parameters(-1, 3, 0.1, N)
        assert p.case == "B"
        assert math.isclose(p.R, N ** 0.4, rel_tol=1e-12)
        assert math.isclose(p.T, N ** -0.45, rel_tol=1e-12)

    def test_boundary_is_case_a(self):
        assert select_parameters(-0.5, 3, 0.05, 64).case == "A"

    @pytest.mark.parametrize("s,delta,needle", [(-0.4, 0.3, "(sigma+1) delta/2"),
                                                (-1, 0.3, "(sigma+1) delta"),
                                                (-0.4, 0, "positive")])
    def test_invalid_delta(self, s, delta, needle):
        with pytest.raises(InvalidDeltaError, match=re.escape(needle)):
            select_parameters(s, 3, delta, 64)

    def test_s_nonnegative(self):
        with pytest.raises(ValidationError):
            select_parameters(0.0, 3, 0.1, 64)

    @pytest.mark.parametrize("s,sigma,delta", [("-2/5", 3, "1/10"), ("-1", 3, "1/10"),
                                               ("-1/5", 5, "1/50"), ("-3", 4, "1/20")])
    def test_exponent_identities(self, s, sigma, delta):
        p = select_parameters(s, sigma, delta, 64)
        e, d, s = p.exponents(), Fraction(delta), Fraction(s)
        assert e["ii_a"] == -(sigma - 1) * d / 2
        if p.case == "A":
            assert e["iii"] == s + (sigma + 1) * d / 2
            assert e["iv"] == -d
        else:
            assert e["iii"] == Fraction(-1, sigma - 1) + (sigma + 1) * d / 2
            assert e["iv"] == Fraction(1, sigma - 1) - d + s
        assert all(v < 0 for v in e.values())


class TestRegime:
    @pytest.mark.parametrize("s", [-0.4, -1.0])
    def test_onset(self, s):
        p = select_parameters(s, 3, 0.1, 64)
        j = regime_onset(p, 10)
        assert j is not None
        assert check_regime(p, 2 ** j, 10).all_ok
        assert check_regime(p, 2 ** (j + 6), 10).all_ok
        assert not check_regime(p, 2 ** (j - 1), 10).all_ok

    def test_small_n_fails(self):
        rc = check_regime(select_parameters(-0.4, 3, 0.1, 64), 64, 10)
        assert not rc.all_ok and set(rc.flags) == {"i", "ii_a", "ii_b", "iii", "iv"}

    def test_monotone(self):
        p = select_parameters(-0.4, 3, 0.1, 64)
        vals = [check_regime(p, 2 ** j, 10).values for j in (10, 12, 14)]
        for key in vals[0]:
            assert vals[0][key] > vals[1][key] > vals[2][key]

    def test_invalid_m(self):
        with pytest.raises(ValidationError):
            check_regime(select_parameters(-0.4, 3, 0.1, 64), 64, 0)


class TestLemmas:
    def test_pointwise_positivity(self):
        g = make_grid(1, 60, "euclidean", 4)
        N, R, T = 8, 2.0, 0.5
        phi = build_perturbation(PerturbationSpec(N, R), g)
        prob = NlwProblem(3, 3, 1, g)
        with warnings.catch_warnings():
            warnings.simplefilter("error", RegimeWarning)
            lb = lower_bound_check(phi, prob, T, SpaceSpec("amalgam", 2, 2, -0.4))
        xi = g.axis_frequencies()
        near = (xi >= 0.5) & (xi <= 1.0)
        assert np.all(np.abs(lb["S_sigma"].coeffs[near]) >= 0.01 * R ** 3 * T ** 2)
        assert lb["ratio"] > 0

    def test_short_time_warns(self):
        g = perturbation_grid(16, 3)
        phi = build_perturbation(PerturbationSpec(16, 1.0), g)
        with pytest.warns(RegimeWarning):
            lower_bound_check(phi, NlwProblem(3, 3, 1, g), 0.1, SpaceSpec())

    def test_cross_zero_and_tail(self):
        N = 16
        p = select_parameters(-0.4, 3, 0.1, N)
        g = perturbation_grid(N, 7)
        phi = build_perturbation(PerturbationSpec(N, p.R), g)
        tc = tail_and_cross_terms(DataPair.zeros(g), phi, NlwProblem(3, 3, 1, g), p.T,
                                  SpaceSpec("amalgam", 2, 2, -0.4))
        assert tc["cross_norm"] == 0.0
        assert tc["tail_computed"] > 0
        assert tc["tail_norm"] >= tc["tail_computed"]

    def test_tail_scaling(self):
        # computed tail over R^(2 sigma - 1) T^4 stays bounded along the sweep
        vals = []
        for N in (64, 128, 256):
            p = select_parameters(-0.4, 3, 0.1, N)
            g = perturbation_grid(N, 7)
            phi = build_perturbation(PerturbationSpec(N, p.R), g)
            tc = tail_and_cross_terms(DataPair.zeros(g), phi, NlwProblem(3, 3, 1, g), p.T,
                                      SpaceSpec("amalgam", 2, 2, -0.4))
            vals.append(tc["tail_computed"] / (p.R ** 5 * p.T ** 4))
        assert max(vals) / min(vals) < 2.0

    def test_s1_bound(self, sweep_a):
        recs = [r for r in sweep_a.records if r.theta == -0.4]
        ref = recs[0]
        C = 2.0 * ref.S1 / (1 + ref.R * ref.N ** -0.4)
        for r in recs:
            assert r.S1 <= C * (1 + r.R * r.N ** -0.4)


class TestSweep:
    def test_records_complete(self, sweep_a):
        assert len(sweep_a.records) == 16
        for r in sweep_a.records:
            assert not r.error
            assert set(r.flags) == {"i", "ii_a", "ii_b", "iii", "iv"}
            assert r.max_imag_rel < 1e-10

    def test_growth_and_decay(self, sweep_a):
        pert = sweep_a.column("pert_norm")
        L = sweep_a.column("restricted_L")
        assert all(a > b for a, b in zip(pert, pert[1:]))
        assert all(a < b for a, b in zip(L, L[1:]))

    def test_per_n_failure_recorded(self, monkeypatch):
        monkeypatch.setattr(spectral, "MAX_LATTICE_POINTS", 4000)
        rep = run_inflation(None, InflationConfig(Ns=(8, 512)), threads=1)
        by_n = {r.N: r for r in rep.records}
        assert not by_n[8].error and "GridSizeError" in by_n[512].error

    def test_threads_deterministic(self):
        cfg = InflationConfig(Ns=(8, 16), thetas=(-0.4, 0.5))
        a = run_inflation(None, cfg, threads=1)
        b = run_inflation(None, cfg, threads=2)
        for x, y in zip(a.records, b.records):
            assert (x.N, x.theta, x.restricted_L, x.sol_norm) == (y.N, y.theta, y.restricted_L, y.sol_norm)

    def test_general_data_small(self):
        rep = run_inflation(smooth_data(), InflationConfig(Ns=(8, 16)), threads=1)
        assert all(not r.error and r.cross > 0 for r in rep.records)

    def test_euclidean_mode(self):
        rep = run_inflation(None, InflationConfig(Ns=(8,), domain="euclidean", mesh=4), threads=1)
        assert not rep.records[0].error and rep.records[0].restricted_L > 0

    @pytest.mark.parametrize("kw", [dict(s=0.1), dict(Ns=()), dict(Ns=(2,)), dict(thetas=()),
                                    dict(delta=0.5), dict(sigma=2, rho=3)])
    def test_config_validation(self, kw):
        with pytest.raises(ValidationError):
            InflationConfig(**kw)


def test_series_kmax_iterates_on_small_case():
    g = perturbation_grid(8, 5)
    phi = build_perturbation(PerturbationSpec(8, 1.0), g)
    ser = picard_iterates(phi, NlwProblem(3, 3, 1, g), 5, 0.4)
    assert ser.iterates[5].support_radii()[0] <= 5 * 17
