"""Quick oracle battery behind ``amalgam verify-lemmas``."""

from __future__ import annotations

import math
import warnings

import numpy as np

from .engine import (NlwProblem, duhamel, picard_iterates, solve_fixed_point,
                     solve_series)
from .norms import (SpaceSpec, algebra_check, fourier_amalgam_norm, fl_norm,
                    modulation_norm, sobolev_norm, wiener_amalgam_norm)
from .oracles import brute_convolution, ds_verify, rk4_frequency_oracle, s2_closed_form
from .spectral import (DEFAULT_BUMP, DataPair, SpectralField, box_op, cube_index,
                       forward_transform, inverse_transform, make_grid,
                       pointwise_product)


def _random_field(grid, rng, radius, amp=1.0):
    c = np.zeros(grid.shape, dtype=np.complex128)
    sl = tuple(slice(grid.offset - radius, grid.offset + radius + 1) for _ in range(grid.dim))
    shape = c[sl].shape
    c[sl] = amp * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return SpectralField(grid, c)


def _check(name, fn):
    try:
        detail = fn()
        ok, info = (detail if isinstance(detail, tuple) else (bool(detail), ""))
    except Exception as exc:  # the battery reports, it does not abort
        ok, info = False, f"{type(exc).__name__}: {exc}"
    return {"name": name, "ok": bool(ok), "detail": info}


def run_battery(seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    g = make_grid(1, 32)
    results = []

    def roundtrip():
        f = _random_field(g, rng, 32)
        err = np.abs(forward_transform(inverse_transform(f), g).coeffs - f.coeffs).max()
        return err < 1e-12, f"max error {err:.2e}"

    def convolution():
        worst = 0.0
        for _ in range(20):
            a, b = _random_field(g, rng, 12), _random_field(g, rng, 12)
            ref = brute_convolution(a, b).coeffs
            worst = max(worst, np.abs(pointwise_product(a, b).coeffs - ref).max()
                        / np.abs(ref).max())
        return worst < 1e-10, f"max rel error {worst:.2e}"

    def partition():
        ge = make_grid(1, 6, "euclidean", 4)
        f = _random_field(ge, rng, ge.offset)
        tot = sum(box_op(f, n).coeffs for n in range(-6, 7))
        inner = slice(ge.mesh, ge.side - ge.mesh)
        err = np.abs(tot[inner] - f.coeffs[inner]).max()
        lab = cube_index(ge)
        return err < 1e-10 and len(lab) == ge.side, f"max error {err:.2e}"

    def closed_form():
        prob = NlwProblem(2, 2, 1, make_grid(1, 4))
        pair = DataPair(SpectralField.delta(prob.grid, 1), SpectralField.zeros(prob.grid))
        worst = 0.0
        for t in np.linspace(0.05, 1.0, 6):
            v = picard_iterates(pair, prob, 2, t).iterates[2].coeffs[prob.grid.index_of(2)]
            worst = max(worst, abs(v - s2_closed_form(1, t)))
        return worst < 1e-8, f"max error {worst:.2e}"

    def duhamel_const():
        gd = make_grid(1, 20)
        c = SpectralField(gd, np.ones(gd.shape))
        out = duhamel(c, 0.7)
        a = gd.abs_frequency()
        ref = np.where(a == 0, 0.7 ** 2 / 2, (1 - np.cos(0.7 * a)) / np.where(a == 0, 1, a) ** 2)
        err = np.abs(out.coeffs - ref).max()
        return err < 1e-8, f"max error {err:.2e}"

    def vanishing():
        prob = NlwProblem(3, 2, -1, make_grid(1, 30))
        pair = DataPair(_random_field(prob.grid, rng, 3, 0.3), _random_field(prob.grid, rng, 2, 0.3))
        ser = picard_iterates(pair, prob, 5, 0.5)
        return ser.fl1_norms[2] == 0.0 and ser.fl1_norms[4] == 0.0, "S_2, S_4 exact zeros"

    def catalan():
        res = ds_verify(2, 1, 1, kmax=25)
        return res["ok"], f"worst ratio {res['worst_ratio']:.4f}"

    def solvers():
        gs = make_grid(1, 12)
        prob = NlwProblem(3, 3, 1, gs)
        pair = DataPair(_random_field(gs, rng, 3, 0.01), _random_field(gs, rng, 3, 0.01))
        a = solve_series(pair, prob, 0.5, kmax=13).solution
        b = solve_fixed_point(pair, prob, 0.5)
        c = rk4_frequency_oracle(pair, prob, 0.5, 0.02 / 12)
        n = lambda f: float(np.abs(f.coeffs).sum())  # noqa: E731
        worst = max(n(a - b), n(a - c)) / n(b)
        return worst < 1e-5, f"max rel diff {worst:.2e}"

    def norm_identities():
        f = _random_field(g, rng, 20)
        e1 = abs(fourier_amalgam_norm(f, 1, 2, 0.3) - fourier_amalgam_norm(f, math.inf, 2, 0.3))
        e2 = abs(sobolev_norm(f, 0.3) - fourier_amalgam_norm(f, 2, 2, 0.3))
        e3 = abs(modulation_norm(f, 2, 0.3) - wiener_amalgam_norm(f, 2, 0.3))
        ok = e1 < 1e-12 * fl_norm(f, 2, 0.3) and e2 < 1e-10 * sobolev_norm(f, 0.3) and e3 < 1e-8
        return ok, f"errors {e1:.1e} {e2:.1e} {e3:.1e}"

    def algebra():
        ok = True
        for _ in range(10):
            f, h = _random_field(g, rng, 10), _random_field(g, rng, 10)
            ok &= algebra_check(f, h, SpaceSpec("amalgam", 2, 1, 0.0))["ok"]
        return ok, "10 random pairs"

    for name, fn in [("transform round trip", roundtrip), ("convolution vs brute force", convolution),
                     ("partition of unity", partition), ("S_2 closed form", closed_form),
                     ("Duhamel constant integrand", duhamel_const), ("vanishing iterates", vanishing),
                     ("majorant recursion (Catalan)", catalan), ("solver agreement", solvers),
                     ("norm identities", norm_identities), ("algebra inequality", algebra)]:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            results.append(_check(name, fn))
    return results
