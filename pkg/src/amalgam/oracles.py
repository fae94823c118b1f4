"""Slow, independent reference computations used to validate the fast paths.

Everything here favours determinism and precision over speed: direct
convolutions run in extended precision (``clongdouble``), the majorant
recursion runs in exact rational arithmetic, and bounds are evaluated with
``mpmath``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from .engine import NlwProblem
from .errors import GridSizeError, StepSizeError, ValidationError
from .spectral import DataPair, SpectralField

__all__ = ["brute_convolution", "DsSequence", "ds_verify", "rk4_frequency_oracle",
           "s2_closed_form", "ORACLE_MAX_POINTS"]

#: Size caps for the quadratic-cost convolution oracle.
ORACLE_MAX_POINTS = {1: 257, 2: 65 ** 2, 3: 17 ** 3}

_LD = np.clongdouble


def _full_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Full linear convolution of two centred d-dimensional arrays."""
    if a.ndim == 1:
        return np.convolve(a, b)
    out = np.zeros(tuple(x + y - 1 for x, y in zip(a.shape, b.shape)), dtype=_LD)
    for idx in zip(*np.nonzero(a)):
        sl = tuple(slice(i, i + s) for i, s in zip(idx, b.shape))
        out[sl] += a[idx] * b
    return out


def _crop_centre(full: np.ndarray, side: int) -> np.ndarray:
    start = [(s - side) // 2 for s in full.shape]
    return full[tuple(slice(st, st + side) for st in start)]


def _reflect_conj(c: np.ndarray) -> np.ndarray:
    return np.conj(c[(slice(None, None, -1),) * c.ndim])


def brute_convolution(a: SpectralField, b: SpectralField, conjugate_b: bool = False) -> SpectralField:
    """Transform of ``a b`` (or ``a conj(b)``) by direct summation, cropped to the lattice."""
    if a.grid != b.grid:
        raise ValidationError("fields live on different grids")
    g = a.grid
    if g.size > ORACLE_MAX_POINTS[g.dim]:
        raise GridSizeError(f"brute convolution is capped at {ORACLE_MAX_POINTS[g.dim]} points")
    x = a.coeffs.astype(_LD)
    y = b.coeffs.astype(_LD)
    if conjugate_b:
        y = _reflect_conj(y)
    full = _full_convolve(x, y) * _LD(g.coeff_scale)
    return SpectralField(g, _crop_centre(full, g.side).astype(np.complex128))


# ----------------------------------------------------------- majorants ---

@dataclass
class DsSequence:
    sigma: int
    C: Fraction
    b1: Fraction
    terms: list


def _saturated(sigma: int, C: Fraction, b1: Fraction, kmax: int) -> list:
    b = [Fraction(0)] * (kmax + 1)
    if kmax >= 1:
        b[1] = b1
    for k in range(2, kmax + 1):
        # coefficient of x^k in (sum_{j<k} b_j x^j)^sigma
        base = b[:k] + [Fraction(0)]
        acc = base
        for _ in range(sigma - 1):
            nxt = [Fraction(0)] * (k + 1)
            for i, ai in enumerate(acc):
                if ai:
                    for j in range(1, k + 1 - i):
                        if base[j]:
                            nxt[i + j] += ai * base[j]
            acc = nxt
        b[k] = C * acc[k]
    return b[1:]


def ds_verify(sigma: int, C, b1, recursion="saturated", kmax: int = 25) -> dict:
    """Check ``b_k <= b_1 C0^(k-1)`` with ``C0 = (pi^2/6)(C sigma^2)^(1/(sigma-1)) b_1``.

    ``recursion`` is ``"saturated"`` (equality in the defining inequality,
    computed exactly over the rationals) or an explicit list of terms.
    """
    if sigma < 2:
        raise ValidationError("sigma must be >= 2")
    if not 1 <= kmax <= 60:
        raise ValidationError("kmax must lie in [1, 60] (terms grow geometrically)")
    Cf, bf = Fraction(str(C)), Fraction(str(b1))
    if Cf <= 0 or bf < 0:
        raise ValidationError("need C > 0 and b1 >= 0")
    if isinstance(recursion, str):
        if recursion != "saturated":
            raise ValidationError(f"unknown recursion {recursion!r}")
        terms = _saturated(sigma, Cf, bf, kmax)
    else:
        terms = [Fraction(str(t)) for t in recursion][:kmax]
        if any(t < 0 for t in terms):
            raise ValidationError("terms must be nonnegative")
    seq = DsSequence(sigma, Cf, bf, terms)
    with mpmath.workdps(60):
        C0 = (mpmath.pi ** 2 / 6) * (mpmath.mpf(Cf.numerator) / Cf.denominator * sigma ** 2) \
            ** (mpmath.mpf(1) / (sigma - 1)) * (mpmath.mpf(bf.numerator) / bf.denominator)
        worst = mpmath.mpf(0)
        ok = True
        for k, t in enumerate(terms, start=1):
            val = mpmath.mpf(t.numerator) / t.denominator
            bound = (mpmath.mpf(bf.numerator) / bf.denominator) * C0 ** (k - 1)
            if bound == 0:
                if val > 0:
                    ok, worst = False, mpmath.inf
                continue
            r = val / bound
            worst = max(worst, r)
            if r > 1:
                ok = False
    return {"ok": ok, "worst_ratio": float(worst), "C0": float(C0), "sequence": seq}


# ------------------------------------------------------------ ODE / RK4 --

def _nonlinear_exact(c: np.ndarray, problem: NlwProblem, side: int, scale) -> np.ndarray:
    factors = [c] * problem.rho + [_reflect_conj(c)] * (problem.sigma - problem.rho)
    acc = factors[0]
    for f in factors[1:]:
        acc = _full_convolve(acc, f) * scale
    return _crop_centre(acc, side)


def rk4_frequency_oracle(pair: DataPair, problem: NlwProblem, T: float, dt: float) -> SpectralField:
    """Classical RK4 for ``u'' = -|xi|^2 u + sign F H(u)`` in extended precision.

    Products are exact convolutions cropped to the lattice, matching the
    truncation used by the fast solvers.
    """
    g = problem.grid
    if pair.grid != g:
        raise ValidationError("data grid differs from the problem grid")
    xi_max = float(g.abs_frequency().max())
    if dt <= 0 or dt > 0.1 / xi_max:
        raise StepSizeError(f"dt = {dt:g} violates 0 < dt <= 0.1/max|xi| = {0.1 / xi_max:g}")
    if g.size > ORACLE_MAX_POINTS[g.dim]:
        raise GridSizeError(f"RK4 oracle is capped at {ORACLE_MAX_POINTS[g.dim]} points")
    steps = max(1, int(math.ceil(T / dt - 1e-12)))
    h = np.longdouble(T) / steps
    a2 = (g.abs_frequency() ** 2).astype(np.longdouble)
    scale = np.longdouble(g.coeff_scale)
    sign = np.longdouble(problem.sign)
    u = pair.u0.coeffs.astype(_LD)
    v = pair.u1.coeffs.astype(_LD)

    def rhs(u, v):
        return v, -a2 * u + sign * _nonlinear_exact(u, problem, g.side, scale)

    for _ in range(steps):
        k1u, k1v = rhs(u, v)
        k2u, k2v = rhs(u + h / 2 * k1u, v + h / 2 * k1v)
        k3u, k3v = rhs(u + h / 2 * k2u, v + h / 2 * k2v)
        k4u, k4v = rhs(u + h * k3u, v + h * k3v)
        u = u + h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        v = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return SpectralField(g, u.astype(np.complex128))


def s2_closed_form(n0: int, t: float) -> complex:
    """Second iterate at frequency ``2 n0`` for ``sigma = rho = 2``, data ``(delta_{n0}, 0)``.

    With ``a = |n0|`` the integral ``int_0^t sin(2a(t - tau))/(2a) cos^2(a tau) dtau``
    equals ``(1 - cos 2at)/(8a^2) + t sin(2at)/(8a)``.
    """
    if n0 == 0:
        raise ValidationError("n0 must be nonzero")
    a = abs(float(n0))
    return complex((1.0 - math.cos(2 * a * t)) / (8 * a * a) + t * math.sin(2 * a * t) / (8 * a))
