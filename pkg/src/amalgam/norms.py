"""Function-space norms computed from lattice transforms.

Frequency integrals are Riemann sums with the lattice cell weight
``M^-d`` (exact counting measure on the torus).  Physical ``L^2`` norms are
normalised so that Plancherel is an isometry, ``||g||_{L^2_x} = ||F g||_{L^2_xi}``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.fft as sfft

from .errors import AliasingError, ValidationError
from .spectral import (DEFAULT_BUMP, Domain, SpectralField, WindowBump,
                       cube_index, embed, fft_workers, pointwise_product)

__all__ = [
    "Family", "SpaceSpec", "PairSpec", "japanese", "fourier_amalgam_norm",
    "fl_norm", "sobolev_norm", "modulation_norm", "wiener_amalgam_norm",
    "norm", "restricted_norm", "pair_norm", "fl1_pair_norm", "algebra_check",
]


class Family(str, enum.Enum):
    FOURIER_AMALGAM = "FourierAmalgam"
    FOURIER_LEBESGUE = "FourierLebesgue"
    MODULATION = "Modulation"
    WIENER_AMALGAM = "WienerAmalgam"
    SOBOLEV = "Sobolev"

    @classmethod
    def parse(cls, value) -> "Family":
        if isinstance(value, Family):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        table = {
            "fourieramalgam": cls.FOURIER_AMALGAM, "amalgam": cls.FOURIER_AMALGAM,
            "what": cls.FOURIER_AMALGAM, "fourierlebesgue": cls.FOURIER_LEBESGUE,
            "fl": cls.FOURIER_LEBESGUE, "modulation": cls.MODULATION,
            "m": cls.MODULATION, "wieneramalgam": cls.WIENER_AMALGAM,
            "wiener": cls.WIENER_AMALGAM, "w": cls.WIENER_AMALGAM,
            "sobolev": cls.SOBOLEV, "h": cls.SOBOLEV,
        }
        if key not in table:
            raise ValidationError(f"unknown space family {value!r}")
        return table[key]


def _exponent(x, name):
    v = float(x)
    if math.isnan(v) or v < 1.0:
        raise ValidationError(f"{name} must lie in [1, inf], got {x}")
    return v


@dataclass(frozen=True)
class SpaceSpec:
    """``(family, p, q, s)``; Sobolev forces ``p = q = 2``."""

    family: Family = Family.FOURIER_AMALGAM
    p: float = 2.0
    q: float = 2.0
    s: float = 0.0

    def __post_init__(self):
        fam = Family.parse(self.family)
        object.__setattr__(self, "family", fam)
        p, q = _exponent(self.p, "p"), _exponent(self.q, "q")
        if fam is Family.SOBOLEV:
            p = q = 2.0
        if fam in (Family.MODULATION, Family.WIENER_AMALGAM) and p != 2.0:
            raise ValidationError(f"{fam.value} is only supported with p = 2")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "s", float(self.s))

    def with_s(self, s: float) -> "SpaceSpec":
        return replace(self, s=float(s))

    def label(self) -> str:
        return f"{self.family.value}(p={self.p:g},q={self.q:g},s={self.s:g})"


@dataclass(frozen=True)
class PairSpec:
    """Norm on pairs: ``||u0||_{X_s} + sqrt(2) ||u1||_{X_{s-1}}``."""

    space: SpaceSpec


def japanese(x) -> np.ndarray:
    return np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2)


def _lp(values: np.ndarray, p: float, weight: float = 1.0) -> float:
    a = np.abs(values)
    if a.size == 0:
        return 0.0
    if math.isinf(p):
        return float(a.max())
    if p == 1.0:
        return float(a.sum() * weight)
    m = a.max()
    if m == 0.0:
        return 0.0
    if p == 2.0:
        b = a / m  # rescaled so tiny or huge inputs neither underflow nor overflow
        return float(m * math.sqrt(np.vdot(b, b).real * weight))
    return float(m * (np.sum((a / m) ** p) * weight) ** (1.0 / p))


def _weight_grid(f: SpectralField, s: float) -> np.ndarray:
    if s == 0.0:
        return np.ones(f.grid.shape)
    return japanese(f.grid.abs_frequency()) ** s


def fl_norm(f: SpectralField, q: float, s: float) -> float:
    """``|| <xi>^s F f ||_{L^q_xi}``."""
    q = _exponent(q, "q")
    return _lp(f.coeffs * _weight_grid(f, s), q, f.grid.cell_measure)


def sobolev_norm(f: SpectralField, s: float) -> float:
    return fl_norm(f, 2.0, s)


def _cube_pieces(f: SpectralField, p: float):
    """Per-cube ``L^p`` norms (flattened) and the cube centres' ``<n>``."""
    g = f.grid
    lab = cube_index(g) + g.extent
    ncube = 2 * g.extent + 1
    labels = np.zeros(g.shape, dtype=np.int64)
    for i in range(g.dim):
        shp = [1] * g.dim
        shp[i] = g.side
        labels = labels * ncube + lab.reshape(shp)
    labels = labels.ravel()
    a = np.abs(f.coeffs).ravel()
    size = ncube ** g.dim
    if math.isinf(p):
        pieces = np.zeros(size)
        np.maximum.at(pieces, labels, a)
    else:
        m = a.max() if a.size else 0.0
        if m == 0.0:
            pieces = np.zeros(size)
        else:
            pieces = m * (np.bincount(labels, weights=(a / m) ** p, minlength=size)
                          * g.cell_measure) ** (1.0 / p)
    centres = np.indices((ncube,) * g.dim).reshape(g.dim, -1) - g.extent
    bracket = japanese(np.sqrt((centres ** 2).sum(axis=0)))
    return pieces, bracket


def fourier_amalgam_norm(f: SpectralField, p: float, q: float, s: float) -> float:
    """``|| ||chi_{n+Q} F f||_{L^p} <n>^s ||_{l^q_n}`` over half-open unit cubes."""
    p, q = _exponent(p, "p"), _exponent(q, "q")
    pieces, bracket = _cube_pieces(f, p)
    return _lp(pieces * bracket ** s, q)


def _window_slices(grid, n, bump: WindowBump):
    """Index slices and local window values of ``sigma_n`` (support box only)."""
    M, off = grid.mesh, grid.offset
    sl, vals = [], None
    for i, ni in enumerate(np.atleast_1d(n)):
        lo = max(0, (int(ni) - 1) * M + off + 1)
        hi = min(grid.side, (int(ni) + 1) * M + off)
        sl.append(slice(lo, hi))
        w = bump.axis_window(grid, int(ni))[lo:hi]
        shp = [1] * grid.dim
        shp[i] = hi - lo
        w = w.reshape(shp)
        vals = w if vals is None else vals * w
    return tuple(sl), vals


def _window_pieces(f: SpectralField, bump: WindowBump):
    """Yield ``(n, ||sigma_n F f||_{L^2}, <n>)`` over active windows."""
    g = f.grid
    for n in bump.active_centres(g, f.coeffs):
        sl, w = _window_slices(g, n, bump)
        local = f.coeffs[sl] * w
        yield n, _lp(local, 2.0, g.cell_measure), float(japanese(np.linalg.norm(n)))


def modulation_norm(f: SpectralField, q: float, s: float,
                    bump: WindowBump = DEFAULT_BUMP) -> float:
    """``|| <n>^s ||box_n f||_{L^2} ||_{l^q}`` with Plancherel on each piece."""
    q = _exponent(q, "q")
    terms = np.array([v * b ** s for _, v, b in _window_pieces(f, bump)])
    return _lp(terms, q)


def _physical_l2_factor(grid, size: int) -> float:
    # ||g||_{L^2_x} = factor * sqrt(mean |g|^2) makes Plancherel an isometry
    if grid.domain is Domain.TORUS:
        return 1.0
    return (2.0 * math.pi) ** grid.dim * grid.mesh ** (grid.dim / 2.0)


def wiener_amalgam_norm(f: SpectralField, q: float, s: float,
                        bump: WindowBump = DEFAULT_BUMP,
                        oversample: int | None = None) -> float:
    """``|| || <n>^s box_n f(x) ||_{l^q_n} ||_{L^2_x}`` on an oversampled grid.

    For ``q = 2`` the integrand is band-limited and twofold oversampling is
    exact; other ``q`` use fourfold oversampling by default.
    """
    q = _exponent(q, "q")
    g = f.grid
    if oversample is None:
        oversample = 2 if q == 2.0 else 4
    size = sfft.next_fast_len(oversample * g.side)
    sizes = (size,) * g.dim
    axes = tuple(range(g.dim))
    acc = np.zeros(sizes)
    scale = float(np.abs(f.coeffs).max()) if f.coeffs.size else 0.0
    if scale == 0.0:
        return 0.0
    # componentwise: complex division overflows when scale is subnormal
    unit = f.coeffs.real / scale + 1j * (f.coeffs.imag / scale)
    for n in bump.active_centres(g, f.coeffs):
        sl, w = _window_slices(g, n, bump)
        local = np.zeros(g.shape, dtype=np.complex128)
        local[sl] = unit[sl] * w
        if not np.any(local):
            continue
        phys = sfft.ifftn(embed(local * g.coeff_scale, g.radii, sizes), axes=axes,
                          workers=fft_workers()) * float(size) ** g.dim
        mag = np.abs(phys) * float(japanese(np.linalg.norm(n))) ** s
        if math.isinf(q):
            np.maximum(acc, mag, out=acc)
        else:
            acc += mag ** q
    pointwise = acc if math.isinf(q) else acc ** (1.0 / q)
    return float(scale * _physical_l2_factor(g, size) * math.sqrt(np.mean(pointwise ** 2)))


def norm(f: SpectralField, spec: SpaceSpec) -> float:
    """Dispatch on ``spec.family``."""
    fam = spec.family
    if fam is Family.FOURIER_AMALGAM:
        return fourier_amalgam_norm(f, spec.p, spec.q, spec.s)
    if fam is Family.FOURIER_LEBESGUE:
        return fl_norm(f, spec.q, spec.s)
    if fam is Family.SOBOLEV:
        return sobolev_norm(f, spec.s)
    if fam is Family.MODULATION:
        return modulation_norm(f, spec.q, spec.s)
    return wiener_amalgam_norm(f, spec.q, spec.s)


def restricted_norm(f: SpectralField, spec: SpaceSpec, n0) -> float:
    """Single ``l^q`` term of the norm at cube / window ``n0``."""
    g = f.grid
    n0 = np.atleast_1d(np.asarray(n0, dtype=int))
    if n0.size != g.dim or np.any(np.abs(n0) > g.extent):
        raise ValidationError(f"cube {n0} is outside the lattice")
    bracket = float(japanese(np.linalg.norm(n0))) ** spec.s
    if spec.family in (Family.MODULATION, Family.WIENER_AMALGAM):
        sl, w = _window_slices(g, n0, DEFAULT_BUMP)
        return _lp(f.coeffs[sl] * w, 2.0, g.cell_measure) * bracket
    p = {Family.FOURIER_AMALGAM: spec.p, Family.FOURIER_LEBESGUE: spec.q,
         Family.SOBOLEV: 2.0}[spec.family]
    lab = cube_index(g)
    sl = []
    for ni in n0:
        idx = np.nonzero(lab == ni)[0]
        sl.append(slice(int(idx[0]), int(idx[-1]) + 1))
    return _lp(f.coeffs[tuple(sl)], p, g.cell_measure) * bracket


def pair_norm(pair, spec) -> float:
    """``||u0||_{X_s} + sqrt(2) ||u1||_{X_{s-1}}``."""
    space = spec.space if isinstance(spec, PairSpec) else spec
    first = norm(pair.u0, space) if not pair.u0.is_zero() else 0.0
    second = norm(pair.u1, space.with_s(space.s - 1.0)) if not pair.u1.is_zero() else 0.0
    return first + math.sqrt(2.0) * second


def fl1_pair_norm(pair) -> float:
    """Pair norm in ``FL^1 x FL^1_{-1}``."""
    return pair_norm(pair, SpaceSpec(Family.FOURIER_LEBESGUE, 1.0, 1.0, 0.0))


def algebra_check(f: SpectralField, g: SpectralField, spec: SpaceSpec,
                  tol: float = 1e-10) -> dict:
    """Compare ``||f g||_X`` with ``||f||_{FL^1} ||g||_X``."""
    rf, rg = f.support_radii(), g.support_radii()
    if rf[0] >= 0 and rg[0] >= 0:
        reach = [a + b for a, b in zip(rf, rg)]
        if any(r > f.grid.offset for r in reach):
            raise AliasingError(
                f"product support radius {reach} escapes lattice offset {f.grid.offset}")
    prod = pointwise_product(f, g)
    lhs = norm(prod, spec)
    rhs = fl_norm(f, 1.0, 0.0) * norm(g, spec)
    return {"lhs": lhs, "rhs": rhs, "ok": bool(lhs <= rhs * (1.0 + tol) + 1e-300)}
