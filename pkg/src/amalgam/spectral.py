"""Frequency-lattice fields, discrete transforms and frequency decompositions.

Conventions
-----------
A field stores samples of its Fourier transform on the lattice
``xi = k / M`` with ``|k_i| <= K M``.  The transform convention is
``F f(xi) = int f(x) exp(-i x.xi) dx`` (no 2*pi in the phase), so the wave
multipliers read ``cos(t|xi|)`` and ``sin(t|xi|)/|xi|``.

* ``Domain.TORUS`` (``M = 1``): coefficients are Fourier coefficients on
  ``T^d = [0, 2 pi)^d`` with normalised measure, ``f(x) = sum_n c_n e^{i n.x}``.
  Products are plain discrete convolutions of coefficients.
* ``Domain.EUCLIDEAN``: ``R^d`` is approximated by the torus of period
  ``2 pi M``.  Coefficients are samples of the continuous transform, so
  integrals over frequency become Riemann sums with weight ``M^-d`` and
  products pick up the factor ``(2 pi M)^-d`` of the convolution theorem.
"""

from __future__ import annotations

import enum
import functools
import math
import os
from dataclasses import dataclass, field
from itertools import product as cartesian

import numpy as np
import scipy.fft as sfft
from scipy.signal import fftconvolve

from .errors import AliasingError, GridSizeError, ValidationError

__all__ = [
    "Domain", "GridSpec", "make_grid", "SpectralField", "DataPair",
    "WindowBump", "DEFAULT_BUMP", "cube_index", "cube_restrict", "box_op",
    "forward_transform", "inverse_transform", "pointwise_product",
    "multilinear_product", "sumset_mask", "fft_workers",
]

#: Hard cap on lattice points; override with AMALGAM_MAX_LATTICE.
MAX_LATTICE_POINTS = int(os.environ.get("AMALGAM_MAX_LATTICE", 2 ** 24))


def fft_workers() -> int:
    try:
        return max(1, int(os.environ.get("AMALGAM_THREADS", "1")))
    except ValueError:
        return 1


class Domain(str, enum.Enum):
    TORUS = "torus"
    EUCLIDEAN = "euclidean"

    @classmethod
    def parse(cls, value) -> "Domain":
        if isinstance(value, Domain):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        if key in ("torus", "t", "periodic"):
            return cls.TORUS
        if key in ("euclidean", "truncatedeuclidean", "r", "rd"):
            return cls.EUCLIDEAN
        raise ValidationError(f"unknown domain {value!r}")


@dataclass(frozen=True)
class GridSpec:
    """Frequency lattice ``{k/M : |k_i| <= K M}^d``."""

    dim: int
    extent: int
    domain: Domain = Domain.TORUS
    mesh: int = 1

    def __post_init__(self):
        object.__setattr__(self, "domain", Domain.parse(self.domain))
        if self.dim not in (1, 2, 3):
            raise ValidationError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.extent < 1:
            raise ValidationError(f"extent must be >= 1, got {self.extent}")
        if self.mesh < 1:
            raise ValidationError(f"mesh must be >= 1, got {self.mesh}")
        if self.domain is Domain.TORUS and self.mesh != 1:
            raise ValidationError("mesh must be 1 on the torus")
        if self.size > MAX_LATTICE_POINTS:
            raise GridSizeError(
                f"lattice of {self.size} points exceeds cap {MAX_LATTICE_POINTS}")

    @property
    def offset(self) -> int:
        """Largest integer lattice index ``K M``."""
        return self.extent * self.mesh

    @property
    def side(self) -> int:
        return 2 * self.offset + 1

    @property
    def shape(self) -> tuple:
        return (self.side,) * self.dim

    @property
    def size(self) -> int:
        return self.side ** self.dim

    @property
    def spacing(self) -> float:
        return 1.0 / self.mesh

    @property
    def cell_measure(self) -> float:
        """Riemann weight of one lattice point in frequency integrals."""
        return float(self.mesh) ** (-self.dim)

    @property
    def coeff_scale(self) -> float:
        """Factor turning stored transform samples into series coefficients."""
        if self.domain is Domain.TORUS:
            return 1.0
        return (2.0 * math.pi * self.mesh) ** (-self.dim)

    @property
    def radii(self) -> tuple:
        return (self.offset,) * self.dim

    def axis_indices(self) -> np.ndarray:
        return np.arange(-self.offset, self.offset + 1)

    def axis_frequencies(self) -> np.ndarray:
        return self.axis_indices() / self.mesh

    def frequencies(self) -> tuple:
        """Per-axis frequency arrays, broadcastable to ``shape``."""
        xi = self.axis_frequencies()
        out = []
        for i in range(self.dim):
            shp = [1] * self.dim
            shp[i] = self.side
            out.append(xi.reshape(shp))
        return tuple(out)

    def abs_frequency(self) -> np.ndarray:
        return _abs_frequency(self)

    def index_of(self, xi) -> tuple:
        """Array index of lattice frequency ``xi`` (scalar or d-vector)."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        if xi.size != self.dim:
            raise ValidationError(f"frequency {xi} has wrong dimension")
        k = np.rint(xi * self.mesh).astype(int)
        if not np.allclose(k / self.mesh, xi, atol=1e-12):
            raise ValidationError(f"{xi} is not a lattice frequency")
        if np.any(np.abs(k) > self.offset):
            raise ValidationError(f"{xi} lies outside the lattice")
        return tuple(int(v) for v in k + self.offset)

    def with_extent(self, extent: int) -> "GridSpec":
        return GridSpec(self.dim, int(extent), self.domain, self.mesh)

    def describe(self) -> str:
        return (f"dim={self.dim} extent={self.extent} "
                f"domain={self.domain.value} mesh={self.mesh}")


@functools.lru_cache(maxsize=64)
def _abs_frequency(grid: GridSpec) -> np.ndarray:
    sq = sum(x ** 2 for x in grid.frequencies())
    out = np.sqrt(np.broadcast_to(sq, grid.shape)).copy()
    out.flags.writeable = False
    return out


def make_grid(d: int, K: int, domain="torus", M: int = 1) -> GridSpec:
    """Validated lattice; ``M`` is forced to the torus value 1 if omitted."""
    return GridSpec(int(d), int(K), Domain.parse(domain), int(M))


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier-side samples of a function on ``grid``.  Immutable."""

    grid: GridSpec
    coeffs: np.ndarray
    real_even: bool = False

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.shape != self.grid.shape:
            raise ValidationError(
                f"coeff shape {c.shape} does not match lattice {self.grid.shape}")
        object.__setattr__(self, "coeffs", _readonly(c))
        if self.real_even and not self.is_real_even(1e-12):
            raise ValidationError("field flagged real-even is not real and even")

    @classmethod
    def zeros(cls, grid: GridSpec) -> "SpectralField":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128), real_even=True)

    @classmethod
    def delta(cls, grid: GridSpec, xi, amplitude: complex = 1.0) -> "SpectralField":
        c = np.zeros(grid.shape, dtype=np.complex128)
        c[grid.index_of(xi)] = amplitude
        return cls(grid, c)

    def is_real_even(self, tol: float = 1e-12) -> bool:
        c = self.coeffs
        flipped = c[(slice(None, None, -1),) * c.ndim]
        return bool(np.all(np.abs(c.imag) <= tol) and np.all(np.abs(c - flipped) <= tol))

    def conj_reflect(self) -> "SpectralField":
        """Transform of the complex conjugate: ``xi -> conj(F f(-xi))``."""
        c = self.coeffs[(slice(None, None, -1),) * self.coeffs.ndim]
        return SpectralField(self.grid, np.conj(c), self.real_even)

    def support_radii(self, threshold: float = 0.0) -> tuple:
        return support_radii(self.coeffs, threshold)

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def regrid(self, grid: GridSpec) -> "SpectralField":
        """Embed into (or crop to) a lattice with the same domain and mesh."""
        if grid.domain != self.grid.domain or grid.mesh != self.grid.mesh or grid.dim != self.grid.dim:
            raise ValidationError("regrid requires matching domain, mesh and dim")
        out = np.zeros(grid.shape, dtype=np.complex128)
        r = min(grid.offset, self.grid.offset)
        src = tuple(slice(self.grid.offset - r, self.grid.offset + r + 1) for _ in range(grid.dim))
        dst = tuple(slice(grid.offset - r, grid.offset + r + 1) for _ in range(grid.dim))
        out[dst] = self.coeffs[src]
        return SpectralField(grid, out, self.real_even)

    def _check(self, other):
        if not isinstance(other, SpectralField) or other.grid != self.grid:
            raise ValidationError("fields live on different grids")

    def __add__(self, other):
        self._check(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs,
                             self.real_even and other.real_even)

    def __sub__(self, other):
        self._check(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs,
                             self.real_even and other.real_even)

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs, self.real_even)

    def __mul__(self, scalar):
        if isinstance(scalar, SpectralField):
            return NotImplemented
        keep = self.real_even and np.isreal(scalar)
        return SpectralField(self.grid, self.coeffs * scalar, bool(keep))

    __rmul__ = __mul__


@dataclass(frozen=True)
class DataPair:
    """Initial data ``(u(0), u_t(0))``."""

    u0: SpectralField
    u1: SpectralField

    def __post_init__(self):
        if self.u0.grid != self.u1.grid:
            raise ValidationError("u0 and u1 must share a grid")

    @property
    def grid(self) -> GridSpec:
        return self.u0.grid

    @classmethod
    def zeros(cls, grid: GridSpec) -> "DataPair":
        z = SpectralField.zeros(grid)
        return cls(z, z)

    def is_zero(self) -> bool:
        return self.u0.is_zero() and self.u1.is_zero()

    def regrid(self, grid: GridSpec) -> "DataPair":
        return DataPair(self.u0.regrid(grid), self.u1.regrid(grid))

    def __add__(self, other: "DataPair") -> "DataPair":
        return DataPair(self.u0 + other.u0, self.u1 + other.u1)

    def __mul__(self, scalar) -> "DataPair":
        return DataPair(self.u0 * scalar, self.u1 * scalar)

    __rmul__ = __mul__


# ------------------------------------------------------------ cubes ------

def cube_index(grid: GridSpec) -> np.ndarray:
    """Per-lattice-point cube label ``n`` with ``xi in n + (-1/2, 1/2]``.

    Returned for one axis; the rule is separable.
    """
    k = grid.axis_indices()
    M = grid.mesh
    # n - 1/2 < k/M <= n + 1/2  <=>  n = ceil((2k - M) / 2M)
    return -((M - 2 * k) // (2 * M))


def cube_restrict(f: SpectralField, n) -> SpectralField:
    """Zero every coefficient outside the half-open unit cube at ``n``."""
    n = np.atleast_1d(np.asarray(n, dtype=int))
    if n.size != f.grid.dim:
        raise ValidationError("cube centre has wrong dimension")
    lab = cube_index(f.grid)
    mask = np.ones(f.grid.shape, dtype=bool)
    for i in range(f.grid.dim):
        shp = [1] * f.grid.dim
        shp[i] = f.grid.side
        mask = mask & (lab == n[i]).reshape(shp)
    return SpectralField(f.grid, np.where(mask, f.coeffs, 0.0))


# ------------------------------------------------------- smooth windows --

class WindowBump:
    """Smooth bump ``h`` with ``h = 1`` on ``[-1/2, 1/2]`` and support in ``(-1, 1)``.

    Built from the ``exp(-1/x)`` smooth step.  The d-dimensional bump is the
    tensor product, so the normalised windows ``sigma_n`` factorise by axis.
    """

    tag = "exp-transition"

    @staticmethod
    def h(x) -> np.ndarray:
        x = np.abs(np.asarray(x, dtype=float))
        y = np.clip(2.0 * (1.0 - x), 0.0, 1.0)
        with np.errstate(divide="ignore", over="ignore"):
            a = np.where(y > 0, np.exp(-1.0 / np.where(y > 0, y, 1.0)), 0.0)
            b = np.where(y < 1, np.exp(-1.0 / np.where(y < 1, 1.0 - y, 1.0)), 0.0)
        return a / (a + b)

    def profile(self, grid: GridSpec) -> tuple:
        """Tabulated ``(x, h(x))`` on the grid mesh over ``[-1, 1]``."""
        x = np.arange(-grid.mesh, grid.mesh + 1) / grid.mesh
        return x, self.h(x)

    def axis_window(self, grid: GridSpec, n: int) -> np.ndarray:
        return _axis_window(self, grid, int(n))

    def window(self, grid: GridSpec, n) -> np.ndarray:
        """``sigma_n`` sampled on the lattice (shape ``grid.shape``)."""
        n = np.atleast_1d(np.asarray(n, dtype=int))
        w = np.ones((1,) * grid.dim)
        for i in range(grid.dim):
            shp = [1] * grid.dim
            shp[i] = grid.side
            w = w * self.axis_window(grid, n[i]).reshape(shp)
        return w

    def active_centres(self, grid: GridSpec, coeffs: np.ndarray) -> list:
        """Window centres whose support meets the nonzero coefficients."""
        radii = support_radii(coeffs)
        ranges = []
        for i in range(grid.dim):
            if radii[i] < 0:
                return []
            hi = min(grid.extent, int(math.ceil(radii[i] / grid.mesh)))
            ranges.append(range(-hi, hi + 1))
        return [np.array(c) for c in cartesian(*ranges)]

    def __hash__(self):
        return hash(self.tag)

    def __eq__(self, other):
        return isinstance(other, WindowBump) and other.tag == self.tag


@functools.lru_cache(maxsize=512)
def _axis_window(bump: WindowBump, grid: GridSpec, n: int) -> np.ndarray:
    xi = grid.axis_frequencies()
    base = np.floor(xi)
    denom = np.zeros_like(xi)
    for shift in (-1, 0, 1, 2):
        denom += bump.h(xi - (base + shift))
    out = bump.h(xi - n) / denom
    out.flags.writeable = False
    return out


DEFAULT_BUMP = WindowBump()


def box_op(f: SpectralField, n, bump: WindowBump = DEFAULT_BUMP) -> SpectralField:
    """Frequency-uniform decomposition piece: multiply by ``sigma_n``."""
    return SpectralField(f.grid, f.coeffs * bump.window(f.grid, n))


# --------------------------------------------------------- transforms ----

def support_radii(coeffs: np.ndarray, threshold: float = 0.0) -> tuple:
    """Per-axis radius of the nonzero set of a centred array (-1 if empty)."""
    a = np.abs(coeffs)
    cut = threshold * a.max() if (threshold > 0 and a.size) else 0.0
    nz = a > cut
    out = []
    for i in range(coeffs.ndim):
        other = tuple(j for j in range(coeffs.ndim) if j != i)
        line = nz.any(axis=other) if other else nz
        idx = np.nonzero(line)[0]
        if idx.size == 0:
            out.append(-1)
        else:
            c = coeffs.shape[i] // 2
            out.append(int(max(abs(idx[0] - c), abs(idx[-1] - c))))
    return tuple(out)


def _fft_index(radii, sizes):
    d = len(radii)
    idx = []
    for i, (r, p) in enumerate(zip(radii, sizes)):
        shp = [1] * d
        shp[i] = 2 * r + 1
        idx.append((np.arange(-r, r + 1) % p).reshape(shp))
    return tuple(idx)


def embed(box: np.ndarray, radii, sizes) -> np.ndarray:
    """Place a centred box (trailing ``d`` axes) into FFT order of ``sizes``."""
    d = len(radii)
    lead = box.shape[:box.ndim - d]
    out = np.zeros(lead + tuple(sizes), dtype=np.complex128)
    out[(Ellipsis,) + _fft_index(radii, sizes)] = box
    return out


def extract(arr: np.ndarray, radii, sizes) -> np.ndarray:
    """Inverse of :func:`embed` (crop the centred box of ``radii``)."""
    return arr[(Ellipsis,) + _fft_index(radii, sizes)]


def inverse_transform(f: SpectralField, size: int | None = None) -> np.ndarray:
    """Physical samples ``f(x_j)``, ``x_j = period * j / size`` per axis."""
    g = f.grid
    size = g.side if size is None else int(size)
    if size < g.side:
        raise ValidationError("sample count must cover the lattice")
    sizes = (size,) * g.dim
    a = embed(f.coeffs * g.coeff_scale, g.radii, sizes)
    axes = tuple(range(-g.dim, 0))
    return sfft.ifftn(a, axes=axes, workers=fft_workers()) * float(size) ** g.dim


def forward_transform(samples, grid: GridSpec) -> SpectralField:
    """Lattice transform of physical samples (one sample per lattice point)."""
    samples = np.asarray(samples)
    if samples.shape != grid.shape:
        raise ValidationError(
            f"sample shape {samples.shape} does not match lattice {grid.shape}")
    axes = tuple(range(-grid.dim, 0))
    c = sfft.fftn(samples, axes=axes, workers=fft_workers()) / float(grid.side) ** grid.dim
    return SpectralField(grid, extract(c, grid.radii, grid.shape) / grid.coeff_scale)


def padded_sizes(out_radii, keep_radii) -> tuple:
    """FFT lengths giving an alias-free product on the kept box."""
    return tuple(sfft.next_fast_len(min(2 * ro, ro + rk) + 1)
                 for ro, rk in zip(out_radii, keep_radii))


def sumset_mask(masks, reflect, keep_radii) -> np.ndarray:
    """Boolean support of a product: Minkowski sum of (possibly reflected) supports."""
    acc = None
    for m, flip in zip(masks, reflect):
        m = np.asarray(m, dtype=float)
        if flip:
            m = m[(slice(None, None, -1),) * m.ndim]
        acc = m if acc is None else fftconvolve(acc, m, mode="full")
        acc = (acc > 0.5).astype(float)
    full = acc > 0.5
    centre = tuple(s // 2 for s in full.shape)
    if any(k > c for k, c in zip(keep_radii, centre)):
        pad = [(max(0, k - c),) * 2 for k, c in zip(keep_radii, centre)]
        full = np.pad(full, pad)
        centre = tuple(s // 2 for s in full.shape)
    sl = tuple(slice(c - k, c + k + 1) for c, k in zip(centre, keep_radii))
    return full[sl]


def multilinear_product(fields, rho: int, antialias: bool = True) -> SpectralField:
    """Transform of ``prod_{l<rho} f_l * prod_{m>=rho} conj(f_m)``.

    With ``antialias`` the product is formed on a zero-padded lattice and
    cropped, which is exact on the retained frequencies.  Without it the
    native lattice is used and an :class:`AliasingError` is raised when the
    support sum does not fit.
    """
    fields = list(fields)
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise ValidationError("fields live on different grids")
    radii = [f.support_radii() for f in fields]
    if any(r[0] < 0 for r in radii):
        return SpectralField.zeros(grid)
    out_r = tuple(sum(r[i] for r in radii) for i in range(grid.dim))
    keep = tuple(min(o, grid.offset) for o in out_r)
    if antialias:
        sizes = padded_sizes(out_r, keep)
    else:
        if any(o > grid.offset for o in out_r):
            raise AliasingError(
                f"support sum radius {out_r} exceeds lattice offset {grid.offset}")
        sizes = grid.shape
    axes = tuple(range(-grid.dim, 0))
    nfac = float(np.prod(sizes))
    acc = None
    for j, (f, r) in enumerate(zip(fields, radii)):
        sl = tuple(slice(grid.offset - ri, grid.offset + ri + 1) for ri in r)
        phys = sfft.ifftn(embed(f.coeffs[sl] * grid.coeff_scale, r, sizes),
                          axes=axes, workers=fft_workers()) * nfac
        if j >= rho:
            phys = np.conj(phys)
        acc = phys if acc is None else acc * phys
    c = sfft.fftn(acc, axes=axes, workers=fft_workers()) / nfac
    box = extract(c, keep, sizes) / grid.coeff_scale
    masks = [np.abs(f.coeffs[tuple(slice(grid.offset - ri, grid.offset + ri + 1) for ri in r)]) > 0
             for f, r in zip(fields, radii)]
    box = np.where(sumset_mask(masks, [j >= rho for j in range(len(fields))], keep), box, 0.0)
    out = np.zeros(grid.shape, dtype=np.complex128)
    out[tuple(slice(grid.offset - k, grid.offset + k + 1) for k in keep)] = box
    real_even = all(f.real_even for f in fields)
    if real_even:
        out = 0.5 * (out + out[(slice(None, None, -1),) * grid.dim]).real
    return SpectralField(grid, out, real_even)


def pointwise_product(f: SpectralField, g: SpectralField, conjugate_g: bool = False,
                      antialias: bool = True) -> SpectralField:
    """Transform of ``f g`` (or ``f conj(g)``), computed in physical space."""
    return multilinear_product([f, g], rho=1 if conjugate_g else 2, antialias=antialias)
