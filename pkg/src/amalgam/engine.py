"""Linear propagation, Duhamel integrals, Picard iterates and two solvers for

    u(t) = S(t) u0 + sign * int_0^t sin((t - tau)|D|)/|D| H(u(tau)) dtau,
    H(u) = u^rho conj(u)^(sigma - rho).

Iterates are built on one global time mesh.  Every iterate that feeds a
later one is stored at the mesh nodes (on the smallest box holding its
frequency support), so nested Duhamel integrals become cumulative
quadratures of node samples.  The Duhamel kernel is split by the
modulation identity

    sin((t - tau) a) = sin(t a) cos(tau a) - cos(t a) sin(tau a),

which turns each nested integral into two cumulative sums.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from . import _kernels
from .errors import (NoConvergenceError, NonContractionError, QuadratureWarning,
                     SmallnessError, ValidationError)
from .norms import SpaceSpec, fl1_pair_norm, fl_norm, norm
from .quadrature import TimeMesh, auto_node_count
from .spectral import (DataPair, GridSpec, SpectralField, embed, extract,
                       fft_workers, multilinear_product, padded_sizes,
                       sumset_mask, support_radii)

__all__ = [
    "NlwProblem", "PicardSeries", "SeriesSolution", "propagate_linear",
    "nonlinearity", "duhamel", "picard_iterates", "solve_series",
    "solve_fixed_point", "support_size", "compositions", "envelope_terms",
    "series_tail_bound", "nonzero_orders", "default_kmax",
]

#: Target bytes for one chunk of padded physical samples.
CHUNK_BYTES = 192 * 2 ** 20


@dataclass(frozen=True)
class NlwProblem:
    sigma: int
    rho: int
    sign: int
    grid: GridSpec

    def __post_init__(self):
        if int(self.sigma) != self.sigma or int(self.rho) != self.rho:
            raise ValidationError("sigma and rho must be integers")
        if self.rho < 0 or self.sigma < max(self.rho, 2):
            raise ValidationError(
                f"need sigma >= max(rho, 2) and rho >= 0, got sigma={self.sigma}, rho={self.rho}")
        if self.sign not in (1, -1):
            raise ValidationError(f"sign must be +1 or -1, got {self.sign}")


def default_kmax(sigma: int) -> int:
    return 1 + 3 * (sigma - 1)


def nonzero_orders(sigma: int, kmax: int) -> list:
    """Orders ``k <= kmax`` whose iterate can be nonzero (``k = 1 mod sigma-1``)."""
    return [k for k in range(1, kmax + 1) if (k - 1) % (sigma - 1) == 0]


@lru_cache(maxsize=256)
def compositions(k: int, sigma: int) -> tuple:
    """Ordered ``sigma``-tuples of nonzero orders summing to ``k``."""
    parts = [j for j in nonzero_orders(sigma, k) if j <= k - sigma + 1]

    def rec(rem, slots):
        if slots == 1:
            return [(rem,)] if rem in parts else []
        out = []
        for j in parts:
            if j <= rem - (slots - 1):
                out += [(j,) + tail for tail in rec(rem - j, slots - 1)]
        return out

    return tuple(rec(k, sigma))


# ------------------------------------------------------------- pieces ----

def _abs_box(grid: GridSpec, radii) -> np.ndarray:
    sq = 0.0
    for i, r in enumerate(radii):
        shp = [1] * grid.dim
        shp[i] = 2 * r + 1
        sq = sq + ((np.arange(-r, r + 1) / grid.mesh) ** 2).reshape(shp)
    return np.sqrt(np.broadcast_to(sq, tuple(2 * r + 1 for r in radii))).copy()


def _box_slice(grid: GridSpec, radii):
    return tuple(slice(grid.offset - r, grid.offset + r + 1) for r in radii)


def _sin_over(t, a):
    safe = np.where(a == 0.0, 1.0, a)
    return np.where(a == 0.0, t, np.sin(t * a) / safe)


def propagate_linear(pair: DataPair, t: float) -> SpectralField:
    """``cos(t|xi|) F u0 + sin(t|xi|)/|xi| F u1`` (``t`` at ``xi = 0``)."""
    if t < 0:
        raise ValidationError("t must be nonnegative")
    a = pair.grid.abs_frequency()
    c = np.cos(t * a) * pair.u0.coeffs + _sin_over(t, a) * pair.u1.coeffs
    return SpectralField(pair.grid, c, pair.u0.real_even and pair.u1.real_even)


def nonlinearity(fields, rho: int, antialias: bool = True) -> SpectralField:
    """Transform of ``prod_{l<=rho} f_l prod_{m>rho} conj(f_m)``."""
    return multilinear_product(fields, rho, antialias=antialias)


def duhamel(integrand, t: float, mesh: TimeMesh | None = None, grid: GridSpec | None = None,
            return_error: bool = False, rtol: float = 1e-8):
    """``int_0^t sin((t - tau)|xi|)/|xi| F(tau, xi) dtau`` per frequency.

    ``integrand`` is a :class:`SpectralField` (constant in time) or a callable
    ``tau -> SpectralField``.  The quadrature is repeated with twice the nodes;
    the difference is the reported error and a :class:`QuadratureWarning` is
    issued when it exceeds ``rtol`` relative to the result.
    """
    if isinstance(integrand, SpectralField):
        const = integrand
        integrand = lambda tau: const  # noqa: E731
        grid = const.grid
    if grid is None:
        grid = integrand(0.0).grid
    mesh = mesh or TimeMesh("gauss-legendre")
    a = grid.abs_frequency()
    omega = 2.0 * float(a.max())

    def run(m):
        rule = m.rule(t, omega)
        acc = np.zeros(grid.shape, dtype=np.complex128)
        for tau, w in zip(rule.tau, rule.weights):
            acc += w * _sin_over(t - tau, a) * integrand(float(tau)).coeffs
        return acc, rule.n

    coarse, n = run(mesh)
    fine, _ = run(TimeMesh(mesh.quadrature, 2 * n + (1 if mesh.quadrature == "simpson" else 0)))
    scale = max(float(np.abs(fine).max()), 1e-300)
    err = float(np.abs(fine - coarse).max())
    if err > rtol * scale:
        warnings.warn(f"Duhamel quadrature error estimate {err:.3e} exceeds "
                      f"{rtol:g} relative", QuadratureWarning, stacklevel=2)
    out = SpectralField(grid, fine)
    return (out, err) if return_error else out


def support_size(f: SpectralField, threshold: float = 1e-12) -> float:
    """Measure of the numerical Fourier support (count times ``M^-d``)."""
    a = np.abs(f.coeffs)
    m = a.max() if a.size else 0.0
    if m == 0.0:
        return 0.0
    return float(np.count_nonzero(a > threshold * m) * f.grid.cell_measure)


# ------------------------------------------------------ node machinery ----

class _NodeProducts:
    """Nonlinear products of node-sampled boxes on a padded FFT lattice."""

    def __init__(self, grid: GridSpec, rho: int):
        self.grid = grid
        self.rho = rho
        self.axes = tuple(range(1, grid.dim + 1))

    def __call__(self, samples: dict, radii: dict, comps, keep) -> np.ndarray:
        g = self.grid
        parts = sorted({j for c in comps for j in c})
        pos = {j: i for i, j in enumerate(parts)}
        cidx = np.array([[pos[j] for j in c] for c in comps], dtype=np.int64)
        out_r = tuple(max(sum(radii[j][i] for j in c) for c in comps) for i in range(g.dim))
        sizes = padded_sizes(out_r, keep)
        nfac = float(np.prod(sizes))
        n_nodes = samples[parts[0]].shape[0]
        per_node = nfac * 16 * (len(parts) + 2)
        chunk = max(1, min(n_nodes, int(CHUNK_BYTES // per_node)))
        out = np.empty((n_nodes,) + tuple(2 * k + 1 for k in keep), dtype=np.complex128)
        for lo in range(0, n_nodes, chunk):
            hi = min(n_nodes, lo + chunk)
            phys = np.empty((len(parts), hi - lo) + sizes, dtype=np.complex128)
            for j in parts:
                box = samples[j][lo:hi] * g.coeff_scale
                phys[pos[j]] = sfft.ifftn(embed(box, radii[j], sizes), axes=self.axes,
                                          workers=fft_workers()) * nfac
            flat = phys.reshape(len(parts), -1)
            prod = _kernels.nonlinear_sum(flat, cidx, self.rho).reshape((hi - lo,) + sizes)
            del phys, flat
            c = sfft.fftn(prod, axes=self.axes, workers=fft_workers()) / nfac
            out[lo:hi] = extract(c, keep, sizes) / g.coeff_scale
        return out


def _duhamel_nodes(rule, H: np.ndarray, a: np.ndarray, sign: int) -> np.ndarray:
    """Node samples of ``sign * int_0^tau sin((tau - s) a)/a H(s) ds``."""
    shape = H.shape
    Hf = H.reshape(shape[0], -1)
    af = a.ravel()
    C, S = _kernels.modulate(Hf, rule.tau, af)
    A = rule.cumulative(C)
    del C
    B = rule.cumulative(S)
    del S
    return _kernels.demodulate(A, B, rule.tau, af, sign).reshape(shape)


def _duhamel_final(rule, H: np.ndarray, a: np.ndarray, sign: int) -> np.ndarray:
    acc = np.zeros(a.size, dtype=np.complex128)
    _kernels.duhamel_accumulate(acc, H.reshape(H.shape[0], -1), rule.tau,
                                np.ascontiguousarray(rule.weights, dtype=float),
                                rule.T, a.ravel())
    return sign * acc.reshape(a.shape)


def _linear_nodes(pair: DataPair, radii, tau) -> np.ndarray:
    g = pair.grid
    sl = _box_slice(g, radii)
    a = _abs_box(g, radii)
    u0, u1 = pair.u0.coeffs[sl], pair.u1.coeffs[sl]
    t = tau.reshape((-1,) + (1,) * g.dim)
    return np.cos(t * a) * u0 + _sin_over(t, a) * u1


# ------------------------------------------------------------ series -----

@dataclass
class PicardSeries:
    """Iterates ``S_k(T)`` for ``k <= kmax`` with norms and support data."""

    problem: NlwProblem
    T: float
    kmax: int
    iterates: dict
    fl1_norms: dict
    support_sizes: dict
    norms: dict = field(default_factory=dict)
    spec: SpaceSpec | None = None
    nodes: int = 0
    samples: dict = field(default_factory=dict)
    node_times: np.ndarray | None = None

    @property
    def orders(self) -> list:
        return nonzero_orders(self.problem.sigma, self.kmax)

    def partial_sum(self, kmax: int | None = None) -> SpectralField:
        kmax = self.kmax if kmax is None else kmax
        acc = SpectralField.zeros(self.problem.grid)
        for k in range(1, kmax + 1):
            acc = acc + self.iterates[k]
        return acc


def picard_iterates(pair: DataPair, problem: NlwProblem, kmax: int, T: float,
                    mesh: TimeMesh | None = None, spec: SpaceSpec | None = None,
                    keep_samples: bool = False) -> PicardSeries:
    """Compute ``S_1, ..., S_kmax`` at time ``T``.

    Iterates of order ``k`` with ``k + sigma - 1 <= kmax`` are kept at the
    mesh nodes because later orders consume them; the rest are evaluated at
    ``T`` only.  Orders not congruent to 1 mod ``sigma - 1`` are exact zeros.
    """
    if kmax < 1:
        raise ValidationError("kmax must be >= 1")
    if T <= 0:
        raise ValidationError("T must be positive")
    g = problem.grid
    if pair.grid != g:
        raise ValidationError("data grid differs from the problem grid")
    sigma, rho, sign = problem.sigma, problem.rho, problem.sign
    mesh = mesh or TimeMesh()
    zero = SpectralField.zeros(g)
    iterates = {k: zero for k in range(1, kmax + 1)}
    S1 = propagate_linear(pair, T)
    iterates[1] = S1

    r0 = support_radii(pair.u0.coeffs)
    r1b = support_radii(pair.u1.coeffs)
    r1 = tuple(max(a, b) for a, b in zip(r0, r1b))
    orders = nonzero_orders(sigma, kmax)
    samples, node_times, n_nodes = {}, None, 0
    if r1[0] >= 0 and kmax >= sigma:
        radius = {k: tuple(min(k * r, g.offset) for r in r1) for k in orders}
        xi_max = math.sqrt(sum((r / g.mesh) ** 2 for r in r1))
        rule = mesh.rule(T, 2.0 * kmax * xi_max)
        n_nodes = rule.n
        node_times = rule.tau
        mask0 = (np.abs(pair.u0.coeffs[_box_slice(g, r1)]) > 0) | \
                (np.abs(pair.u1.coeffs[_box_slice(g, r1)]) > 0)
        masks = {1: mask0}
        samples[1] = _linear_nodes(pair, r1, rule.tau)
        products = _NodeProducts(g, rho)
        for k in orders[1:]:
            comps = compositions(k, sigma)
            keep = radius[k]
            H = products(samples, radius, comps, keep)
            supp = np.zeros(tuple(2 * r + 1 for r in keep), dtype=bool)
            for c in comps:
                supp |= sumset_mask([masks[j] for j in c],
                                    [slot >= rho for slot in range(sigma)], keep)
            H *= supp
            masks[k] = supp
            a = _abs_box(g, keep)
            final = _duhamel_final(rule, H, a, sign)
            if k + sigma - 1 <= kmax:
                samples[k] = _duhamel_nodes(rule, H, a, sign)
            del H
            c = np.zeros(g.shape, dtype=np.complex128)
            c[_box_slice(g, keep)] = final
            iterates[k] = SpectralField(g, c)
        if not keep_samples:
            samples = {}
        else:
            samples = {k: (radius[k], v) for k, v in samples.items()}

    fl1 = {k: fl_norm(f, 1.0, 0.0) for k, f in iterates.items()}
    supp_sz = {k: support_size(f) for k, f in iterates.items()}
    norms = {k: norm(f, spec) for k, f in iterates.items()} if spec is not None else {}
    return PicardSeries(problem, float(T), int(kmax), iterates, fl1, supp_sz, norms,
                        spec, n_nodes, samples, node_times)


# ------------------------------------------------------------ envelope ---

def envelope_terms(sigma: int, y: float, kmax: int) -> np.ndarray:
    """Scaled majorants ``e_k`` (index ``k``) with ``||S_k(t)||_{FL^1} <= M e_k``.

    ``y = t^2 M^(sigma-1)`` where ``M`` bounds ``||S_1||_{FL^1}`` on
    ``[0, t]``.  From ``|sin(x a)/a| <= x`` and the algebra property,
    ``e_1 = 1`` and ``e_k = y c_k sum_{compositions} prod e_{k_i}`` with
    ``c_k = 1/((alpha+1)(alpha+2))``, ``alpha = 2(k-sigma)/(sigma-1)``.
    """
    e = np.zeros(kmax + 1)
    if kmax >= 1:
        e[1] = 1.0
    for k in range(sigma, kmax + 1):
        if (k - 1) % (sigma - 1):
            continue
        power = e[:k].copy()
        acc = power
        for _ in range(sigma - 1):
            acc = np.convolve(acc, power)[:k + 1]
        alpha = 2.0 * (k - sigma) / (sigma - 1)
        with np.errstate(over="ignore"):  # inf is handled by the caller
            e[k] = y * acc[k] / ((alpha + 1.0) * (alpha + 2.0))
    return e


def series_tail_bound(sigma: int, T: float, M: float, k_last: int,
                      horizon: int = 400, weights=None) -> float:
    """Bound on ``sum_{k > k_last} ||S_k(T)||`` from the majorant series.

    ``weights(k)`` optionally inflates each term (for target norms that
    exceed the ``FL^1`` norm).  Raises :class:`NoConvergenceError` if the
    majorant's geometric ratio at the horizon is not below one.
    """
    if M == 0.0:
        return 0.0
    y = T ** 2 * M ** (sigma - 1)
    step = sigma - 1
    K = k_last + horizon * step
    e = envelope_terms(sigma, y, K)
    ks = [k for k in range(k_last + 1, K + 1) if (k - 1) % step == 0 and e[k] > 0]
    if not ks:
        return 0.0
    tail_idx = [k for k in range(1, K + 1) if (k - 1) % step == 0]
    last, prev = tail_idx[-1], tail_idx[-2]
    ratio = e[last] / e[prev] if e[prev] > 0 else 0.0
    if ratio >= 1.0 or not np.isfinite(e[last]):
        raise NoConvergenceError(
            f"majorant series ratio {ratio:.3g} >= 1 (T^2 M^(sigma-1) = {y:.3g})")
    w = weights or (lambda k: 1.0)
    total = sum(e[k] * w(k) for k in ks)
    total += e[last] * w(last) * ratio / (1.0 - ratio)
    return float(M * total)


def _s1_bound(pair: DataPair, T: float) -> float:
    # |sin(t a)/a| <= sqrt(2) max(1, t) / <a>
    u0 = fl_norm(pair.u0, 1.0, 0.0)
    u1 = fl_norm(pair.u1, 1.0, -1.0)
    return u0 + max(1.0, T) * math.sqrt(2.0) * u1


def _check_small(pair: DataPair, problem: NlwProblem, T: float) -> float:
    M = fl1_pair_norm(pair)
    val = T ** 2 * (2.0 * M) ** (problem.sigma - 1)
    if val > 0.125:
        raise SmallnessError(
            f"T^2 (2 M)^(sigma-1) = {val:.4g} exceeds 1/8 (M = {M:.4g}, T = {T:.4g})")
    return M


@dataclass
class SeriesSolution:
    solution: SpectralField
    tail_bound: float
    terms_used: int
    series: PicardSeries


def solve_series(pair: DataPair, problem: NlwProblem, T: float, tol: float = 1e-12,
                 kmax: int | None = None, mesh: TimeMesh | None = None) -> SeriesSolution:
    """Partial sum of the Picard series with a rigorous majorant tail bound."""
    _check_small(pair, problem, T)
    kmax = default_kmax(problem.sigma) if kmax is None else int(kmax)
    if pair.is_zero():
        z = SpectralField.zeros(problem.grid)
        empty = PicardSeries(problem, T, kmax, {k: z for k in range(1, kmax + 1)},
                             {k: 0.0 for k in range(1, kmax + 1)},
                             {k: 0.0 for k in range(1, kmax + 1)})
        return SeriesSolution(z, 0.0, 1, empty)
    series = picard_iterates(pair, problem, kmax, T, mesh)
    acc = SpectralField.zeros(problem.grid)
    last = 1
    for k in series.orders:
        acc = acc + series.iterates[k]
        last = k
        if series.fl1_norms[k] < tol:
            break
    tail = series_tail_bound(problem.sigma, T, _s1_bound(pair, T), last)
    return SeriesSolution(acc, tail, last, series)


def solve_fixed_point(pair: DataPair, problem: NlwProblem, T: float, tol: float = 1e-12,
                      itermax: int = 100, mesh: TimeMesh | None = None) -> SpectralField:
    """Iterate ``Psi(u) = S(t) u0 + sign Duhamel(H(u))`` on the node samples.

    Stops when the sup-in-time ``FL^1`` change drops below ``tol``.  Raises
    :class:`NonContractionError` after three consecutive growing updates and
    :class:`NoConvergenceError` when ``itermax`` is exhausted.
    """
    _check_small(pair, problem, T)
    if itermax < 1:
        raise ValidationError("itermax must be >= 1")
    g = problem.grid
    if pair.is_zero():
        return SpectralField.zeros(g)
    mesh = mesh or TimeMesh()
    radii = g.radii
    xi_max = float(g.abs_frequency().max())
    rule = mesh.rule(T, 2.0 * problem.sigma * xi_max)
    lin = _linear_nodes(pair, radii, rule.tau)
    a = _abs_box(g, radii)
    products = _NodeProducts(g, problem.rho)
    comps = (tuple(0 for _ in range(problem.sigma)),)
    u = lin
    diffs = []
    for _ in range(itermax):
        H = products({0: u}, {0: radii}, comps, radii)
        new = lin + _duhamel_nodes(rule, H, a, problem.sign)
        change = np.abs(new - u).reshape(rule.n, -1).sum(axis=1) * g.cell_measure
        diff = float(change.max())
        u = new
        diffs.append(diff)
        if diff < tol:
            if rule.includes_endpoint:
                return SpectralField(g, u[-1])
            H = products({0: u}, {0: radii}, comps, radii)
            final = propagate_linear(pair, T).coeffs + _duhamel_final(rule, H, a, problem.sign)
            return SpectralField(g, final)
        if len(diffs) >= 4 and diffs[-1] > diffs[-2] > diffs[-3] > diffs[-4]:
            raise NonContractionError(
                f"fixed-point updates grew three times in a row: {diffs[-4:]}")
    raise NoConvergenceError(f"no convergence after {itermax} iterations (last change {diffs[-1]:.3e})")
