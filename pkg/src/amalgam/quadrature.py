"""Time meshes on ``[0, T]`` with weights and cumulative integration.

Three rules are available:

``chebyshev``
    Chebyshev-Lobatto nodes; cumulative integrals by spectral integration of
    the interpolant (DCT-I based, ``O(n log n)`` per column).  Default.
``gauss-legendre``
    Gauss-Legendre nodes; cumulative integrals via the Legendre integration
    matrix.  Intended for modest node counts.
``simpson``
    Uniform nodes, composite Simpson (``scipy.integrate``).  Node count odd.

All cumulative integrals act along axis 0 and return ``int_0^{tau_j}``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
import numpy.polynomial.chebyshev as npcheb
import numpy.polynomial.legendre as nplegendre
import scipy.fft as sfft
from scipy.integrate import cumulative_simpson, simpson

from .errors import ValidationError

__all__ = ["TimeMesh", "TimeRule", "auto_node_count"]

_KINDS = ("chebyshev", "gauss-legendre", "simpson")
_ALIASES = {"cheb": "chebyshev", "gl": "gauss-legendre",
            "gausslegendre": "gauss-legendre", "chebyshev": "chebyshev",
            "simpson": "simpson"}


def auto_node_count(omega_max: float, T: float, minimum: int = 24) -> int:
    """Node count resolving oscillations up to ``omega_max`` on ``[0, T]``.

    Spectral rules converge once the node count exceeds the half-bandwidth
    ``omega_max T / 2`` by a cube-root margin; the constants are generous.
    """
    kappa = max(0.0, 0.5 * float(omega_max) * float(T))
    return int(math.ceil(1.1 * kappa + 12.0 * kappa ** (1.0 / 3.0))) + minimum


@dataclass(frozen=True)
class TimeMesh:
    """Quadrature choice plus an optional fixed node count (``None`` = auto)."""

    quadrature: str = "chebyshev"
    nodes: int | None = None

    def __post_init__(self):
        kind = str(self.quadrature).strip().lower().replace("_", "").replace("-", "")
        kind = _ALIASES.get(kind, kind)
        if kind not in _KINDS:
            raise ValidationError(f"unknown quadrature {self.quadrature!r}")
        object.__setattr__(self, "quadrature", kind)
        if self.nodes is not None:
            n = int(self.nodes)
            if n < 3:
                raise ValidationError("at least 3 time nodes are required")
            if kind == "simpson" and n % 2 == 0:
                raise ValidationError("simpson needs an odd node count (even interval count)")
            object.__setattr__(self, "nodes", n)

    def rule(self, T: float, omega_max: float = 0.0) -> "TimeRule":
        n = self.nodes if self.nodes is not None else auto_node_count(omega_max, T)
        if self.quadrature == "simpson":
            if self.nodes is None:
                n = 8 * n + 1
            n += (n + 1) % 2
        return TimeRule(self.quadrature, float(T), int(n))

    def refined(self) -> "TimeMesh":
        n = self.nodes
        if n is None:
            return self
        m = 2 * n - 1 if self.quadrature == "simpson" else 2 * n
        return TimeMesh(self.quadrature, m)


@functools.lru_cache(maxsize=32)
def _cheb_weights(n: int) -> np.ndarray:
    w = _cheb_cumulative(np.eye(n), 1.0)[-1].real.copy()
    w.flags.writeable = False
    return w


def _cheb_cumulative(F: np.ndarray, T: float) -> np.ndarray:
    # nodes tau_j = T (1 - x_j)/2, x_j = cos(pi j/(n-1)); F sampled along axis 0
    n = F.shape[0]
    a = sfft.dct(F, type=1, axis=0) / (n - 1)
    a[0] *= 0.5
    a[-1] *= 0.5
    b = -npcheb.chebint(a, m=1, lbnd=1, scl=0.5 * T, axis=0)
    # evaluate sum_k b_k T_k(x_j); DCT-I covers k < n, the top degree is added by hand
    top = b[n]
    c = b[:n].copy()
    c[1:n - 1] *= 0.5
    out = sfft.dct(c, type=1, axis=0)
    j = np.arange(n)
    shape = (n,) + (1,) * (F.ndim - 1)
    out += np.cos(np.pi * j * n / (n - 1)).reshape(shape) * top
    return out


@functools.lru_cache(maxsize=32)
def _gl_data(n: int):
    x, w = nplegendre.leggauss(n)
    V = nplegendre.legvander(x, n - 1)
    Vinv = np.linalg.inv(V)
    # integral from -1 of each Legendre basis polynomial, evaluated at nodes
    I = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        I[:, k] = nplegendre.legval(x, nplegendre.legint(e, lbnd=-1))
    Q = I @ Vinv
    for arr in (x, w, Q):
        arr.flags.writeable = False
    return x, w, Q


class TimeRule:
    """Concrete nodes and weights for one ``(kind, T, n)``."""

    def __init__(self, kind: str, T: float, n: int):
        if T < 0:
            raise ValidationError("T must be nonnegative")
        self.kind = kind
        self.T = float(T)
        self.n = int(n)
        if kind == "chebyshev":
            x = np.cos(np.pi * np.arange(n) / (n - 1))
            self.tau = 0.5 * self.T * (1.0 - x)
            self.tau[0] = 0.0
            self.tau[-1] = self.T
            self.weights = _cheb_weights(n) * self.T
        elif kind == "gauss-legendre":
            x, w, _ = _gl_data(n)
            self.tau = 0.5 * self.T * (x + 1.0)
            self.weights = 0.5 * self.T * w
        else:
            self.tau = np.linspace(0.0, self.T, n)
            self.weights = simpson(np.eye(n), x=self.tau, axis=0) if n > 1 else np.zeros(1)

    @property
    def includes_endpoint(self) -> bool:
        return self.kind != "gauss-legendre"

    def integrate(self, F: np.ndarray) -> np.ndarray:
        """``int_0^T`` of samples ``F`` (axis 0)."""
        return np.tensordot(self.weights, F, axes=(0, 0))

    def cumulative(self, F: np.ndarray) -> np.ndarray:
        """``int_0^{tau_j}`` of samples ``F`` (axis 0), same shape as ``F``."""
        F = np.asarray(F)
        if self.T == 0.0:
            return np.zeros_like(F)
        if self.kind == "chebyshev":
            return _cheb_cumulative(F, self.T)
        if self.kind == "gauss-legendre":
            _, _, Q = _gl_data(self.n)
            return 0.5 * self.T * np.tensordot(Q, F, axes=(1, 0))
        if np.iscomplexobj(F):
            return (cumulative_simpson(F.real, x=self.tau, axis=0, initial=0.0)
                    + 1j * cumulative_simpson(F.imag, x=self.tau, axis=0, initial=0.0))
        return cumulative_simpson(F, x=self.tau, axis=0, initial=0.0)
