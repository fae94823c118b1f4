"""Hot elementwise kernels with a numba path and a pure-numpy fallback.

The active backend is chosen once at import time.  Set the environment
variable ``AMALGAM_DISABLE_NUMBA=1`` to force the numpy path; the numba
path is also skipped silently when numba is not installed.  Both
implementations stay importable (``numpy_impl`` / ``numba_impl``) so the
benchmark and the tests can compare them directly.

All kernels work on flattened spatial axes: a time-sampled field is a
``(n_nodes, n_points)`` complex array and ``a`` holds ``|xi|`` per point.
"""

import os
from types import SimpleNamespace

import numpy as np

__all__ = ["BACKEND", "nonlinear_sum", "modulate", "demodulate",
           "duhamel_accumulate", "numpy_impl", "numba_impl"]


# ---------------------------------------------------------------- numpy --

def _np_nonlinear_sum(phys, comps, rho):
    out = np.zeros(phys.shape[1], dtype=np.complex128)
    for comp in comps:
        term = phys[comp[0]].copy() if rho > 0 else np.conj(phys[comp[0]])
        for slot in range(1, len(comp)):
            f = phys[comp[slot]]
            term *= f if slot < rho else np.conj(f)
        out += term
    return out


def _np_modulate(H, tau, a):
    phase = np.outer(tau, a)
    C = np.cos(phase) * H
    S = np.sin(phase) * H
    zero = a == 0.0
    if zero.any():
        S[:, zero] = tau[:, None] * H[:, zero]
    return C, S


def _np_demodulate(A, B, tau, a, sign):
    phase = np.outer(tau, a)
    safe = np.where(a == 0.0, 1.0, a)
    out = (np.sin(phase) * A - np.cos(phase) * B) / safe
    zero = a == 0.0
    if zero.any():
        out[:, zero] = tau[:, None] * A[:, zero] - B[:, zero]
    return sign * out


def _np_duhamel_accumulate(acc, H, tau, w, T, a):
    lag = T - tau
    safe = np.where(a == 0.0, 1.0, a)
    kern = np.sin(np.outer(lag, a)) / safe
    zero = a == 0.0
    if zero.any():
        kern[:, zero] = lag[:, None]
    acc += np.einsum("j,jl,jl->l", w, kern, H)
    return acc


numpy_impl = SimpleNamespace(
    nonlinear_sum=_np_nonlinear_sum,
    modulate=_np_modulate,
    demodulate=_np_demodulate,
    duhamel_accumulate=_np_duhamel_accumulate,
)


# ---------------------------------------------------------------- numba --

def _build_numba():
    import numba

    @numba.njit(cache=True)
    def nonlinear_sum(phys, comps, rho):
        npts = phys.shape[1]
        ncomp, sigma = comps.shape
        out = np.zeros(npts, dtype=np.complex128)
        for i in range(npts):
            acc = 0j
            for c in range(ncomp):
                p = 1.0 + 0j
                for slot in range(sigma):
                    v = phys[comps[c, slot], i]
                    if slot >= rho:
                        v = v.conjugate()
                    p *= v
                acc += p
            out[i] = acc
        return out

    @numba.njit(cache=True)
    def modulate(H, tau, a):
        nt, npts = H.shape
        C = np.empty_like(H)
        S = np.empty_like(H)
        for j in range(nt):
            t = tau[j]
            for i in range(npts):
                h = H[j, i]
                if a[i] == 0.0:
                    C[j, i] = h
                    S[j, i] = t * h
                else:
                    ph = t * a[i]
                    C[j, i] = np.cos(ph) * h
                    S[j, i] = np.sin(ph) * h
        return C, S

    @numba.njit(cache=True)
    def demodulate(A, B, tau, a, sign):
        nt, npts = A.shape
        out = np.empty_like(A)
        for j in range(nt):
            t = tau[j]
            for i in range(npts):
                if a[i] == 0.0:
                    out[j, i] = sign * (t * A[j, i] - B[j, i])
                else:
                    ph = t * a[i]
                    out[j, i] = sign * (np.sin(ph) * A[j, i]
                                        - np.cos(ph) * B[j, i]) / a[i]
        return out

    @numba.njit(cache=True)
    def duhamel_accumulate(acc, H, tau, w, T, a):
        nt, npts = H.shape
        for i in range(npts):
            s = 0j
            ai = a[i]
            for j in range(nt):
                lag = T - tau[j]
                if ai == 0.0:
                    k = lag
                else:
                    k = np.sin(lag * ai) / ai
                s += w[j] * k * H[j, i]
            acc[i] += s
        return acc

    return SimpleNamespace(
        nonlinear_sum=nonlinear_sum,
        modulate=modulate,
        demodulate=demodulate,
        duhamel_accumulate=duhamel_accumulate,
    )


numba_impl = None
if os.environ.get("AMALGAM_DISABLE_NUMBA", "").strip() not in ("1", "true", "yes"):
    try:
        numba_impl = _build_numba()
    except ImportError:
        numba_impl = None

_active = numba_impl if numba_impl is not None else numpy_impl
BACKEND = "numba" if numba_impl is not None else "numpy"


def nonlinear_sum(phys, comps, rho):
    """Sum over compositions of the sigma-fold product with conjugated tail.

    ``phys`` is ``(n_factors, n_points)``; ``comps`` is an integer array
    ``(n_comps, sigma)`` of row indices; slots ``>= rho`` are conjugated.
    """
    return _active.nonlinear_sum(np.ascontiguousarray(phys),
                                 np.ascontiguousarray(comps, dtype=np.int64),
                                 int(rho))


def modulate(H, tau, a):
    """Return ``cos(tau a) H`` and ``sin(tau a) H`` (``tau H`` where a = 0)."""
    return _active.modulate(np.ascontiguousarray(H), tau, a)


def demodulate(A, B, tau, a, sign):
    """Recombine cumulative integrals into the sin((t - tau)a)/a Duhamel term."""
    return _active.demodulate(np.ascontiguousarray(A), np.ascontiguousarray(B),
                              tau, a, float(sign))


def duhamel_accumulate(acc, H, tau, w, T, a):
    """``acc += sum_j w_j sin((T - tau_j) a)/a H_j`` (kernel ``T - tau`` at a = 0)."""
    return _active.duhamel_accumulate(acc, np.ascontiguousarray(H), tau, w,
                                      float(T), a)
