"""Norm-inflation experiments for the power-type wave equation.

The perturbation is ``F phi = R`` on four closed unit cubes centred at
``+-N e_1`` and ``+-2N e_1``, with zero velocity.  For ``sigma``-fold
products the frequency ``e_1`` is reached by combinations such as
``2N - N - N`` whose contribution grows like ``R^sigma T^2``, while the
data themselves shrink like ``R N^s``.  The parameters ``(R, T)`` follow two
power-law regimes in ``N`` depending on ``s``.
"""

from __future__ import annotations

import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .engine import (NlwProblem, PicardSeries, _s1_bound, default_kmax,
                     picard_iterates)
from .errors import (AmalgamError, InvalidDeltaError, OverlapError, RegimeWarning,
                     ValidationError)
from .norms import Family, SpaceSpec, norm, pair_norm, restricted_norm
from .quadrature import TimeMesh
from .spectral import DataPair, Domain, GridSpec, SpectralField, make_grid, support_radii

__all__ = [
    "PerturbationSpec", "RegimeParams", "RegimeCheck", "InflationConfig",
    "RunRecord", "ExperimentReport", "build_perturbation", "select_parameters",
    "check_regime", "regime_onset", "lower_bound_check", "tail_and_cross_terms",
    "run_inflation", "perturbation_grid",
]


# ------------------------------------------------------------ data --------

@dataclass(frozen=True)
class PerturbationSpec:
    N: int
    R: float
    d: int = 1

    def __post_init__(self):
        if int(self.N) != self.N:
            raise ValidationError("N must be an integer")
        if self.N < 4:
            raise OverlapError(f"N = {self.N} < 4: the cubes around +-N e1, +-2N e1 overlap")
        if not self.R > 0:
            raise ValidationError("R must be positive")
        if self.d not in (1, 2, 3):
            raise ValidationError("d must be 1, 2 or 3")

    def centres(self) -> list:
        out = []
        for c in (self.N, -self.N, 2 * self.N, -2 * self.N):
            v = np.zeros(self.d)
            v[0] = c
            out.append(v)
        return out


def build_perturbation(spec: PerturbationSpec, grid: GridSpec) -> DataPair:
    """``(phi, 0)`` with ``F phi = R`` on the closed cubes ``|xi - eta|_inf <= 1``."""
    if grid.dim != spec.d:
        raise ValidationError("grid dimension differs from the perturbation dimension")
    if grid.extent < 2 * spec.N + 1:
        raise ValidationError(f"lattice extent {grid.extent} < 2N+1 = {2 * spec.N + 1}")
    xi = grid.frequencies()
    mask = np.zeros(grid.shape, dtype=bool)
    for eta in spec.centres():
        inside = np.ones(grid.shape, dtype=bool)
        for i in range(grid.dim):
            inside = inside & (np.abs(xi[i] - eta[i]) <= 1.0 + 1e-12)
        if np.any(mask & inside):
            raise OverlapError("perturbation cubes overlap")
        mask |= inside
    phi = SpectralField(grid, np.where(mask, float(spec.R), 0.0), real_even=True)
    return DataPair(phi, SpectralField.zeros(grid))


def perturbation_grid(N: int, kmax: int, d: int = 1, domain="torus", mesh: int = 1,
                      extra: int = 0) -> GridSpec:
    """Smallest lattice holding every iterate up to ``kmax`` without cropping."""
    return make_grid(d, kmax * (2 * N + 1 + extra), domain, mesh)


# ------------------------------------------------------- parameters -------

def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(str(x))


def _npow(N: float, e: Fraction) -> float:
    """``N**e``, exact when ``N`` is a power of two and the result is too."""
    N = float(N)
    m, ex = math.frexp(N)
    if m == 0.5:
        power = (ex - 1) * e
        if power.denominator == 1:
            return math.ldexp(1.0, int(power))
    return math.exp(float(e) * math.log(N))


@dataclass(frozen=True)
class RegimeParams:
    case: str
    s: Fraction
    sigma: int
    delta: Fraction
    N: float
    r_exp: Fraction
    t_exp: Fraction

    @property
    def R(self) -> float:
        return _npow(self.N, self.r_exp)

    @property
    def T(self) -> float:
        return _npow(self.N, self.t_exp)

    def at(self, N) -> "RegimeParams":
        return RegimeParams(self.case, self.s, self.sigma, self.delta, N, self.r_exp, self.t_exp)

    def exponents(self) -> dict:
        """Exponent of ``N`` in each regime quantity (``m`` factored out)."""
        r, t, s, sg = self.r_exp, self.t_exp, self.s, self.sigma
        return {
            "i_lower": Fraction(-1, 2) - t,
            "i_upper": t,
            "ii_a": (sg - 1) * r + 2 * t,
            "ii_b": -r,
            "iii": -(sg * r + 2 * t),
            "iv": r + s,
        }


def select_parameters(s, sigma: int, delta, N) -> RegimeParams:
    """Power-law ``R(N), T(N)`` for the two regimes of ``s``.

    Case A (``-1/(sigma-1) <= s < 0``): ``R = N^(-s-delta)``,
    ``T = N^((sigma-1)(s+delta/2)/2)``.  Case B (``s < -1/(sigma-1)``):
    ``R = N^(1/(sigma-1)-delta)``, ``T = N^(-1/2+(sigma-1)delta/4)``.
    """
    s, delta = _frac(s), _frac(delta)
    if s >= 0:
        raise ValidationError("s must be negative")
    if sigma < 2:
        raise ValidationError("sigma must be >= 2")
    if delta <= 0:
        raise InvalidDeltaError("delta must be positive")
    edge = Fraction(-1, sigma - 1)
    if s >= edge:
        if (sigma + 1) * delta / 2 >= -s:
            raise InvalidDeltaError(
                f"(sigma+1) delta/2 = {float((sigma + 1) * delta / 2):g} must be < -s = {float(-s):g}")
        return RegimeParams("A", s, sigma, delta, N, -s - delta,
                            Fraction(sigma - 1, 2) * (s + delta / 2))
    if (sigma + 1) * delta >= Fraction(2, sigma - 1):
        raise InvalidDeltaError(
            f"(sigma+1) delta = {float((sigma + 1) * delta):g} must be < 2/(sigma-1)")
    if (sigma - 1) * delta / 4 >= Fraction(1, 2):
        raise InvalidDeltaError(
            f"(sigma-1) delta/4 = {float((sigma - 1) * delta / 4):g} must be < 1/2")
    return RegimeParams("B", s, sigma, delta, N, Fraction(1, sigma - 1) - delta,
                        Fraction(-1, 2) + Fraction(sigma - 1, 4) * delta)


@dataclass
class RegimeCheck:
    values: dict
    flags: dict

    @property
    def all_ok(self) -> bool:
        return all(self.flags.values())


def _regime_logs(params: RegimeParams, lnN: float, m: float) -> dict:
    lnm = math.log(m)
    e = params.exponents()
    return {
        "N^-1/2 T^-1": float(e["i_lower"]) * lnN,
        "T": float(e["i_upper"]) * lnN,
        "R^(sigma-1) T^2": float(e["ii_a"]) * lnN,
        "1/R": float(e["ii_b"]) * lnN,
        "m/(R^sigma T^2)": float(e["iii"]) * lnN + lnm,
        "R N^s m": float(e["iv"]) * lnN + lnm,
    }


def check_regime(params: RegimeParams, N, m: float, threshold: float = 0.25) -> RegimeCheck:
    """Evaluate the smallness quantities and flag each against ``threshold``."""
    if m <= 0:
        raise ValidationError("m must be positive")
    logs = _regime_logs(params, math.log(float(N)), float(m))
    vals = {k: math.exp(v) for k, v in logs.items()}
    lt = math.log(threshold)
    ok = {k: v < lt for k, v in logs.items()}
    flags = {
        "i": ok["N^-1/2 T^-1"] and ok["T"],
        "ii_a": ok["R^(sigma-1) T^2"],
        "ii_b": ok["1/R"],
        "iii": ok["m/(R^sigma T^2)"],
        "iv": ok["R N^s m"],
    }
    return RegimeCheck(vals, flags)


def regime_onset(params: RegimeParams, m: float, threshold: float = 0.25,
                 max_log2: int = 4096) -> int | None:
    """Smallest ``j`` such that every flag holds at ``N = 2^j`` and beyond.

    Every quantity is ``m^a N^e`` with ``e < 0`` in both regimes, so the flags
    are monotone in ``N`` and the first passing power of two is the onset.
    """
    lt = math.log(threshold)
    for j in range(1, max_log2 + 1):
        logs = _regime_logs(params, j * math.log(2.0), m)
        if all(v < lt for v in logs.values()):
            return j
    return None


# ------------------------------------------------------------ lemmas ------

def _e1(d: int) -> np.ndarray:
    v = np.zeros(d, dtype=int)
    v[0] = 1
    return v


def _infer_NR(phi_pair: DataPair):
    g = phi_pair.grid
    R = float(np.abs(phi_pair.u0.coeffs).max())
    r = support_radii(phi_pair.u0.coeffs)[0]
    N = (r / g.mesh - 1.0) / 2.0
    return N, R


def lower_bound_check(phi_pair: DataPair, problem: NlwProblem, T: float, spec: SpaceSpec,
                      series: PicardSeries | None = None, mesh: TimeMesh | None = None) -> dict:
    """Restricted norm ``L`` of ``S_sigma[phi](T)`` at ``e_1`` against ``R^sigma T^2``."""
    N, R = _infer_NR(phi_pair)
    if not T > N ** -0.5:
        warnings.warn(f"T = {T:.4g} is below N^-1/2 = {N ** -0.5:.4g}; the lower bound may degrade",
                      RegimeWarning, stacklevel=2)
    if T >= 1.0:
        warnings.warn(f"T = {T:.4g} is not small", RegimeWarning, stacklevel=2)
    sigma = problem.sigma
    if series is None or series.kmax < sigma:
        series = picard_iterates(phi_pair, problem, sigma, T, mesh)
    S = series.iterates[sigma]
    L = restricted_norm(S, spec, _e1(problem.grid.dim))
    scale = R ** sigma * T ** 2
    return {"L": L, "RsT2": scale, "ratio": L / scale, "S_sigma": S}


def _tail_weight(spec: SpaceSpec, xi_reach: float):
    # ||f||_X <= ||f||_{FL^1} <xi_max>^max(s, 0) on the torus
    pos = max(spec.s, 0.0)
    return lambda k: float((1.0 + (k * xi_reach) ** 2) ** (pos / 2.0))


def tail_and_cross_terms(u0_pair: DataPair, phi_pair: DataPair, problem: NlwProblem, T: float,
                         spec: SpaceSpec, kmax: int | None = None,
                         series_phi: PicardSeries | None = None,
                         series_total: PicardSeries | None = None,
                         mesh: TimeMesh | None = None) -> dict:
    """Norms of the linear part, the data cross term and the higher-order tail.

    ``tail_norm`` adds the computed iterates ``S_k`` with ``k > sigma`` and a
    geometric remainder extrapolated from the last two computed orders
    (``inf`` when their ratio is not below one).
    """
    sigma = problem.sigma
    kmax = default_kmax(sigma) if kmax is None else int(kmax)
    if series_phi is None:
        series_phi = picard_iterates(phi_pair, problem, kmax, T, mesh)
    if series_total is None:
        series_total = series_phi if u0_pair.is_zero() else \
            picard_iterates(u0_pair + phi_pair, problem, kmax, T, mesh)
    S1 = norm(series_total.iterates[1], spec)
    if series_total is series_phi:
        cross = 0.0
    else:
        cross = norm(series_total.iterates[sigma] - series_phi.iterates[sigma], spec)
    orders = [k for k in series_total.orders if k > sigma]
    vals = [norm(series_total.iterates[k], spec) for k in orders]
    computed = float(sum(vals))
    if len(vals) >= 2 and vals[-2] > 0:
        q = vals[-1] / vals[-2]
        remainder = vals[-1] * q / (1.0 - q) if q < 1.0 else math.inf
    elif len(vals) == 1:
        q = vals[0] / max(norm(series_total.iterates[sigma], spec), 1e-300)
        remainder = vals[0] * q / (1.0 - q) if q < 1.0 else math.inf
    else:
        q, remainder = 0.0, 0.0
    return {"S1_norm": S1, "cross_norm": cross, "tail_norm": computed + remainder,
            "tail_computed": computed, "tail_remainder": remainder, "tail_ratio": q,
            "series_total": series_total, "series_phi": series_phi}


# ------------------------------------------------------------ sweeps ------

@dataclass(frozen=True)
class InflationConfig:
    s: float = -0.4
    sigma: int = 3
    rho: int = 3
    sign: int = 1
    thetas: tuple = (-0.4,)
    delta: float = 0.1
    Ns: tuple = (64, 128, 256, 512)
    m: float = 10.0
    family: str = "FourierAmalgam"
    p: float = 2.0
    q: float = 2.0
    d: int = 1
    domain: str = "torus"
    mesh: int = 1
    kmax: int | None = None
    threshold: float = 0.25
    quadrature: str = "chebyshev"

    def __post_init__(self):
        if not self.s < 0:
            raise ValidationError("s < 0 is required for inflation sweeps")
        NlwProblem(self.sigma, self.rho, self.sign, make_grid(self.d, 1, self.domain, self.mesh))
        select_parameters(self.s, self.sigma, self.delta, 64)
        if not self.Ns:
            raise ValidationError("N list is empty")
        for N in self.Ns:
            PerturbationSpec(int(N), 1.0, self.d)
        if not self.thetas:
            raise ValidationError("theta list is empty")
        SpaceSpec(self.family, self.p, self.q, self.s)

    @property
    def resolved_kmax(self) -> int:
        return default_kmax(self.sigma) if self.kmax is None else int(self.kmax)

    def space(self, s: float) -> SpaceSpec:
        return SpaceSpec(self.family, self.p, self.q, s)


@dataclass
class RunRecord:
    N: int
    R: float
    T: float
    theta: float
    pert_norm: float = math.nan
    sol_norm: float = math.nan
    sol_restricted: float = math.nan
    restricted_L: float = math.nan
    ratio_L: float = math.nan
    S1: float = math.nan
    cross: float = math.nan
    tail: float = math.nan
    S_sigma_norm: float = math.nan
    dominance: bool = False
    flags: dict = field(default_factory=dict)
    regime_values: dict = field(default_factory=dict)
    max_imag_rel: float = math.nan
    support: dict = field(default_factory=dict)
    wall_time: float = 0.0
    error: str = ""


@dataclass
class ExperimentReport:
    config: InflationConfig
    records: list = field(default_factory=list)
    wall_time: float = 0.0

    def column(self, name: str, theta: float | None = None) -> list:
        theta = self.config.thetas[0] if theta is None else theta
        return [getattr(r, name) for r in self.records if r.theta == theta]

    @property
    def Ns(self) -> list:
        return sorted({r.N for r in self.records})


def _run_one(u0_pair: DataPair | None, cfg: InflationConfig, N: int) -> list:
    start = time.perf_counter()
    params = select_parameters(cfg.s, cfg.sigma, cfg.delta, N)
    R, T = params.R, params.T
    try:
        kmax = cfg.resolved_kmax
        extra = 0
        if u0_pair is not None and not u0_pair.is_zero():
            r = max(support_radii(u0_pair.u0.coeffs)[0], support_radii(u0_pair.u1.coeffs)[0])
            extra = max(0, int(math.ceil(r / cfg.mesh)) - (2 * N + 1))
        grid = perturbation_grid(N, kmax, cfg.d, cfg.domain, cfg.mesh, extra)
        problem = NlwProblem(cfg.sigma, cfg.rho, cfg.sign, grid)
        phi = build_perturbation(PerturbationSpec(N, R, cfg.d), grid)
        u0 = DataPair.zeros(grid) if u0_pair is None else u0_pair.regrid(grid)
        mesh = TimeMesh(cfg.quadrature)
        series_phi = picard_iterates(phi, problem, kmax, T, mesh)
        series_total = series_phi if u0.is_zero() else \
            picard_iterates(u0 + phi, problem, kmax, T, mesh)
        solution = series_total.partial_sum()
        S = series_phi.iterates[cfg.sigma]
        peak = float(np.abs(S.coeffs).max()) or 1.0
        imag_rel = float(np.abs(S.coeffs.imag).max()) / peak
        regime = check_regime(params, N, cfg.m, cfg.threshold)
        pert = pair_norm(phi, cfg.space(cfg.s))
        e1 = _e1(cfg.d)
        out = []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            for theta in cfg.thetas:
                spec = cfg.space(theta)
                lb = lower_bound_check(phi, problem, T, spec, series=series_phi)
                tc = tail_and_cross_terms(u0, phi, problem, T, spec, kmax,
                                          series_phi=series_phi, series_total=series_total)
                rest = tc["S1_norm"] + tc["cross_norm"] + tc["tail_norm"]
                out.append(RunRecord(
                    N=N, R=R, T=T, theta=float(theta), pert_norm=pert,
                    sol_norm=norm(solution, spec),
                    sol_restricted=restricted_norm(solution, spec, e1),
                    restricted_L=lb["L"], ratio_L=lb["ratio"], S1=tc["S1_norm"],
                    cross=tc["cross_norm"], tail=tc["tail_norm"],
                    S_sigma_norm=norm(S, spec), dominance=bool(lb["L"] > 4.0 * rest),
                    flags=dict(regime.flags), regime_values=dict(regime.values),
                    max_imag_rel=imag_rel, support=dict(series_phi.support_sizes)))
        elapsed = time.perf_counter() - start
        for r in out:
            r.wall_time = elapsed
        return out
    except (AmalgamError, MemoryError) as exc:
        elapsed = time.perf_counter() - start
        return [RunRecord(N=N, R=R, T=T, theta=float(th), wall_time=elapsed,
                          error=f"{type(exc).__name__}: {exc}") for th in cfg.thetas]


def run_inflation(u0_pair: DataPair | None, config: InflationConfig,
                  threads: int | None = None) -> ExperimentReport:
    """Sweep ``N``; a failure at one ``N`` is recorded and the sweep continues."""
    start = time.perf_counter()
    if threads is None:
        try:
            threads = max(1, int(os.environ.get("AMALGAM_THREADS", "1")))
        except ValueError:
            threads = 1
    Ns = [int(N) for N in config.Ns]
    if threads > 1 and len(Ns) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(Ns))) as pool:
            chunks = list(pool.map(lambda N: _run_one(u0_pair, config, N), Ns))
    else:
        chunks = [_run_one(u0_pair, config, N) for N in Ns]
    records = [r for chunk in chunks for r in chunk]
    return ExperimentReport(config, records, time.perf_counter() - start)
