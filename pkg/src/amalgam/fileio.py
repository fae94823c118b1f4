"""Field dumps, flat key:value configuration files and sweep reports.

Numbers are written with 17 significant digits, ``.`` as decimal separator,
independent of locale, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import math
import os
import platform
import tempfile
from dataclasses import dataclass, fields as dc_fields

import numpy as np

from .errors import ConfigError, ReportIOError, ValidationError
from .spectral import GridSpec, SpectralField, make_grid

__all__ = [
    "fmt", "write_field_csv", "read_field_csv", "CONFIG_SCHEMA", "parse_config",
    "serialize_config", "config_defaults", "inflation_config", "REPORT_COLUMNS",
    "report_rows", "write_report", "read_report_csv", "write_manifest", "plot_report",
]


def fmt(x) -> str:
    """17-significant-digit, locale-free rendering."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise ReportIOError(f"cannot write {path}: {exc}") from exc


# ------------------------------------------------------------- fields -----

def write_field_csv(f: SpectralField, path: str, dense: bool = False) -> str:
    """Write ``# grid:`` comment, header ``xi_1..xi_d,re,im`` and one row per
    nonzero coefficient (every coefficient with ``dense``)."""
    g = f.grid
    buf = io.StringIO()
    buf.write(f"# grid: {g.describe()}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"xi_{i + 1}" for i in range(g.dim)] + ["re", "im"])
    idx = np.argwhere(np.ones(g.shape, dtype=bool) if dense else f.coeffs != 0)
    for ix in idx:
        c = f.coeffs[tuple(ix)]
        xi = [(int(k) - g.offset) / g.mesh for k in ix]
        w.writerow([fmt(x) for x in xi] + [fmt(c.real), fmt(c.imag)])
    _atomic_write(path, buf.getvalue())
    return path


def _parse_grid_comment(line: str) -> GridSpec:
    body = line.split(":", 1)[1]
    kv = dict(item.split("=", 1) for item in body.split())
    try:
        return make_grid(int(kv["dim"]), int(kv["extent"]), kv["domain"], int(kv["mesh"]))
    except KeyError as exc:
        raise ValidationError(f"grid comment lacks {exc}") from exc


def read_field_csv(path: str, grid: GridSpec | None = None) -> SpectralField:
    """Read a (possibly sparse) field dump; missing frequencies are zero."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ReportIOError(f"cannot read {path}: {exc}") from exc
    comments = [ln for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if ln.strip() and not ln.startswith("#")]
    for c in comments:
        if c[1:].strip().startswith("grid:") and grid is None:
            grid = _parse_grid_comment(c[1:].strip())
    if not body:
        raise ValidationError(f"{path}: missing header")
    rows = list(csv.reader(body))
    header = rows[0]
    d = len(header) - 2
    if d < 1 or header[-2:] != ["re", "im"]:
        raise ValidationError(f"{path}: header must be xi_1..xi_d,re,im")
    data = np.array([[float(v) for v in r] for r in rows[1:]]) if len(rows) > 1 \
        else np.zeros((0, d + 2))
    if grid is None:
        reach = float(np.abs(data[:, :d]).max()) if len(data) else 1.0
        grid = make_grid(d, max(1, int(math.ceil(reach))))
    if grid.dim != d:
        raise ValidationError(f"{path}: {d} frequency columns but grid dim {grid.dim}")
    c = np.zeros(grid.shape, dtype=np.complex128)
    for r in data:
        c[grid.index_of(r[:d])] += r[d] + 1j * r[d + 1]
    return SpectralField(grid, c)


# ------------------------------------------------------------- config -----

def _list_of(kind):
    def parse(text):
        items = [t for t in str(text).replace(";", ",").split(",") if t.strip()]
        return tuple(kind(t.strip()) for t in items)
    return parse


def _optional_int(text):
    t = str(text).strip().lower()
    return None if t in ("", "none", "auto") else int(t)


@dataclass(frozen=True)
class _Key:
    parse: object
    default: object
    help: str


CONFIG_SCHEMA = {
    "s": _Key(float, -0.4, "data regularity (negative for inflate)"),
    "sigma": _Key(int, 3, "nonlinearity degree, sigma >= max(rho, 2)"),
    "rho": _Key(int, 3, "number of unconjugated factors"),
    "sign": _Key(int, 1, "sign of the nonlinearity (+1 or -1)"),
    "delta": _Key(float, 0.1, "regime slack"),
    "theta": _Key(_list_of(float), (-0.4,), "target regularities (comma list)"),
    "N": _Key(_list_of(int), (64, 128, 256, 512), "frequency scales (comma list)"),
    "m": _Key(float, 10.0, "inflation target"),
    "family": _Key(str, "FourierAmalgam", "norm family"),
    "p": _Key(float, 2.0, "inner exponent"),
    "q": _Key(float, 2.0, "outer exponent"),
    "d": _Key(int, 1, "dimension"),
    "domain": _Key(str, "torus", "torus or euclidean"),
    "mesh": _Key(int, 1, "lattice points per unit frequency"),
    "kmax": _Key(_optional_int, None, "highest Picard order (auto = 1 + 3(sigma-1))"),
    "threshold": _Key(float, 0.25, "ratio treated as much-smaller"),
    "quadrature": _Key(str, "chebyshev", "time rule"),
    "u0": _Key(str, "zero", "background data field CSV or 'zero'"),
    "u1": _Key(str, "zero", "background velocity field CSV or 'zero'"),
    "plot": _Key(lambda t: str(t).strip().lower() in ("1", "true", "yes", "on"), True,
                 "emit plot.svg"),
}


def config_defaults() -> dict:
    return {k: v.default for k, v in CONFIG_SCHEMA.items()}


def _render(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, tuple):
        return ",".join(_render(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_config(cfg: dict) -> str:
    return "".join(f"{k}: {_render(cfg[k])}\n" for k in CONFIG_SCHEMA if k in cfg)


def _parse_text(text: str, source: str) -> dict:
    out = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = ":" if ":" in line else ("=" if "=" in line else None)
        if sep is None:
            raise ConfigError(f"{source}:{n}", "expected 'key: value'")
        k, v = (t.strip() for t in line.split(sep, 1))
        out[k] = v
    return out


def _validate(cfg: dict, command: str) -> None:
    if cfg["sigma"] < max(cfg["rho"], 2) or cfg["rho"] < 0:
        raise ConfigError("sigma", f"sigma >= max(rho, 2) violated (sigma={cfg['sigma']}, rho={cfg['rho']})")
    if cfg["sign"] not in (1, -1):
        raise ConfigError("sign", "must be +1 or -1")
    for key in ("p", "q"):
        if not cfg[key] >= 1:
            raise ConfigError(key, "must lie in [1, inf]")
    if cfg["d"] not in (1, 2, 3):
        raise ConfigError("d", "must be 1, 2 or 3")
    if cfg["mesh"] < 1:
        raise ConfigError("mesh", "must be >= 1")
    if cfg["m"] <= 0:
        raise ConfigError("m", "must be positive")
    if not 0 < cfg["threshold"] < 1:
        raise ConfigError("threshold", "must lie in (0, 1)")
    if cfg["kmax"] is not None and cfg["kmax"] < 1:
        raise ConfigError("kmax", "must be >= 1")
    if command == "inflate":
        if not cfg["s"] < 0:
            raise ConfigError("s", "inflate requires s < 0")
        if not cfg["N"]:
            raise ConfigError("N", "at least one N is required")
        for N in cfg["N"]:
            if N < 4:
                raise ConfigError("N", f"N = {N} < 4 makes the perturbation cubes overlap")
        if not cfg["theta"]:
            raise ConfigError("theta", "at least one theta is required")
        from .inflation import select_parameters
        try:
            select_parameters(cfg["s"], cfg["sigma"], cfg["delta"], 64)
        except ValidationError as exc:
            raise ConfigError("delta", str(exc)) from exc
        from .norms import SpaceSpec
        try:
            SpaceSpec(cfg["family"], cfg["p"], cfg["q"], cfg["s"])
        except ValidationError as exc:
            raise ConfigError("family", str(exc)) from exc


def parse_config(path: str | None = None, overrides: dict | None = None,
                 command: str = "inflate") -> dict:
    """Defaults, then file values, then ``overrides`` (flags win)."""
    raw = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw.update(_parse_text(fh.read(), path))
        except OSError as exc:
            raise ReportIOError(f"cannot read config {path}: {exc}") from exc
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    cfg = config_defaults()
    for k, v in raw.items():
        if k not in CONFIG_SCHEMA:
            raise ConfigError(k, "unknown key")
        try:
            cfg[k] = v if not isinstance(v, str) else CONFIG_SCHEMA[k].parse(v)
        except (TypeError, ValueError) as exc:
            raise ConfigError(k, f"cannot parse {v!r}: {exc}") from exc
        if isinstance(cfg[k], list):
            cfg[k] = tuple(cfg[k])
    _validate(cfg, command)
    return cfg


def inflation_config(cfg: dict):
    from .inflation import InflationConfig
    return InflationConfig(
        s=cfg["s"], sigma=cfg["sigma"], rho=cfg["rho"], sign=cfg["sign"],
        thetas=tuple(cfg["theta"]), delta=cfg["delta"], Ns=tuple(cfg["N"]), m=cfg["m"],
        family=cfg["family"], p=cfg["p"], q=cfg["q"], d=cfg["d"], domain=cfg["domain"],
        mesh=cfg["mesh"], kmax=cfg["kmax"], threshold=cfg["threshold"],
        quadrature=cfg["quadrature"])


# ------------------------------------------------------------- reports ----

REPORT_COLUMNS = ["N", "R", "T", "theta", "pert_norm", "sol_norm", "sol_restricted",
                  "restricted_L", "ratio_L", "S1", "cross", "tail", "S_sigma_norm",
                  "dominance", "flag_i", "flag_ii_a", "flag_ii_b", "flag_iii", "flag_iv",
                  "max_imag_rel", "error"]


def report_rows(report) -> list:
    rows = []
    for r in report.records:
        row = [fmt(r.N), fmt(r.R), fmt(r.T), fmt(r.theta), fmt(r.pert_norm), fmt(r.sol_norm),
               fmt(r.sol_restricted), fmt(r.restricted_L), fmt(r.ratio_L), fmt(r.S1),
               fmt(r.cross), fmt(r.tail), fmt(r.S_sigma_norm), fmt(r.dominance)]
        row += [fmt(bool(r.flags.get(k, False))) for k in ("i", "ii_a", "ii_b", "iii", "iv")]
        row += [fmt(r.max_imag_rel), r.error]
        rows.append(row)
    return rows


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def read_report_csv(path: str) -> list:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            return list(csv.DictReader(fh))
    except OSError as exc:
        raise ReportIOError(f"cannot read {path}: {exc}") from exc


def plot_report(rows: list, path: str) -> str:
    """Log-log plot of solution and data norms against ``N``, one line per theta."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    thetas = sorted({float(r["theta"]) for r in rows})
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for th in thetas:
        sel = [r for r in rows if float(r["theta"]) == th and not r.get("error")]
        if not sel:
            continue
        Ns = [float(r["N"]) for r in sel]
        ax.loglog(Ns, [float(r["sol_norm"]) for r in sel], marker="o",
                  label=f"||u(T)|| theta={th:g}")
    sel = [r for r in rows if float(r["theta"]) == thetas[0] and not r.get("error")] if thetas else []
    if sel:
        ax.loglog([float(r["N"]) for r in sel], [float(r["pert_norm"]) for r in sel],
                  marker="s", linestyle="--", color="k", label="data perturbation")
    ax.set_xlabel("N")
    ax.set_ylabel("norm")
    ax.set_title("norm inflation sweep")
    if thetas:
        ax.legend(fontsize=8)
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    _atomic_write(path, buf.getvalue())
    return path


def write_manifest(path: str, entries: dict) -> str:
    lines = []
    for k, v in entries.items():
        text = str(v).replace("\n", " | ")
        lines.append(f"{k}: {text}\n")
    _atomic_write(path, "".join(lines))
    return path


def _versions() -> dict:
    import numpy
    import scipy
    from . import __version__, _kernels
    return {"python": platform.python_version(), "numpy": numpy.__version__,
            "scipy": scipy.__version__, "amalgam": __version__, "kernel_backend": _kernels.BACKEND}


def write_report(report, out_dir: str, plot: bool = True, command: str = "",
                 extra: dict | None = None) -> list:
    """Write ``report.csv``, optional ``plot.svg`` and finally ``manifest.txt``."""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise ReportIOError(f"cannot create {out_dir}: {exc}") from exc
    files = []
    csv_path = os.path.join(out_dir, "report.csv")
    _atomic_write(csv_path, _csv_text(REPORT_COLUMNS, report_rows(report)))
    files.append(csv_path)
    if plot and report.records:
        files.append(plot_report(read_report_csv(csv_path), os.path.join(out_dir, "plot.svg")))
    cfg = report.config
    errors = sum(1 for r in report.records if r.error)
    entries = {"command": command or "(library call)"}
    for f in dc_fields(cfg):
        entries[f"config.{f.name}"] = _render(getattr(cfg, f.name))
    entries.update({f"version.{k}": v for k, v in _versions().items()})
    entries["grid"] = f"dim={cfg.d} domain={cfg.domain} mesh={cfg.mesh} extent=kmax*(2N+1)"
    entries["wall_time_s"] = fmt(report.wall_time)
    entries["rows"] = str(len(report.records))
    entries["failed_rows"] = str(errors)
    entries["dominance_rows"] = str(sum(1 for r in report.records if r.dominance))
    entries["status"] = "pass" if errors == 0 else "partial"
    entries.update(extra or {})
    manifest = os.path.join(out_dir, "manifest.txt")
    entries["outputs"] = ",".join(os.path.basename(p) for p in files + [manifest])
    write_manifest(manifest, entries)
    files.append(manifest)
    return files
