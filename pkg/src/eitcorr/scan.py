"""Two-photon-detuning sweeps, linewidth extraction and table export.

A scan holds beam 1 at a fixed one-photon detuning and steps beam 2, so the
two-photon detuning ``delta = Delta2 - Delta1`` is the scan variable. Every
grid point yields one :class:`ScanRecord`; failures at individual points are
recorded as undefined cells and a status string instead of aborting.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.signal import find_peaks

from .bloch import build_bloch_system, dc_transmission, steady_state
from .oracle import EstimatorConfig, estimate_spectra, max_step, simulate_ensemble
from .params import ParameterError, SystemParams, mhz
from .spectra import g2_zero, noise_spectra

log = logging.getLogger(__name__)

FORMATS = ("csv", "json")


class ConfigError(ValueError):
    """Invalid scan configuration."""


class LinewidthError(ValueError):
    pass


class NoExtremumError(LinewidthError):
    pass


class BoundaryExtremumError(LinewidthError):
    pass


def _strictly_monotonic(values) -> bool:
    d = np.diff(np.asarray(values, dtype=float))
    return bool(np.all(d > 0) or np.all(d < 0))


@dataclass(frozen=True)
class OracleSettings:
    n_traj: int = 200
    duration_us: float = 2000.0
    sample_every: int = 4


@dataclass(frozen=True)
class ScanConfig:
    """Sweep definition. Frequencies are ordinary frequencies in MHz.

    ``base`` supplies every rate except the detunings, which come from
    ``delta1_mhz`` and the ``delta`` grid. ``power_scales`` multiply both
    ``Omega^2``.
    """

    base: SystemParams = field(default_factory=SystemParams)
    delta_start_mhz: float = -10.0
    delta_stop_mhz: float = 10.0
    delta_count: int = 401
    analysis_mhz: tuple[float, ...] = (2.0,)
    delta1_mhz: tuple[float, ...] = (0.2,)
    power_scales: tuple[float, ...] = (1.0,)
    order: str = "full"
    oracle: bool = False
    oracle_settings: OracleSettings = field(default_factory=OracleSettings)
    seed: int = 0
    out: str | None = None
    fmt: str = "csv"

    def __post_init__(self):
        if self.delta_count < 2:
            raise ConfigError("delta grid needs at least 2 points")
        if not self.delta_stop_mhz > self.delta_start_mhz:
            raise ConfigError("delta range must be strictly increasing")
        for name in ("analysis_mhz", "delta1_mhz", "power_scales"):
            vals = getattr(self, name)
            if len(vals) == 0:
                raise ConfigError(f"{name} is empty")
            if not all(math.isfinite(v) for v in vals):
                raise ConfigError(f"{name} contains non-finite values")
            if len(vals) > 1 and not _strictly_monotonic(vals):
                raise ConfigError(f"{name} must be strictly monotonic")
        if any(w <= 0 for w in self.analysis_mhz):
            raise ConfigError("analysis frequencies must be > 0")
        if any(s < 0 for s in self.power_scales):
            raise ConfigError("power scales must be >= 0")
        if self.order not in ("lowest", "full"):
            raise ConfigError("order must be 'lowest' or 'full'")
        if self.fmt not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.oracle_settings.n_traj < 1 or self.oracle_settings.duration_us <= 0:
            raise ConfigError("oracle needs >= 1 trajectory and positive duration")

    @property
    def delta_grid(self) -> np.ndarray:
        return np.linspace(self.delta_start_mhz, self.delta_stop_mhz, self.delta_count)

    def point_params(self, delta1_mhz: float, delta_mhz: float, power_scale: float = 1.0) -> SystemParams:
        p = self.base.replace(delta1=mhz(delta1_mhz), delta2=mhz(delta1_mhz + delta_mhz))
        return p.with_power_scale(power_scale)


@dataclass
class ScanRecord:
    """One grid point. ``None`` marks an undefined or failed quantity."""

    delta_mhz: float
    delta1_mhz: float
    analysis_mhz: float
    power_scale: float
    t1: float | None = None
    t2: float | None = None
    g2: float | None = None
    c_analytic: float | None = None
    c_lowest: float | None = None
    s11: float | None = None
    s22: float | None = None
    s12: float | None = None
    pi_im: float | None = None
    pi_re: float | None = None
    pi_ri: float | None = None
    pi_ir: float | None = None
    nu_im: float | None = None
    nu_re: float | None = None
    nu_ri: float | None = None
    nu_ir: float | None = None
    c1: float | None = None
    c_oracle: float | None = None
    c_oracle_se: float | None = None
    status: str = "ok"


COLUMNS = tuple(f.name for f in fields(ScanRecord))
_FLOAT_COLUMNS = tuple(c for c in COLUMNS if c != "status")


def _note(rec: ScanRecord, msg: str):
    rec.status = msg if rec.status == "ok" else f"{rec.status}; {msg}"


def evaluate_point(
    params: SystemParams,
    delta_mhz: float,
    delta1_mhz: float,
    analysis_mhz: float,
    power_scale: float = 1.0,
    order: str = "full",
    oracle: OracleSettings | None = None,
    seed: int = 0,
) -> ScanRecord:
    """Evaluate every observable at one grid point without raising numerical errors."""
    rec = ScanRecord(delta_mhz, delta1_mhz, analysis_mhz, power_scale)
    omega = mhz(analysis_mhz)
    try:
        sys = build_bloch_system(params)
        ss = steady_state(sys)
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        _note(rec, f"steady state: {exc}")
        return rec
    rec.t1, rec.t2 = dc_transmission(ss, params)
    try:
        rec.g2 = g2_zero(ss)
    except ArithmeticError as exc:
        _note(rec, f"g2: {exc}")
    try:
        dec = noise_spectra(sys, ss, params, omega, order=order)
        rec.c_analytic = dec.c
        rec.s11, rec.s22, rec.s12 = dec.s11, dec.s22, dec.s12
        rec.pi_im, rec.pi_re, rec.pi_ri, rec.pi_ir = dec.pi_im, dec.pi_re, dec.pi_ri, dec.pi_ir
        rec.nu_im, rec.nu_re, rec.nu_ri, rec.nu_ir = dec.nu_im, dec.nu_re, dec.nu_ri, dec.nu_ir
        rec.c1 = dec.extra_c1
        if dec.c is None:
            _note(rec, "C undefined")
        rec.c_lowest = dec.c if order == "lowest" else noise_spectra(sys, ss, params, omega, "lowest").c
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        _note(rec, f"spectra: {exc}")
    if oracle is not None:
        try:
            dt = max_step(params, omega)
            ens = simulate_ensemble(
                params, dt, oracle.duration_us, oracle.n_traj, base_seed=seed,
                sample_every=oracle.sample_every, omega_max=omega,
            )
            est = estimate_spectra(ens, EstimatorConfig.for_frequencies([omega], ens.sample_dt))
            if est.defined[0]:
                rec.c_oracle = float(est.c[0])
                rec.c_oracle_se = float(est.c_se[0])
            else:
                _note(rec, "oracle C undefined")
        except (ArithmeticError, ValueError) as exc:
            _note(rec, f"oracle: {exc}")
    return rec


def _grid(cfg: ScanConfig):
    k = 0
    for ps in cfg.power_scales:
        for d1 in cfg.delta1_mhz:
            for w in cfg.analysis_mhz:
                for d in cfg.delta_grid:
                    yield k, float(d), float(d1), float(w), float(ps)
                    k += 1


def _run_one(args):
    cfg, k, d, d1, w, ps = args
    try:
        params = cfg.point_params(d1, d, ps)
    except ParameterError as exc:
        rec = ScanRecord(d, d1, w, ps)
        _note(rec, f"parameters: {exc}")
        return rec
    oracle = cfg.oracle_settings if cfg.oracle else None
    # disjoint seed blocks per point keep every trajectory's stream unique
    seed = cfg.seed + k * cfg.oracle_settings.n_traj
    return evaluate_point(params, d, d1, w, ps, cfg.order, oracle, seed)


def run_scan(cfg: ScanConfig, workers: int = 1) -> list[ScanRecord]:
    """Evaluate all grid points in order (power, Delta1, omega, delta)."""
    jobs = [(cfg, *pt) for pt in _grid(cfg)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]


# -- curve analysis ----------------------------------------------------------------


def fit_linewidth(delta, value, kind: str = "peak") -> float:
    """Full width at half maximum of the single peak (or dip) of a sampled curve.

    The baseline is the median of the outer 10 % of samples (5 % per side);
    half-maximum crossings are located by linear interpolation.
    """
    x = np.asarray(delta, dtype=float)
    y = np.asarray(value, dtype=float)
    if kind not in ("peak", "dip"):
        raise ValueError("kind must be 'peak' or 'dip'")
    if x.shape != y.shape or x.ndim != 1 or len(x) < 5:
        raise ValueError("need matching 1-D arrays with at least 5 points")
    if not np.all(np.isfinite(y)):
        raise ValueError("curve contains undefined values")
    if kind == "dip":
        y = -y
    n = len(y)
    k = max(1, int(round(0.05 * n)))
    base = float(np.median(np.r_[y[:k], y[-k:]]))
    i = int(np.argmax(y))
    if y[i] <= base:
        raise NoExtremumError(f"no {kind} above the baseline")
    if i == 0 or i == n - 1:
        raise BoundaryExtremumError(f"{kind} sits at the grid boundary")
    half = base + 0.5 * (y[i] - base)
    j = i
    while j > 0 and y[j] > half:
        j -= 1
    if y[j] > half:
        raise BoundaryExtremumError("left half-maximum crossing outside the grid")
    left = x[j] + (half - y[j]) * (x[j + 1] - x[j]) / (y[j + 1] - y[j])
    j = i
    while j < n - 1 and y[j] > half:
        j += 1
    if y[j] > half:
        raise BoundaryExtremumError("right half-maximum crossing outside the grid")
    right = x[j - 1] + (half - y[j - 1]) * (x[j] - x[j - 1]) / (y[j] - y[j - 1])
    return float(right - left)


def central_peak_width(delta, value, center: float = 0.0, search: float = 0.1) -> float:
    """Width of the narrow peak near ``center`` measured between its flanking minima.

    The top is the largest sample within ``|delta - center| < search``; the curve
    is cut at the nearest local minimum on each side and the cut is handed to
    :func:`fit_linewidth`.
    """
    x = np.asarray(delta, dtype=float)
    y = np.asarray(value, dtype=float)
    near = np.flatnonzero(np.abs(x - center) < search)
    if len(near) == 0:
        raise NoExtremumError("no samples near the requested center")
    top = int(near[np.argmax(y[near])])
    lo = top
    while lo > 0 and y[lo - 1] < y[lo]:
        lo -= 1
    hi = top
    while hi < len(y) - 1 and y[hi + 1] < y[hi]:
        hi += 1
    if lo == top or hi == top:
        raise NoExtremumError("central sample is not a local maximum")
    return fit_linewidth(x[lo:hi + 1], y[lo:hi + 1], "peak")


@dataclass(frozen=True)
class LocalMinimum:
    delta: float
    value: float
    depth: float


def local_minima(delta, value, neighborhood: float) -> list[LocalMinimum]:
    """Interior local minima with depth measured inside a window of +-``neighborhood``.

    Depth is the topographic prominence restricted to that window.
    """
    x = np.asarray(delta, dtype=float)
    y = np.asarray(value, dtype=float)
    step = float(np.mean(np.diff(x)))
    wlen = max(3, int(round(2 * neighborhood / step)) | 1)
    idx, props = find_peaks(-y, prominence=0.0, wlen=wlen)
    return [LocalMinimum(float(x[i]), float(y[i]), float(p)) for i, p in zip(idx, props["prominences"])]


def minima_near(delta, value, target: float, rel_tol: float, neighborhood: float) -> list[LocalMinimum]:
    """Local minima whose position lies within ``rel_tol * |target|`` of ``target``."""
    tol = rel_tol * abs(target)
    return [m for m in local_minima(delta, value, neighborhood) if abs(m.delta - target) <= tol]


def sideband_dip_depth(delta, value, target: float, rel_tol: float = 0.10, neighborhood: float | None = None) -> float:
    """Depth of the deepest dip near ``target``; 0 once the dip has been absorbed."""
    nb = abs(target) / 2 if neighborhood is None else neighborhood
    found = minima_near(delta, value, target, rel_tol, nb)
    return max((m.depth for m in found), default=0.0)


# -- export ------------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return repr(float(v))


def export(records, path, fmt: str = "csv") -> Path:
    """Write records with a fixed column order (:data:`COLUMNS`).

    CSV renders undefined cells as empty strings, JSON as ``null``. Floats are
    written with ``repr`` so they round-trip exactly.
    """
    if fmt not in FORMATS:
        raise ConfigError(f"format must be one of {FORMATS}")
    path = Path(path)
    try:
        if fmt == "csv":
            with path.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(COLUMNS)
                for r in records:
                    d = asdict(r)
                    w.writerow([_fmt(d[c]) for c in COLUMNS])
        else:
            doc = {"columns": list(COLUMNS), "records": [[asdict(r)[c] for c in COLUMNS] for r in records]}
            path.write_text(json.dumps(doc, indent=1) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_records(path) -> list[ScanRecord]:
    """Inverse of :func:`export`; the format is taken from the file suffix."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    if path.suffix.lower() == ".json":
        doc = json.loads(text)
        rows = [dict(zip(doc["columns"], vals)) for vals in doc["records"]]
    else:
        rows = list(csv.DictReader(text.splitlines()))
        for row in rows:
            for c in _FLOAT_COLUMNS:
                row[c] = float(row[c]) if row.get(c, "") != "" else None
    return [ScanRecord(**{c: row.get(c) for c in COLUMNS}) for row in rows]


def column(records, name: str) -> np.ndarray:
    """Extract a column as floats, with NaN for undefined cells."""
    return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in records], dtype=float)


# -- configuration files -------------------------------------------------------------

_PARAM_KEYS = {
    "gamma_mhz", "gamma_d_khz", "gamma_bar_mhz", "rabi1_gamma", "rabi2_gamma",
    "kappa1", "kappa2", "phase_noise_correlation",
}


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def parse_config(entries: dict[str, str]) -> ScanConfig:
    """Build a :class:`ScanConfig` from flat ``key -> text`` entries.

    Keys (dashes and underscores are interchangeable):
    ``gamma_mhz, gamma_d_khz, gamma_bar_mhz, rabi1_gamma, rabi2_gamma, kappa1,
    kappa2, phase_noise_correlation`` (system), ``delta1_mhz`` (list),
    ``delta_range_mhz`` (start stop count), ``analysis_mhz`` (list),
    ``power_scale`` (list), ``order``, ``oracle``, ``oracle_trajectories``,
    ``oracle_duration_us``, ``oracle_sample_every``, ``seed``, ``out``, ``format``.
    """
    norm = {k.strip().replace("-", "_"): v.strip() for k, v in entries.items()}
    try:
        pkw = {k: float(norm.pop(k)) for k in list(norm) if k in _PARAM_KEYS}
        base = SystemParams.from_mhz(**pkw)
        kw = {"base": base}
        if "delta_range_mhz" in norm:
            vals = _floats(norm.pop("delta_range_mhz"))
            if len(vals) != 3 or vals[2] != int(vals[2]):
                raise ConfigError("delta_range_mhz needs 'start stop count'")
            kw.update(delta_start_mhz=vals[0], delta_stop_mhz=vals[1], delta_count=int(vals[2]))
        if "delta1_mhz" in norm:
            kw["delta1_mhz"] = _floats(norm.pop("delta1_mhz"))
        if "analysis_mhz" in norm:
            kw["analysis_mhz"] = _floats(norm.pop("analysis_mhz"))
        if "power_scale" in norm:
            kw["power_scales"] = _floats(norm.pop("power_scale"))
        if "order" in norm:
            kw["order"] = norm.pop("order")
        if "oracle" in norm:
            kw["oracle"] = _bool(norm.pop("oracle"))
        ok = {}
        if "oracle_trajectories" in norm:
            ok["n_traj"] = int(norm.pop("oracle_trajectories"))
        if "oracle_duration_us" in norm:
            ok["duration_us"] = float(norm.pop("oracle_duration_us"))
        if "oracle_sample_every" in norm:
            ok["sample_every"] = int(norm.pop("oracle_sample_every"))
        kw["oracle_settings"] = OracleSettings(**ok)
        if "seed" in norm:
            kw["seed"] = int(norm.pop("seed"))
        if "out" in norm:
            kw["out"] = norm.pop("out") or None
        if "format" in norm:
            kw["fmt"] = norm.pop("format")
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    if norm:
        raise ConfigError(f"unknown keys: {', '.join(sorted(norm))}")
    return ScanConfig(**kw)


def read_config_file(path) -> dict[str, str]:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected 'key = value'")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def load_config(path, overrides: dict[str, str] | None = None) -> ScanConfig:
    entries = read_config_file(path)
    entries.update(overrides or {})
    return parse_config(entries)
