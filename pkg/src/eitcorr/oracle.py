"""Monte-Carlo reference for the intensity-correlation spectra.

Laser phase diffusion is simulated directly: both one-photon detunings receive
the white frequency noise ``f(t)`` and the Bloch equations are integrated
trajectory by trajectory. Each step applies the exact affine propagator of the
noise-free equations followed by the exact rotation generated by the noise
increment (optical coherences pick up ``exp(-i dW)``), a splitting that
converges to the Stratonovich solution. Intensities go through the
thin-sample map and spectra are estimated with a windowed, segment-averaged
cross-periodogram.

Trajectories are vectorized over the ensemble; each owns a
``numpy.random.Generator`` seeded with ``base_seed + index``, so results are
bit-identical for a given seed regardless of chunking.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import expm
from scipy.signal import get_window

from .bloch import build_bloch_system, phase_diffusion_drift, steady_state
from .params import SystemParams

log = logging.getLogger(__name__)

INSTABILITY_BOUND = 10.0
_CHUNK = 4096


class PreconditionError(ValueError):
    """Step size or duration outside the validated regime."""


class StepSizeError(ArithmeticError):
    """The integration blew up; reduce ``dt``."""


class InsufficientDataError(ValueError):
    pass


class ZeroVarianceError(ArithmeticError):
    pass


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Sampled output intensities of independent trajectories.

    ``series`` has shape ``(n_traj, n_samples, 2)`` holding ``(I1, I2)``
    averaged over each sampling interval ``sample_dt``. Times are in us.
    """

    dt: float
    sample_dt: float
    duration: float
    transient: float
    seeds: tuple[int, ...]
    series: np.ndarray = field(repr=False)
    mean_polarizations: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_traj(self) -> int:
        return self.series.shape[0]

    @property
    def n_samples(self) -> int:
        return self.series.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.transient + self.sample_dt * (np.arange(self.n_samples) + 0.5)

    @classmethod
    def from_series(cls, series, sample_dt: float) -> "TrajectoryEnsemble":
        """Wrap externally generated intensity series (e.g. synthetic test data)."""
        arr = np.asarray(series, dtype=float)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3 or arr.shape[2] != 2:
            raise ValueError("series must have shape (n_traj, n_samples, 2)")
        arr = arr.copy()
        arr.setflags(write=False)
        return cls(sample_dt, sample_dt, arr.shape[1] * sample_dt, 0.0, tuple(range(arr.shape[0])), arr)


def max_step(params: SystemParams, omega_max: float = 0.0) -> float:
    """Largest admissible step, ``2 pi / (50 max(gamma, |D1|, |D2|, O1, O2, w_max))``."""
    rate = max(params.gamma, abs(params.delta1), abs(params.delta2), params.rabi1, params.rabi2, omega_max)
    return 2.0 * math.pi / (50.0 * rate)


def min_duration(params: SystemParams) -> float:
    return 100.0 / params.gamma_d if params.gamma_d > 0 else 100.0 * 100.0 / params.gamma


def check_preconditions(params: SystemParams, dt: float, duration: float, omega_max: float = 0.0):
    if not (dt > 0 and math.isfinite(dt)):
        raise PreconditionError("dt must be positive")
    limit = max_step(params, omega_max)
    if dt > limit * (1 + 1e-12):
        raise PreconditionError(f"dt={dt:.4g} us exceeds the stability limit {limit:.4g} us")
    need = min_duration(params)
    if duration < need * (1 - 1e-12):
        raise PreconditionError(f"duration={duration:.4g} us shorter than required {need:.4g} us")


def _real_basis():
    # x = T y with y = (r11, r22, Re r13, Im r13, Re r23, Im r23, Re r12, Im r12)
    t = np.zeros((8, 8), dtype=complex)
    t[0, 0] = t[1, 1] = 1
    for k, (a, b) in enumerate(((2, 3), (4, 5), (6, 7))):
        re, im = 2 + 2 * k, 3 + 2 * k
        t[a, re], t[a, im] = 1, 1j
        t[b, re], t[b, im] = 1, -1j
    return t


_T = _real_basis()
_TINV = np.linalg.inv(_T)


def _default_transient(params: SystemParams) -> float:
    sys = build_bloch_system(params)
    m = sys.m + phase_diffusion_drift(params)
    slow = float(np.min(-np.linalg.eigvals(m).real))
    return 10.0 / slow


def simulate_ensemble(
    params: SystemParams,
    dt: float,
    duration: float,
    n_traj: int,
    base_seed: int = 0,
    *,
    transient: float | None = None,
    sample_every: int = 1,
    noise_substeps: int = 1,
    omega_max: float = 0.0,
    enforce_preconditions: bool = True,
) -> TrajectoryEnsemble:
    """Integrate ``n_traj`` trajectories and return their intensity series.

    ``duration`` is the recorded length after ``transient``. Each trajectory
    starts in the noise-free steady state. ``noise_substeps`` draws every
    Wiener increment as the sum of that many finer increments, so a run at
    ``dt`` with ``noise_substeps=2`` sees the same Brownian path as a run at
    ``dt/2``.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if sample_every < 1 or noise_substeps < 1:
        raise ValueError("sample_every and noise_substeps must be >= 1")
    if enforce_preconditions:
        check_preconditions(params, dt, duration, omega_max)
    if transient is None:
        transient = _default_transient(params)

    sys = build_bloch_system(params)
    ss = steady_state(sys)
    e_real = (_TINV @ expm(sys.m * dt) @ _T).real
    ys = (_TINV @ ss.x_ss).real
    et = np.ascontiguousarray(e_real.T)
    cvec = ys - e_real @ ys

    n_rec = int(round(duration / (dt * sample_every)))
    n_skip = int(math.ceil(transient / dt))
    n_steps = n_skip + n_rec * sample_every
    seeds = tuple(base_seed + j for j in range(n_traj))
    rngs = [np.random.default_rng(s) for s in seeds]
    rho = params.phase_noise_correlation
    n_w = 1 if rho == 1.0 else 2
    sd = math.sqrt(2.0 * params.gamma_bar * dt / noise_substeps)
    k1, k2 = params.kappa1, params.kappa2

    y = np.tile(ys, (n_traj, 1))
    tmp = np.empty_like(y)
    acc = np.zeros_like(y)
    acc2 = np.zeros_like(y)
    tot = np.zeros_like(y)
    out = np.empty((n_traj, n_rec, 2))
    rec = 0
    in_bin = 0
    step = 0
    while step < n_steps:
        chunk = min(_CHUNK, n_steps - step)
        if params.gamma_bar > 0:
            z = np.stack([r.standard_normal((chunk * noise_substeps, n_w)) for r in rngs], axis=1)
            z = z.reshape(chunk, noise_substeps, n_traj, n_w).sum(axis=1) * sd
            f1 = z[..., 0]
            f2 = f1 if n_w == 1 else rho * f1 + math.sqrt(1.0 - rho * rho) * z[..., 1]
            ph = np.exp(-1j * np.stack([f1, f2, f1 - f2], axis=-1))
        else:
            ph = None
        for n in range(chunk):
            np.matmul(y, et, out=tmp)
            tmp += cvec
            y, tmp = tmp, y
            rec_now = step >= n_skip
            if rec_now:
                acc += y
                acc2 += y * y
            if ph is not None:
                y.view(complex)[:, 1:4] *= ph[n]
            if rec_now:
                # averaging both sides of the kick cancels the first-order splitting bias
                acc += y
                acc2 += y * y
                in_bin += 1
                if in_bin == sample_every:
                    im1 = acc[:, 3] / (2 * in_bin)
                    im2 = acc[:, 5] / (2 * in_bin)
                    sq1 = (acc2[:, 2] + acc2[:, 3]) / (2 * in_bin)
                    sq2 = (acc2[:, 4] + acc2[:, 5]) / (2 * in_bin)
                    out[:, rec, 0] = 1.0 - 2.0 * k1 * im1 + k1 * k1 * sq1
                    out[:, rec, 1] = 1.0 - 2.0 * k2 * im2 + k2 * k2 * sq2
                    rec += 1
                    in_bin = 0
                    tot += acc
                    acc[:] = 0.0
                    acc2[:] = 0.0
            step += 1
        worst = float(np.max(np.abs(y)))
        if not math.isfinite(worst) or worst > INSTABILITY_BOUND:
            raise StepSizeError(f"state norm {worst:.3g} exceeded {INSTABILITY_BOUND} at step {step}; reduce dt")

    out.setflags(write=False)
    tot /= max(1, 2 * n_rec * sample_every)
    pol = np.stack([tot[:, 2] + 1j * tot[:, 3], tot[:, 4] + 1j * tot[:, 5]], axis=1)
    log.debug("simulated %d trajectories, %d steps each", n_traj, n_steps)
    return TrajectoryEnsemble(
        dt=dt, sample_dt=dt * sample_every, duration=n_rec * dt * sample_every,
        transient=n_skip * dt, seeds=seeds, series=out, mean_polarizations=pol,
    )


def simulate_trajectory(params: SystemParams, dt: float, duration: float, seed: int, **kwargs) -> TrajectoryEnsemble:
    """Single-trajectory convenience wrapper around :func:`simulate_ensemble`."""
    return simulate_ensemble(params, dt, duration, 1, base_seed=seed, **kwargs)


# -- estimation -------------------------------------------------------------------


@dataclass(frozen=True)
class EstimatorConfig:
    """Segment-averaged cross-periodogram settings.

    ``frequencies`` are angular analysis frequencies in rad/us.
    """

    segment_length: int
    frequencies: tuple[float, ...]
    window: str = "hann"
    overlap: float = 0.5

    def __post_init__(self):
        if self.segment_length < 16:
            raise ValueError("segment_length must be >= 16")
        if not 0.0 <= self.overlap <= 0.9:
            raise ValueError("overlap must lie in [0, 0.9]")
        if len(self.frequencies) == 0:
            raise ValueError("frequency grid is empty")

    @classmethod
    def for_frequencies(cls, frequencies, sample_dt: float, rbw_fraction: float = 1 / 20, **kw) -> "EstimatorConfig":
        """Pick the segment so the bin spacing is at most ``rbw_fraction * min(w)``."""
        freqs = tuple(float(w) for w in np.atleast_1d(frequencies))
        w_min = min(abs(w) for w in freqs)
        if w_min <= 0:
            raise ValueError("analysis frequencies must be nonzero")
        length = int(math.ceil(2.0 * math.pi / (rbw_fraction * w_min * sample_dt)))
        return cls(segment_length=max(16, length), frequencies=freqs, **kw)


@dataclass(frozen=True)
class SpectralEstimate:
    """Estimated spectra on the configured grid; ``c`` is NaN where undefined."""

    omega: np.ndarray
    s11: np.ndarray
    s22: np.ndarray
    s12: np.ndarray
    c: np.ndarray
    s11_se: np.ndarray
    s22_se: np.ndarray
    s12_se: np.ndarray
    c_se: np.ndarray
    n_segments: int

    @property
    def defined(self) -> np.ndarray:
        return np.isfinite(self.c)


def _segment_dft(series: np.ndarray, cfg: EstimatorConfig, sample_dt: float) -> np.ndarray:
    """Windowed DFT of every segment at the configured frequencies.

    Returns shape ``(n_traj, n_seg, n_freq, 2)``.
    """
    n_traj, n, _ = series.shape
    length = cfg.segment_length
    hop = max(1, int(round(length * (1.0 - cfg.overlap))))
    n_seg = 0 if n < length else 1 + (n - length) // hop
    if n_traj * n_seg < 8:
        raise InsufficientDataError(
            f"{n_traj * n_seg} segments of {length} samples available, at least 8 required"
        )
    idx = np.arange(n_seg)[:, None] * hop + np.arange(length)[None, :]
    seg = series[:, idx, :]  # (traj, seg, L, 2)
    seg = seg - seg.mean(axis=2, keepdims=True)
    win = get_window(cfg.window, length)
    t = sample_dt * np.arange(length)
    kern = win[:, None] * np.exp(-1j * np.outer(t, np.asarray(cfg.frequencies)))  # (L, F)
    return np.einsum("aslc,lf->asfc", seg, kern)


def _jackknife(num: np.ndarray, den1: np.ndarray, den2: np.ndarray):
    """Pooled estimates and leave-one-block-out standard errors.

    Inputs are per-block sums with shape ``(n_blocks, n_freq)``.
    """
    nb = num.shape[0]
    tot = num.sum(0), den1.sum(0), den2.sum(0)

    def stats(a, b, c, n):
        with np.errstate(invalid="ignore", divide="ignore"):
            cc = a / np.sqrt(b * c)
        return a / n, b / n, c / n, np.clip(cc, -1.0, 1.0)

    full = stats(*tot, nb)
    if nb < 2:
        return full, tuple(np.full_like(x, np.nan) for x in full)
    loo = stats(tot[0] - num, tot[1] - den1, tot[2] - den2, nb - 1)
    ses = []
    for est in loo:
        dev = est - est.mean(axis=0)
        ses.append(np.sqrt((nb - 1) / nb * np.sum(dev * dev, axis=0)))
    return full, tuple(ses)


def estimate_spectra(ens: TrajectoryEnsemble, cfg: EstimatorConfig) -> SpectralEstimate:
    """Symmetrized (cross-)spectra, normalized correlation and jackknife errors.

    ``S_ij(w) = sample_dt Re<conj(X_i) X_j> / (2 pi sum(win^2))``, which matches
    the two-sided spectrum convention ``S(w) = (1/2pi) int R(tau) e^{-i w tau} dtau``.
    Blocks for the jackknife are trajectories, or segments for a single run.
    """
    x = _segment_dft(ens.series, cfg, ens.sample_dt)
    n_traj, n_seg = x.shape[:2]
    win = get_window(cfg.window, cfg.segment_length)
    norm = ens.sample_dt / (2.0 * math.pi * float(np.sum(win * win)))
    cross = (np.conj(x[..., 0]) * x[..., 1]).real
    p1 = np.abs(x[..., 0]) ** 2
    p2 = np.abs(x[..., 1]) ** 2
    if n_traj >= 2:
        blocks = cross.sum(1), p1.sum(1), p2.sum(1)
    else:
        blocks = cross[0], p1[0], p2[0]
    nb = blocks[0].shape[0]
    per = n_traj * n_seg / nb
    (s12, s11, s22, c), (se12, se11, se22, sec) = _jackknife(*blocks)
    scale = norm / per
    zero = (s11 <= 0) | (s22 <= 0)
    c = np.where(zero, np.nan, c)
    return SpectralEstimate(
        omega=np.asarray(cfg.frequencies),
        s11=s11 * scale, s22=s22 * scale, s12=s12 * scale, c=c,
        s11_se=se11 * scale, s22_se=se22 * scale, s12_se=se12 * scale, c_se=sec,
        n_segments=n_traj * n_seg,
    )


def estimate_g2_zero(ens: TrajectoryEnsemble) -> float:
    """Pooled equal-time correlation coefficient of the intensity fluctuations."""
    d = ens.series - ens.series.mean(axis=1, keepdims=True)
    v1 = float(np.sum(d[..., 0] ** 2))
    v2 = float(np.sum(d[..., 1] ** 2))
    if v1 <= 0 or v2 <= 0:
        raise ZeroVarianceError("an intensity channel has zero variance")
    g = float(np.sum(d[..., 0] * d[..., 1])) / math.sqrt(v1 * v2)
    return min(1.0, max(-1.0, g))


def mean_polarization(ens: TrajectoryEnsemble, channel: int = 0) -> tuple[complex, float]:
    """Time- and ensemble-averaged polarization with the standard error of ``Im p``."""
    if ens.mean_polarizations is None:
        raise ValueError("ensemble carries no polarization record")
    per = ens.mean_polarizations[:, channel]
    per_traj = per.imag
    se = per_traj.std(ddof=1) / math.sqrt(len(per_traj)) if len(per_traj) > 1 else float("nan")
    return complex(per.mean()), float(se)


def write_trajectories_csv(ens: TrajectoryEnsemble, path) -> Path:
    """Dump ``(trajectory, seed, t, I1, I2)`` rows for external inspection."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trajectory", "seed", "t_us", "I1", "I2"])
            t = ens.times
            for j, seed in enumerate(ens.seeds):
                for k in range(ens.n_samples):
                    w.writerow([j, seed, repr(float(t[k])), repr(float(ens.series[j, k, 0])),
                                repr(float(ens.series[j, k, 1]))])
    except OSError as exc:
        raise OSError(f"cannot write trajectories to {path}: {exc}") from exc
    return path
