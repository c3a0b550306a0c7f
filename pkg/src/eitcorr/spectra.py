"""Frequency-domain intensity-noise spectra and correlation coefficients.

Common laser phase noise makes both one-photon detunings fluctuate by the
same white noise ``f(t)`` with ``<f(t) f(t')> = 2 gamma_bar delta(t - t')``.
Atomic coherences respond linearly, ``dx = (M x + x0) dt + sum_k B_k x dW_k``,
and the transmitted intensities inherit the fluctuations through
``dI_i = -2 kappa_i Im dp_i``.

Two evaluation orders are available:

``"lowest"``
    Drive ``B_k x_ss`` with the noise-free steady state and the bare
    propagator ``(i w - M)^-1``. Every spectrum is linear in ``gamma_bar``.
``"full"``
    Exact stationary moments of the linear multiplicative-noise SDE: the mean
    uses the phase-averaged generator and the drive uses the full second
    moment ``<x x^+>`` from a generalized Lyapunov equation. This sums the
    whole series in ``gamma_bar``.

In both cases the spectra are regrouped as weights ``nu``/``alpha``/``beta``
multiplying the second-moment products of ``(Im p_1, Re p_1, Im p_2, Re p_2)``
in the basis rotated by ``U``, with ``Pi = eps^2 <x x^+>`` and
``eps^2 = gamma_bar / gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .bloch import (
    BlochSystem,
    SteadyState,
    U_MATRIX,
    noise_generators,
    phase_diffusion_drift,
)
from .params import SystemParams

ORDERS = ("lowest", "full")

# positions of (Im p1, Re p1, Im p2, Re p2) in the U-rotated state vector
IM1, RE1, IM2, RE2 = 2, 3, 4, 5
_BLOCK = np.array([IM1, RE1, IM2, RE2])


class UndefinedCorrelationError(ArithmeticError):
    """A normalized correlation was requested where its denominator vanishes."""


class SingularResponseError(ArithmeticError):
    """``M - i w I`` is numerically singular."""


class PiProducts(NamedTuple):
    pi_im: float
    pi_re: float
    pi_ri: float
    pi_ir: float


def pi_products(ss: SteadyState, epsilon: float) -> PiProducts:
    """Lowest-order products of the steady-state polarizations.

    ``pi_im = 2 eps^2 Im p1 Im p2``, ``pi_re = 2 eps^2 Re p1 Re p2``,
    ``pi_ri = -2 eps^2 Im p1 Re p2`` and ``pi_ir = -2 eps^2 Im p2 Re p1``.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    e2 = 2.0 * epsilon * epsilon
    p1, p2 = ss.p1, ss.p2
    return PiProducts(
        e2 * p1.imag * p2.imag,
        e2 * p1.real * p2.real,
        -e2 * p1.imag * p2.real,
        -e2 * p2.imag * p1.real,
    )


def response_kernel(sys: BlochSystem, omega: float) -> np.ndarray:
    """Resolvent ``chi(w) = (M - i w I)^-1``."""
    a = sys.m - 1j * omega * np.eye(8)
    if np.linalg.cond(a) > 1e13:
        raise SingularResponseError(f"M - i*w*I is singular at w={omega!r}")
    return np.linalg.inv(a)


def stationary_covariance(m_mean: np.ndarray, x_mean: np.ndarray, params: SystemParams) -> np.ndarray:
    """Covariance of ``x`` under phase diffusion.

    Solves ``M' S + S M'^+ + 2 gbar sum_k B_k (S + x x^+) B_k^+ = 0`` where
    ``M'`` already contains the phase-averaged drift.
    """
    s2 = 2.0 * params.gamma_bar
    eye = np.eye(8)
    gens = noise_generators(params)
    a = np.kron(eye, m_mean) + np.kron(m_mean.conj(), eye)
    a = a + s2 * sum(np.kron(b.conj(), b) for b in gens)
    xx = np.outer(x_mean, x_mean.conj())
    rhs = -s2 * sum(b @ xx @ b.conj().T for b in gens)
    cov = np.linalg.solve(a, rhs.reshape(-1, order="F")).reshape(8, 8, order="F")
    return 0.5 * (cov + cov.conj().T)


def _pair_weights(k: np.ndarray) -> np.ndarray:
    """Fold a 4x4 kernel into weights of unordered products (upper triangle)."""
    w = np.triu(k + k.T)
    np.fill_diagonal(w, np.diag(k))
    return w


def _pair_sum(w: np.ndarray, pi: np.ndarray, pairs) -> float:
    return float(sum(w[i, j] * pi[i, j] for i, j in pairs))


# pairs in 4x4 block coordinates: 0=Im p1, 1=Re p1, 2=Im p2, 3=Re p2
_OWN1 = ((0, 0), (1, 1), (0, 1))
_OWN2 = ((2, 2), (3, 3), (2, 3))


@dataclass(frozen=True)
class SpectralDecomposition:
    """Noise spectra at one analysis frequency and their regrouping.

    ``nu``, ``alpha`` and ``beta`` are 4x4 upper-triangular weight matrices
    over ``(Im p1, Re p1, Im p2, Re p2)``; off-diagonal entries already hold
    the symmetric sums ``O_ij + O_ji``. ``pi`` is ``eps^2`` times the second
    moment in the same coordinates. ``c`` is ``None`` where undefined.
    """

    omega: float
    order: str
    pi_im: float
    pi_re: float
    pi_ri: float
    pi_ir: float
    nu_im: float
    nu_re: float
    nu_ri: float
    nu_ir: float
    extra_c1: float
    alpha_c: float
    alpha_i2: float
    beta_c: float
    beta_i1: float
    s11: float
    s22: float
    s12: float
    c: float | None
    degenerate: bool = False
    pi: np.ndarray = field(default_factory=lambda: np.zeros((4, 4)), repr=False)
    nu: np.ndarray = field(default_factory=lambda: np.zeros((4, 4)), repr=False)
    alpha: np.ndarray = field(default_factory=lambda: np.zeros((4, 4)), repr=False)
    beta: np.ndarray = field(default_factory=lambda: np.zeros((4, 4)), repr=False)
    mean_state: np.ndarray | None = field(default=None, repr=False)

    @property
    def main_terms(self) -> float:
        """``nu_Im Pi_Im + nu_Re Pi_Re + nu_RI Pi_RI + nu_IR Pi_IR``."""
        return (
            self.nu_im * self.pi_im + self.nu_re * self.pi_re
            + self.nu_ri * self.pi_ri + self.nu_ir * self.pi_ir
        )


def _zero_decomposition(omega, order, degenerate, x_mean=None) -> SpectralDecomposition:
    z = 0.0
    return SpectralDecomposition(
        omega, order, z, z, z, z, z, z, z, z, z, z, z, z, z, z, z, z, None,
        degenerate=degenerate, mean_state=x_mean,
    )


def noise_spectra(
    sys: BlochSystem,
    ss: SteadyState,
    params: SystemParams,
    omega: float,
    order: str = "lowest",
) -> SpectralDecomposition:
    """Symmetrized intensity-noise spectra ``S11, S22, S12`` at ``omega`` (rad/us).

    ``S_ij(w) = (1/4 pi) int dtau e^{-i w tau} <dI_i(t) dI_j(t+tau) + dI_j(t) dI_i(t+tau)>``.

    ``sys``/``ss`` are the bare (noise-free) system and its steady state. For
    ``order="full"`` the phase-averaged mean and covariance are derived from
    them and ``params``.
    """
    if order not in ORDERS:
        raise ValueError(f"order must be one of {ORDERS}, got {order!r}")
    if params.kappa1 == 0 and params.kappa2 == 0:
        return _zero_decomposition(omega, order, degenerate=True, x_mean=ss.x_ss)
    if params.gamma_bar == 0:
        return _zero_decomposition(omega, order, degenerate=False, x_mean=ss.x_ss)

    gens = noise_generators(params)
    if order == "lowest":
        m_mean = np.asarray(sys.m)
        x_mean = np.asarray(ss.x_ss)
        moment = np.outer(x_mean, x_mean.conj())
    else:
        m_mean = sys.m + phase_diffusion_drift(params)
        x_mean = np.linalg.solve(m_mean, -sys.x0)
        moment = np.outer(x_mean, x_mean.conj())
        moment = moment + stationary_covariance(m_mean, x_mean, params)

    prop = -response_kernel(BlochSystem(m=m_mean, x0=sys.x0), omega)  # (i w - M)^-1
    u = U_MATRIX
    mt = u @ moment @ u.conj().T
    eps2 = params.epsilon_sq
    pref = params.gamma_bar / math.pi

    obs = []
    for kappa, (a, b) in ((params.kappa1, (2, 3)), (params.kappa2, (4, 5))):
        c = np.zeros(8, dtype=complex)
        c[a], c[b] = 1j * kappa, -1j * kappa
        obs.append(c)

    def kernel(i, j):
        total = 0.0
        k = np.zeros((4, 4))
        for gen in gens:
            gj = obs[j] @ prop @ gen
            gi = obs[i] @ prop @ gen
            av = u.conj() @ gj
            bv = u @ gi.conj()
            total += (av @ mt @ bv).real
            k += np.outer(av[_BLOCK], bv[_BLOCK]).real
        return pref * total, pref * k

    s11, k11 = kernel(0, 0)
    s22, k22 = kernel(1, 1)
    # auto-spectra are Hermitian forms of a PSD moment; drop negative rounding residue
    s11, s22 = max(s11, 0.0), max(s22, 0.0)
    s12, k12 = kernel(0, 1)

    block = mt[np.ix_(_BLOCK, _BLOCK)].real
    pi = eps2 * np.triu(block)
    nu = _pair_weights(k12) / eps2
    alpha = _pair_weights(k11) / eps2
    beta = _pair_weights(k22) / eps2

    pi_im, pi_re, pi_ri, pi_ir = pi[0, 2], pi[1, 3], pi[0, 3], pi[1, 2]
    nu_im, nu_re, nu_ri, nu_ir = nu[0, 2], nu[1, 3], nu[0, 3], nu[1, 2]
    main12 = nu_im * pi_im + nu_re * pi_re + nu_ri * pi_ri + nu_ir * pi_ir
    # anything outside the Im/Re block (partial noise correlation) lands in the buckets
    c1 = s12 - main12
    alpha_i2 = _pair_sum(alpha, pi, _OWN2)
    alpha_c = s11 - _pair_sum(alpha, pi, _OWN1) - alpha_i2
    beta_i1 = _pair_sum(beta, pi, _OWN1)
    beta_c = s22 - _pair_sum(beta, pi, _OWN2) - beta_i1

    c = _normalized(s11, s22, s12, _spectral_scale(prop, gens, moment, params))
    return SpectralDecomposition(
        omega=omega, order=order,
        pi_im=float(pi_im), pi_re=float(pi_re), pi_ri=float(pi_ri), pi_ir=float(pi_ir),
        nu_im=float(nu_im), nu_re=float(nu_re), nu_ri=float(nu_ri), nu_ir=float(nu_ir),
        extra_c1=float(c1), alpha_c=float(alpha_c), alpha_i2=float(alpha_i2),
        beta_c=float(beta_c), beta_i1=float(beta_i1),
        s11=float(s11), s22=float(s22), s12=float(s12), c=c,
        pi=pi, nu=nu, alpha=alpha, beta=beta, mean_state=x_mean,
    )


def _spectral_scale(prop, gens, moment, params) -> tuple[float, float]:
    # upper bounds of S11, S22 used to decide when a spectrum is numerically zero
    g = np.linalg.norm(prop, 2) ** 2 * sum(np.linalg.norm(b, 2) ** 2 for b in gens)
    base = params.gamma_bar / math.pi * 4.0 * g * np.linalg.norm(moment, 2)
    return base * params.kappa1**2, base * params.kappa2**2


def _normalized(s11, s22, s12, scale, rtol=1e-20) -> float | None:
    if s11 <= rtol * scale[0] or s22 <= rtol * scale[1]:
        return None
    return float(s12 / math.sqrt(s11 * s22))


def correlation_point(dec: SpectralDecomposition) -> float:
    """``C(w) = S12 / sqrt(S11 S22)``; raises where the denominator vanishes."""
    if dec.c is None:
        raise UndefinedCorrelationError(
            f"C(w) undefined at w={dec.omega:.6g}: S11={dec.s11:.3g}, S22={dec.s22:.3g}"
        )
    return dec.c


def g2_zero(ss: SteadyState, tol: float = 1e-13) -> float:
    """Equal-time correlation from the steady-state polarizations.

    ``(Re p1 Re p2 + Im p1 Im p2) / (|p1| |p2|)``, the cosine of the angle
    between ``p1`` and ``p2`` in the complex plane.
    """
    a1, a2 = abs(ss.p1), abs(ss.p2)
    if a1 <= tol or a2 <= tol:
        raise UndefinedCorrelationError("g2(0) undefined: a polarization vanishes (dark state)")
    val = (ss.p1.real * ss.p2.real + ss.p1.imag * ss.p2.imag) / (a1 * a2)
    return float(min(1.0, max(-1.0, val)))


def analyze_point(params: SystemParams, omega: float, order: str = "full") -> SpectralDecomposition:
    """Build the system, solve the steady state and evaluate the spectra."""
    from .bloch import build_bloch_system, steady_state

    sys = build_bloch_system(params)
    return noise_spectra(sys, steady_state(sys), params, omega, order=order)


# -- linearized sideband picture -------------------------------------------------


class PhasorResult(NamedTuple):
    am1: complex
    am2: complex
    sign: int


def _am_amplitude(carrier: float, upper: float, lower: float, alpha: complex) -> complex:
    # E' = alpha e^{i(wt+up)} + E e^{i c} - alpha* e^{-i(wt - lo)}; drop the carrier phase,
    # then the beat with a real carrier oscillates as Re[(u + conj(l)) e^{iwt}]
    u = alpha * np.exp(1j * (upper - carrier))
    low = -np.conj(alpha) * np.exp(1j * (lower - carrier))
    return complex(u + np.conj(low))


def phasor_model(
    carrier_shifts: tuple[float, float],
    sideband_shifts: tuple[tuple[float, float], tuple[float, float]],
    sideband_amplitude: complex,
    tol: float = 1e-12,
) -> PhasorResult:
    """Amplitude-modulation phasors of two phase-modulated beams after phase shifts.

    Each beam starts as a pure phase modulation, upper sideband ``alpha`` and
    lower sideband ``-alpha*``. ``carrier_shifts[i]`` and
    ``sideband_shifts[i] = (upper, lower)`` are the phases imprinted on the
    carrier and sidebands of beam ``i``. Returns the complex amplitude of the
    intensity oscillation at the analysis frequency for each beam (per unit
    carrier amplitude) and the sign of their correlation, 0 if either vanishes.
    """
    vals = [*carrier_shifts, *sideband_shifts[0], *sideband_shifts[1]]
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("phase shifts must be finite")
    am = [
        _am_amplitude(carrier_shifts[i], sideband_shifts[i][0], sideband_shifts[i][1], sideband_amplitude)
        for i in (0, 1)
    ]
    prod = (am[0] * np.conj(am[1])).real
    scale = abs(sideband_amplitude) ** 2
    sign = 0 if abs(prod) <= tol * max(scale, 1e-300) else int(np.sign(prod))
    return PhasorResult(am[0], am[1], sign)


def process_shifts(process: int, phi: float):
    """Phase configuration where only the two-photon-resonant component is shifted.

    The optical comb of beam 1 is ``(lower, carrier, upper) = (phi_1, phi_2, phi_3)``.
    Process 1: carriers at two-photon resonance, both carriers shifted.
    Process 2: carrier 2 coincides with the upper sideband of beam 1.
    Process 3: carrier 2 coincides with the lower sideband of beam 1.
    Returns ``(carrier_shifts, sideband_shifts)`` for :func:`phasor_model`.
    """
    if process == 1:
        return (phi, phi), ((0.0, 0.0), (0.0, 0.0))
    comb = {k: 0.0 for k in range(5)}
    if process == 2:
        comb[3] = phi
        return (comb[2], comb[3]), ((comb[3], comb[1]), (comb[4], comb[2]))
    if process == 3:
        comb[1] = phi
        return (comb[2], comb[1]), ((comb[3], comb[1]), (comb[2], comb[0]))
    raise ValueError("process must be 1, 2 or 3")
