"""Optical Bloch equations of the closed Lambda system.

Levels ``|1>`` and ``|2>`` are ground states, ``|3>`` is the excited state;
beam ``i`` drives ``|i> <-> |3>``. In the frame rotating with the two fields
(phase included) the Hamiltonian is::

    H = D1 |1><1| + D2 |2><2| + (O1/2)(|1><3| + h.c.) + (O2/2)(|2><3| + h.c.)

The excited state decays at ``gamma`` with equal branching into the two
ground states, optical coherences decay at ``gamma/2`` and the ground
coherence at ``gamma_d``. Trace conservation eliminates ``rho33``, leaving
the affine system ``dx/dt = M x + x0`` on::

    x = (rho11, rho22, rho13, rho31, rho23, rho32, rho12, rho21)

With this sign convention ``Im rho_i3 > 0`` means absorption of beam ``i``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .params import SystemParams

log = logging.getLogger(__name__)

BASIS = ("rho11", "rho22", "rho13", "rho31", "rho23", "rho32", "rho12", "rho21")

# index pairs (a, conj(a)) in the state vector
CONJUGATE_PAIRS = ((2, 3), (4, 5), (6, 7))
_SWAP = np.array([0, 1, 3, 2, 5, 4, 7, 6])
# beam exchange 1 <-> 2 as a permutation of the state vector
BEAM_SWAP = np.array([1, 0, 4, 5, 2, 3, 7, 6])


class DegenerateInputError(ValueError):
    """Both Rabi frequencies vanish, so the ground populations are undetermined."""


class NegativeTransmissionWarning(UserWarning):
    pass


def _u_matrix() -> np.ndarray:
    u = np.eye(8, dtype=complex)
    s = 1.0 / math.sqrt(2.0)
    for a, b in CONJUGATE_PAIRS[:2]:
        u[a, a], u[a, b] = 1j * s, -1j * s
        u[b, a], u[b, b] = s, s
    return u


U_MATRIX = _u_matrix()
U_MATRIX.setflags(write=False)


def detuning_derivatives() -> tuple[np.ndarray, np.ndarray]:
    """Return ``dM/dDelta1`` and ``dM/dDelta2`` (both diagonal, constant)."""
    d1 = np.diag([0, 0, -1j, 1j, 0, 0, -1j, 1j])
    d2 = np.diag([0, 0, 0, 0, -1j, 1j, 1j, -1j])
    return d1, d2


def noise_generators(params: SystemParams) -> list[np.ndarray]:
    """Generators ``B_k`` of the detuning noise, one per independent Wiener process.

    The detuning of beam ``i`` fluctuates by ``f_i`` with
    ``<f_i(t) f_j(t')> = 2 gamma_bar c_ij delta(t - t')`` where ``c_11 = c_22 = 1``
    and ``c_12`` is the phase-noise correlation. The fluctuating part of the
    drift is ``sum_k B_k x xi_k(t)`` with unit white noises ``xi_k`` scaled by
    ``sqrt(2 gamma_bar)``.
    """
    d1, d2 = detuning_derivatives()
    rho = params.phase_noise_correlation
    gens = [d1 + rho * d2]
    if rho < 1.0:
        gens.append(math.sqrt(1.0 - rho * rho) * d2)
    return gens


def phase_diffusion_drift(params: SystemParams) -> np.ndarray:
    """Mean drift added by phase diffusion, ``gamma_bar * sum_k B_k^2``.

    This is the Stratonovich-to-Ito correction of the detuning noise; for
    common-mode noise it broadens both optical coherences by ``gamma_bar``.
    """
    return params.gamma_bar * sum(b @ b for b in noise_generators(params))


@dataclass(frozen=True)
class BlochSystem:
    """``dx/dt = m x + x0`` in the basis :data:`BASIS`; ``u`` maps to real parts."""

    m: np.ndarray
    x0: np.ndarray
    u: np.ndarray = U_MATRIX
    basis: tuple[str, ...] = BASIS

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.m)


def build_bloch_system(params: SystemParams, average_phase_noise: bool = False) -> BlochSystem:
    """Assemble ``M`` and ``x0`` for the given parameters.

    Laser phase noise is not part of ``M``. With ``average_phase_noise=True``
    the exact phase-averaged drift is added, i.e. the generator of the mean
    density matrix under white frequency noise.
    """
    if not isinstance(params, SystemParams):
        raise TypeError("params must be a SystemParams instance")
    g2 = params.gamma / 2.0
    gd = params.gamma_d
    a = params.rabi1 / 2.0
    b = params.rabi2 / 2.0
    d1, d2 = params.delta1, params.delta2
    ia, ib = 1j * a, 1j * b

    m = np.array(
        [
            [-g2, -g2, ia, -ia, 0, 0, 0, 0],
            [-g2, -g2, 0, 0, ib, -ib, 0, 0],
            [2 * ia, ia, -(g2 + 1j * d1), 0, 0, 0, ib, 0],
            [-2 * ia, -ia, 0, -(g2 - 1j * d1), 0, 0, 0, -ib],
            [ib, 2 * ib, 0, 0, -(g2 + 1j * d2), 0, 0, ia],
            [-ib, -2 * ib, 0, 0, 0, -(g2 - 1j * d2), -ia, 0],
            [0, 0, ib, 0, 0, -ia, -(gd + 1j * (d1 - d2)), 0],
            [0, 0, 0, -ib, ia, 0, 0, -(gd - 1j * (d1 - d2))],
        ],
        dtype=complex,
    )
    x0 = np.array([g2, g2, -ia, ia, -ib, ib, 0, 0], dtype=complex)
    if average_phase_noise:
        m = m + phase_diffusion_drift(params)
    m.setflags(write=False)
    x0.setflags(write=False)
    return BlochSystem(m=m, x0=x0)


def conjugation_defect(m: np.ndarray) -> float:
    """Largest violation of the row-conjugation symmetry of ``M``.

    For every conjugate pair ``(a, a*)`` the row of ``a*`` must equal the
    conjugated row of ``a`` with paired columns swapped.
    """
    worst = 0.0
    for a, b in CONJUGATE_PAIRS:
        worst = max(worst, float(np.max(np.abs(m[b] - np.conj(m[a])[_SWAP]))))
    return worst


@dataclass(frozen=True)
class SteadyState:
    """Stationary solution of ``M x + x0 = 0``."""

    x_ss: np.ndarray
    p1: complex
    p2: complex
    populations: tuple[float, float, float]
    residual: float

    @property
    def rho(self) -> np.ndarray:
        """Full 3x3 density matrix (levels 1, 2, 3)."""
        x = self.x_ss
        r11, r22, r33 = self.populations
        return np.array(
            [[r11, x[6], x[2]], [x[7], r22, x[4]], [x[3], x[5], r33]], dtype=complex
        )

    @property
    def rho12(self) -> complex:
        return complex(self.x_ss[6])


def steady_state(sys: BlochSystem) -> SteadyState:
    """Solve ``M x_ss = -x0``.

    Raises
    ------
    DegenerateInputError
        If ``M`` is singular, which happens when neither beam couples the atom.
    """
    m, x0 = sys.m, sys.x0
    # both Rabi frequencies zero <=> x0 has no coherence drive
    if np.all(x0[2:] == 0):
        raise DegenerateInputError("both Rabi frequencies are zero; ground populations undetermined")
    try:
        x = np.linalg.solve(m, -x0)
    except np.linalg.LinAlgError as exc:
        raise DegenerateInputError("Bloch matrix is singular") from exc
    # enforce exact conjugate symmetry lost to rounding
    x = x.copy()
    for a, b in CONJUGATE_PAIRS:
        avg = 0.5 * (x[a] + np.conj(x[b]))
        x[a], x[b] = avg, np.conj(avg)
    x[0], x[1] = x[0].real, x[1].real
    residual = float(np.linalg.norm(m @ x + x0))
    r11, r22 = float(x[0].real), float(x[1].real)
    x.setflags(write=False)
    return SteadyState(
        x_ss=x,
        p1=complex(x[2]),
        p2=complex(x[4]),
        populations=(r11, r22, 1.0 - r11 - r22),
        residual=residual,
    )


def solve_params(params: SystemParams, average_phase_noise: bool = False) -> tuple[BlochSystem, SteadyState]:
    sys = build_bloch_system(params, average_phase_noise=average_phase_noise)
    return sys, steady_state(sys)


def output_intensity(p: complex | np.ndarray, kappa: float):
    """Thin-sample output intensity ``|1 + i kappa p|^2`` for unit input."""
    return 1.0 - 2.0 * kappa * np.imag(p) + kappa * kappa * np.abs(p) ** 2


def dc_transmission(ss: SteadyState, params: SystemParams) -> tuple[float, float]:
    """Mean transmitted intensity of each beam, normalized to the input.

    ``t_i = 1 - 2 kappa_i Im p_i + kappa_i^2 |p_i|^2``. A negative value
    (``kappa`` far outside the thin-sample regime) is clamped to zero and
    flagged with :class:`NegativeTransmissionWarning`.
    """
    out = []
    for p, kappa in ((ss.p1, params.kappa1), (ss.p2, params.kappa2)):
        t = float(output_intensity(p, kappa))
        if t < 0.0:
            warnings.warn(
                f"negative thin-sample transmission {t:.3g} clamped to 0 (kappa={kappa})",
                NegativeTransmissionWarning,
                stacklevel=2,
            )
            t = 0.0
        out.append(t)
    return out[0], out[1]
