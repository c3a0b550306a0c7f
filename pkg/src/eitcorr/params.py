"""Physical parameters of the driven Lambda system.

All rates, detunings and Rabi frequencies are stored as angular frequencies
in rad/us. User-facing helpers take ordinary frequencies in MHz (or kHz) and
convert with a factor 2*pi at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

TWO_PI = 2.0 * math.pi


def mhz(value: float) -> float:
    """Convert an ordinary frequency in MHz to rad/us."""
    return TWO_PI * value


def to_mhz(value: float) -> float:
    """Convert an angular frequency in rad/us to MHz."""
    return value / TWO_PI


class ParameterError(ValueError):
    """Raised for parameter sets that violate the model invariants."""


@dataclass(frozen=True)
class SystemParams:
    """Rates and couplings of the two-field Lambda system (rad/us).

    ``rabi1``/``rabi2`` are full Rabi frequencies, so the coupling term in the
    Hamiltonian is ``rabi/2``; with this convention ``I/I_sat = 2*(rabi/gamma)**2``.
    The two-photon detuning ``delta2 - delta1`` is derived, never stored.
    """

    gamma: float = mhz(6.0)
    gamma_d: float = mhz(0.15)
    gamma_bar: float = mhz(1.0)
    rabi1: float = 0.30 * mhz(6.0)
    rabi2: float = 0.34 * mhz(6.0)
    delta1: float = 0.0
    delta2: float = 0.0
    kappa1: float = 0.1
    kappa2: float = 0.1
    phase_noise_correlation: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ParameterError(f"{f.name} must be a finite number, got {v!r}")
        if self.gamma <= 0:
            raise ParameterError("gamma must be > 0")
        for name in ("gamma_d", "gamma_bar", "rabi1", "rabi2", "kappa1", "kappa2"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")
        if not 0.0 <= self.phase_noise_correlation <= 1.0:
            raise ParameterError("phase_noise_correlation must lie in [0, 1]")

    @property
    def two_photon_detuning(self) -> float:
        return self.delta2 - self.delta1

    @property
    def epsilon_sq(self) -> float:
        """Dimensionless perturbation scale, ``gamma_bar / gamma``."""
        return self.gamma_bar / self.gamma

    def replace(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    def swapped(self) -> "SystemParams":
        """Exchange the roles of beam 1 and beam 2."""
        return replace(
            self,
            rabi1=self.rabi2, rabi2=self.rabi1,
            delta1=self.delta2, delta2=self.delta1,
            kappa1=self.kappa2, kappa2=self.kappa1,
        )

    def with_power_scale(self, scale: float) -> "SystemParams":
        """Scale both beam intensities; Rabi frequencies go as sqrt(power)."""
        if scale < 0:
            raise ParameterError("power scale must be >= 0")
        r = math.sqrt(scale)
        return replace(self, rabi1=self.rabi1 * r, rabi2=self.rabi2 * r)

    @classmethod
    def from_mhz(
        cls,
        gamma_mhz: float = 6.0,
        gamma_d_khz: float = 150.0,
        gamma_bar_mhz: float = 1.0,
        rabi1_gamma: float = 0.30,
        rabi2_gamma: float = 0.34,
        delta1_mhz: float = 0.0,
        delta_mhz: float = 0.0,
        kappa1: float = 0.1,
        kappa2: float = 0.1,
        phase_noise_correlation: float = 1.0,
    ) -> "SystemParams":
        """Build from laboratory units.

        Rabi frequencies are given in units of ``gamma``; ``delta_mhz`` is the
        two-photon detuning, so beam 2 sits at ``delta1_mhz + delta_mhz``.
        """
        gamma = mhz(gamma_mhz)
        return cls(
            gamma=gamma,
            gamma_d=mhz(gamma_d_khz * 1e-3),
            gamma_bar=mhz(gamma_bar_mhz),
            rabi1=rabi1_gamma * gamma,
            rabi2=rabi2_gamma * gamma,
            delta1=mhz(delta1_mhz),
            delta2=mhz(delta1_mhz + delta_mhz),
            kappa1=kappa1,
            kappa2=kappa2,
            phase_noise_correlation=phase_noise_correlation,
        )


def reference_params(delta1_mhz: float = 0.2, delta_mhz: float = 0.0, **overrides) -> SystemParams:
    """Reference operating point used by the tests, demos and shipped configs.

    Gamma/2pi = 6 MHz, gamma_d/2pi = 150 kHz, laser linewidth 1 MHz,
    Omega1 = 0.30 Gamma, Omega2 = 0.34 Gamma.
    """
    return SystemParams.from_mhz(delta1_mhz=delta1_mhz, delta_mhz=delta_mhz, **overrides)
