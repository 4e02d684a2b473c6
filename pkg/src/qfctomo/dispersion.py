"""Passive fiber dispersion: group delay in ps, accumulated phase in rad."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidityError
from .grids import C_NM, FrequencyGrid, wavelength_to_omega

# the polynomial group-delay model is trusted this far from its reference
VALID_HALF_RANGE_NM = 100.0


@dataclass(frozen=True)
class DispersionSpec:
    """Group delay ``length * (D*(lam-lam_ref) + slope*(lam-lam_ref)**2/2 + beta1)``.

    Units: reference_wavelength nm, group_delay_per_length ps/km,
    dispersion_parameter_D ps/(nm km), dispersion_slope ps/(nm^2 km), length km.
    """

    reference_wavelength: float
    dispersion_parameter_D: float
    length: float
    dispersion_slope: float = 0.0
    group_delay_per_length: float = 0.0

    def __post_init__(self):
        if not self.length >= 0:
            raise ValueError(f"length must be >= 0, got {self.length}")
        if not self.reference_wavelength > 0:
            raise ValueError("reference_wavelength must be positive")

    def group_delay_ps(self, wavelength_nm):
        d = np.asarray(wavelength_nm, dtype=float) - self.reference_wavelength
        return self.length * (
            self.dispersion_parameter_D * d
            + 0.5 * self.dispersion_slope * d**2
            + self.group_delay_per_length
        )

    @property
    def delay_slope_ps_per_nm(self):
        """d(group delay)/d(lambda) at the reference wavelength."""
        return self.dispersion_parameter_D * self.length

    def with_length(self, length_km):
        return replace(self, length=length_km)

    def to_dict(self):
        return {
            "reference_wavelength": self.reference_wavelength,
            "group_delay_per_length": self.group_delay_per_length,
            "dispersion_parameter_D": self.dispersion_parameter_D,
            "dispersion_slope": self.dispersion_slope,
            "length": self.length,
        }


def d_to_beta2(D_ps_nm_km, wavelength_nm):
    """D in ps/(nm km) to beta2 in ps^2/km."""
    return -D_ps_nm_km * wavelength_nm**2 / (2 * np.pi * C_NM * 1e-12)


def beta2_to_d(beta2_ps2_km, wavelength_nm):
    return -beta2_ps2_km * (2 * np.pi * C_NM * 1e-12) / wavelength_nm**2


def _check_range(spec, wavelengths):
    lo = spec.reference_wavelength - VALID_HALF_RANGE_NM
    hi = spec.reference_wavelength + VALID_HALF_RANGE_NM
    if np.any(wavelengths < lo) or np.any(wavelengths > hi):
        raise ValidityError(
            f"grid spans {wavelengths.min():.3f}-{wavelengths.max():.3f} nm, outside "
            f"+-{VALID_HALF_RANGE_NM:g} nm of the {spec.reference_wavelength:g} nm reference"
        )


def dispersion_phase_at(spec: DispersionSpec, omega):
    """Phase (rad) whose omega-derivative is the group delay, zero at the reference.

    The group delay is polynomial in wavelength, so the integral over omega is
    done in closed form with x = omega/omega_ref - 1 (log1p keeps the
    cancellation between the log and linear terms under control).
    """
    omega = np.asarray(omega, dtype=float)
    _check_range(spec, 2 * np.pi * C_NM / omega)
    if spec.length == 0:
        return np.zeros_like(omega)
    lam_ref = spec.reference_wavelength
    w_ref = float(wavelength_to_omega(lam_ref))
    x = (omega - w_ref) / w_ref
    lx = np.log1p(x)
    linear = spec.dispersion_parameter_D * lam_ref * w_ref * (lx - x)
    quad = 0.5 * spec.dispersion_slope * lam_ref**2 * w_ref * (x / (1 + x) + x - 2 * lx)
    const_delay = spec.group_delay_per_length * w_ref * x
    return 1e-12 * spec.length * (linear + quad + const_delay)


def dispersion_phase(spec: DispersionSpec, grid: FrequencyGrid):
    return dispersion_phase_at(spec, grid.omega)


def phase_per_meter(spec: DispersionSpec | None, omega):
    """Phase accumulated per metre of fiber described by ``spec`` (its length is ignored)."""
    omega = np.asarray(omega, dtype=float)
    if spec is None:
        return np.zeros_like(omega)
    return dispersion_phase_at(replace(spec, length=1e-3), omega)
