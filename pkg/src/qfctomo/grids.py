"""Uniform angular-frequency grids and unit conversions.

Everything inside the package works in angular frequency (rad/s); wavelengths
in nm only appear at the edges (configs, reports, fits against wavelength).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .errors import GridMismatchError

# c in nm/s, so that 2*pi*C_NM/omega is a wavelength in nm
C_NM = SPEED_OF_LIGHT * 1e9


def wavelength_to_omega(wavelength_nm):
    return 2.0 * np.pi * C_NM / np.asarray(wavelength_nm, dtype=float)


def omega_to_wavelength(omega):
    return 2.0 * np.pi * C_NM / np.asarray(omega, dtype=float)


def hz_to_omega(f_hz):
    return 2.0 * np.pi * np.asarray(f_hz, dtype=float)


def nm_width_to_omega(width_nm, wavelength_nm):
    """Convert a small wavelength interval at ``wavelength_nm`` to rad/s."""
    return 2.0 * np.pi * C_NM * width_nm / wavelength_nm**2


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid ``omega_k = center + (k - (count-1)/2) * spacing``."""

    center_angular_frequency: float
    spacing: float
    count: int
    label: str = ""

    def __post_init__(self):
        if not (self.spacing > 0 and math.isfinite(self.spacing)):
            raise ValueError(f"grid spacing must be positive, got {self.spacing}")
        if int(self.count) != self.count or self.count < 2:
            raise ValueError(f"grid count must be an integer >= 2, got {self.count}")
        if not (self.center_angular_frequency > 0 and math.isfinite(self.center_angular_frequency)):
            raise ValueError("grid center must be a positive angular frequency")
        object.__setattr__(self, "count", int(self.count))
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "center_angular_frequency", float(self.center_angular_frequency))
        half_span = 0.5 * (self.count - 1) * self.spacing
        if half_span >= self.center_angular_frequency:
            raise ValueError("grid extends to non-positive frequencies")

    @classmethod
    def from_wavelength_span(cls, lam_min_nm, lam_max_nm, count, label=""):
        """Grid whose end points sit at the two wavelengths."""
        w_hi = float(wavelength_to_omega(lam_min_nm))
        w_lo = float(wavelength_to_omega(lam_max_nm))
        return cls(0.5 * (w_hi + w_lo), (w_hi - w_lo) / (count - 1), count, label)

    @classmethod
    def from_spacing(cls, center_wavelength_nm, spacing, count, label=""):
        return cls(float(wavelength_to_omega(center_wavelength_nm)), spacing, count, label)

    @property
    def offsets(self):
        """Detunings from the grid center, rad/s."""
        return (np.arange(self.count) - 0.5 * (self.count - 1)) * self.spacing

    @property
    def omega(self):
        return self.center_angular_frequency + self.offsets

    @property
    def wavelength_nm(self):
        return omega_to_wavelength(self.omega)

    @property
    def center_wavelength_nm(self):
        return float(omega_to_wavelength(self.center_angular_frequency))

    @property
    def lo(self):
        return self.center_angular_frequency - 0.5 * (self.count - 1) * self.spacing

    @property
    def hi(self):
        return self.center_angular_frequency + 0.5 * (self.count - 1) * self.spacing

    @property
    def time_window(self):
        """Periodic time window 2*pi/spacing, in seconds."""
        return 2.0 * np.pi / self.spacing

    def contains(self, omega, tol=0.5):
        """True where ``omega`` lies within the grid span padded by ``tol`` spacings."""
        omega = np.asarray(omega, dtype=float)
        pad = tol * self.spacing
        return (omega >= self.lo - pad) & (omega <= self.hi + pad)

    def fractional_index(self, omega):
        return (np.asarray(omega, dtype=float) - self.lo) / self.spacing

    def nearest_index(self, omega):
        idx = np.rint(self.fractional_index(omega)).astype(int)
        return np.clip(idx, 0, self.count - 1)

    def same_points(self, other):
        """Bit-identical grid points; the label is ignored."""
        return (
            self.center_angular_frequency == other.center_angular_frequency
            and self.spacing == other.spacing
            and self.count == other.count
        )

    def is_compatible(self, other, rtol=1e-12):
        """Same spacing and count (the centers may differ)."""
        return self.count == other.count and abs(self.spacing - other.spacing) <= rtol * self.spacing

    def to_dict(self):
        return {
            "center_angular_frequency": self.center_angular_frequency,
            "spacing": self.spacing,
            "count": self.count,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["center_angular_frequency"]), float(d["spacing"]), int(d["count"]), str(d.get("label", "")))


def require_same_grid(a: FrequencyGrid, b: FrequencyGrid, what="grids"):
    if not a.same_points(b):
        raise GridMismatchError(f"{what} differ: {a} vs {b}")
