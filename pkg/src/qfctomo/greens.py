"""Discrete Green's functions and spectral modes.

Convention: ``values`` is an amplitude density, so the input-output integral
becomes ``out_k = sum_j values[k, j] * f_j * d_omega_in``.  A mode amplitude
has units (rad/s)**-1/2 and is normalized when ``sum |f|**2 d_omega == 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, PreconditionError
from .grids import FrequencyGrid, require_same_grid


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GreensFunction:
    out_grid: FrequencyGrid
    in_grid: FrequencyGrid
    values: np.ndarray
    label: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        v = _frozen(self.values, complex)
        if v.shape != (self.out_grid.count, self.in_grid.count):
            raise GridMismatchError(
                f"values shape {v.shape} does not match grids "
                f"({self.out_grid.count}, {self.in_grid.count})"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("Green's function contains non-finite entries")
        object.__setattr__(self, "values", v)

    @classmethod
    def identity(cls, grid: FrequencyGrid, label="identity"):
        return cls(grid, grid, np.eye(grid.count) / grid.spacing, label)

    @classmethod
    def pure_delay(cls, grid: FrequencyGrid, delay_ps, label="delay"):
        """Diagonal kernel exp(i*omega*T)/d_omega: a delay by T (phase measured from the grid center)."""
        phase = np.exp(1j * grid.offsets * delay_ps * 1e-12)
        return cls(grid, grid, np.diag(phase) / grid.spacing, label)

    @property
    def weighted(self):
        """Dimensionless discrete operator ``values * sqrt(d_out * d_in)``."""
        return self.values * np.sqrt(self.out_grid.spacing * self.in_grid.spacing)

    @property
    def magnitude(self):
        return np.abs(self.values)

    @property
    def phase(self):
        return np.angle(self.values)

    def with_values(self, values, label=None):
        return GreensFunction(self.out_grid, self.in_grid, values, self.label if label is None else label, dict(self.metadata))

    def with_output_phase(self, chi):
        """Multiply by exp(i*chi(omega_out)); the gauge freedom of the measurement."""
        chi = np.asarray(chi, dtype=float)
        return self.with_values(np.exp(1j * chi)[:, None] * self.values)

    def unitarity_defect(self):
        """max |W^H W - I| for the weighted operator (only meaningful for square, lossless blocks)."""
        w = self.weighted
        return float(np.max(np.abs(w.conj().T @ w - np.eye(w.shape[1]))))


@dataclass(frozen=True, eq=False)
class SpectralMode:
    grid: FrequencyGrid
    amplitude: np.ndarray

    def __post_init__(self):
        a = _frozen(self.amplitude, complex)
        if a.shape != (self.grid.count,):
            raise GridMismatchError(f"mode length {a.shape} does not match grid count {self.grid.count}")
        object.__setattr__(self, "amplitude", a)

    @classmethod
    def gaussian(cls, grid, center, fwhm, spectral_phase=None):
        """Gaussian with intensity FWHM ``fwhm`` (rad/s), normalized."""
        x = grid.omega - center
        amp = np.exp(-2 * np.log(2) * x**2 / fwhm**2).astype(complex)
        if spectral_phase is not None:
            amp = amp * np.exp(1j * np.asarray(spectral_phase))
        return cls(grid, amp).normalize()

    @property
    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amplitude) ** 2) * self.grid.spacing))

    def normalize(self):
        n = self.norm
        if n == 0:
            raise ValueError("cannot normalize a zero mode")
        return SpectralMode(self.grid, self.amplitude / n)

    def inner(self, other):
        """<self|other> under the grid quadrature."""
        require_same_grid(self.grid, other.grid, "mode grids")
        return complex(np.vdot(self.amplitude, other.amplitude) * self.grid.spacing)

    def __add__(self, other):
        require_same_grid(self.grid, other.grid, "mode grids")
        return SpectralMode(self.grid, self.amplitude + other.amplitude)

    def __mul__(self, scalar):
        return SpectralMode(self.grid, self.amplitude * scalar)

    __rmul__ = __mul__


def apply(g: GreensFunction, f: SpectralMode) -> SpectralMode:
    """Propagate a mode through ``g``."""
    if not f.grid.same_points(g.in_grid):
        raise GridMismatchError("mode grid differs from the Green's function input grid")
    return SpectralMode(g.out_grid, (g.values @ f.amplitude) * g.in_grid.spacing)


def band_mask(grid: FrequencyGrid, band=None):
    """Boolean mask of grid points inside ``band = (omega_lo, omega_hi)``; None is the whole grid."""
    if band is None:
        return np.ones(grid.count, dtype=bool)
    lo, hi = sorted(band)
    w = grid.omega
    return (w >= lo) & (w <= hi)


def conversion_efficiency(g: GreensFunction, f: SpectralMode, band=None, tol=1e-9) -> float:
    """Fraction of a normalized input found in ``band`` of the output grid."""
    if abs(f.norm - 1.0) > tol:
        raise PreconditionError(f"input mode is not normalized (norm {f.norm:.12g})")
    if band is not None:
        lo, hi = sorted(band)
        if lo < g.out_grid.lo - 0.5 * g.out_grid.spacing or hi > g.out_grid.hi + 0.5 * g.out_grid.spacing:
            raise PreconditionError("band extends beyond the output grid")
    sel = band_mask(g.out_grid, band)
    if not sel.any():
        return 0.0
    out = apply(g, f).amplitude
    return float(np.sum(np.abs(out[sel]) ** 2) * g.out_grid.spacing)
