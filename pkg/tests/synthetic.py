"""Synthetic separable kernels and sweeps shared by the reconstruction tests."""

import numpy as np

from qfctomo.grids import hz_to_omega
from qfctomo.greens import GreensFunction
from qfctomo.measure import default_delays, probe_centers, synthesize_sweep
from qfctomo.recon import reconstruct

SHEAR_HZ = 560e6


def separable(in_grid, out_grid, phase_fn, width=0.6, chi=None):
    """G = a(w_out) b(w_in) exp(i phase(w_in - w_c)) exp(i chi(w_out)); width is the |b| FWHM fraction of the band."""
    x = in_grid.offsets
    fwhm = width * (x[-1] - x[0])
    b = np.exp(-2 * np.log(2) * x**2 / fwhm**2) * np.exp(1j * phase_fn(x))
    a = np.linspace(1.0, 2.0, out_grid.count).astype(complex)
    if chi is not None:
        a = a * np.exp(1j * chi)
    return GreensFunction(out_grid, in_grid, np.outer(a, b))


def sweep(g, shear_hz=SHEAR_HZ, count=15, span=0.7, delays=None, **kw):
    shear = round(hz_to_omega(shear_hz) / g.in_grid.spacing) * g.in_grid.spacing
    lam = g.in_grid.center_wavelength_nm
    centers = probe_centers(g.in_grid, lam - span / 2, lam + span / 2, count, shear)
    return synthesize_sweep(g, centers, default_delays() if delays is None else delays, shear, **kw)


def delay_error(g, c3, shear_hz):
    rec = reconstruct(sweep(g, shear_hz, count=11, span=0.5))
    pd = rec.phase_differences
    x = pd.probe_centers - g.in_grid.center_angular_frequency
    exact = 3 * c3 * x**2  # d phi / d omega, seconds
    err = pd.delta_phi / pd.shear - exact[:, None]
    return np.sqrt(np.nanmean(err[pd.mask] ** 2))
