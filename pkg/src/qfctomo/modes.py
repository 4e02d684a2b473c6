"""Schmidt modes, optimal inputs, time-domain views and gauge-invariant comparison."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import GridMismatchError, PreconditionError
from .greens import GreensFunction, SpectralMode, band_mask, conversion_efficiency
from .grids import FrequencyGrid
from .recon import GAUGE_CONVENTION, ReconstructedGreens, _runs, line_fit, check_uniform_centers


def _fix_phase(u, v):
    """Make the largest |v| component real-positive, rotating u along."""
    k = int(np.argmax(np.abs(v)))
    rot = np.conj(v[k]) / abs(v[k]) if abs(v[k]) > 0 else 1.0
    return u * rot, v * rot


@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    singular_values: np.ndarray
    input_modes: list
    output_modes: list
    schmidt_number: float

    def reconstruct(self):
        """Density matrix sum_k s_k u_k conj(v_k)."""
        u = np.column_stack([m.amplitude for m in self.output_modes])
        v = np.column_stack([m.amplitude for m in self.input_modes])
        return (u * self.singular_values) @ v.conj().T


def schmidt_number(singular_values):
    s2 = np.asarray(singular_values, dtype=float) ** 2
    den = np.sum(s2**2)
    return float(np.sum(s2) ** 2 / den) if den > 0 else 0.0


def schmidt(g: GreensFunction, rank=None, band=None) -> SchmidtDecomposition:
    """SVD of sqrt(d_out) G sqrt(d_in); modes are normalized on their grids.

    ``band`` restricts the output rows first, so the leading input mode is
    the one that maximizes efficiency into that band.
    """
    w = g.weighted
    if band is not None:
        w = w * band_mask(g.out_grid, band)[:, None]
    u, s, vh = np.linalg.svd(w, full_matrices=False)
    n = s.size if rank is None else min(int(rank), s.size)
    d_in, d_out = g.in_grid.spacing, g.out_grid.spacing
    ins, outs = [], []
    for k in range(n):
        uk, vk = _fix_phase(u[:, k], vh[k].conj())
        ins.append(SpectralMode(g.in_grid, vk / np.sqrt(d_in)))
        outs.append(SpectralMode(g.out_grid, uk / np.sqrt(d_out)))
    return SchmidtDecomposition(s[:n].copy(), ins, outs, schmidt_number(s))


def optimal_input_mode(g: GreensFunction, band=None):
    """(mode, efficiency) maximizing the conversion efficiency into ``band``."""
    d = schmidt(g, rank=1, band=band)
    return d.input_modes[0], float(d.singular_values[0] ** 2)


@dataclass(frozen=True)
class EfficiencyStudy:
    optimal_unchirped: float
    optimal_chirped: float
    naive_chirped: float

    @property
    def ratio(self):
        """Efficiency of the unchirped-optimal input under the chirped kernel, relative to that kernel's optimum."""
        return self.naive_chirped / self.optimal_chirped if self.optimal_chirped > 0 else float("nan")

    @property
    def reduction(self):
        return 1.0 - self.ratio

    def to_dict(self):
        return {
            "optimal_efficiency_unchirped": self.optimal_unchirped,
            "optimal_efficiency_chirped": self.optimal_chirped,
            "unchirped_optimal_input_under_chirped": self.naive_chirped,
            "ratio": self.ratio,
            "reduction": self.reduction,
        }


def optimal_efficiency_study(g_unchirped: GreensFunction, g_chirped: GreensFunction, band=None) -> EfficiencyStudy:
    if not (g_unchirped.in_grid.same_points(g_chirped.in_grid) and g_unchirped.out_grid.same_points(g_chirped.out_grid)):
        raise GridMismatchError("both kernels must share their grids")
    f_u, eta_u = optimal_input_mode(g_unchirped, band)
    _, eta_c = optimal_input_mode(g_chirped, band)
    naive = conversion_efficiency(g_chirped, f_u, band)
    return EfficiencyStudy(eta_u, eta_c, naive)


# --- time domain ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TimeMode:
    """Complex envelope on t in ps; normalized so sum |a|^2 dt[s] == 1."""

    t_ps: np.ndarray
    amplitude: np.ndarray

    @property
    def dt(self):
        return (self.t_ps[1] - self.t_ps[0]) * 1e-12

    @property
    def intensity(self):
        return np.abs(self.amplitude) ** 2

    def norm(self):
        return float(np.sum(self.intensity) * self.dt)

    def fwhm_ps(self):
        return intensity_fwhm(self.t_ps, self.intensity)


def time_domain_mode(f: SpectralMode, samples=None, tol=1e-9) -> TimeMode:
    """f(t) = (1/sqrt(2 pi)) sum_k f_k exp(-i (w_k - w_c) t) d_omega.

    ``samples`` >= grid count zero-pads the spectrum, which refines the time
    step while keeping the window 2 pi / d_omega.  Times are centered on 0.
    """
    if abs(f.norm - 1.0) > tol:
        raise PreconditionError("time_domain_mode expects a normalized mode")
    n = f.grid.count
    m = n if samples is None else int(samples)
    if m < n:
        raise ValueError("samples must be >= the grid count")
    dw = f.grid.spacing
    dt = 2 * np.pi / (m * dw)
    idx = np.arange(m)
    t = (idx - m // 2) * dt
    # shift so that t = 0 sits at index m // 2
    centering = np.exp(2j * np.pi * np.arange(n) * (m // 2) / m)
    spec = sfft.fft(f.amplitude * centering, m)
    amp = dw / np.sqrt(2 * np.pi) * spec * np.exp(0.5j * (n - 1) * dw * t)
    return TimeMode(t * 1e12, amp)


def intensity_fwhm(x, y):
    """Full width at half maximum between the outermost half-max crossings (linear interpolation)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    half = 0.5 * y.max()
    above = np.flatnonzero(y >= half)
    if above.size == 0:
        return 0.0
    i, j = above[0], above[-1]

    def cross(a, b):
        if y[b] == y[a]:
            return x[a]
        return x[a] + (half - y[a]) * (x[b] - x[a]) / (y[b] - y[a])

    left = cross(i - 1, i) if i > 0 else x[0]
    right = cross(j, j + 1) if j < y.size - 1 else x[-1]
    return float(right - left)


def _phase_gradients(values, sel):
    """Wrap-free phase increments along the input and output axes where both ends are in ``sel``."""
    d_in = np.angle(values[:, 1:] * np.conj(values[:, :-1]))
    d_out = np.angle(values[1:, :] * np.conj(values[:-1, :]))
    m_in = sel[:, 1:] & sel[:, :-1]
    m_out = sel[1:, :] & sel[:-1, :]
    return d_in, m_in, d_out, m_out


def phase_curvature(grid_in: FrequencyGrid, grid_out: FrequencyGrid, values, support=0.5):
    """Quadratic description of arg G over |G| >= support*max.

    Fits the phase increments along each axis with planes, which is the
    gradient of a quadratic phase.  Returns a dict with the second
    derivatives (rad/(rad/ps)^2) ``d2_in``, ``d2_out``, ``d2_mixed``, and
    the rms of the gradient-fit residual relative to the rms gradient
    variation (``misfit``, small when the phase is quadratic).
    """
    values = np.asarray(values)
    mag = np.abs(values)
    sel = mag >= support * mag.max()
    d_in, m_in, d_out, m_out = _phase_gradients(values, sel)
    h_in = grid_in.spacing * 1e-12
    h_out = grid_out.spacing * 1e-12
    xi = grid_in.offsets * 1e-12
    xo = grid_out.offsets * 1e-12
    # gradient along in: d2_in * x_in + d2_mixed * x_out + c, sampled at the midpoints
    oi, ii = np.meshgrid(xo, 0.5 * (xi[1:] + xi[:-1]), indexing="ij")
    a_in = np.column_stack([np.ones(m_in.sum()), ii[m_in], oi[m_in]])
    y_in = d_in[m_in] / h_in
    oo, io = np.meshgrid(0.5 * (xo[1:] + xo[:-1]), xi, indexing="ij")
    a_out = np.column_stack([np.ones(m_out.sum()), io[m_out], oo[m_out]])
    y_out = d_out[m_out] / h_out
    c_in, *_ = np.linalg.lstsq(a_in, y_in, rcond=None)
    c_out, *_ = np.linalg.lstsq(a_out, y_out, rcond=None)
    resid = np.concatenate([y_in - a_in @ c_in, y_out - a_out @ c_out])
    spread = np.concatenate([y_in - y_in.mean(), y_out - y_out.mean()])
    scale = np.sqrt(np.mean(spread**2))
    return {
        "d2_in": float(c_in[1]),
        "d2_out": float(c_out[2]),
        "d2_mixed": float(0.5 * (c_in[2] + c_out[1])),
        "misfit": float(np.sqrt(np.mean(resid**2)) / scale) if scale > 0 else 0.0,
        "gradient_in": float(c_in[0]),
        "gradient_out": float(c_out[0]),
    }


def phase_flatness(grid_in: FrequencyGrid, grid_out: FrequencyGrid, values, support=0.5):
    """Max |arg G - best-fit plane| over |G| >= support*max.

    The plane (constant plus linear in both frequencies) is a pure time
    reference and output gauge, so it carries no shape information.  The
    slopes are first estimated from wrap-free increments and divided out,
    so large linear phases do not wrap.
    """
    values = np.asarray(values)
    mag = np.abs(values)
    sel = mag >= support * mag.max()
    d_in, m_in, d_out, m_out = _phase_gradients(values, sel)
    s_in = float(np.mean(d_in[m_in]) / grid_in.spacing) if m_in.any() else 0.0
    s_out = float(np.mean(d_out[m_out]) / grid_out.spacing) if m_out.any() else 0.0
    tilt = np.exp(-1j * (s_out * grid_out.offsets[:, None] + s_in * grid_in.offsets[None, :]))
    v = values * tilt
    ref = v[sel][np.argmax(mag[sel])]
    ph = np.angle(v * np.conj(ref))
    oo, ii = np.meshgrid(grid_out.offsets, grid_in.offsets, indexing="ij")
    x = np.column_stack([np.ones(sel.sum()), ii[sel] * 1e-12, oo[sel] * 1e-12])
    coef, *_ = np.linalg.lstsq(x, ph[sel], rcond=None)
    return float(np.max(np.abs(ph[sel] - x @ coef)))


def mode_phase_flatness(f: SpectralMode):
    """Max deviation of the mode's spectral phase from a straight line over its intensity FWHM."""
    inten = np.abs(f.amplitude) ** 2
    sel = inten >= 0.5 * inten.max()
    w = f.grid.offsets[sel] * 1e-12
    ph = np.unwrap(np.angle(f.amplitude[sel]))
    coef = np.polyfit(w, ph, 1)
    return float(np.max(np.abs(ph - np.polyval(coef, w))))


# --- comparison against ground truth ------------------------------------------------

def sample_at_centers(truth: GreensFunction, centers):
    """truth values at the probe centers [out, center]; linear interpolation between grid points."""
    f = truth.in_grid.fractional_index(np.asarray(centers, dtype=float))
    if np.any(f < -1e-9) or np.any(f > truth.in_grid.count - 1 + 1e-9):
        raise GridMismatchError("probe centers fall outside the truth input grid; resample first")
    f = np.clip(f, 0, truth.in_grid.count - 1)
    lo = np.floor(f).astype(int)
    hi = np.minimum(lo + 1, truth.in_grid.count - 1)
    frac = f - lo
    v = truth.values
    return v[:, lo] * (1 - frac) + v[:, hi] * frac


def truth_group_delay(truth: GreensFunction, centers):
    """d arg G / d omega_in at the centers (ps) by a central difference of one grid step."""
    d = truth.in_grid.spacing
    c = np.asarray(centers, dtype=float)
    gp = sample_at_centers(truth, c + d)
    gm = sample_at_centers(truth, c - d)
    return np.angle(gp * np.conj(gm)) / (2 * d) * 1e12


def reconstruction_from_greens(truth: GreensFunction, centers, mask=None, shear=None) -> ReconstructedGreens:
    """Ideal reconstruction straight from a kernel: |G|, unwrapped arg G and group delay on the center lattice."""
    centers = np.asarray(centers, dtype=float)
    check_uniform_centers(centers)
    vals = sample_at_centers(truth, centers)
    mag = np.abs(vals)
    if mask is None:
        mask = mag > 0
    phase = np.full(mag.shape, np.nan)
    for k in range(mag.shape[0]):
        for a, b in _runs(mask[k]):
            seg = np.unwrap(np.angle(vals[k, a:b]))
            phase[k, a:b] = seg - seg.mean()
    tau = np.where(mask, truth_group_delay(truth, centers), np.nan)
    shear = float(shear if shear is not None else np.diff(centers).mean())
    return ReconstructedGreens(
        truth.out_grid, centers, mag, phase, tau, np.asarray(mask, dtype=bool), shear, {}, {"gauge": GAUGE_CONVENTION, "source": "greens"}
    )


@dataclass(frozen=True)
class ComparisonMetrics:
    phase_rmse: float
    magnitude_correlation: float
    magnitude_scale: float
    slope_recon: float
    slope_truth: float
    efficiency_error: float
    support: int
    extra: dict = field(default_factory=dict)

    @property
    def slope_error(self):
        return self.slope_recon - self.slope_truth

    def to_dict(self):
        d = {
            "phase_rmse_rad": self.phase_rmse,
            "magnitude_correlation": self.magnitude_correlation,
            "magnitude_scale": self.magnitude_scale,
            "slope_recon_ps_per_nm": self.slope_recon,
            "slope_truth_ps_per_nm": self.slope_truth,
            "slope_error_ps_per_nm": self.slope_error,
            "efficiency_error": self.efficiency_error,
            "support_points": self.support,
        }
        d.update(self.extra)
        return d


def _band_slope(tau, weights, mask, lam):
    w = np.where(mask, weights, 0.0)
    ws = w.sum(axis=0)
    ok = ws > 0
    avg = np.where(mask, tau, 0.0)
    avg = (w * avg).sum(axis=0)[ok] / ws[ok]
    slope, *_ = line_fit(lam[ok], avg)
    return slope


def default_test_modes(centers, count=3):
    """Gaussians spread across the center span, normalized on the center lattice."""
    c = np.asarray(centers, dtype=float)
    span = c[-1] - c[0]
    d = c[1] - c[0]
    modes = []
    for x in np.linspace(0.25, 0.75, count):
        mu = c[0] + x * span
        a = np.exp(-4 * np.log(2) * ((c - mu) / (0.3 * span)) ** 2)
        modes.append(a / np.sqrt(np.sum(a**2) * d))
    return modes


def compare_gauge_invariant(recon: ReconstructedGreens, truth: GreensFunction, test_modes=None) -> ComparisonMetrics:
    """Gauge-blind distance between a reconstruction and a ground-truth kernel.

    Phase: RMSE of the wrapped difference after removing its mean on every
    masked-in run of every output row.  Magnitude: cosine similarity and
    least-squares scale.  Efficiency: worst relative error of the
    conversion efficiency of ``test_modes`` (amplitudes on the center
    lattice) after the magnitude scale is fitted.
    """
    if not recon.out_grid.same_points(truth.out_grid):
        raise GridMismatchError("reconstruction and truth use different output grids; resample first")
    centers = recon.probe_centers
    tv = sample_at_centers(truth, centers)
    mask = recon.mask & (np.abs(tv) > 0) & np.isfinite(recon.phase)
    diffs = []
    for k in range(mask.shape[0]):
        for a, b in _runs(mask[k]):
            d = np.angle(np.exp(1j * (recon.phase[k, a:b] - np.angle(tv[k, a:b]))))
            d = np.unwrap(d)
            diffs.append(d - d.mean())
    dall = np.concatenate(diffs) if diffs else np.array([])
    rmse = float(np.sqrt(np.mean(dall**2))) if dall.size else float("nan")

    mr = recon.magnitude[mask]
    mt = np.abs(tv)[mask]
    denom = np.linalg.norm(mr) * np.linalg.norm(mt)
    corr = float(mr @ mt / denom) if denom > 0 else float("nan")
    scale = float(mr @ mt / (mr @ mr)) if mr.size and mr @ mr > 0 else float("nan")

    lam = recon.center_wavelength_nm
    s_rec = _band_slope(recon.group_delay, recon.magnitude**2, mask, lam)
    s_true = _band_slope(truth_group_delay(truth, centers), np.abs(tv) ** 2, mask, lam)

    spacing = float(np.diff(centers).mean())
    modes = default_test_modes(centers) if test_modes is None else test_modes
    g_rec = np.where(mask, scale * recon.magnitude * np.exp(1j * np.nan_to_num(recon.phase)), 0.0)
    g_true = np.where(mask, tv, 0.0)
    dout = recon.out_grid.spacing
    errs = []
    for f in modes:
        e_true = np.sum(np.abs(g_true @ f * spacing) ** 2) * dout
        e_rec = np.sum(np.abs(g_rec @ f * spacing) ** 2) * dout
        if e_true > 0:
            errs.append(abs(e_rec - e_true) / e_true)
    eff_err = float(max(errs)) if errs else float("nan")
    return ComparisonMetrics(rmse, corr, scale, float(s_rec), float(s_true), eff_err, int(mask.sum()))
