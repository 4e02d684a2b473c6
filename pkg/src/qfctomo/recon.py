"""Two-tone tomography reconstruction.

resample -> sideband projection -> phase differences -> unwrap ->
integrate -> magnitude and group delay.  Matrices indexed [center, out]
follow the dataset layout; the reconstructed Green's function is stored
[out, center] like ``GreensFunction.values``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline
from scipy.signal import resample as fourier_resample

from .errors import ConsistencyError, CoverageError, PreconditionError
from .grids import FrequencyGrid, omega_to_wavelength
from .measure import PS, DelaySweepDataset

GAUGE_CONVENTION = "per-row zero mean over masked-in entries"
# uniform sweeps whose window is within this fraction of whole beat periods use DFT interpolation
COMMENSURATE_TOL = 1e-6


# --- resampling -----------------------------------------------------------------

def _design(delays_ps, shear):
    arg = shear * PS * np.asarray(delays_ps, dtype=float)
    return np.column_stack([np.ones_like(arg), np.cos(arg), np.sin(arg)])


def fit_three_term(delays_ps, traces, shear):
    """Least-squares ``c0 + A cos(shear*tau) + B sin(shear*tau)`` along the last axis.

    Returns (c0, A, B, residual_rss), each shaped like ``traces[..., 0]``.
    """
    x = _design(delays_ps, shear)
    y = np.asarray(traces, dtype=float)
    flat = y.reshape(-1, y.shape[-1]).T
    coef, _, rank, _ = np.linalg.lstsq(x, flat, rcond=None)
    if rank < 3:
        raise CoverageError("delay samples cannot separate the beat from the constant term")
    rss = np.sum((flat - x @ coef) ** 2, axis=0)
    shape = y.shape[:-1]
    return coef[0].reshape(shape), coef[1].reshape(shape), coef[2].reshape(shape), rss.reshape(shape)


def periods_covered(ds: DelaySweepDataset):
    """Number of beat periods spanned by the sweep (its periodic window when uniform)."""
    d = ds.delays
    if d.size < 2:
        return 0.0
    span = d[-1] - d[0]
    if ds.is_uniform:
        span += d[1] - d[0]
    return span / ds.beat_period_ps


def resample_uniform(ds: DelaySweepDataset, factor=8) -> DelaySweepDataset:
    """Uniform, ``factor``-times denser delay axis.

    Uniform sweeps spanning a whole number of beat periods are interpolated
    with a zero-padded DFT.  Anything else is fitted with the three-term
    beat model, which is exact for noiseless data and least-squares optimal
    under white noise.
    """
    factor = int(factor)
    if factor < 1:
        raise PreconditionError("resample factor must be >= 1")
    cover = periods_covered(ds)
    if cover < 1 - 1e-9:
        raise CoverageError(f"sweep covers {cover:.3g} beat periods, at least one is needed")
    d = ds.delays
    if ds.is_uniform and factor == 1:
        return ds
    step = (d[-1] - d[0]) / (d.size - 1) / factor
    commensurate = ds.is_uniform and abs(cover - round(cover)) < COMMENSURATE_TOL * max(cover, 1)
    if commensurate:
        n = d.size * factor
        data = fourier_resample(ds.intensities, n, axis=-1)
        new_delays = d[0] + step * np.arange(n)
        method = "dft"
    else:
        new_delays = d[0] + step * np.arange((d.size - 1) * factor + 1)
        c0, a, b, _ = fit_three_term(d, ds.intensities, ds.shear)
        x = _design(new_delays, ds.shear)
        data = c0[..., None] * x[:, 0] + a[..., None] * x[:, 1] + b[..., None] * x[:, 2]
        method = "three_term_fit"
    # interpolation can undershoot a zero-intensity baseline by rounding error
    data = np.maximum(data, 0.0)
    meta = dict(ds.metadata)
    meta["resample"] = {"factor": factor, "method": method, "source_delays": d.tolist()}
    return ds.replace(delays=new_delays, intensities=data, metadata=meta)


# --- sideband extraction --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SidebandMap:
    """coefficients[center, out] is the complex beat term, dc[center, out] the constant term."""

    out_grid: FrequencyGrid
    probe_centers: np.ndarray
    coefficients: np.ndarray
    dc: np.ndarray
    shear: float
    metadata: dict = field(default_factory=dict)
    # standard error of one quadrature of each coefficient, per center; None when unknown
    sigma: np.ndarray | None = None

    def cauchy_schwarz_excess(self):
        """max(|coefficient| - dc/2); <= 0 up to noise for physical data."""
        return float(np.max(np.abs(self.coefficients) - 0.5 * self.dc))


def delay_spectrum(ds: DelaySweepDataset, freqs=None):
    """F(w) = sum_n I(tau_n) exp(-i w tau_n) d_tau over the delay axis (diagnostic).

    ``freqs`` in rad/s; defaults to the DFT bins of a uniform sweep.
    Returns (freqs, spectrum[center, out, freq]) with d_tau in seconds.
    """
    tau = ds.delays * PS
    if freqs is None:
        if not ds.is_uniform:
            raise PreconditionError("default frequency bins need uniform delays")
        dt = tau[1] - tau[0]
        freqs = 2 * np.pi * np.fft.fftshift(np.fft.fftfreq(tau.size, dt))
        dtau = dt
    else:
        dtau = (tau[-1] - tau[0]) / max(tau.size - 1, 1)
    freqs = np.asarray(freqs, dtype=float)
    kernel = np.exp(-1j * np.outer(tau, freqs)) * dtau
    return freqs, ds.intensities @ kernel


def _integer_period_window(ds: DelaySweepDataset):
    """Leading samples spanning the largest whole number of beat periods."""
    n = ds.delays.size
    dt = ds.delays[1] - ds.delays[0]
    per = ds.beat_period_ps / dt
    whole = np.floor(n / per + 1e-9)
    if whole < 1:
        raise CoverageError("sweep is shorter than one beat period")
    n_win = int(min(n, round(whole * per)))
    mismatch = abs(n_win - whole * per) / per
    return n_win, int(whole), mismatch


def extract_sideband(ds: DelaySweepDataset, shear=None) -> SidebandMap:
    """Exact-frequency projection of each delay trace onto exp(+i*shear*tau).

    The window is trimmed to whole beat periods.  When the trimmed window
    still is not commensurate with the period, the projection is
    Gram-corrected (a least-squares fit on [1, cos, sin]) so the constant
    term does not leak into the sideband.  Amplitude scaling a0**2/2 is
    divided out, so the returned coefficient is G+ conj(G-).
    """
    shear = float(ds.shear if shear is None else shear)
    if not ds.is_uniform:
        raise PreconditionError("sideband extraction needs uniform delays; resample first")
    meta = {}
    probe = ds.replace(shear=shear)
    n_win, whole, mismatch = _integer_period_window(probe)
    if n_win < ds.delays.size:
        meta["warning"] = f"window trimmed from {ds.delays.size} to {n_win} samples ({whole} beat periods)"
        warnings.warn(meta["warning"], stacklevel=2)
    meta.update(window_samples=n_win, window_periods=whole, period_mismatch=mismatch)
    c0, a, b, _ = fit_three_term(ds.delays[:n_win], ds.intensities[..., :n_win], shear)
    scale = 0.5 * ds.amplitude**2
    coef = (a - 1j * b) / (2 * scale)
    dc = c0 / scale
    return SidebandMap(ds.out_grid, ds.probe_centers, coef, dc, shear, meta)


def coefficient_sigma(ds: DelaySweepDataset, shear=None):
    """Per-center standard error of one quadrature of the sideband coefficient.

    The sample noise is the median over output rows of the three-term fit
    residual on the raw delay samples, so rows dominated by signal jitter
    do not inflate it.  Needs at least four delays.
    """
    shear = float(ds.shear if shear is None else shear)
    n = ds.delays.size
    if n <= 3:
        raise CoverageError("noise estimate needs more than three delays")
    _, _, _, rss = fit_three_term(ds.delays, ds.intensities, shear)
    s2 = np.median(rss, axis=1) / (n - 3)
    x = _design(ds.delays, shear)
    cov = np.linalg.inv(x.T @ x)
    quad = 0.5 * (cov[1, 1] + cov[2, 2])
    return np.sqrt(s2 * quad) / ds.amplitude**2


def sideband_fraction(ds: DelaySweepDataset, shear=None):
    """Share of the delay-trace variance explained by a beat at ``shear``.

    Computed on the raw samples; close to one for clean data with the right
    shear and small when the metadata shear is wrong.
    """
    shear = float(ds.shear if shear is None else shear)
    y = ds.intensities
    _, a, b, rss = fit_three_term(ds.delays, y, shear)
    total = np.sum((y - y.mean(axis=-1, keepdims=True)) ** 2)
    if total == 0:
        return 0.0
    return float(1.0 - rss.sum() / total)


# --- phase differences ----------------------------------------------------------

def _in_intervals(lam_nm, intervals):
    lam = np.asarray(lam_nm, dtype=float)
    out = np.zeros(lam.shape, dtype=bool)
    for lo, hi in intervals or ():
        lo, hi = min(lo, hi), max(lo, hi)
        out |= (lam >= lo) & (lam <= hi)
    return out


def _runs(mask_1d):
    """(start, stop) of each contiguous True run."""
    m = np.concatenate([[False], np.asarray(mask_1d, dtype=bool), [False]])
    edges = np.flatnonzero(np.diff(m.astype(np.int8)))
    return list(zip(edges[::2], edges[1::2]))


@dataclass(frozen=True, eq=False)
class PhaseDifferenceMap:
    """delta_phi[center, out] (rad, NaN where masked out), unwrapped along centers per run."""

    out_grid: FrequencyGrid
    probe_centers: np.ndarray
    delta_phi: np.ndarray
    mask: np.ndarray
    weights: np.ndarray
    shear: float
    split_rows: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def valid_rows(self):
        return self.mask.any(axis=0)


def signal_mask(sb: SidebandMap, threshold=0.02, floor=None, mask_out_nm=(), mask_in_nm=(), min_snr=0.0):
    """Entries with |coefficient| above threshold*row max and floor*global max.

    With a noise estimate on ``sb`` and ``min_snr`` > 0, entries must also
    exceed ``min_snr`` standard errors.
    """
    if not 0 < threshold < 1:
        raise PreconditionError("threshold must lie in (0, 1)")
    floor = threshold if floor is None else floor
    mag = np.abs(sb.coefficients)
    row_max = mag.max(axis=0, keepdims=True)
    mask = (mag >= threshold * row_max) & (mag >= floor * mag.max()) & (mag > 0)
    if min_snr > 0 and sb.sigma is not None:
        mask &= mag >= min_snr * np.asarray(sb.sigma)[:, None]
    lam_out = sb.out_grid.wavelength_nm
    lam_in = omega_to_wavelength(sb.probe_centers)
    mask &= ~_in_intervals(lam_out, mask_out_nm)[None, :]
    mask &= ~_in_intervals(lam_in, mask_in_nm)[:, None]
    return mask


def phase_differences(sb: SidebandMap, threshold=0.02, floor=None, mask_out_nm=(), mask_in_nm=(), min_snr=0.0) -> PhaseDifferenceMap:
    """arg of the sideband coefficient, masked and unwrapped along the center axis.

    Each contiguous masked-in run of a row is unwrapped on its own; rows
    with more than one run are listed in ``split_rows`` because their runs
    carry independent integration constants.
    """
    mask = signal_mask(sb, threshold, floor, mask_out_nm, mask_in_nm, min_snr)
    raw = np.angle(sb.coefficients)
    dphi = np.full(raw.shape, np.nan)
    split = []
    for k in range(raw.shape[1]):
        runs = _runs(mask[:, k])
        if len(runs) > 1:
            split.append(k)
        for a, b in runs:
            dphi[a:b, k] = np.unwrap(raw[a:b, k])
    meta = {
        "threshold": threshold,
        "min_snr": min_snr,
        "floor": threshold if floor is None else floor,
        "mask_out_nm": [list(map(float, iv)) for iv in mask_out_nm or ()],
        "mask_in_nm": [list(map(float, iv)) for iv in mask_in_nm or ()],
    }
    return PhaseDifferenceMap(
        sb.out_grid, sb.probe_centers, dphi, mask, np.abs(sb.coefficients), sb.shear, np.array(split, dtype=int), meta
    )


# --- group delay ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GroupDelaySummary:
    """Group delay per (center, out) and its band average per center.

    Band averages and spreads are weighted by |coefficient|^2.  The slope
    is an unweighted straight-line fit of the band averages against probe
    wavelength; ``sigma_tau`` is the r.m.s. deviation of the band averages
    from that line, and ``mean_spread`` the mean per-center spread across
    output wavelengths.
    """

    center_wavelength_nm: np.ndarray
    tau: np.ndarray
    band_average: np.ndarray
    rms: np.ndarray
    slope: float
    slope_stderr: float
    intercept: float
    sigma_tau: float
    mean_spread: float

    @property
    def valid(self):
        return np.isfinite(self.band_average)

    def to_dict(self):
        return {
            "slope_ps_per_nm": self.slope,
            "slope_stderr_ps_per_nm": self.slope_stderr,
            "intercept_ps": self.intercept,
            "sigma_tau_ps": self.sigma_tau,
            "mean_spread_ps": self.mean_spread,
        }


def line_fit(x, y):
    """Unweighted straight line; returns slope, intercept, slope standard error, residual rms."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        return np.nan, np.nan, np.nan, np.nan
    (slope, intercept), cov = np.polyfit(x, y, 1, cov="unscaled")
    resid = y - (slope * x + intercept)
    dof = x.size - 2
    s2 = float(resid @ resid / dof) if dof > 0 else np.nan
    stderr = float(np.sqrt(cov[0, 0] * s2)) if dof > 0 else np.nan
    return float(slope), float(intercept), stderr, float(np.sqrt(np.mean(resid**2)))


def group_delay_map(pd: PhaseDifferenceMap) -> GroupDelaySummary:
    """tau_g = delta_phi/shear in ps, plus the per-center band summary."""
    tau = pd.delta_phi / pd.shear / PS
    # phase variance scales as 1/|coefficient|^2, so |coefficient|^2 are inverse-variance weights
    w = np.where(pd.mask, pd.weights**2, 0.0)
    wsum = w.sum(axis=1)
    ok = wsum > 0
    t0 = np.where(pd.mask, tau, 0.0)
    avg = np.full(tau.shape[0], np.nan)
    rms = np.full(tau.shape[0], np.nan)
    avg[ok] = (w * t0).sum(axis=1)[ok] / wsum[ok]
    dev = np.where(pd.mask, t0 - np.nan_to_num(avg)[:, None], 0.0)
    rms[ok] = np.sqrt((w * dev**2).sum(axis=1)[ok] / wsum[ok])
    lam = omega_to_wavelength(pd.probe_centers)
    slope, intercept, stderr, resid = line_fit(lam[ok], avg[ok])
    spread = float(np.mean(rms[ok])) if ok.any() else np.nan
    return GroupDelaySummary(lam, tau, avg, rms, slope, stderr, intercept, resid, spread)


# --- phase integration ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ReconstructedGreens:
    """Recovered |G| and arg G on the (out grid x probe centers) lattice.

    ``phase`` rows have zero mean over each masked-in run; magnitude has an
    arbitrary global scale.
    """

    out_grid: FrequencyGrid
    probe_centers: np.ndarray
    magnitude: np.ndarray
    phase: np.ndarray
    group_delay: np.ndarray
    mask: np.ndarray
    shear: float
    mask_intervals: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def center_wavelength_nm(self):
        return omega_to_wavelength(self.probe_centers)

    @property
    def complex_values(self):
        return self.magnitude * np.exp(1j * np.nan_to_num(self.phase))


def check_uniform_centers(centers, rtol=1e-9):
    c = np.asarray(centers, dtype=float)
    if c.size < 2:
        raise PreconditionError("need at least two probe centers")
    d = np.diff(c)
    if np.any(d <= 0) or not np.allclose(d, d.mean(), rtol=rtol, atol=0):
        raise PreconditionError("probe centers must be uniformly spaced and increasing; resample centers first")
    return float(d.mean())


def magnitude_from_sideband(sb: SidebandMap, method="rms"):
    """|G| at each center: sqrt(dc/2), or the mean of |G+| and |G-| solved from dc and |coefficient|."""
    dc = np.maximum(sb.dc, 0.0)
    if method == "rms":
        return np.sqrt(dc / 2)
    if method == "split":
        c2 = np.abs(sb.coefficients) ** 2
        disc = np.sqrt(np.maximum(dc**2 - 4 * c2, 0.0))
        hi = 0.5 * (dc + disc)
        lo = np.maximum(0.5 * (dc - disc), 0.0)
        return 0.5 * (np.sqrt(hi) + np.sqrt(lo))
    raise ValueError(f"unknown magnitude method {method!r}")


def integrate_phase(pd: PhaseDifferenceMap, sb: SidebandMap | None = None, magnitude="rms") -> ReconstructedGreens:
    """phi = cumulative trapezoid of delta_phi/shear over the probe center, per run, zero mean."""
    spacing = check_uniform_centers(pd.probe_centers)
    slope = pd.delta_phi / pd.shear
    phase = np.full(slope.shape, np.nan)
    for k in range(slope.shape[1]):
        for a, b in _runs(pd.mask[:, k]):
            seg = cumulative_trapezoid(slope[a:b, k], dx=spacing, initial=0.0)
            phase[a:b, k] = seg - seg.mean()
    if sb is not None:
        mag = magnitude_from_sideband(sb, magnitude)
    else:
        mag = np.sqrt(pd.weights)
    meta = dict(pd.metadata)
    meta.update(
        magnitude_method=magnitude if sb is not None else "sqrt_sideband",
        gauge=GAUGE_CONVENTION,
        center_spacing=spacing,
        undersampled=bool(spacing > pd.shear * (1 + 1e-9)),
        split_rows=pd.split_rows.tolist(),
    )
    intervals = {"mask_out_nm": meta.get("mask_out_nm", []), "mask_in_nm": meta.get("mask_in_nm", [])}
    tau = pd.delta_phi / pd.shear / PS
    return ReconstructedGreens(pd.out_grid, pd.probe_centers, mag.T, phase.T, tau.T, pd.mask.T, pd.shear, intervals, meta)


def interpolate_to_grid(recon: ReconstructedGreens, grid: FrequencyGrid):
    """Cubic-spline magnitude and phase on the input-grid points inside each masked-in run.

    Returns (magnitude, phase) shaped [out, grid.count]; NaN outside runs.
    Comparisons should stay on the center lattice; this is for display.
    """
    w = grid.omega
    mag = np.full((recon.out_grid.count, grid.count), np.nan)
    ph = np.full_like(mag, np.nan)
    c = recon.probe_centers
    for k in range(recon.out_grid.count):
        for a, b in _runs(recon.mask[k]):
            sel = (w >= c[a]) & (w <= c[b - 1])
            if b - a < 2:
                sel = np.isclose(w, c[a], rtol=0, atol=0.5 * grid.spacing)
                mag[k, sel] = recon.magnitude[k, a]
                ph[k, sel] = recon.phase[k, a]
                continue
            mag[k, sel] = CubicSpline(c[a:b], recon.magnitude[k, a:b])(w[sel])
            ph[k, sel] = CubicSpline(c[a:b], recon.phase[k, a:b])(w[sel])
    return mag, ph


# --- one-call pipeline ----------------------------------------------------------

@dataclass(frozen=True)
class ReconSettings:
    threshold: float = 0.02
    floor: float | None = None
    resample_factor: int = 8
    magnitude: str = "rms"
    mask_out_nm: tuple = ()
    mask_in_nm: tuple = ()
    min_sideband_fraction: float = 0.3
    min_snr: float = 5.0

    def __post_init__(self):
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must lie in (0, 1)")
        if self.floor is not None and not 0 <= self.floor < 1:
            raise ValueError("floor must lie in [0, 1)")
        if int(self.resample_factor) < 1:
            raise ValueError("resample_factor must be >= 1")
        if self.magnitude not in ("rms", "split"):
            raise ValueError("magnitude must be 'rms' or 'split'")
        if self.min_snr < 0:
            raise ValueError("min_snr must be >= 0")
        if not 0 <= self.min_sideband_fraction <= 1:
            raise ValueError("min_sideband_fraction must lie in [0, 1]")
        object.__setattr__(self, "mask_out_nm", tuple(tuple(map(float, iv)) for iv in self.mask_out_nm))
        object.__setattr__(self, "mask_in_nm", tuple(tuple(map(float, iv)) for iv in self.mask_in_nm))
        for iv in self.mask_out_nm + self.mask_in_nm:
            if len(iv) != 2:
                raise ValueError("mask intervals are [lo, hi] pairs in nm")


@dataclass(frozen=True, eq=False)
class Reconstruction:
    sideband: SidebandMap
    phase_differences: PhaseDifferenceMap
    greens: ReconstructedGreens
    group_delay: GroupDelaySummary
    sideband_fraction: float


def reconstruct(ds: DelaySweepDataset, settings: ReconSettings | None = None) -> Reconstruction:
    """Full pipeline on one dataset; raises ConsistencyError when the beat is not where the shear says."""
    s = settings or ReconSettings()
    frac = sideband_fraction(ds)
    if frac < s.min_sideband_fraction:
        raise ConsistencyError(
            f"only {frac:.3f} of the delay-trace variance oscillates at the stated shear "
            f"(minimum {s.min_sideband_fraction}); check the shear metadata"
        )
    sigma = coefficient_sigma(ds) if ds.delays.size > 3 else None
    fine = resample_uniform(ds, s.resample_factor)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sb = extract_sideband(fine)
    sb = SidebandMap(sb.out_grid, sb.probe_centers, sb.coefficients, sb.dc, sb.shear, sb.metadata, sigma)
    pd = phase_differences(sb, s.threshold, s.floor, s.mask_out_nm, s.mask_in_nm, s.min_snr)
    rg = integrate_phase(pd, sb, s.magnitude)
    gd = group_delay_map(pd)
    rg.metadata.update(sideband_fraction=frac, resample=fine.metadata.get("resample", {}).get("method", "none"))
    rg.metadata.update(sb.metadata)
    return Reconstruction(sb, pd, rg, gd, frac)
