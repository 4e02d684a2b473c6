"""Two-tone probe measurements: intensities, OSA blur, noise, averaging.

A probe with tones at ``center +- shear/2`` and beat delay ``tau`` produces

    I(w_out, tau) = a0**2/2 * (I0 + It*exp(i*shear*tau) + conj(It)*exp(-i*shear*tau))
    It = G(w_out, center + shear/2) * conj(G(w_out, center - shear/2))
    I0 = |G(w_out, center + shear/2)|**2 + |G(w_out, center - shear/2)|**2

Tones are delta functions, so G columns enter directly (no d_omega factor).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .grids import FrequencyGrid, nm_width_to_omega, wavelength_to_omega
from .greens import GreensFunction

PS = 1e-12


@dataclass(frozen=True)
class TwoToneProbe:
    """center, shear in rad/s; delay in ps; amplitude real."""

    center: float
    shear: float
    delay: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.shear > 0:
            raise ValueError("shear must be positive")

    @property
    def tones(self):
        return self.center - 0.5 * self.shear, self.center + 0.5 * self.shear

    def tone_indices(self, grid: FrequencyGrid, atol=1e-6):
        """Grid indices of (lower, upper) tone; raises if a tone is off grid."""
        idx = []
        for w in self.tones:
            f = grid.fractional_index(w)
            k = int(np.rint(f))
            if abs(f - k) > atol or not 0 <= k < grid.count:
                raise PreconditionError(f"probe tone at {w:.9g} rad/s is not on the input grid")
            idx.append(k)
        return tuple(idx)


def snap_probe(grid: FrequencyGrid, center, shear, delay=0.0, amplitude=1.0):
    """Put both tones on grid points; the snapped shear is a whole number of spacings."""
    m = max(1, int(np.rint(shear / grid.spacing)))
    lo = int(np.rint(grid.fractional_index(center - 0.5 * m * grid.spacing)))
    lo = min(max(lo, 0), grid.count - 1 - m)
    w = grid.omega
    return TwoToneProbe(0.5 * (w[lo] + w[lo + m]), m * grid.spacing, delay, amplitude)


def snapped_shear(grid: FrequencyGrid, shear):
    return max(1, int(np.rint(shear / grid.spacing))) * grid.spacing


def probe_centers(grid: FrequencyGrid, lam_min_nm, lam_max_nm, count, shear):
    """``count`` uniformly spaced centers between two wavelengths, tones on grid.

    The center step is a whole number of grid spacings so the centers stay
    exactly uniform after snapping.
    """
    if count < 2:
        raise ValueError("need at least two probe centers")
    m = max(1, int(np.rint(shear / grid.spacing)))
    w_lo = float(wavelength_to_omega(lam_max_nm))
    w_hi = float(wavelength_to_omega(lam_min_nm))
    step = max(1, int(np.rint((w_hi - w_lo) / (count - 1) / grid.spacing)))
    mid = 0.5 * (w_lo + w_hi)
    first_lower = int(np.rint(grid.fractional_index(mid - 0.5 * (count - 1) * step * grid.spacing - 0.5 * m * grid.spacing)))
    lowers = first_lower + step * np.arange(count)
    if lowers[0] < 0 or lowers[-1] + m > grid.count - 1:
        raise PreconditionError("probe tones fall outside the input grid")
    w = grid.omega
    return 0.5 * (w[lowers] + w[lowers + m])


def tone_columns(g: GreensFunction, centers, shear):
    """G columns at the upper and lower tones, shaped (center, out)."""
    probe_idx = [TwoToneProbe(c, shear).tone_indices(g.in_grid) for c in np.atleast_1d(centers)]
    lower = np.array([i for i, _ in probe_idx])
    upper = np.array([j for _, j in probe_idx])
    return g.values[:, upper].T, g.values[:, lower].T


def _intensity(g_plus, g_minus, shear, delays_ps, amplitude):
    """(center, out) tone columns -> (center, out, delay) intensities."""
    it = g_plus * np.conj(g_minus)
    i0 = np.abs(g_plus) ** 2 + np.abs(g_minus) ** 2
    beat = np.exp(1j * shear * PS * np.asarray(delays_ps, dtype=float))
    return 0.5 * amplitude**2 * (i0[..., None] + 2.0 * np.real(it[..., None] * beat))


def output_intensity(g: GreensFunction, probe: TwoToneProbe):
    """Output spectrum for a single probe setting, one value per output-grid point."""
    gp, gm = tone_columns(g, [probe.center], probe.shear)
    return _intensity(gp, gm, probe.shear, [probe.delay], probe.amplitude)[0, :, 0]


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian noise (fraction of the dataset peak) and per-shot gain jitter."""

    additive_sigma: float = 0.0
    multiplicative_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.additive_sigma < 0 or self.multiplicative_sigma < 0:
            raise ValueError("noise sigmas must be >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def is_zero(self):
        return self.additive_sigma == 0 and self.multiplicative_sigma == 0

    def to_dict(self):
        return {"additive_sigma": self.additive_sigma, "multiplicative_sigma": self.multiplicative_sigma, "seed": self.seed}


@dataclass(frozen=True, eq=False)
class DelaySweepDataset:
    """Intensities[center, out, delay]; delays in ps, centers and shear in rad/s."""

    out_grid: FrequencyGrid
    probe_centers: np.ndarray
    delays: np.ndarray
    intensities: np.ndarray
    shear: float
    amplitude: float = 1.0
    averages: int = 1
    noise_seed: int = 0
    osa_fwhm: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        centers = np.array(self.probe_centers, dtype=float)
        delays = np.array(self.delays, dtype=float)
        data = np.array(self.intensities, dtype=float)
        if data.shape != (centers.size, self.out_grid.count, delays.size):
            raise ValueError(f"intensity shape {data.shape} inconsistent with ({centers.size}, {self.out_grid.count}, {delays.size})")
        if delays.size > 1 and np.any(np.diff(delays) <= 0):
            raise ValueError("delays not increasing")
        if np.any(data < 0) or not np.all(np.isfinite(data)):
            raise ValueError("intensities must be finite and non-negative")
        for a in (centers, delays, data):
            a.setflags(write=False)
        object.__setattr__(self, "probe_centers", centers)
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "intensities", data)

    @property
    def is_uniform(self):
        if self.delays.size < 3:
            return True
        d = np.diff(self.delays)
        return bool(np.allclose(d, d.mean(), rtol=1e-9, atol=0))

    @property
    def beat_period_ps(self):
        return 2 * np.pi / self.shear / PS

    @property
    def center_wavelengths_nm(self):
        return 2 * np.pi * 299792458e9 / self.probe_centers

    def replace(self, **kw):
        fields = dict(
            out_grid=self.out_grid,
            probe_centers=self.probe_centers,
            delays=self.delays,
            intensities=self.intensities,
            shear=self.shear,
            amplitude=self.amplitude,
            averages=self.averages,
            noise_seed=self.noise_seed,
            osa_fwhm=self.osa_fwhm,
            metadata=dict(self.metadata),
        )
        fields.update(kw)
        return DelaySweepDataset(**fields)


def osa_kernel(out_grid: FrequencyGrid, fwhm_nm):
    """Gaussian resolution matrix; columns sum to one so every spectrum keeps its total."""
    n = out_grid.count
    if fwhm_nm == 0:
        return np.eye(n)
    fwhm = nm_width_to_omega(fwhm_nm, out_grid.center_wavelength_nm)
    x = out_grid.offsets
    k = np.exp(-4 * np.log(2) * (x[:, None] - x[None, :]) ** 2 / fwhm**2)
    return k / k.sum(axis=0, keepdims=True)


def cell_rng(seed, i_center, i_delay, i_avg):
    """Counter-based stream for one (center, delay, average) shot.

    The output-grid index is the position within the stream, so every
    (center, out, delay, average) sample has a fixed random number
    regardless of evaluation order.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(i_center), int(i_delay), int(i_avg)))
    return np.random.Generator(np.random.Philox(ss))


def _noisy_center(clean, noise, peak, i_center, averages):
    """clean: (out, delay) for one center -> averaged noisy copy."""
    n_out, n_delay = clean.shape
    acc = np.zeros_like(clean)
    for i_avg in range(averages):
        for i_delay in range(n_delay):
            rng = cell_rng(noise.seed, i_center, i_delay, i_avg)
            add = rng.standard_normal(n_out)
            gain = rng.standard_normal()
            acc[:, i_delay] += clean[:, i_delay] * (1.0 + noise.multiplicative_sigma * gain) + noise.additive_sigma * peak * add
    return acc / averages


def synthesize_sweep(
    g: GreensFunction,
    centers,
    delays,
    shear,
    noise: NoiseSpec | None = None,
    osa_fwhm=0.0,
    averages=1,
    amplitude=1.0,
    threads=1,
) -> DelaySweepDataset:
    """Simulated delay sweep for every probe center.

    Tones must already sit on the input grid (see ``probe_centers``).  Noise
    is added per shot after the OSA blur; averaged spectra are clipped at
    zero like a detector reading.
    """
    if averages < 1:
        raise PreconditionError("averages must be >= 1")
    if osa_fwhm < 0:
        raise PreconditionError("osa_fwhm must be >= 0")
    noise = noise or NoiseSpec()
    centers = np.atleast_1d(np.asarray(centers, dtype=float))
    delays = np.atleast_1d(np.asarray(delays, dtype=float))
    gp, gm = tone_columns(g, centers, shear)
    data = _intensity(gp, gm, shear, delays, amplitude)
    if osa_fwhm > 0:
        data = np.einsum("ij,cjd->cid", osa_kernel(g.out_grid, osa_fwhm), data)
    if not noise.is_zero:
        peak = float(data.max())
        jobs = range(centers.size)

        def run(ic):
            return _noisy_center(data[ic], noise, peak, ic, averages)

        if threads and threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                rows = list(pool.map(run, jobs))
        else:
            rows = [run(ic) for ic in jobs]
        data = np.maximum(np.stack(rows), 0.0)
    else:
        data = np.maximum(data, 0.0)
    return DelaySweepDataset(
        g.out_grid,
        centers,
        delays,
        data,
        float(shear),
        float(amplitude),
        int(averages),
        int(noise.seed),
        float(osa_fwhm),
        {"noise": noise.to_dict()},
    )


def default_delays(start_ps=0.0, stop_ps=4000.0, step_ps=500.0):
    n = int(np.floor((stop_ps - start_ps) / step_ps + 1e-9)) + 1
    return start_ps + step_ps * np.arange(n)
