import dataclasses
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import direct_sideband
from synthetic import SHEAR_HZ, delay_error, separable, sweep
from qfctomo.errors import ConsistencyError, CoverageError, PreconditionError
from qfctomo.grids import FrequencyGrid, hz_to_omega
from qfctomo.greens import GreensFunction
from qfctomo.measure import DelaySweepDataset, default_delays, synthesize_sweep
from qfctomo.recon import (
    GAUGE_CONVENTION,
    PhaseDifferenceMap,
    ReconSettings,
    SidebandMap,
    delay_spectrum,
    extract_sideband,
    group_delay_map,
    integrate_phase,
    interpolate_to_grid,
    magnitude_from_sideband,
    phase_differences,
    reconstruct,
    resample_uniform,
    sideband_fraction,
)

PS = 1e-12


@pytest.fixture(scope="module")
def in_grid():
    return FrequencyGrid.from_spacing(1556.0, hz_to_omega(20e6), 16384, "in")


@pytest.fixture(scope="module")
def out_grid():
    return FrequencyGrid.from_wavelength_span(924.0, 926.0, 6, "out")


def cosine_dataset(delays, shear, phase=0.3):
    out = FrequencyGrid.from_wavelength_span(920.0, 930.0, 2)
    y = 2.0 + np.cos(shear * PS * np.asarray(delays) + phase)
    data = np.stack([y, 0.5 * y])[None]
    return DelaySweepDataset(out, [1.2e15], delays, data, shear)


# --- resampling -----------------------------------------------------------------

def test_resample_factor_one_is_identity():
    ds = cosine_dataset(default_delays(), hz_to_omega(SHEAR_HZ))
    assert resample_uniform(ds, 1) is ds


@pytest.mark.parametrize("shear_hz", [560e6, 500e6])
def test_resampled_cosine_matches_analytic(shear_hz):
    """500 MHz makes the 0.5 ns grid commensurate (DFT path); 560 MHz uses the beat fit."""
    shear = hz_to_omega(shear_hz)
    period = 1e12 / shear_hz
    delays = np.arange(0.0, 2 * period - 1e-6, 500.0) if shear_hz == 500e6 else default_delays()
    ds = cosine_dataset(delays, shear)
    fine = resample_uniform(ds, 8)
    expected = 2.0 + np.cos(shear * PS * fine.delays + 0.3)
    assert np.sqrt(np.mean((fine.intensities[0, 0] - expected) ** 2)) < 1e-9
    assert fine.metadata["resample"]["method"] == ("dft" if shear_hz == 500e6 else "three_term_fit")


def test_short_sweep_rejected():
    ds = cosine_dataset([0.0, 500.0, 1000.0], hz_to_omega(SHEAR_HZ))
    with pytest.raises(CoverageError):
        resample_uniform(ds, 8)


@pytest.mark.filterwarnings("ignore:window trimmed")
def test_jittered_delays_recover_argument(in_grid, out_grid):
    g = separable(in_grid, out_grid, lambda x: 3e-24 * x**2)
    rng = np.random.default_rng(4)
    delays = default_delays() + rng.uniform(-50, 50, 9)
    ds = sweep(g, delays=delays)
    assert not ds.is_uniform
    sb = extract_sideband(resample_uniform(ds, 8))
    coef, _ = direct_sideband(g, ds.probe_centers, ds.shear)
    err = np.angle(sb.coefficients / coef)
    assert np.max(np.abs(err)) < 1e-3


# --- sideband extraction --------------------------------------------------------

def test_sideband_matches_direct_evaluation(validation_cfg, validation_greens):
    g = validation_greens
    shear = validation_cfg.shear()
    ds = synthesize_sweep(g, validation_cfg.probe_centers(), validation_cfg.delays(), shear)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sb = extract_sideband(resample_uniform(ds, 8))
    coef, dc = direct_sideband(g, ds.probe_centers, shear)
    assert np.max(np.abs(sb.coefficients - coef)) < 1e-9 * np.abs(coef).max()
    assert np.max(np.abs(sb.dc - dc)) < 1e-9 * dc.max()


def test_delay_shift_multiplies_coefficient(in_grid, out_grid):
    g = separable(in_grid, out_grid, lambda x: 2e-24 * x**2)
    d = 211.0
    shear = hz_to_omega(500e6)
    delays = np.arange(16) * 250.0  # two whole periods of 2 ns
    a = extract_sideband(sweep(g, 500e6, delays=delays))
    shifted = sweep(g, 500e6, delays=delays + d)
    b = extract_sideband(shifted.replace(delays=delays))
    assert np.allclose(b.coefficients, a.coefficients * np.exp(1j * a.shear * d * PS), rtol=0, atol=1e-12 * np.abs(a.coefficients).max())
    assert a.shear == pytest.approx(shear, rel=1e-12)


def test_projection_at_twice_the_shear_vanishes(in_grid, out_grid):
    g = separable(in_grid, out_grid, lambda x: 2e-24 * x**2)
    shear = hz_to_omega(500e6)
    ds = sweep(g, 500e6, delays=np.arange(16) * 250.0)
    _, f = delay_spectrum(ds, [shear, 2 * shear])
    assert np.abs(f[..., 1]).max() < 1e-10 * np.abs(f[..., 0]).max()


def test_extraction_needs_uniform_delays(in_grid, out_grid):
    g = separable(in_grid, out_grid, lambda x: 0 * x)
    ds = sweep(g, delays=default_delays() + np.r_[0, 10, 0, 0, 0, 0, 0, 0, 0])
    with pytest.raises(PreconditionError):
        extract_sideband(ds)


def test_trimmed_window_recorded(in_grid, out_grid):
    g = separable(in_grid, out_grid, lambda x: 0 * x)
    fine = resample_uniform(sweep(g), 8)
    with pytest.warns(UserWarning, match="trimmed"):
        sb = extract_sideband(fine)
    assert "trimmed" in sb.metadata["warning"]
    assert sb.metadata["window_periods"] == 2


def test_cauchy_schwarz_holds(validation_cfg, validation_greens):
    ds = synthesize_sweep(validation_greens, validation_cfg.probe_centers(), validation_cfg.delays(), validation_cfg.shear())
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sb = extract_sideband(resample_uniform(ds, 8))
    assert sb.cauchy_schwarz_excess() <= 1e-9 * sb.dc.max()


def test_wrong_shear_fails_consistency(in_grid, out_grid):
    g = separable(in_grid, out_grid, lambda x: 2e-24 * x**2)
    ds = sweep(g)
    assert sideband_fraction(ds) == pytest.approx(1.0, abs=1e-9)
    bad = ds.replace(shear=2 * ds.shear)
    assert sideband_fraction(bad) < 0.3
    with pytest.raises(ConsistencyError):
        reconstruct(bad)


# --- phase differences and group delay ------------------------------------------

def test_flat_phase_gives_zero_difference(in_grid, out_grid):
    g = separable(in_grid, out_grid, lambda x: 0 * x)
    rec = reconstruct(sweep(g))
    pd = rec.phase_differences
    assert pd.mask.any()
    assert np.nanmax(np.abs(pd.delta_phi)) < 1e-9


@pytest.mark.parametrize("delay_ps", [40.0, -250.0])
def test_pure_input_delay(in_grid, out_grid, delay_ps):
    g = separable(in_grid, out_grid, lambda x: x * delay_ps * PS)
    rec = reconstruct(sweep(g))
    pd = rec.phase_differences
    sel = pd.mask
    assert np.allclose(pd.delta_phi[sel], pd.shear * delay_ps * PS, atol=1e-9)
    assert rec.group_delay.slope == pytest.approx(0.0, abs=1e-6)
    assert np.allclose(rec.group_delay.band_average, delay_ps, atol=1e-7)


def test_quadratic_phase_gives_linear_difference(in_grid, out_grid):
    a = 4e-24  # rad s^2
    g = separable(in_grid, out_grid, lambda x: a * x**2)
    rec = reconstruct(sweep(g))
    pd = rec.phase_differences
    x = pd.probe_centers - in_grid.center_angular_frequency
    for k in range(out_grid.count):
        sel = pd.mask[:, k]
        slope = np.polyfit(x[sel], pd.delta_phi[sel, k], 1)[0]
        assert slope == pytest.approx(2 * a * pd.shear, rel=1e-9)


def test_threshold_masks_weak_entries(in_grid, out_grid):
    g = separable(in_grid, out_grid, lambda x: 0 * x, width=0.2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sb = extract_sideband(resample_uniform(sweep(g, count=31, span=1.2), 8))
    pd = phase_differences(sb, threshold=0.1)
    mag = np.abs(sb.coefficients)
    assert np.all(mag[pd.mask] >= 0.1 * mag.max(axis=0)[None, :].repeat(mag.shape[0], 0)[pd.mask])
    assert not pd.mask.all()
    assert np.all(np.isnan(pd.delta_phi[~pd.mask]))


def test_wavelength_interval_masks(in_grid, out_grid):
    g = separable(in_grid, out_grid, lambda x: 0 * x)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sb = extract_sideband(resample_uniform(sweep(g), 8))
    lam_out = out_grid.wavelength_nm
    lo, hi = sorted((lam_out[2], lam_out[3]))
    pd = phase_differences(sb, mask_out_nm=[(lo - 1e-6, hi + 1e-6)])
    assert not pd.mask[:, 2:4].any() and pd.mask[:, 0].any()
    lam_in = 2 * np.pi * 299792458e9 / sb.probe_centers
    pd = phase_differences(sb, mask_in_nm=[(lam_in[7] - 1e-6, lam_in[7] + 1e-6)])
    assert not pd.mask[7].any()
    assert set(pd.split_rows.tolist()) == set(np.flatnonzero(pd.valid_rows).tolist())


def test_empty_row_is_invalid_not_error(in_grid, out_grid):
    v = separable(in_grid, out_grid, lambda x: 0 * x).values.copy()
    v[1] = 0
    g = GreensFunction(out_grid, in_grid, v)
    rec = reconstruct(sweep(g))
    assert not rec.phase_differences.valid_rows[1]
    assert rec.phase_differences.valid_rows[0]


def test_unwrapped_increments_below_pi(in_grid, out_grid):
    g = separable(in_grid, out_grid, lambda x: 1.5e-21 * x**2)
    pd = reconstruct(sweep(g, count=41, span=1.0)).phase_differences
    inc = np.diff(pd.delta_phi, axis=0)
    assert np.nanmax(np.abs(inc)) < np.pi
    assert np.nanmax(np.abs(pd.delta_phi)) > np.pi  # unwrapping was needed


def test_zero_length_pre_section_gives_flat_delay(validation_cfg):
    from qfctomo.cli import simulate

    cfg = dataclasses.replace(validation_cfg, chain=dataclasses.replace(validation_cfg.chain, pre=None))
    g = simulate(cfg)
    ds = synthesize_sweep(g, cfg.probe_centers(), cfg.delays(), cfg.shear())
    gd = reconstruct(ds).group_delay
    assert abs(gd.slope) <= max(3 * gd.slope_stderr, 1e-6)


def test_pre_section_adds_fiber_slope(validation_cfg, validation_greens):
    from qfctomo.cli import simulate

    bare = dataclasses.replace(validation_cfg, chain=dataclasses.replace(validation_cfg.chain, pre=None))
    gd0 = reconstruct(synthesize_sweep(simulate(bare), bare.probe_centers(), bare.delays(), bare.shear())).group_delay
    gd1 = reconstruct(
        synthesize_sweep(validation_greens, validation_cfg.probe_centers(), validation_cfg.delays(), validation_cfg.shear())
    ).group_delay
    assert gd1.slope - gd0.slope == pytest.approx(34.2, rel=0.01)


# --- phase integration ----------------------------------------------------------

def _pd_from(delta_phi, mask, centers, shear, out_grid):
    return PhaseDifferenceMap(out_grid, centers, np.where(mask, delta_phi, np.nan), mask, np.ones(mask.shape), shear, np.array([], int))


def test_zero_difference_integrates_to_zero(out_grid):
    centers = 1.2e15 + np.arange(10) * 1e9
    mask = np.ones((10, out_grid.count), bool)
    rg = integrate_phase(_pd_from(np.zeros(mask.shape), mask, centers, 2e9, out_grid))
    assert np.all(rg.phase == 0)


def test_non_uniform_centers_rejected(out_grid):
    centers = 1.2e15 + np.r_[0, 1, 2, 4, 5] * 1e9
    mask = np.ones((5, out_grid.count), bool)
    with pytest.raises(PreconditionError):
        integrate_phase(_pd_from(np.zeros(mask.shape), mask, centers, 2e9, out_grid))


def test_integrated_phase_recovers_quadratic(in_grid, out_grid):
    a = 4e-24
    g = separable(in_grid, out_grid, lambda x: a * x**2)
    rg = reconstruct(sweep(g)).greens
    x = rg.probe_centers - in_grid.center_angular_frequency
    truth = a * x**2
    for k in range(out_grid.count):
        sel = rg.mask[k]
        t = truth[sel] - truth[sel].mean()
        assert np.max(np.abs(rg.phase[k, sel] - t)) < 1e-9
        assert abs(rg.phase[k, sel].mean()) < 1e-12
    assert rg.metadata["gauge"] == GAUGE_CONVENTION


@given(st.integers(0, 2**32 - 1))
def test_gauge_blindness(seed):
    in_grid = FrequencyGrid.from_spacing(1556.0, hz_to_omega(80e6), 1024)
    out_grid = FrequencyGrid.from_wavelength_span(924.0, 926.0, 4)
    rng = np.random.default_rng(seed)
    chi = rng.uniform(-100, 100, out_grid.count)
    phase = lambda x: 3e-24 * x**2 + 1e-36 * x**3  # noqa: E731
    g = separable(in_grid, out_grid, phase)
    gc = separable(in_grid, out_grid, phase, chi=chi)
    a = reconstruct(sweep(g, span=0.3, count=9)).greens
    b = reconstruct(sweep(gc, span=0.3, count=9)).greens
    assert np.array_equal(a.mask, b.mask)
    assert np.nanmax(np.abs(a.phase - b.phase)) < 1e-12
    assert np.nanmax(np.abs(a.magnitude - b.magnitude)) < 1e-12 * np.nanmax(a.magnitude)


@pytest.fixture(scope="module")
def cubic_case(in_grid, out_grid):
    c3 = 2e-36  # rad s^3
    g = separable(in_grid, out_grid, lambda x: c3 * x**3, width=1.0)
    return g, c3


def test_linearization_error_scales_with_shear_squared(cubic_case):
    g, c3 = cubic_case
    e1 = delay_error(g, c3, 480e6)
    e2 = delay_error(g, c3, 960e6)
    assert e2 / e1 == pytest.approx(4.0, rel=0.2)


def test_magnitude_error_scales_with_shear_squared(in_grid, out_grid):
    g = separable(in_grid, out_grid, lambda x: 0 * x, width=0.15)
    errs = []
    for hz in (480e6, 960e6):
        rec = reconstruct(sweep(g, hz, count=11, span=0.3))
        truth = np.abs(g.values[:, [in_grid.nearest_index(c) for c in rec.greens.probe_centers]])
        errs.append(np.max(np.abs(rec.greens.magnitude - truth) / truth))
    assert errs[0] < 1e-3
    assert errs[1] / errs[0] == pytest.approx(4.0, rel=0.2)


def test_split_magnitude_exact_for_unequal_tones():
    out = FrequencyGrid.from_wavelength_span(920.0, 930.0, 3)
    gp = np.array([1.0, 2.0, 0.5])
    gm = np.array([0.7, 2.0, 0.1])
    sb = SidebandMap(out, np.array([1.2e15]), (gp * gm)[None].astype(complex), (gp**2 + gm**2)[None], 1e9)
    assert np.allclose(magnitude_from_sideband(sb, "split")[0], 0.5 * (gp + gm), rtol=1e-12)
    assert np.allclose(magnitude_from_sideband(sb, "rms")[0], np.sqrt((gp**2 + gm**2) / 2))


def test_interpolation_passes_through_centers(in_grid, out_grid):
    g = separable(in_grid, out_grid, lambda x: 4e-24 * x**2)
    rg = reconstruct(sweep(g)).greens
    mag, ph = interpolate_to_grid(rg, in_grid)
    idx = [in_grid.nearest_index(c) for c in rg.probe_centers]
    assert np.allclose(ph[:, idx], rg.phase, atol=1e-12)
    assert np.allclose(mag[:, idx], rg.magnitude, rtol=1e-12)


def test_settings_validation():
    with pytest.raises(ValueError):
        ReconSettings(threshold=1.5)
    with pytest.raises(ValueError):
        ReconSettings(magnitude="peak")
    with pytest.raises(ValueError):
        ReconSettings(mask_out_nm=[(1, 2, 3)])


def test_group_delay_weights_favour_strong_entries(out_grid):
    centers = 1.2e15 + np.arange(4) * 1e9
    shear = 2e9
    mask = np.ones((4, out_grid.count), bool)
    tau_ps = np.zeros(mask.shape)
    tau_ps[:, 0] = 100.0
    weights = np.ones(mask.shape)
    weights[:, 0] = 1e-3
    pd = PhaseDifferenceMap(out_grid, centers, tau_ps * shear * PS, mask, weights, shear, np.array([], int))
    gd = group_delay_map(pd)
    assert np.allclose(gd.band_average, 100.0 * 1e-6 / (1e-6 + out_grid.count - 1))
