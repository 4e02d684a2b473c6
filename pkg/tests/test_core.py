import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import dispersion_delay_slope
from qfctomo.dispersion import DispersionSpec, beta2_to_d, d_to_beta2, dispersion_phase
from qfctomo.errors import GridMismatchError, PreconditionError, ValidityError
from qfctomo.grids import FrequencyGrid, omega_to_wavelength, wavelength_to_omega
from qfctomo.greens import GreensFunction, SpectralMode, apply, conversion_efficiency


@pytest.fixture
def cband():
    return FrequencyGrid.from_wavelength_span(1551.0, 1562.0, 256, "C")


# --- grids ----------------------------------------------------------------------

def test_wavelength_span_endpoints(cband):
    lam = cband.wavelength_nm
    assert lam.min() == pytest.approx(1551.0, abs=1e-9)
    assert lam.max() == pytest.approx(1562.0, abs=1e-9)
    assert np.all(np.diff(cband.omega) > 0)


def test_wavelength_omega_inverse():
    lam = np.linspace(900, 1600, 11)
    assert np.allclose(omega_to_wavelength(wavelength_to_omega(lam)), lam, rtol=1e-14)


@given(
    st.floats(800, 1700),
    st.floats(1e6, 5e9),
    st.integers(2, 5000),
)
def test_grid_json_round_trip_bit_exact(center, spacing_hz, count):
    g = FrequencyGrid.from_spacing(center, 2 * np.pi * spacing_hz, count, "g")
    back = FrequencyGrid.from_dict(json.loads(json.dumps(g.to_dict())))
    assert np.array_equal(back.omega, g.omega)
    assert back.same_points(g)


def test_nearest_index(cband):
    k = 100
    assert cband.nearest_index(cband.omega[k] + 0.3 * cband.spacing) == k


# --- dispersion -----------------------------------------------------------------

def test_fiber_delay_slope_34_2():
    """Finite-difference group delay of 1.9 km at 18 ps/(nm km), fitted over 1551-1562 nm."""
    spec = DispersionSpec(1550.0, 18.0, 1.9)
    grid = FrequencyGrid.from_wavelength_span(1551.0, 1562.0, 256)
    phi = dispersion_phase(spec, grid)
    tau_ps = np.gradient(phi, grid.omega) * 1e12
    slope = np.polyfit(grid.wavelength_nm, tau_ps, 1)[0]
    assert slope == pytest.approx(34.2, abs=0.1)
    assert slope == pytest.approx(dispersion_delay_slope(18.0, 1.9), rel=2e-3)


def test_group_delay_matches_model_second_order():
    spec = DispersionSpec(1550.0, 18.0, 1.9, dispersion_slope=0.08)
    grid = FrequencyGrid.from_wavelength_span(1551.0, 1562.0, 512)
    phi = dispersion_phase(spec, grid)
    tau = np.gradient(phi, grid.omega)[1:-1] * 1e12
    expected = spec.group_delay_ps(grid.wavelength_nm)[1:-1]
    assert np.max(np.abs(tau - expected)) < 1e-3


def test_zero_length_phase_is_zero(cband):
    assert np.all(dispersion_phase(DispersionSpec(1550.0, 18.0, 0.0), cband) == 0)


def test_cascaded_halves_add(cband):
    full = dispersion_phase(DispersionSpec(1550.0, 18.0, 1.9), cband)
    half = dispersion_phase(DispersionSpec(1550.0, 18.0, 0.95), cband)
    assert np.max(np.abs(2 * half - full)) < 1e-10


def test_out_of_range_grid_rejected(cband):
    with pytest.raises(ValidityError):
        dispersion_phase(DispersionSpec(1300.0, 18.0, 1.0), cband)


def test_negative_length_rejected():
    with pytest.raises(ValueError):
        DispersionSpec(1550.0, 18.0, -1.0)


def test_beta2_conversion_round_trip():
    b2 = d_to_beta2(17.0, 1550.0)
    assert b2 == pytest.approx(-21.68, abs=0.05)
    assert beta2_to_d(b2, 1550.0) == pytest.approx(17.0, rel=1e-14)


# --- Green's functions and modes ------------------------------------------------

def test_identity_kernel_leaves_mode_unchanged(cband):
    f = SpectralMode.gaussian(cband, cband.center_angular_frequency, 20 * cband.spacing)
    out = apply(GreensFunction.identity(cband), f)
    assert np.allclose(out.amplitude, f.amplitude, rtol=0, atol=1e-12 * abs(f.amplitude).max())


def test_pure_delay_tilts_phase(cband):
    f = SpectralMode.gaussian(cband, cband.center_angular_frequency, 20 * cband.spacing)
    out = apply(GreensFunction.pure_delay(cband, 100.0), f)
    assert np.allclose(abs(out.amplitude), abs(f.amplitude), atol=1e-12)
    sel = abs(f.amplitude) > 1e-3 * abs(f.amplitude).max()
    tilt = np.angle(out.amplitude[sel] / f.amplitude[sel])
    expected = np.angle(np.exp(1j * cband.offsets[sel] * 100e-12))
    assert np.allclose(tilt, expected, atol=1e-9)


def test_identity_efficiency_is_one(cband):
    f = SpectralMode.gaussian(cband, cband.center_angular_frequency, 20 * cband.spacing)
    assert conversion_efficiency(GreensFunction.identity(cband), f) == pytest.approx(1.0, abs=1e-9)


def test_unnormalized_input_rejected(cband):
    f = SpectralMode.gaussian(cband, cband.center_angular_frequency, 20 * cband.spacing) * 2.0
    with pytest.raises(PreconditionError):
        conversion_efficiency(GreensFunction.identity(cband), f)


def test_empty_band_gives_zero(cband):
    f = SpectralMode.gaussian(cband, cband.center_angular_frequency, 20 * cband.spacing)
    w = cband.omega
    band = (w[10] + 0.2 * cband.spacing, w[10] + 0.4 * cband.spacing)
    assert conversion_efficiency(GreensFunction.identity(cband), f, band) == 0.0


def test_mode_grid_mismatch(cband):
    other = FrequencyGrid.from_wavelength_span(1540.0, 1560.0, 256)
    f = SpectralMode.gaussian(other, other.center_angular_frequency, 20 * other.spacing)
    with pytest.raises(GridMismatchError):
        apply(GreensFunction.identity(cband), f)


def _random_kernel(rng, grid):
    v = rng.standard_normal((grid.count, grid.count)) + 1j * rng.standard_normal((grid.count, grid.count))
    return GreensFunction(grid, grid, v / grid.count / grid.spacing)


@given(st.integers(0, 2**32 - 1))
def test_efficiency_gauge_invariant(seed):
    rng = np.random.default_rng(seed)
    grid = FrequencyGrid.from_wavelength_span(1551.0, 1562.0, 48)
    g = _random_kernel(rng, grid)
    f = SpectralMode(grid, rng.standard_normal(48) + 1j * rng.standard_normal(48)).normalize()
    chi = rng.uniform(-50, 50, 48)
    a = conversion_efficiency(g, f)
    b = conversion_efficiency(g.with_output_phase(chi), f)
    assert b == pytest.approx(a, rel=1e-12, abs=1e-15)


@given(st.integers(0, 2**32 - 1), st.complex_numbers(max_magnitude=10), st.complex_numbers(max_magnitude=10))
def test_apply_is_linear(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    grid = FrequencyGrid.from_wavelength_span(1551.0, 1562.0, 32)
    g = _random_kernel(rng, grid)
    f1 = SpectralMode(grid, rng.standard_normal(32) + 1j * rng.standard_normal(32))
    f2 = SpectralMode(grid, rng.standard_normal(32) + 1j * rng.standard_normal(32))
    lhs = apply(g, alpha * f1 + beta * f2).amplitude
    rhs = alpha * apply(g, f1).amplitude + beta * apply(g, f2).amplitude
    scale = 1 + np.max(np.abs(rhs))
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale
