"""Experiment configuration: nested dataclasses loaded strictly from JSON.

Unknown keys, wrong types and out-of-range values raise ConfigError with a
JSON pointer to the offending field (e.g. ``/chain/pre/length``).
"""

from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dispersion import DispersionSpec
from .errors import ConfigError
from .grids import FrequencyGrid, hz_to_omega
from .measure import NoiseSpec, probe_centers, snapped_shear
from .presets import noise_profile
from .recon import ReconSettings
from .sim import BsfwmSpec, ConverterChain, PumpEnvelope, bs_shift

CONFIG_SCHEMA = "qfc-config/1"


class _FieldError(ValueError):
    def __init__(self, name, message):
        super().__init__(f"{name}: {message}")
        self.name = name
        self.message = message


def _need(cond, name, message):
    if not cond:
        raise _FieldError(name, message)


@dataclass(frozen=True)
class GridConfig:
    """Either a wavelength span (lambda_min_nm, lambda_max_nm) or center_nm + spacing_hz; plus count."""

    count: int = 256
    lambda_min_nm: float | None = None
    lambda_max_nm: float | None = None
    center_nm: float | None = None
    spacing_hz: float | None = None
    label: str = ""

    def __post_init__(self):
        _need(self.count >= 2, "count", "must be >= 2")
        span = self.lambda_min_nm is not None or self.lambda_max_nm is not None
        centered = self.center_nm is not None or self.spacing_hz is not None
        _need(span != centered, "count", "give either lambda_min_nm/lambda_max_nm or center_nm/spacing_hz")
        if span:
            _need(self.lambda_min_nm is not None and self.lambda_min_nm > 0, "lambda_min_nm", "must be a positive wavelength")
            _need(self.lambda_max_nm is not None and self.lambda_max_nm > self.lambda_min_nm, "lambda_max_nm", "must exceed lambda_min_nm")
        else:
            _need(self.center_nm is not None and self.center_nm > 0, "center_nm", "must be a positive wavelength")
            _need(self.spacing_hz is not None and self.spacing_hz > 0, "spacing_hz", "must be > 0")

    def build(self, label=""):
        label = self.label or label
        if self.lambda_min_nm is not None:
            return FrequencyGrid.from_wavelength_span(self.lambda_min_nm, self.lambda_max_nm, self.count, label)
        return FrequencyGrid.from_spacing(self.center_nm, hz_to_omega(self.spacing_hz), self.count, label)


@dataclass(frozen=True)
class GridsConfig:
    """``output`` may be omitted: the output grid is then the input grid translated by the BS shift."""

    input: GridConfig
    output: GridConfig | None = None


@dataclass(frozen=True)
class PumpConfig:
    center_wavelength: float
    duration_fwhm: float
    chirp: float = 0.0
    peak_amplitude: float = 1.0
    delay: float = 0.0
    gdd_ps2: float = 0.0

    def __post_init__(self):
        _need(self.center_wavelength > 0, "center_wavelength", "must be positive")
        _need(self.duration_fwhm > 0, "duration_fwhm", "must be > 0")
        _need(self.gdd_ps2 == 0 or self.chirp == 0, "gdd_ps2", "give either chirp or gdd_ps2, not both")

    def build(self):
        p = PumpEnvelope(self.center_wavelength, self.duration_fwhm, self.chirp, self.peak_amplitude, self.delay)
        return p.dispersed(self.gdd_ps2) if self.gdd_ps2 else p


@dataclass(frozen=True)
class DispersionConfig:
    reference_wavelength: float
    dispersion_parameter_D: float
    length: float
    dispersion_slope: float = 0.0
    group_delay_per_length: float = 0.0

    def __post_init__(self):
        _need(self.length >= 0, "length", "must be >= 0")
        _need(self.reference_wavelength > 0, "reference_wavelength", "must be positive")

    def build(self):
        return DispersionSpec(
            self.reference_wavelength, self.dispersion_parameter_D, self.length, self.dispersion_slope, self.group_delay_per_length
        )


@dataclass(frozen=True)
class ActiveConfig:
    """BS-FWM section; ``shift`` (rad/s) defaults to the pump frequency difference."""

    pump_p: PumpConfig
    pump_q: PumpConfig
    coupling: float
    active_length: float
    shift: float | None = None
    walkoff: tuple[float, float] = (0.0, 0.0)
    band_dispersion: tuple[DispersionConfig | None, DispersionConfig | None] = (None, None)
    coupling_profile: tuple[float, ...] | None = None
    model: str = "auto"
    dz: float | None = None
    # split-step guard band, as a fraction of the grid count on each side
    guard: float = 0.0

    def __post_init__(self):
        _need(self.coupling >= 0, "coupling", "must be >= 0")
        _need(self.guard >= 0, "guard", "must be >= 0")
        _need(self.active_length >= 0, "active_length", "must be >= 0")
        _need(self.model in ("auto", "closed_form", "split_step", "born"), "model", "must be auto, closed_form, split_step or born")
        _need(self.dz is None or self.dz > 0, "dz", "must be > 0")
        _need(self.coupling_profile is None or len(self.coupling_profile) >= 2, "coupling_profile", "needs at least two samples")

    def build(self):
        p, q = self.pump_p.build(), self.pump_q.build()
        shift = bs_shift(p, q) if self.shift is None else self.shift
        bd = tuple(d.build() if d is not None else None for d in self.band_dispersion)
        return BsfwmSpec(p, q, shift, self.coupling, self.active_length, bd, self.walkoff, self.coupling_profile)


@dataclass(frozen=True)
class ChainConfig:
    active: ActiveConfig
    pre: DispersionConfig | None = None
    post: DispersionConfig | None = None
    block: str = "converted"

    def __post_init__(self):
        _need(self.block in ("converted", "unconverted"), "block", "must be 'converted' or 'unconverted'")

    def build(self):
        pre = self.pre.build() if self.pre else None
        post = self.post.build() if self.post else None
        return ConverterChain(pre, self.active.build(), post)


@dataclass(frozen=True)
class DelayConfig:
    start_ps: float = 0.0
    stop_ps: float = 4000.0
    step_ps: float = 500.0
    values_ps: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.values_ps is not None:
            v = np.asarray(self.values_ps, dtype=float)
            _need(v.size >= 2 and np.all(np.diff(v) > 0), "values_ps", "delays not increasing")
        else:
            _need(self.step_ps > 0, "step_ps", "must be > 0")
            _need(self.stop_ps > self.start_ps, "stop_ps", "must exceed start_ps")

    def build(self):
        if self.values_ps is not None:
            return np.asarray(self.values_ps, dtype=float)
        n = int(np.floor((self.stop_ps - self.start_ps) / self.step_ps + 1e-9)) + 1
        return self.start_ps + self.step_ps * np.arange(n)


@dataclass(frozen=True)
class ProbeConfig:
    center_min_nm: float = 1551.0
    center_max_nm: float = 1562.0
    count: int = 23
    shear_hz: float = 560e6
    delays: DelayConfig = field(default_factory=DelayConfig)
    amplitude: float = 1.0

    def __post_init__(self):
        _need(self.center_max_nm > self.center_min_nm, "center_max_nm", "must exceed center_min_nm")
        _need(self.count >= 2, "count", "must be >= 2")
        _need(self.shear_hz > 0, "shear_hz", "must be > 0")
        _need(self.amplitude > 0, "amplitude", "must be > 0")


@dataclass(frozen=True)
class DetectorConfig:
    osa_fwhm_nm: float = 0.05
    averages: int = 3

    def __post_init__(self):
        _need(self.osa_fwhm_nm >= 0, "osa_fwhm_nm", "must be >= 0")
        _need(self.averages >= 1, "averages", "must be >= 1")


@dataclass(frozen=True)
class NoiseConfig:
    """A named profile, optionally with either sigma overridden."""

    profile: str = "none"
    additive_sigma: float | None = None
    multiplicative_sigma: float | None = None

    def __post_init__(self):
        try:
            noise_profile(self.profile)
        except KeyError as e:
            raise _FieldError("profile", str(e.args[0])) from None
        _need(self.additive_sigma is None or self.additive_sigma >= 0, "additive_sigma", "must be >= 0")
        _need(self.multiplicative_sigma is None or self.multiplicative_sigma >= 0, "multiplicative_sigma", "must be >= 0")

    def build(self, seed):
        p = noise_profile(self.profile)
        if self.additive_sigma is not None:
            p["additive_sigma"] = self.additive_sigma
        if self.multiplicative_sigma is not None:
            p["multiplicative_sigma"] = self.multiplicative_sigma
        return NoiseSpec(p["additive_sigma"], p["multiplicative_sigma"], seed)


@dataclass(frozen=True)
class ReconConfig:
    threshold: float = 0.02
    floor: float | None = None
    min_snr: float = 5.0
    resample_factor: int = 8
    magnitude: str = "rms"
    mask_out_nm: tuple[tuple[float, float], ...] = ()
    mask_in_nm: tuple[tuple[float, float], ...] = ()
    min_sideband_fraction: float = 0.3

    def __post_init__(self):
        _need(0 < self.threshold < 1, "threshold", "must lie in (0, 1)")
        _need(self.floor is None or 0 <= self.floor < 1, "floor", "must lie in [0, 1)")
        _need(self.min_snr >= 0, "min_snr", "must be >= 0")
        _need(self.resample_factor >= 1, "resample_factor", "must be >= 1")
        _need(self.magnitude in ("rms", "split"), "magnitude", "must be 'rms' or 'split'")
        _need(0 <= self.min_sideband_fraction <= 1, "min_sideband_fraction", "must lie in [0, 1]")

    def build(self):
        return ReconSettings(
            self.threshold, self.floor, self.resample_factor, self.magnitude, self.mask_out_nm, self.mask_in_nm,
            self.min_sideband_fraction, self.min_snr,
        )


@dataclass(frozen=True)
class TolerancesConfig:
    """Pass/fail limits checked by the pipeline; unset entries are not checked."""

    expected_slope_ps_per_nm: float | None = None
    slope_tolerance_ps_per_nm: float | None = None
    max_phase_rmse_rad: float | None = None
    sigma_tau_target_ps: float | None = None
    sigma_tau_factor: float = 2.0

    def __post_init__(self):
        _need(self.slope_tolerance_ps_per_nm is None or self.slope_tolerance_ps_per_nm > 0, "slope_tolerance_ps_per_nm", "must be > 0")
        _need(self.max_phase_rmse_rad is None or self.max_phase_rmse_rad > 0, "max_phase_rmse_rad", "must be > 0")
        _need(self.sigma_tau_factor >= 1, "sigma_tau_factor", "must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    grids: GridsConfig
    chain: ChainConfig
    schema: str = CONFIG_SCHEMA
    name: str = ""
    seed: int = 0
    probe: ProbeConfig = field(default_factory=ProbeConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    recon: ReconConfig = field(default_factory=ReconConfig)
    tolerances: TolerancesConfig = field(default_factory=TolerancesConfig)

    def __post_init__(self):
        _need(self.schema == CONFIG_SCHEMA, "schema", f"must be {CONFIG_SCHEMA!r}")
        _need(0 <= self.seed < 2**64, "seed", "must be an unsigned 64-bit integer")

    # --- derived objects ---
    def active_spec(self):
        return self.chain.active.build()

    def converter_chain(self):
        return self.chain.build()

    def in_grid(self):
        return self.grids.input.build("input")

    def band_grid(self):
        """Grid of the converted band, whatever block is selected."""
        if self.grids.output is not None:
            return self.grids.output.build("output")
        g = self.in_grid()
        return FrequencyGrid(g.center_angular_frequency + self.active_spec().shift, g.spacing, g.count, "output")

    def out_grid(self):
        """Output grid of the selected block."""
        if self.chain.block == "unconverted":
            return self.in_grid()
        return self.band_grid()

    def shear(self):
        return snapped_shear(self.in_grid(), hz_to_omega(self.probe.shear_hz))

    def probe_centers(self, shear=None):
        shear = self.shear() if shear is None else shear
        return probe_centers(self.in_grid(), self.probe.center_min_nm, self.probe.center_max_nm, self.probe.count, shear)

    def delays(self):
        return self.probe.delays.build()

    def noise_spec(self):
        return self.noise.build(self.seed)

    def recon_settings(self):
        return self.recon.build()

    def with_seed(self, seed):
        return dataclasses.replace(self, seed=_build(int, seed, "/seed"))

    def to_dict(self):
        return _to_plain(self)


# --- strict loader ---------------------------------------------------------------------

def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_to_plain(v) for v in obj]
    return obj


def _type_name(tp):
    return getattr(tp, "__name__", str(tp))


def _build(tp, value, pointer):
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = typing.get_args(tp)
        if value is None:
            if type(None) in args:
                return None
            raise ConfigError(pointer, "must not be null")
        inner = [a for a in args if a is not type(None)]
        return _build(inner[0], value, pointer)
    if value is None:
        raise ConfigError(pointer, "must not be null")
    if dataclasses.is_dataclass(tp):
        return _build_dataclass(tp, value, pointer)
    if origin is tuple:
        args = typing.get_args(tp)
        if not isinstance(value, list):
            raise ConfigError(pointer, "must be an array")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_build(args[0], v, f"{pointer}/{i}") for i, v in enumerate(value))
        if len(value) != len(args):
            raise ConfigError(pointer, f"must have exactly {len(args)} entries")
        return tuple(_build(a, v, f"{pointer}/{i}") for i, (a, v) in enumerate(zip(args, value)))
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(pointer, "must be true or false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(pointer, "must be an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
            raise ConfigError(pointer, "must be a finite number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(pointer, "must be a string")
        return value
    raise TypeError(f"unsupported config type {_type_name(tp)}")


def _build_dataclass(cls, value, pointer):
    if not isinstance(value, dict):
        raise ConfigError(pointer, f"must be an object ({cls.__name__})")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in value:
        if key not in names:
            raise ConfigError(f"{pointer}/{key}", "unknown field")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in value:
            kwargs[f.name] = _build(hints[f.name], value[f.name], f"{pointer}/{f.name}")
        elif f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
            raise ConfigError(f"{pointer}/{f.name}", "required field is missing")
    try:
        return cls(**kwargs)
    except _FieldError as e:
        raise ConfigError(f"{pointer}/{e.name}", e.message) from None
    except ValueError as e:
        raise ConfigError(pointer, str(e)) from None


def config_from_dict(data) -> ExperimentConfig:
    cfg = _build_dataclass(ExperimentConfig, data, "")
    _check_derived(cfg)
    return cfg


def _check_derived(cfg: ExperimentConfig):
    """Cross-field checks that need the built physical objects."""
    try:
        cfg.active_spec()
    except ValueError as e:
        raise ConfigError("/chain/active", str(e)) from None
    try:
        cfg.in_grid()
    except ValueError as e:
        raise ConfigError("/grids/input", str(e)) from None
    try:
        cfg.out_grid()
    except ValueError as e:
        raise ConfigError("/grids/output", str(e)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError("", f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError("", f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from None
    return config_from_dict(data)
