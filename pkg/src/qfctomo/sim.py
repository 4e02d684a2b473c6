"""Ground-truth Green's functions for Bragg-scattering four-wave mixing.

Two-band envelope model in the frame co-moving with the pump product
``M(t) = P(t) * conj(Q(t))``:

    da/dz = i*phi_a(nu) a + i*kappa(z)*conj(M(t)) b
    db/dz = i*phi_b(nu) b + i*kappa(z)*M(t) a

``phi_a``/``phi_b`` are per-metre linear phases of the input (probe) and
output (target) bands: walk-off relative to the pumps plus intra-fiber
dispersion.  Pumps are undepleted and do not evolve in their own frame.
Time is in ps, angular frequencies in rad/s.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft
from scipy.integrate import trapezoid

from .dispersion import DispersionSpec, dispersion_phase, phase_per_meter
from .errors import ConsistencyError, PreconditionError, ValidityError
from .grids import FrequencyGrid, wavelength_to_omega
from .greens import GreensFunction

LN2 = math.log(2.0)
# first-order theory is trusted while the local conversion probability stays below this
BORN_LIMIT = 0.05


@dataclass(frozen=True)
class PumpEnvelope:
    """Gaussian ``A0 exp(-2 ln2 (t-t0)^2/T^2) exp(i chirp (t-t0)^2)``; t in ps."""

    center_wavelength: float
    duration_fwhm: float
    chirp: float = 0.0
    peak_amplitude: float = 1.0
    delay: float = 0.0

    def __post_init__(self):
        if not self.duration_fwhm > 0:
            raise ValueError(f"pump duration must be > 0, got {self.duration_fwhm}")

    @property
    def gamma(self):
        """Complex Gaussian exponent: field is A0*exp(-gamma*(t-t0)**2)."""
        return 2 * LN2 / self.duration_fwhm**2 - 1j * self.chirp

    @property
    def omega(self):
        return float(wavelength_to_omega(self.center_wavelength))

    def field(self, t_ps):
        t = np.asarray(t_ps, dtype=float) - self.delay
        return self.peak_amplitude * np.exp(-self.gamma * t**2)

    def dispersed(self, gdd_ps2):
        """The same pulse after a spectral phase ``gdd*nu**2/2`` (nu in rad/ps).

        Spectral amplitude is unchanged; the pulse stretches, acquires a
        temporal chirp and its peak drops so that the energy is conserved.
        Only valid for an initially unchirped pump.
        """
        if self.chirp != 0:
            raise ValueError("dispersed() expects a transform-limited pump")
        a0 = 2 * LN2 / self.duration_fwhm**2
        denom = 1 / a0**2 + 4 * gdd_ps2**2
        a = (1 / a0) / denom
        chirp = -2 * gdd_ps2 / denom
        return replace(
            self,
            duration_fwhm=math.sqrt(2 * LN2 / a),
            chirp=chirp,
            peak_amplitude=self.peak_amplitude * (a / a0) ** 0.25,
        )

    def to_dict(self):
        return {
            "center_wavelength": self.center_wavelength,
            "duration_fwhm": self.duration_fwhm,
            "chirp": self.chirp,
            "peak_amplitude": self.peak_amplitude,
            "delay": self.delay,
        }


def bs_shift(pump_p: PumpEnvelope, pump_q: PumpEnvelope):
    """Frequency translation omega_p - omega_q (pump p annihilated, q created)."""
    return pump_p.omega - pump_q.omega


def pump_product(pump_p, pump_q, t_ps):
    """M(t) = P(t) conj(Q(t))."""
    return pump_p.field(t_ps) * np.conj(pump_q.field(t_ps))


def pump_product_spectrum(pump_p, pump_q, nu):
    """Closed-form ``integral M(t) exp(i nu t) dt`` in seconds, nu in rad/s."""
    nu_ps = np.asarray(nu, dtype=float) * 1e-12
    gp, gq = pump_p.gamma, np.conj(pump_q.gamma)
    tp, tq = pump_p.delay, pump_q.delay
    big_gamma = gp + gq
    b = 2 * (gp * tp + gq * tq)
    k = gp * tp**2 + gq * tq**2
    amp = pump_p.peak_amplitude * np.conj(pump_q.peak_amplitude)
    expo = (b + 1j * nu_ps) ** 2 / (4 * big_gamma) - k
    return amp * np.sqrt(np.pi / big_gamma) * np.exp(expo) * 1e-12


@dataclass(frozen=True)
class BsfwmSpec:
    """Active conversion section.

    coupling: rad/m per unit pump product; active_length: m; walkoff: ps/m
    for (input band, output band) relative to the pump-product frame;
    band_dispersion: intra-fiber dispersion per band (its ``length`` is
    ignored, the active length is used); coupling_profile: optional relative
    kappa(z) samples spread uniformly over [0, active_length].
    """

    pump_p: PumpEnvelope
    pump_q: PumpEnvelope
    shift: float
    coupling: float
    active_length: float
    band_dispersion: tuple = (None, None)
    walkoff: tuple = (0.0, 0.0)
    coupling_profile: tuple | None = None

    def __post_init__(self):
        if not self.coupling >= 0:
            raise ValueError("coupling must be >= 0")
        if not self.active_length >= 0:
            raise ValueError("active_length must be >= 0")
        object.__setattr__(self, "band_dispersion", tuple(self.band_dispersion))
        object.__setattr__(self, "walkoff", tuple(float(w) for w in self.walkoff))
        if self.coupling_profile is not None:
            object.__setattr__(self, "coupling_profile", tuple(float(x) for x in self.coupling_profile))
            if len(self.coupling_profile) < 2:
                raise ValueError("coupling_profile needs at least two samples")

    @property
    def is_dispersionless(self):
        return all(d is None or d.length == 0 or _is_flat(d) for d in self.band_dispersion) and not any(self.walkoff)

    def kappa(self, z):
        """kappa(z) in rad/m per unit pump product."""
        z = np.asarray(z, dtype=float)
        if self.coupling_profile is None:
            return np.full_like(z, self.coupling)
        prof = np.asarray(self.coupling_profile)
        zs = np.linspace(0.0, self.active_length, prof.size)
        return self.coupling * np.interp(z, zs, prof)

    def integrated_coupling(self, absolute=False):
        """int_0^L kappa(z) dz (of |kappa| when ``absolute``)."""
        if self.coupling_profile is None:
            return self.coupling * self.active_length
        prof = np.asarray(self.coupling_profile)
        if absolute:
            prof = np.abs(prof)
        zs = np.linspace(0.0, self.active_length, prof.size)
        return self.coupling * float(trapezoid(prof, zs))


def _is_flat(d: DispersionSpec):
    return d.dispersion_parameter_D == 0 and d.dispersion_slope == 0 and d.group_delay_per_length == 0


@dataclass(frozen=True)
class ConverterChain:
    """Passive input section, active conversion, passive output section (in that order)."""

    pre: DispersionSpec | None
    active: BsfwmSpec
    post: DispersionSpec | None


@dataclass(frozen=True, eq=False)
class BandTransfer:
    """All blocks of a two-band converter; each a density matrix like ``GreensFunction.values``.

    ``converted`` maps input band to output band, ``unconverted`` input to
    input.  A 1-D ``unconverted`` array holds the diagonal only (first-order
    models leave the input band untouched).  The split-step solver also fills
    the reverse blocks, which makes the full two-band operator available for
    unitarity checks.
    """

    in_grid: FrequencyGrid
    out_grid: FrequencyGrid
    converted: np.ndarray
    unconverted: np.ndarray
    back_converted: np.ndarray | None = None
    out_transmitted: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def greens(self, block="converted", label=""):
        if block == "converted":
            return GreensFunction(self.out_grid, self.in_grid, self.converted, label or "converted", dict(self.metadata))
        if block == "unconverted":
            return GreensFunction(self.in_grid, self.in_grid, self.unconverted_matrix(), label or "unconverted", dict(self.metadata))
        raise ValueError(f"unknown block {block!r}")

    def unconverted_matrix(self):
        u = np.asarray(self.unconverted)
        return np.diag(u) if u.ndim == 1 else u

    def full_operator(self):
        """Dimensionless 2N x 2N operator acting on (input band, output band) samples."""
        if self.back_converted is None:
            raise ValueError("reverse blocks are not available for this model")
        d = self.in_grid.spacing
        top = np.hstack([self.unconverted_matrix(), self.back_converted])
        bottom = np.hstack([self.converted, self.out_transmitted])
        return np.vstack([top, bottom]) * d

    def unitarity_defect(self):
        u = self.full_operator()
        return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def _detuning(spec, in_grid, out_grid):
    """Residual carrier offset between the band centers and the BS shift."""
    return out_grid.center_angular_frequency - in_grid.center_angular_frequency - spec.shift


def _check_shift(spec, in_grid, out_grid):
    target = in_grid.center_angular_frequency + spec.shift
    if not out_grid.contains(target):
        raise ValidityError("the BS shift maps the input-grid center outside the output grid")


def first_order_peak_conversion(spec):
    """Largest local conversion probability predicted by first-order theory."""
    peak = np.max(np.abs(pump_product(spec.pump_p, spec.pump_q, _pump_time_axis(spec))))
    return float((spec.integrated_coupling(absolute=True) * peak) ** 2)


def _check_born(spec):
    p = first_order_peak_conversion(spec)
    if p > BORN_LIMIT:
        raise PreconditionError(
            f"local conversion {p:.3g} exceeds the first-order limit {BORN_LIMIT}; use split_step_greens"
        )


def _pump_time_axis(spec):
    lo = min(spec.pump_p.delay - 3 * spec.pump_p.duration_fwhm, spec.pump_q.delay - 3 * spec.pump_q.duration_fwhm)
    hi = max(spec.pump_p.delay + 3 * spec.pump_p.duration_fwhm, spec.pump_q.delay + 3 * spec.pump_q.duration_fwhm)
    return np.linspace(lo, hi, 4001)


# relative magnitude below which the closed-form Gaussian kernel is set to exactly zero
SUPPORT_CUTOFF = 1e-12


def gaussian_pump_transfer(spec: BsfwmSpec, in_grid, out_grid, cutoff=SUPPORT_CUTOFF) -> BandTransfer:
    """Closed-form first-order model without dispersion or walk-off.

    converted = i*kappa_eff*Mt(nu_out - nu_in + delta)/(2*pi), unconverted = identity.
    Entries smaller than ``cutoff`` times the peak are zeroed so that wide
    grids give sparse kernels; pass ``cutoff=0`` for the untruncated form.
    """
    if not spec.is_dispersionless:
        raise ValidityError("closed-form model needs zero dispersion and walk-off; use split_step_greens or born_oracle_greens")
    _check_shift(spec, in_grid, out_grid)
    _check_born(spec)
    delta = _detuning(spec, in_grid, out_grid)
    nu = out_grid.offsets[:, None] - in_grid.offsets[None, :] + delta
    conv = 1j * spec.integrated_coupling() * pump_product_spectrum(spec.pump_p, spec.pump_q, nu) / (2 * np.pi)
    mag = np.abs(conv)
    if cutoff > 0 and mag.size:
        conv[mag < cutoff * mag.max()] = 0.0
    unconv = np.full(in_grid.count, 1.0 / in_grid.spacing, dtype=complex)
    return BandTransfer(in_grid, out_grid, conv, unconv, metadata={"model": "closed_form"})


def gaussian_pump_greens(spec: BsfwmSpec, in_grid, out_grid) -> GreensFunction:
    return gaussian_pump_transfer(spec, in_grid, out_grid).greens("converted", "closed-form BS-FWM")


def band_phase_rates(spec: BsfwmSpec, in_grid, out_grid):
    """Per-metre phases (rad/m) of the input and output bands on their grids."""
    wa, wb = spec.walkoff
    da, db = spec.band_dispersion
    rate_a = wa * 1e-12 * in_grid.offsets + phase_per_meter(da, in_grid.omega)
    rate_b = wb * 1e-12 * out_grid.offsets + phase_per_meter(db, out_grid.omega)
    return rate_a, rate_b


def simpson_weights(n, h):
    if n < 3 or n % 2 == 0:
        raise ValueError("composite Simpson needs an odd number of nodes >= 3")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


# largest phase-mismatch advance (rad) allowed between Born quadrature nodes
BORN_STEP_PHASE = 0.05


def born_nodes(spec: BsfwmSpec, in_grid, out_grid, minimum=401):
    """Odd Simpson node count: at least ``minimum`` and fine enough for the band phases."""
    rate_a, rate_b = band_phase_rates(spec, in_grid, out_grid)
    spread = (np.max(rate_a) - np.min(rate_b)) if rate_a.size else 0.0
    spread = max(abs(spread), abs(np.min(rate_a) - np.max(rate_b)))
    need = int(math.ceil(spread * spec.active_length / BORN_STEP_PHASE)) + 1
    n = max(int(minimum), need)
    return n if n % 2 else n + 1


def born_oracle_greens(spec: BsfwmSpec, in_grid, out_grid, nodes=401) -> GreensFunction:
    """First-order interaction integral over z by composite Simpson quadrature.

    G = i/(2 pi) Mt(nu_o - nu_i + delta) exp(i phi_b L) * int_0^L kappa(z) exp(i (phi_a - phi_b) z) dz

    ``nodes`` is a lower bound; strong walk-off or dispersion raises it so
    that the mismatch phase advances by at most BORN_STEP_PHASE per node.
    """
    if nodes < 401:
        raise ValueError("the oracle uses at least 401 quadrature nodes")
    nodes = born_nodes(spec, in_grid, out_grid, nodes)
    _check_shift(spec, in_grid, out_grid)
    _check_born(spec)
    L = spec.active_length
    delta = _detuning(spec, in_grid, out_grid)
    nu = out_grid.offsets[:, None] - in_grid.offsets[None, :] + delta
    mt = pump_product_spectrum(spec.pump_p, spec.pump_q, nu)
    if L == 0:
        return GreensFunction(out_grid, in_grid, np.zeros_like(mt), "born oracle")
    rate_a, rate_b = band_phase_rates(spec, in_grid, out_grid)
    mismatch = rate_a[None, :] - rate_b[:, None]
    zs = np.linspace(0.0, L, nodes)
    w = simpson_weights(nodes, zs[1] - zs[0]) * spec.kappa(zs)
    acc = np.zeros(mismatch.shape, dtype=complex)
    for z, wz in zip(zs, w):
        acc += wz * np.exp(1j * mismatch * z)
    g = 1j / (2 * np.pi) * mt * np.exp(1j * rate_b * L)[:, None] * acc
    return GreensFunction(out_grid, in_grid, g, "born oracle", {"model": "born", "nodes": nodes})


# --- split-step ---------------------------------------------------------------

@dataclass(frozen=True)
class _SplitStepPlan:
    n_steps: int
    dz: float
    half_a: np.ndarray
    half_b: np.ndarray
    m_eff: np.ndarray
    kappa_mid: np.ndarray


def _plan(spec, in_grid, out_grid, dz):
    if not in_grid.is_compatible(out_grid):
        raise PreconditionError("split-step needs input and output grids with equal spacing and count")
    _check_shift(spec, in_grid, out_grid)
    L = spec.active_length
    n = in_grid.count
    if L == 0:
        n_steps, dz = 0, 0.0
    else:
        if dz > L / 100 * (1 + 1e-12):
            raise PreconditionError(f"dz={dz} m is coarser than active_length/100")
        n_steps = max(1, int(math.ceil(L / dz - 1e-9)))
        dz = L / n_steps
    dt_ps = 2 * np.pi / (n * in_grid.spacing) * 1e12
    # everything is kept in FFT order: frequencies ifftshift-ed, times 0..N/2-1, -N/2..-1
    t = np.fft.ifftshift((np.arange(n) - n // 2) * dt_ps)
    delta = _detuning(spec, in_grid, out_grid)
    m_eff = pump_product(spec.pump_p, spec.pump_q, t) * np.exp(1j * delta * 1e-12 * t)
    rate_a, rate_b = band_phase_rates(spec, in_grid, out_grid)
    zmid = (np.arange(n_steps) + 0.5) * dz
    return _SplitStepPlan(
        n_steps,
        dz,
        np.fft.ifftshift(np.exp(0.5j * rate_a * dz)),
        np.fft.ifftshift(np.exp(0.5j * rate_b * dz)),
        m_eff,
        spec.kappa(zmid),
    )


def _propagate(plan, a, b, record_norms=False, d_omega=1.0):
    """Strang splitting: half linear, exact 2x2 rotation in time, half linear.

    ``a``/``b`` are (N, ncols) frequency-sample arrays in centered order.
    """
    norms = []
    a = np.fft.ifftshift(a, axes=0)
    b = np.fft.ifftshift(b, axes=0)
    ha = plan.half_a[:, None]
    hb = plan.half_b[:, None]
    mag = np.abs(plan.m_eff)[:, None]
    ph = np.exp(1j * np.angle(plan.m_eff))[:, None]
    if record_norms:
        norms.append(np.sum(np.abs(a) ** 2 + np.abs(b) ** 2, axis=0) * d_omega)
    for k in range(plan.n_steps):
        a = a * ha
        b = b * hb
        at = sfft.fft(a, axis=0, norm="ortho")
        bt = sfft.fft(b, axis=0, norm="ortho")
        theta = plan.kappa_mid[k] * mag * plan.dz
        cs, sn = np.cos(theta), np.sin(theta)
        at, bt = cs * at + 1j * sn * np.conj(ph) * bt, 1j * sn * ph * at + cs * bt
        a = sfft.ifft(at, axis=0, norm="ortho") * ha
        b = sfft.ifft(bt, axis=0, norm="ortho") * hb
        if record_norms:
            norms.append(np.sum(np.abs(a) ** 2 + np.abs(b) ** 2, axis=0) * d_omega)
    a = np.fft.fftshift(a, axes=0)
    b = np.fft.fftshift(b, axes=0)
    return (a, b, np.array(norms)) if record_norms else (a, b)


def split_step_fields(spec, in_grid, out_grid, dz, a0, b0=None):
    """Propagate given input/output band amplitudes; returns (a, b, norms per step)."""
    plan = _plan(spec, in_grid, out_grid, dz)
    a0 = np.asarray(a0, dtype=complex).reshape(in_grid.count, -1)
    b0 = np.zeros_like(a0) if b0 is None else np.asarray(b0, dtype=complex).reshape(in_grid.count, -1)
    return _propagate(plan, a0, b0, record_norms=True, d_omega=in_grid.spacing)


def _padded(grid: FrequencyGrid, pad):
    return FrequencyGrid(grid.center_angular_frequency, grid.spacing, grid.count + 2 * pad, grid.label)


def split_step_transfer(spec: BsfwmSpec, in_grid, out_grid, dz, threads=1, unitarity_tol=1e-5, guard=0.0) -> BandTransfer:
    """Full two-band transfer by propagating every basis vector of both bands.

    The FFT makes the time window periodic, so without a guard band light
    converted beyond one edge of the output band re-enters at the other.
    ``guard`` pads both bands by that fraction of their count on each side
    during propagation; the blocks are cropped back afterwards.  With
    ``guard=0`` the two-band operator is exactly unitary and is checked to
    ``unitarity_tol``; with a guard band the cropped operator may only lose
    norm (to the guard), which is checked instead.

    Columns are independent; they are split into fixed chunks and assembled by
    column index, so the result does not depend on ``threads``.
    """
    if guard < 0:
        raise ValueError("guard must be >= 0")
    n = in_grid.count
    pad = int(math.ceil(guard * n))
    plan = _plan(spec, _padded(in_grid, pad), _padded(out_grid, pad), dz)
    big = n + 2 * pad
    inner = np.arange(pad, pad + n)
    sources = np.concatenate([inner, big + inner])
    chunks = [sources[i : i + 64] for i in range(0, 2 * n, 64)]

    def run(cols):
        eye = np.zeros((2 * big, cols.size), dtype=complex)
        eye[cols, np.arange(cols.size)] = 1.0
        a, b = _propagate(plan, eye[:big], eye[big:])
        return a[inner], b[inner]

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(c) for c in chunks]
    u = np.empty((2 * n, 2 * n), dtype=complex)
    for i, (a, b) in zip(range(0, 2 * n, 64), results):
        sl = slice(i, i + a.shape[1])
        u[:n, sl] = a
        u[n:, sl] = b
    d = in_grid.spacing
    transfer = BandTransfer(
        in_grid,
        out_grid,
        converted=u[n:, :n] / d,
        unconverted=u[:n, :n] / d,
        back_converted=u[:n, n:] / d,
        out_transmitted=u[n:, n:] / d,
        metadata={"model": "split_step", "dz": plan.dz, "steps": plan.n_steps, "guard_points": pad},
    )
    gram = u.conj().T @ u - np.eye(2 * n)
    if pad == 0:
        defect = float(np.max(np.abs(gram)))
        if defect > unitarity_tol:
            raise ConsistencyError(f"split-step operator is not unitary (defect {defect:.3g})")
    else:
        # cropping can only remove norm: eigenvalues of U^H U must stay <= 1
        top = float(np.max(np.linalg.eigvalsh(gram)))
        if top > unitarity_tol:
            raise ConsistencyError(f"cropped split-step operator amplifies (excess {top:.3g})")
        defect = float(np.max(np.abs(gram)))
    transfer.metadata["unitarity_defect"] = defect
    return transfer


def split_step_greens(spec: BsfwmSpec, in_grid, out_grid, dz, threads=1, guard=0.0) -> GreensFunction:
    return split_step_transfer(spec, in_grid, out_grid, dz, threads, guard=guard).greens("converted", "split-step BS-FWM")


# --- composition --------------------------------------------------------------

def active_transfer(spec, in_grid, out_grid, dz=None, model="auto", threads=1, guard=0.0):
    if model == "auto":
        small = first_order_peak_conversion(spec) <= BORN_LIMIT
        model = "closed_form" if spec.is_dispersionless and small else "split_step"
    if model == "closed_form":
        return gaussian_pump_transfer(spec, in_grid, out_grid)
    if model == "split_step":
        if dz is None:
            dz = spec.active_length / 1000 if spec.active_length > 0 else 1.0
        return split_step_transfer(spec, in_grid, out_grid, dz, threads, guard=guard)
    if model == "born":
        g = born_oracle_greens(spec, in_grid, out_grid)
        unconv = np.full(in_grid.count, 1.0 / in_grid.spacing, dtype=complex)
        return BandTransfer(in_grid, out_grid, g.values, unconv, metadata={"model": "born"})
    raise ValueError(f"unknown model {model!r}")


def passive_phase(spec: DispersionSpec | None, grid):
    if spec is None or spec.length == 0:
        return None
    return dispersion_phase(spec, grid)


def chain_transfer(chain: ConverterChain, in_grid, out_grid, dz=None, model="auto", threads=1, guard=0.0) -> BandTransfer:
    """Active transfer sandwiched between the passive sections.

    The converted block becomes diag(exp(i phi_post)) G diag(exp(i phi_pre));
    the unconverted block sees the pre-section only (the post section
    belongs to the output band).
    """
    t = active_transfer(chain.active, in_grid, out_grid, dz, model, threads, guard)
    pre = passive_phase(chain.pre, in_grid)
    post = passive_phase(chain.post, out_grid)
    conv = t.converted
    unconv = t.unconverted
    if pre is not None:
        e = np.exp(1j * pre)
        conv = conv * e[None, :]
        unconv = unconv * e if np.ndim(unconv) == 1 else unconv * e[None, :]
    if post is not None:
        conv = np.exp(1j * post)[:, None] * conv
    meta = dict(t.metadata)
    return BandTransfer(in_grid, out_grid, conv, unconv, metadata=meta)


def chain_greens(chain: ConverterChain, in_grid, out_grid, dz=None, model="auto", threads=1, guard=0.0) -> GreensFunction:
    return chain_transfer(chain, in_grid, out_grid, dz, model, threads, guard).greens("converted", "converter chain")
