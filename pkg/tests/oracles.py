"""Independent reference computations used as test oracles.

Each function recomputes a quantity from first principles with plain loops
or closed-form expressions, without calling the code under test.
"""

import math

import numpy as np

C_NM_PER_S = 299792458e9
LN2 = math.log(2.0)


def grid_index(grid, omega):
    """Index of a grid point, asserting it is exactly (to 1e-6 spacing) on grid."""
    f = (omega - grid.omega[0]) / grid.spacing
    k = int(round(f))
    assert abs(f - k) < 1e-6 and 0 <= k < grid.count
    return k


def direct_sideband(g, centers, shear):
    """G(w_out, w0 + shear/2) conj(G(w_out, w0 - shear/2)) and the dc term, per center."""
    coef = np.empty((len(centers), g.out_grid.count), complex)
    dc = np.empty((len(centers), g.out_grid.count))
    for i, c in enumerate(centers):
        up = g.values[:, grid_index(g.in_grid, c + shear / 2)]
        lo = g.values[:, grid_index(g.in_grid, c - shear / 2)]
        coef[i] = up * np.conj(lo)
        dc[i] = abs(up) ** 2 + abs(lo) ** 2
    return coef, dc


def two_tone_trace(g_plus, g_minus, shear, delays_ps, amplitude=1.0):
    """|a0/sqrt2 (G+ e^{i shear tau/2} + G- e^{-i shear tau/2})|^2, summed field form."""
    out = []
    for t in np.asarray(delays_ps) * 1e-12:
        field = (g_plus * np.exp(0.5j * shear * t) + g_minus * np.exp(-0.5j * shear * t)) * amplitude / math.sqrt(2)
        out.append(abs(field) ** 2)
    return np.stack(out, axis=-1)


def lstsq_beat(delays_ps, y, shear):
    """Complex beat coefficient c with y ~ c0 + 2 Re(c exp(i shear tau)), by normal equations."""
    t = np.asarray(delays_ps) * 1e-12
    x = np.column_stack([np.ones_like(t), 2 * np.cos(shear * t), -2 * np.sin(shear * t)])
    sol = np.linalg.solve(x.T @ x, x.T @ y)
    return sol[0], sol[1] + 1j * sol[2]


def dispersion_delay_slope(d_ps_nm_km, length_km):
    """Group-delay slope of a fiber in ps/nm (first order in wavelength)."""
    return d_ps_nm_km * length_km


def direct_time_transform(freq_offsets, values, spacing, t_ps):
    """f(t) = (2 pi)^-1/2 sum_k f_k exp(-i w_k t) dw, evaluated sample by sample."""
    t = np.asarray(t_ps) * 1e-12
    out = np.zeros(t.size, complex)
    for w, v in zip(freq_offsets, values):
        out += v * np.exp(-1j * w * t)
    return out * spacing / math.sqrt(2 * math.pi)


def gaussian_tbp():
    """Intensity FWHM duration-bandwidth product of a transform-limited Gaussian."""
    return 2 * LN2 / math.pi


def chirp_broadening(fwhm_ps, gdd_ps2):
    """Duration stretch of a Gaussian pulse after a spectral phase gdd*nu^2/2."""
    return math.sqrt(1 + (4 * LN2 * gdd_ps2 / fwhm_ps**2) ** 2)


def power_iteration(w, iters=2000, seed=1):
    """Largest singular value of a matrix by power iteration on W^H W."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(w.shape[1]) + 1j * rng.standard_normal(w.shape[1])
    v /= np.linalg.norm(v)
    s = 0.0
    for _ in range(iters):
        u = w.conj().T @ (w @ v)
        s_new = np.linalg.norm(u)
        v = u / s_new
        if abs(s_new - s) <= 1e-15 * s_new:
            break
        s = s_new
    return float(np.linalg.norm(w @ v))


def wrapped(x):
    return np.angle(np.exp(1j * np.asarray(x)))
