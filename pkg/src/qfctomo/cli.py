"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 data or consistency error,
4 numerical tolerance not met.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .config import ExperimentConfig, load_config
from .errors import ConfigError, ConsistencyError, FormatError, GridMismatchError, PreconditionError, QfcError, ValidityError
from .greens import GreensFunction
from .measure import DelaySweepDataset, synthesize_sweep
from .modes import (
    compare_gauge_invariant,
    mode_phase_flatness,
    optimal_efficiency_study,
    phase_curvature,
    phase_flatness,
    schmidt,
    time_domain_mode,
)
from .recon import Reconstruction, ReconSettings, reconstruct
from .sim import chain_transfer

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_TOLERANCE = 0, 2, 3, 4
log = logging.getLogger("qfctomo")


class ToleranceFailure(QfcError):
    """A configured acceptance limit was not met."""


# --- helpers ---------------------------------------------------------------------------

def _threads(n):
    if n == 0:
        return os.cpu_count() or 1
    return max(1, n)


def _config(args) -> ExperimentConfig:
    if not args.config:
        raise ConfigError("", "this command needs --config")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _resolve(args, p):
    """Input path: as given if it exists, otherwise relative to --out."""
    p = Path(p)
    if p.is_absolute() or p.exists():
        return p
    return Path(args.out) / p


def _fig3b(ds: DelaySweepDataset, path, probe_nm=1555.5):
    i = int(np.argmin(np.abs(ds.center_wavelengths_nm - probe_nm)))
    lam = ds.out_grid.wavelength_nm
    grid_l, grid_t = np.meshgrid(lam, ds.delays, indexing="ij")
    io.write_long_csv(path, {"lambda_out_nm": grid_l, "delay_ps": grid_t, "intensity": ds.intensities[i]})


def _fig4a(rec: Reconstruction, path):
    gd = rec.group_delay
    ok = gd.valid
    fit = gd.slope * gd.center_wavelength_nm + gd.intercept
    io.write_long_csv(
        path,
        {
            "lambda_probe_nm": gd.center_wavelength_nm[ok],
            "tau_g_ps": gd.band_average[ok],
            "spread_ps": gd.rms[ok],
            "fit_ps": fit[ok],
        },
    )


def _fig1a(g: GreensFunction, path, support=1e-3):
    mag = g.magnitude
    sel = mag >= support * mag.max()
    li, lo = np.meshgrid(g.in_grid.wavelength_nm, g.out_grid.wavelength_nm)
    io.write_long_csv(
        path,
        {"lambda_in_nm": li[sel], "lambda_out_nm": lo[sel], "magnitude": mag[sel], "phase": np.angle(g.values)[sel]},
    )


def _summary_lines(rows):
    width = max(len(r[0]) for r in rows)
    return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


# --- steps ----------------------------------------------------------------------------

def simulate(cfg: ExperimentConfig, threads=1) -> GreensFunction:
    t = chain_transfer(cfg.converter_chain(), cfg.in_grid(), cfg.band_grid(), cfg.chain.active.dz, cfg.chain.active.model, threads, cfg.chain.active.guard)
    label = cfg.name or "simulated"
    g = t.greens(cfg.chain.block, label)
    meta = dict(g.metadata)
    meta["config"] = cfg.to_dict()
    return GreensFunction(g.out_grid, g.in_grid, g.values, g.label, meta)


def synth(cfg: ExperimentConfig, g: GreensFunction, threads=1) -> DelaySweepDataset:
    shear = cfg.shear()
    return synthesize_sweep(
        g,
        cfg.probe_centers(shear),
        cfg.delays(),
        shear,
        cfg.noise_spec(),
        cfg.detector.osa_fwhm_nm,
        cfg.detector.averages,
        cfg.probe.amplitude,
        threads,
    )


def greens_report(g: GreensFunction):
    d = schmidt(g, rank=4)
    lead = d.input_modes[0]
    curv = phase_curvature(g.in_grid, g.out_grid, g.values)
    rep = {
        "label": g.label,
        "max_magnitude": float(g.magnitude.max()),
        "phase_flatness_rad": phase_flatness(g.in_grid, g.out_grid, g.values),
        "phase_curvature": curv,
        "schmidt_number": d.schmidt_number,
        "singular_values": d.singular_values.tolist(),
        "optimal_efficiency": float(d.singular_values[0] ** 2),
        "leading_mode_phase_flatness_rad": mode_phase_flatness(lead),
    }
    if g.in_grid.count <= 4096:
        rep["leading_mode_duration_ps"] = time_domain_mode(lead, 4 * g.in_grid.count).fwhm_ps()
    return rep


def check_tolerances(cfg: ExperimentConfig, rec: Reconstruction, metrics=None):
    """[(name, value, limit, passed)] for every configured limit."""
    tol = cfg.tolerances
    gd = rec.group_delay
    out = []
    if tol.expected_slope_ps_per_nm is not None and tol.slope_tolerance_ps_per_nm is not None:
        err = abs(gd.slope - tol.expected_slope_ps_per_nm)
        out.append(("slope_error_ps_per_nm", err, tol.slope_tolerance_ps_per_nm, bool(err <= tol.slope_tolerance_ps_per_nm)))
    if tol.sigma_tau_target_ps is not None:
        lo, hi = tol.sigma_tau_target_ps / tol.sigma_tau_factor, tol.sigma_tau_target_ps * tol.sigma_tau_factor
        out.append(("sigma_tau_ps", gd.sigma_tau, [lo, hi], bool(lo <= gd.sigma_tau <= hi)))
    if tol.max_phase_rmse_rad is not None and metrics is not None:
        r = metrics.phase_rmse
        out.append(("phase_rmse_rad", r, tol.max_phase_rmse_rad, bool(np.isfinite(r) and r <= tol.max_phase_rmse_rad)))
    return out


# --- subcommands ----------------------------------------------------------------------

def cmd_simulate(args):
    cfg = _config(args)
    g = simulate(cfg, _threads(args.threads))
    path = io.write_greens(g, Path(args.out) / "greens.json")
    print(f"wrote {path} ({np.count_nonzero(g.values)} nonzero entries)")
    return EXIT_OK


def cmd_synth(args):
    cfg = _config(args)
    g = io.read_greens(_resolve(args, args.greens))
    ds = synth(cfg, g, _threads(args.threads))
    d = io.write_sweep(ds, Path(args.out) / "sweep")
    _fig3b(ds, Path(args.out) / "fig3b.csv")
    print(f"wrote {d} ({ds.probe_centers.size} centers x {ds.delays.size} delays)")
    return EXIT_OK


def _recon_settings(args):
    return load_config(args.config).recon_settings() if args.config else ReconSettings()


def _write_reconstruction(rec: Reconstruction, out):
    summary = rec.group_delay.to_dict()
    summary["sideband_fraction"] = rec.sideband_fraction
    d = io.write_recon(rec.greens, Path(out) / "recon", summary)
    _fig4a(rec, Path(out) / "fig4a.csv")
    return d


def cmd_reconstruct(args):
    ds = io.ingest_sweep(_resolve(args, args.dataset))
    rec = reconstruct(ds, _recon_settings(args))
    d = _write_reconstruction(rec, args.out)
    gd = rec.group_delay
    print(f"wrote {d}: slope {gd.slope:.4f} +- {gd.slope_stderr:.4f} ps/nm, sigma_tau {gd.sigma_tau:.2f} ps")
    return EXIT_OK


def cmd_analyze(args):
    p = _resolve(args, args.path)
    if p.is_dir():
        rg = io.read_recon(p)
        rep = {"kind": "reconstruction", "summary": io.recon_summary(p), "masked_in": int(rg.mask.sum()),
               "split_rows": rg.metadata.get("split_rows", []), "undersampled": rg.metadata.get("undersampled")}
    else:
        g = io.read_greens(p)
        rep = {"kind": "greens", **greens_report(g)}
        _fig1a(g, Path(args.out) / "fig1a.csv")
        if args.chirped:
            gc = io.read_greens(_resolve(args, args.chirped))
            rep["chirped"] = greens_report(gc)
            rep["efficiency_study"] = optimal_efficiency_study(g, gc).to_dict()
            rep["chirped_magnitude_change"] = float(np.max(np.abs(gc.magnitude - g.magnitude)) / g.magnitude.max())
    path = io.write_json(Path(args.out) / "report.json", rep)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_compare(args):
    rg = io.read_recon(_resolve(args, args.recon))
    truth = io.read_greens(_resolve(args, args.truth))
    m = compare_gauge_invariant(rg, truth)
    io.write_json(Path(args.out) / "metrics.json", m.to_dict())
    print(_summary_lines([(k, v) for k, v in m.to_dict().items()]))
    if args.config:
        limit = load_config(args.config).tolerances.max_phase_rmse_rad
        if limit is not None and not m.phase_rmse <= limit:
            raise ToleranceFailure(f"phase RMSE {m.phase_rmse:.4g} rad exceeds {limit}")
    return EXIT_OK


def run_pipeline(cfg: ExperimentConfig, out, threads=1, write=True):
    """simulate -> synth -> reconstruct -> compare; returns the summary dict."""
    t0 = time.perf_counter()
    g = simulate(cfg, threads)
    ds = synth(cfg, g, threads)
    rec = reconstruct(ds, cfg.recon_settings())
    metrics = compare_gauge_invariant(rec.greens, g)
    checks = check_tolerances(cfg, rec, metrics)
    gd = rec.group_delay
    summary = {
        "config": cfg.name,
        "seed": cfg.seed,
        "shear_hz": ds.shear / (2 * np.pi),
        "probe_centers": int(ds.probe_centers.size),
        **gd.to_dict(),
        "phase_rmse_rad": metrics.phase_rmse,
        "magnitude_correlation": metrics.magnitude_correlation,
        "sideband_fraction": rec.sideband_fraction,
        "checks": [{"name": n, "value": v, "limit": lim, "pass": ok} for n, v, lim, ok in checks],
        "pass": all(ok for *_, ok in checks),
    }
    if write:
        out = Path(out)
        io.write_greens(g, out / "greens.json")
        io.write_sweep(ds, out / "sweep")
        _fig3b(ds, out / "fig3b.csv")
        _write_reconstruction(rec, out)
        io.write_json(out / "metrics.json", metrics.to_dict())
    summary["runtime_s"] = time.perf_counter() - t0
    if write:
        io.write_json(Path(out) / "summary.json", summary)
    return summary


def cmd_pipeline(args):
    cfg = _config(args)
    s = run_pipeline(cfg, args.out, _threads(args.threads))
    rows = [
        ("slope [ps/nm]", f"{s['slope_ps_per_nm']:.4f} +- {s['slope_stderr_ps_per_nm']:.4f}"),
        ("sigma_tau [ps]", f"{s['sigma_tau_ps']:.3f}"),
        ("phase RMSE [rad]", f"{s['phase_rmse_rad']:.3g}"),
        ("magnitude corr", f"{s['magnitude_correlation']:.6f}"),
        ("runtime [s]", f"{s['runtime_s']:.2f}"),
    ]
    for c in s["checks"]:
        rows.append((c["name"], f"{'PASS' if c['pass'] else 'FAIL'}  value={c['value']:.4g} limit={c['limit']}"))
    print(_summary_lines(rows))
    return EXIT_OK if s["pass"] else EXIT_TOLERANCE


# --- parser -----------------------------------------------------------------------------

def _add_globals(p, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", default=d(None), help="experiment config JSON")
    p.add_argument("--out", default=d("."), help="output directory (default: current directory)")
    p.add_argument("--seed", type=int, default=d(None), help="override the config seed (unsigned 64-bit)")
    p.add_argument("--threads", type=int, default=d(1), help="worker threads, 0 = all cores")
    p.add_argument("--verbose", action="store_true", default=d(False))


def build_parser():
    parser = argparse.ArgumentParser(prog="qfctomo", description="Two-tone tomography of frequency converters.")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _add_globals(common, suppress=True)

    sub.add_parser("simulate", parents=[common], help="ground-truth Green's function from a config").set_defaults(func=cmd_simulate)
    p = sub.add_parser("synth", parents=[common], help="synthesize a delay sweep")
    p.add_argument("greens", nargs="?", default="greens.json")
    p.set_defaults(func=cmd_synth)
    p = sub.add_parser("reconstruct", parents=[common], help="reconstruct from a sweep directory")
    p.add_argument("dataset", nargs="?", default="sweep")
    p.set_defaults(func=cmd_reconstruct)
    p = sub.add_parser("analyze", parents=[common], help="report on a Green's function or reconstruction")
    p.add_argument("path")
    p.add_argument("--chirped", help="second Green's function for the efficiency study")
    p.set_defaults(func=cmd_analyze)
    p = sub.add_parser("compare", parents=[common], help="gauge-invariant metrics against ground truth")
    p.add_argument("recon", nargs="?", default="recon")
    p.add_argument("truth", nargs="?", default="greens.json")
    p.set_defaults(func=cmd_compare)
    sub.add_parser("pipeline", parents=[common], help="simulate, synth, reconstruct and compare").set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    Path(args.out).mkdir(parents=True, exist_ok=True)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ToleranceFailure as e:
        print(f"tolerance failure: {e}", file=sys.stderr)
        return EXIT_TOLERANCE
    except (FormatError, ConsistencyError, GridMismatchError, PreconditionError, ValidityError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
