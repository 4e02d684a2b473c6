"""Unchirped vs chirped pump: phase flatness, Schmidt modes and the efficiency loss.

Also scans the pump GDD to show the ratio falling as the chirp grows.
"""

import argparse
import json

from qfctomo.cli import greens_report, simulate
from qfctomo.config import config_from_dict
from qfctomo.modes import optimal_efficiency_study
from qfctomo.presets import bundled_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gdd", type=float, nargs="*", default=[5.0, 10.0, 20.0, 40.0], help="pump GDD scan in ps^2")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    gu = simulate(config_from_dict(bundled_config("fig1_unchirped")), args.threads)
    gc = simulate(config_from_dict(bundled_config("fig1_chirped")), args.threads)
    ru, rc = greens_report(gu), greens_report(gc)
    keep = ("phase_flatness_rad", "schmidt_number", "optimal_efficiency", "leading_mode_duration_ps")
    print("unchirped", json.dumps({k: ru[k] for k in keep}))
    print("chirped  ", json.dumps({k: rc[k] for k in keep}))
    print("curvature", json.dumps(rc["phase_curvature"]))
    print("study    ", json.dumps(optimal_efficiency_study(gu, gc).to_dict()))

    raw = bundled_config("fig1_chirped")
    for gdd in args.gdd:
        raw["chain"]["active"]["pump_p"]["gdd_ps2"] = gdd
        g = simulate(config_from_dict(raw), args.threads)
        print(f"gdd {gdd:6.1f} ps^2  ratio {optimal_efficiency_study(gu, g).ratio:.4f}")


if __name__ == "__main__":
    main()
