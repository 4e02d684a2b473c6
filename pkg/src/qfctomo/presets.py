"""Named defaults: noise profiles and bundled configurations."""

from __future__ import annotations

import json
from importlib import resources

# additive sigma (fraction of the dataset peak) and shot-to-shot gain jitter.
# "experiment-like" is calibrated by scripts/calibrate_noise.py so that the
# validation chain gives a group-delay fit residual near 34 ps; re-run the
# script after changing the validation configuration.
NOISE_PROFILES = {
    "none": {"additive_sigma": 0.0, "multiplicative_sigma": 0.0},
    "experiment-like": {"additive_sigma": 0.05, "multiplicative_sigma": 0.4},
}

BUNDLED = ("fig1_unchirped", "fig1_chirped", "validation", "validation_noisy", "zero_length")


def noise_profile(name):
    try:
        return dict(NOISE_PROFILES[name])
    except KeyError:
        raise KeyError(f"unknown noise profile {name!r}; choose from {sorted(NOISE_PROFILES)}") from None


def bundled_config_path(name):
    """Filesystem path of a bundled config (name with or without .json)."""
    stem = name[:-5] if name.endswith(".json") else name
    if stem not in BUNDLED:
        raise KeyError(f"no bundled config {name!r}; choose from {list(BUNDLED)}")
    return resources.files("qfctomo").joinpath("configs", f"{stem}.json")


def bundled_config(name):
    return json.loads(bundled_config_path(name).read_text())
