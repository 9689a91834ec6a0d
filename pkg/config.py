# config.py
"""
Configuration settings and default parameters for the landscape explorer.
Bare invocations of every subcommand reproduce the study's settings.
"""

import json
import os

# System
DEFAULT_GAP = 1.0

# Landscape scans (two time slots)
DEFAULT_HALF_WIDTH = 2.0
DEFAULT_RESOLUTION = 401

# Seeding
DEFAULT_N_SEEDS = 1000
DEFAULT_MASTER_SEED = 0
DEFAULT_DISTANCE_AMPLITUDE = 1.0  # A for distance and R experiments
DEFAULT_TRAP_AMPLITUDE = 50.0     # A for trapping experiments
DEFAULT_TRAP_THRESHOLD = 0.99

TOOL_VERSION = "1.0.0"

# Steepest ascent
DEFAULT_MAX_ITERATIONS = 100_000
DEFAULT_GRAD_TOLERANCE = 1e-8
DEFAULT_SUCCESS_DELTA = 1e-6
DEFAULT_INITIAL_STEP = 1.0
DEFAULT_BACKTRACK_FACTOR = 0.5
DEFAULT_MIN_STEP = 1e-14
DEFAULT_ARMIJO_C = 1e-4

# Sweep axes
DEFAULT_T_RATIOS = [0.2, 0.4, 0.6, 0.8, 0.9, 1.0, 1.1, 1.2, 1.5, 2.0, 3.0]
DEFAULT_NTS_LIST = [10, 20, 30, 100]
DEFAULT_TRAP_NTS_LIST = [10, 30, 100, 300]
DEFAULT_TRAP_T_RATIOS = [1.0, 2.0, 5.0]

OUTPUT_DIR_ENV = "LZ_LANDSCAPE_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "results"

# Keys accepted in a JSON config file (flag names with underscores)
CONFIG_KEYS = {
    "t_ratio", "t_ratios", "nts", "nts_list", "half_width", "resolution",
    "gap", "amplitude", "seed", "master_seed", "n_seeds", "experiment",
    "threshold", "jobs", "out", "out_dir", "zero_seed",
    "max_iterations", "grad_tolerance", "success_delta", "initial_step",
    "backtrack_factor", "min_step", "armijo_c",
}


class ConfigError(ValueError):
    """Raised when a config file holds keys or values we cannot use."""


def output_dir():
    """Default output directory, overridable through the environment."""
    return os.environ.get(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_DIR)


def load_config_file(path):
    """
    Load a JSON config file whose keys mirror the command-line flags.
    Dashes and underscores are interchangeable in key names.
    """
    try:
        with open(path, encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from e

    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")

    settings = {}
    for key, value in raw.items():
        name = key.replace("-", "_")
        if name not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key '{key}' in {path}")
        settings[name] = value
    return settings
