# ui.py
"""
Console layer: command-line parsing, result printing and progress bars.
No physics happens here; main.py coordinates the services.
"""

import argparse
import json
import sys

from tqdm import tqdm

from config import (
    DEFAULT_ARMIJO_C, DEFAULT_BACKTRACK_FACTOR, DEFAULT_DISTANCE_AMPLITUDE, DEFAULT_GAP,
    DEFAULT_GRAD_TOLERANCE, DEFAULT_HALF_WIDTH, DEFAULT_INITIAL_STEP, DEFAULT_MASTER_SEED,
    DEFAULT_MAX_ITERATIONS, DEFAULT_MIN_STEP, DEFAULT_N_SEEDS, DEFAULT_NTS_LIST,
    DEFAULT_RESOLUTION, DEFAULT_SUCCESS_DELTA, DEFAULT_T_RATIOS, DEFAULT_TRAP_AMPLITUDE,
    DEFAULT_TRAP_NTS_LIST, DEFAULT_TRAP_T_RATIOS, DEFAULT_TRAP_THRESHOLD,
    load_config_file, output_dir,
)

EXPERIMENTS = ("distance", "traps", "rmetric")


# ---------------------------------------------------------------------------
# Flag value types
# ---------------------------------------------------------------------------

def positive_float(text):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text!r}")
    return value


def unit_interval(text):
    value = positive_float(text)
    if not value < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text!r}")
    return value


def threshold_float(text):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not 0 <= value <= 1:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text!r}")
    return value


def non_negative_float(text):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text!r}")
    return value


def positive_int(text):
    try:
        value = int(text)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {text!r}")
    return value


def seed_int(text):
    try:
        value = int(text)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"must be a 64-bit unsigned integer, got {text!r}")
    return value


def resolution_int(text):
    value = positive_int(text)
    if value < 2:
        raise argparse.ArgumentTypeError(f"must be at least 2, got {text!r}")
    return value


def float_list(text):
    items = [item for item in str(text).replace(" ", "").split(",") if item]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list of numbers")
    return [positive_float(item) for item in items]


def int_list(text):
    items = [item for item in str(text).replace(" ", "").split(",") if item]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list of integers")
    return [positive_int(item) for item in items]


def flag_bool(text):
    if isinstance(text, bool):
        return text
    lowered = str(text).lower()
    if lowered in ("1", "true", "yes"):
        return True
    if lowered in ("0", "false", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


# Type of every key a config file may set
SETTING_TYPES = {
    "t_ratio": positive_float, "t_ratios": float_list, "nts": positive_int,
    "nts_list": int_list, "half_width": positive_float, "resolution": resolution_int,
    "gap": positive_float, "amplitude": positive_float, "seed": seed_int,
    "master_seed": seed_int, "n_seeds": positive_int, "experiment": str,
    "threshold": threshold_float, "jobs": positive_int, "out": str, "out_dir": str,
    "zero_seed": flag_bool, "max_iterations": positive_int,
    "grad_tolerance": positive_float, "success_delta": positive_float,
    "initial_step": positive_float, "backtrack_factor": unit_interval,
    "min_step": positive_float, "armijo_c": non_negative_float,
}

OPTIMIZER_DEFAULTS = {
    "max_iterations": DEFAULT_MAX_ITERATIONS,
    "grad_tolerance": DEFAULT_GRAD_TOLERANCE,
    "success_delta": DEFAULT_SUCCESS_DELTA,
    "initial_step": DEFAULT_INITIAL_STEP,
    "backtrack_factor": DEFAULT_BACKTRACK_FACTOR,
    "min_step": DEFAULT_MIN_STEP,
    "armijo_c": DEFAULT_ARMIJO_C,
}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_common(parser):
    parser.add_argument("--gap", type=positive_float, help=f"energy gap Delta (default {DEFAULT_GAP})")
    parser.add_argument("--config", help="JSON file with flag values (flags win)")
    parser.add_argument("--jobs", type=positive_int, help="worker processes (default: all cores)")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    parser.add_argument("-q", "--quiet", action="store_true", help="no progress bars")


def _add_optimizer(parser):
    group = parser.add_argument_group("steepest ascent")
    group.add_argument("--max-iterations", type=positive_int)
    group.add_argument("--grad-tolerance", type=positive_float)
    group.add_argument("--success-delta", type=positive_float)
    group.add_argument("--initial-step", type=positive_float)
    group.add_argument("--backtrack-factor", type=unit_interval)
    group.add_argument("--min-step", type=positive_float)
    group.add_argument("--armijo-c", type=non_negative_float)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lz-landscape",
        description="Probe the quantum control landscape of the driven Landau-Zener model.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    scan = commands.add_parser("scan", help="two-slot landscape grid and its local maxima")
    scan.add_argument("--t-ratio", type=positive_float, help="T / T_min (required)")
    scan.add_argument("--half-width", type=positive_float, help=f"grid half width (default {DEFAULT_HALF_WIDTH})")
    scan.add_argument("--resolution", type=resolution_int, help=f"points per axis (default {DEFAULT_RESOLUTION})")
    scan.add_argument("--out", help="grid CSV path")
    _add_common(scan)

    optimize = commands.add_parser("optimize", help="one steepest-ascent trajectory")
    optimize.add_argument("--t-ratio", type=positive_float, help="T / T_min (required)")
    optimize.add_argument("--nts", type=positive_int, help="number of time slots (required)")
    optimize.add_argument("--amplitude", type=positive_float,
                          help=f"seed box half width A (default {DEFAULT_DISTANCE_AMPLITUDE})")
    optimize.add_argument("--seed", type=seed_int, help=f"master seed (default {DEFAULT_MASTER_SEED})")
    optimize.add_argument("--zero-seed", action="store_const", const=True,
                          help="start from the zero field instead of a random seed")
    optimize.add_argument("--out", help="trajectory file path")
    _add_optimizer(optimize)
    _add_common(optimize)

    sweep = commands.add_parser("sweep", help="statistics over a (T/T_min, N_ts) grid")
    sweep.add_argument("--experiment", choices=EXPERIMENTS, help="distance, traps or rmetric (required)")
    sweep.add_argument("--t-ratios", type=float_list, help="comma-separated T / T_min values")
    sweep.add_argument("--nts-list", type=int_list, help="comma-separated slot counts")
    sweep.add_argument("--amplitude", type=positive_float,
                       help=f"seed box half width A (default {DEFAULT_DISTANCE_AMPLITUDE}, "
                            f"{DEFAULT_TRAP_AMPLITUDE} for traps)")
    sweep.add_argument("--n-seeds", type=positive_int, help=f"seeds per cell (default {DEFAULT_N_SEEDS})")
    sweep.add_argument("--master-seed", type=seed_int, help=f"default {DEFAULT_MASTER_SEED}")
    sweep.add_argument("--threshold", type=threshold_float,
                       help=f"success fidelity (default {DEFAULT_TRAP_THRESHOLD})")
    sweep.add_argument("--out-dir", help="directory for the sweep tables")
    _add_optimizer(sweep)
    _add_common(sweep)

    replay = commands.add_parser("replay", help="re-run the experiment recorded in a manifest")
    replay.add_argument("--manifest", required=True, help="manifest.json written by an earlier run")
    replay.add_argument("--out-dir", help="directory for the regenerated tables")
    _add_common(replay)
    return parser


def _merge(args, parser, file_settings):
    """Flags win over config-file values, which win over built-in defaults."""
    settings = {}
    for key, value in vars(args).items():
        if key in ("config", "verbose", "quiet", "command"):
            continue
        if value is None and key in file_settings:
            try:
                raw = file_settings[key]
                if isinstance(raw, list):
                    raw = ",".join(str(item) for item in raw)
                value = SETTING_TYPES[key](raw)
            except argparse.ArgumentTypeError as e:
                parser.error(f"config key {key}: {e}")
        settings[key] = value
    return settings


def _fill_defaults(command, settings, parser):
    def default(key, value):
        if settings.get(key) is None:
            settings[key] = value

    default("gap", DEFAULT_GAP)
    if command == "scan":
        if settings.get("t_ratio") is None:
            parser.error("argument --t-ratio is required")
        default("half_width", DEFAULT_HALF_WIDTH)
        default("resolution", DEFAULT_RESOLUTION)
        default("out", f"{output_dir()}/scan_t{settings['t_ratio']:g}.csv")
    elif command == "optimize":
        for key, flag in (("t_ratio", "--t-ratio"), ("nts", "--nts")):
            if settings.get(key) is None:
                parser.error(f"argument {flag} is required")
        default("amplitude", DEFAULT_DISTANCE_AMPLITUDE)
        default("seed", DEFAULT_MASTER_SEED)
        default("zero_seed", False)
        default("out", f"{output_dir()}/trajectory_t{settings['t_ratio']:g}_n{settings['nts']}.csv")
    elif command == "sweep":
        experiment = settings.get("experiment")
        if experiment not in EXPERIMENTS:
            parser.error("argument --experiment is required (distance, traps or rmetric)")
        traps = experiment == "traps"
        default("t_ratios", DEFAULT_TRAP_T_RATIOS if traps else DEFAULT_T_RATIOS)
        default("nts_list", DEFAULT_TRAP_NTS_LIST if traps else DEFAULT_NTS_LIST)
        default("amplitude", DEFAULT_TRAP_AMPLITUDE if traps else DEFAULT_DISTANCE_AMPLITUDE)
        default("n_seeds", DEFAULT_N_SEEDS)
        default("master_seed", DEFAULT_MASTER_SEED)
        default("threshold", DEFAULT_TRAP_THRESHOLD)
        default("out_dir", f"{output_dir()}/sweep_{experiment}")
    elif command == "replay":
        default("out_dir", f"{output_dir()}/replay")

    if command in ("optimize", "sweep"):
        for key, value in OPTIMIZER_DEFAULTS.items():
            default(key, value)
        if not settings["min_step"] < settings["initial_step"]:
            parser.error("argument --min-step must be smaller than --initial-step")
    return settings


def parse_command_line(argv=None):
    """
    Returns (command, settings, options). settings holds every effective
    value; options carries verbosity and quiet flags for the console.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    file_settings = load_config_file(args.config) if args.config else {}
    settings = _merge(args, parser, file_settings)
    settings = _fill_defaults(args.command, settings, parser)
    options = argparse.Namespace(verbose=args.verbose, quiet=args.quiet)
    return args.command, settings, options


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

class ConsoleUI:
    def __init__(self, quiet=False, out=None, err=None):
        self.quiet = quiet
        self.out = out or sys.stdout
        self.err = err or sys.stderr

    def show_manifest(self, manifest):
        print("🔬 Effective configuration:", file=self.out)
        print(json.dumps(manifest.to_dict(), indent=2, sort_keys=True), file=self.out)

    def show_maxima(self, count, maxima):
        print(f"✅ {count} local maximum(s) on the grid", file=self.out)
        for m in maxima:
            print(f"   a1={m.a1:+.6f}  a2={m.a2:+.6f}  J={m.J:.12f}", file=self.out)

    def show_optimization(self, trajectory, r_value):
        print(f"✅ Termination: {trajectory.termination.value}", file=self.out)
        print(f"   iterations: {trajectory.n_iterations}", file=self.out)
        print(f"   final J:    {trajectory.final_objective:.12f}", file=self.out)
        print(f"   R:          {r_value:.12f}", file=self.out)

    def show_sweep_row(self, row):
        print(
            f"   T/T_min={row.t_ratio:g}  N_ts={row.n_ts}  {row.statistic}={row.value:.6g}"
            f"  qualified={row.n_qualified}  unconverged={row.n_unconverged}",
            file=self.out,
        )

    def show_heading(self, text):
        print(text, file=self.out)

    def show_written(self, paths):
        for path in paths:
            print(f"📁 wrote {path}", file=self.out)

    def show_status(self, message):
        if not self.quiet:
            print(message, file=self.err)

    def show_error(self, message):
        print(f"❌ {message}", file=self.err)

    def progress(self, total, description):
        return tqdm(total=total, desc=description, file=self.err, disable=self.quiet, unit="cell")
