# main.py
"""
Landau-Zener Landscape Explorer
Main application entry point that coordinates the console UI, the dynamics,
optimizer and landscape services, and the experiment files.
"""

import logging
import os
import sys

# Add the parent directory (project root) to sys.path if needed
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from config import ConfigError, TOOL_VERSION
from dynamics_service import SystemParams, zero_field
from experiment_io import (
    RunManifest, derive_stream, read_manifest, tracked_outputs,
    write_manifest, write_table, write_trajectory,
)
from grape_service import OptimizerConfig, optimize
from landscape_service import (
    Experiment, LandscapeProbe, SeedRegion, count_grid_maxima, landscape_scan,
    maxima_frame, r_metric, random_seed,
)
from ui import ConsoleUI, parse_command_line

logger = logging.getLogger(__name__)

OPTIMIZER_KEYS = tuple(OptimizerConfig.__dataclass_fields__)
# Settings that only say where to write or how fast to run; never part of a manifest
RUNTIME_KEYS = ("out", "out_dir", "jobs", "gap", "seed", "master_seed")


class LandscapeExplorerApp:
    def __init__(self, ui, jobs=None):
        self.ui = ui
        self.jobs = jobs

    # ------------------------------------------------------------------
    # Helpers
    # ------------------------------------------------------------------

    @staticmethod
    def optimizer_config(settings):
        return OptimizerConfig(**{key: settings[key] for key in OPTIMIZER_KEYS})

    @staticmethod
    def build_manifest(experiment, settings):
        parameters = {k: v for k, v in settings.items() if k not in RUNTIME_KEYS and v is not None}
        master_seed = settings.get("master_seed", settings.get("seed"))
        return RunManifest(
            master_seed=int(master_seed or 0),
            gap=float(settings["gap"]),
            experiment=experiment,
            parameters=parameters,
        )

    @staticmethod
    def _prepare_dir(path):
        directory = os.path.dirname(path) or "."
        os.makedirs(directory, exist_ok=True)

    def run_command(self, command, settings):
        handlers = {
            "scan": self.cmd_scan,
            "optimize": self.cmd_optimize,
            "sweep": self.cmd_sweep,
            "replay": self.cmd_replay,
        }
        return handlers[command](settings)

    # ------------------------------------------------------------------
    # Commands
    # ------------------------------------------------------------------

    def cmd_scan(self, settings, manifest=None):
        """
        Two-slot landscape on a grid: writes the grid table and a companion
        '.maxima.csv', prints the strict local maxima.
        """
        manifest = manifest or self.build_manifest("scan", settings)
        self.ui.show_manifest(manifest)

        params = SystemParams(settings["gap"])
        T = settings["t_ratio"] * params.t_min()
        grid = landscape_scan(T, settings["half_width"], settings["resolution"], params)
        count, maxima = count_grid_maxima(grid)

        out = settings["out"]
        maxima_path = os.path.splitext(out)[0] + ".maxima.csv"
        self._prepare_dir(out)
        with tracked_outputs() as created:
            created.append(out)
            write_table(grid, out)
            created.append(maxima_path)
            write_table(maxima_frame(maxima), maxima_path)

        self.ui.show_maxima(count, maxima)
        self.ui.show_written(created)
        return grid, maxima

    def cmd_optimize(self, settings, manifest=None):
        """One steepest-ascent run from a random (or zero) seed, saved as a trajectory file."""
        manifest = manifest or self.build_manifest("optimize", settings)
        self.ui.show_manifest(manifest)

        params = SystemParams(settings["gap"])
        T = settings["t_ratio"] * params.t_min()
        if settings.get("zero_seed"):
            seed = zero_field(settings["nts"], T)
        else:
            region = SeedRegion(settings["amplitude"], settings["nts"], T)
            seed = random_seed(region, derive_stream(manifest.master_seed, 0, 0))

        trajectory = optimize(seed, params, self.optimizer_config(settings))

        out = settings["out"]
        self._prepare_dir(out)
        with tracked_outputs() as created:
            created.append(out)
            write_trajectory(trajectory, out, manifest)

        self.ui.show_optimization(trajectory, r_metric(trajectory))
        self.ui.show_written(created)
        return trajectory

    def cmd_sweep(self, settings, manifest=None):
        """
        Statistic table over the (T/T_min, N_ts) grid, plus the manifest and,
        for distance sweeps, per-cell histograms and sign-cluster centroids.
        """
        experiment = Experiment(settings["experiment"])
        manifest = manifest or self.build_manifest(experiment.value, settings)
        self.ui.show_manifest(manifest)

        params = SystemParams(settings["gap"])
        probe = LandscapeProbe(
            params, self.optimizer_config(settings),
            master_seed=manifest.master_seed, jobs=self.jobs,
        )
        out_dir = settings["out_dir"]
        os.makedirs(out_dir, exist_ok=True)
        n_cells = len(settings["t_ratios"]) * len(settings["nts_list"])

        with tracked_outputs() as created:
            manifest_path = os.path.join(out_dir, "manifest.json")
            created.append(manifest_path)
            write_manifest(manifest, manifest_path)

            with self.ui.progress(n_cells, f"{experiment.value} sweep") as bar:
                def on_cell(report):
                    if experiment is Experiment.MEAN_DISTANCE:
                        self._write_cell_tables(report, out_dir, created)
                    bar.update(1)

                result = probe.sweep(
                    experiment, settings["t_ratios"], settings["nts_list"],
                    settings["amplitude"], settings["n_seeds"],
                    threshold=settings["threshold"], on_cell=on_cell,
                )

            table_path = os.path.join(out_dir, "sweep.csv")
            created.append(table_path)
            write_table(result, table_path)

        self.ui.show_heading(f"📊 {experiment.value} sweep")
        for row in result.rows:
            self.ui.show_sweep_row(row)
        self.ui.show_written(created)
        return result

    @staticmethod
    def _write_cell_tables(report, out_dir, created):
        histogram_path = os.path.join(out_dir, f"histogram_{report.cell_index}.csv")
        created.append(histogram_path)
        write_table(report.details, histogram_path)
        if report.clusters is not None:
            clusters_path = os.path.join(out_dir, f"clusters_{report.cell_index}.csv")
            created.append(clusters_path)
            write_table(report.clusters, clusters_path)

    def cmd_replay(self, settings):
        """Regenerate the tables of an earlier run from its manifest."""
        manifest = read_manifest(settings["manifest"])
        if manifest.tool_version != TOOL_VERSION:
            logger.warning(
                "manifest written by version %s, replaying with %s",
                manifest.tool_version, TOOL_VERSION,
            )

        replayed = dict(manifest.parameters, gap=manifest.gap)
        out_dir = settings["out_dir"]
        if manifest.experiment == "scan":
            replayed["out"] = os.path.join(out_dir, f"scan_t{replayed['t_ratio']:g}.csv")
            return self.cmd_scan(replayed, manifest)
        if manifest.experiment == "optimize":
            replayed["seed"] = manifest.master_seed
            replayed["out"] = os.path.join(
                out_dir, f"trajectory_t{replayed['t_ratio']:g}_n{replayed['nts']}.csv"
            )
            return self.cmd_optimize(replayed, manifest)
        try:
            Experiment(manifest.experiment)
        except ValueError:
            raise ConfigError(f"manifest names an unknown experiment '{manifest.experiment}'")
        replayed["master_seed"] = manifest.master_seed
        replayed["out_dir"] = out_dir
        return self.cmd_sweep(replayed, manifest)


def main(argv=None):
    """
    Application entry point. Returns the process exit status: 0 on success,
    2 for unusable flags or config files, 1 for any other failure.
    """
    ui = ConsoleUI()
    try:
        command, settings, options = parse_command_line(argv)
    except ConfigError as e:
        ui.show_error(f"Configuration Error: {e}")
        return 2

    level = logging.WARNING - 10 * min(options.verbose, 2)
    logging.basicConfig(
        level=level, stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    ui.quiet = options.quiet

    try:
        app = LandscapeExplorerApp(ui, jobs=settings.get("jobs"))
        app.run_command(command, settings)
    except ConfigError as e:
        ui.show_error(f"Configuration Error: {e}")
        return 1
    except Exception as e:
        logger.debug("run failed", exc_info=True)
        ui.show_error(f"Application Error: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
