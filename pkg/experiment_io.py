# experiment_io.py
"""
Reproducibility plumbing: deterministic random streams, CSV tables,
trajectory files and run manifests.
"""

import json
import logging
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np
import pandas as pd

from config import TOOL_VERSION
from dynamics_service import ControlField
from grape_service import OptimizationTrajectory, Termination

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
SWEEP_COLUMNS = ["t_ratio", "n_ts", "statistic", "value", "n_qualified", "n_unconverged"]
TRAJECTORY_PREFIX = "# "


class ExperimentIOError(OSError):
    """Reading or writing an experiment file failed."""


def derive_stream(master_seed, cell_index, seed_index):
    """
    Counter-based Philox stream keyed by (master_seed, cell_index, seed_index).
    Distinct tuples land on distinct keys; the derivation is platform independent.
    """
    sequence = np.random.SeedSequence(
        entropy=int(master_seed), spawn_key=(int(cell_index), int(seed_index))
    )
    return np.random.Generator(np.random.Philox(sequence))


@dataclass(frozen=True)
class SweepRow:
    t_ratio: float
    n_ts: int
    statistic: str
    value: float
    n_qualified: int
    n_unconverged: int


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)

    def to_frame(self):
        return pd.DataFrame(
            [[getattr(row, c) for c in SWEEP_COLUMNS] for row in self.rows],
            columns=SWEEP_COLUMNS,
        )


@dataclass
class RunManifest:
    master_seed: int
    gap: float
    experiment: str
    parameters: dict
    tool_version: str = TOOL_VERSION
    timestamp: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds")
    )

    def to_dict(self):
        return {
            "master_seed": self.master_seed,
            "gap": self.gap,
            "experiment": self.experiment,
            "parameters": self.parameters,
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(
                master_seed=int(data["master_seed"]),
                gap=float(data["gap"]),
                experiment=data["experiment"],
                parameters=dict(data["parameters"]),
                tool_version=data.get("tool_version", TOOL_VERSION),
                timestamp=data.get("timestamp", ""),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ExperimentIOError(f"malformed manifest: {e}") from e

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def write_manifest(manifest, path):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(manifest.to_json() + "\n")
    except OSError as e:
        raise ExperimentIOError(f"cannot write manifest {path}: {e}") from e


def read_manifest(path):
    try:
        with open(path, encoding="utf-8") as handle:
            return RunManifest.from_dict(json.load(handle))
    except OSError as e:
        raise ExperimentIOError(f"cannot read manifest {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ExperimentIOError(f"manifest {path} is not valid JSON: {e}") from e


def write_table(result, path):
    """
    CSV with a one-line header and 17-significant-digit floats. Accepts a
    DataFrame or any result exposing to_frame(): SweepResult, DistanceStats,
    LandscapeGrid, ClusterSummary.
    """
    frame = result if isinstance(result, pd.DataFrame) else result.to_frame()
    try:
        frame.to_csv(
            path, index=False, float_format=FLOAT_FORMAT,
            lineterminator="\n", encoding="utf-8",
        )
    except OSError as e:
        raise ExperimentIOError(f"cannot write table {path}: {e}") from e
    logger.debug("wrote %d rows to %s", len(frame), path)


def read_table(path):
    try:
        return pd.read_csv(path, float_precision="round_trip")
    except OSError as e:
        raise ExperimentIOError(f"cannot read table {path}: {e}") from e


def write_trajectory(trajectory, path, manifest=None):
    """
    One record per iterate: index, J, max|grad J|, then the n_ts amplitudes.
    Run metadata sits in a '# '-prefixed header block above the records.
    """
    final = trajectory.final_field
    header = {
        "termination": trajectory.termination.value,
        "n_ts": final.n_ts,
        "duration": repr(final.duration),
    }
    if manifest is not None:
        header["manifest"] = json.dumps(manifest.to_dict(), sort_keys=True)

    frame = pd.DataFrame(
        trajectory.amplitude_matrix(),
        columns=[f"eps_{k + 1}" for k in range(final.n_ts)],
    )
    frame.insert(0, "grad_norm", trajectory.grad_norms)
    frame.insert(0, "objective", trajectory.objectives)
    frame.insert(0, "iterate", range(len(trajectory.iterates)))

    try:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            for key, value in header.items():
                handle.write(f"{TRAJECTORY_PREFIX}{key}: {value}\n")
            frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise ExperimentIOError(f"cannot write trajectory {path}: {e}") from e


def read_trajectory(path):
    """Returns (trajectory, header dict) from a write_trajectory file."""
    header = {}
    try:
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                if not line.startswith(TRAJECTORY_PREFIX):
                    break
                key, _, value = line[len(TRAJECTORY_PREFIX):].rstrip("\n").partition(": ")
                header[key] = value
        frame = pd.read_csv(path, skiprows=len(header), float_precision="round_trip")
    except OSError as e:
        raise ExperimentIOError(f"cannot read trajectory {path}: {e}") from e

    try:
        duration = float(header["duration"])
        termination = Termination(header["termination"])
    except (KeyError, ValueError) as e:
        raise ExperimentIOError(f"trajectory {path} has a malformed header: {e}") from e

    amplitudes = frame.filter(like="eps_").to_numpy(dtype=float)
    trajectory = OptimizationTrajectory(
        iterates=[ControlField(row, duration) for row in amplitudes],
        objectives=frame["objective"].astype(float).tolist(),
        grad_norms=frame["grad_norm"].astype(float).tolist(),
        termination=termination,
    )
    if "manifest" in header:
        header["manifest"] = json.loads(header["manifest"])
    return trajectory, header


@contextmanager
def tracked_outputs():
    """
    Collects paths a run creates; if the run fails they are all removed
    so no partial outputs survive.
    """
    created = []
    try:
        yield created
    except BaseException:
        for path in reversed(created):
            try:
                os.remove(path)
                logger.info("removed partial output %s", path)
            except FileNotFoundError:
                pass
        raise
