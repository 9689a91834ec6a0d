# landscape_service.py
"""
Landscape diagnostics: two-slot grid scans, random seeding, distances between
optimized fields, sign clustering, trapping probability and the path
straightness metric R, plus the sweeps that tabulate them against T and N_ts.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist

from config import DEFAULT_TRAP_THRESHOLD
from dynamics_service import ControlField, step_stack, transfer_fidelity
from experiment_io import SweepResult, SweepRow, derive_stream
from grape_service import OptimizerConfig, optimize_batch

logger = logging.getLogger(__name__)

MIN_HISTOGRAM_BINS = 10
MAX_HISTOGRAM_BINS = 10_000
DEGENERATE_LENGTH = 1e-12


class FieldMismatchError(ValueError):
    """Two fields with different slot counts or durations were compared."""


class Experiment(Enum):
    MEAN_DISTANCE = "distance"
    TRAPPING = "traps"
    MEAN_R = "rmetric"


STATISTIC_NAMES = {
    Experiment.MEAN_DISTANCE: "mean_distance",
    Experiment.TRAPPING: "trapping_probability",
    Experiment.MEAN_R: "mean_r",
}


@dataclass(frozen=True)
class SeedRegion:
    amplitude: float
    n_ts: int
    duration: float

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if int(self.n_ts) != self.n_ts or self.n_ts < 1:
            raise ValueError(f"n_ts must be a positive integer, got {self.n_ts}")
        if not self.duration > 0:
            raise ValueError(f"duration must be positive, got {self.duration}")


class GridMaximum(NamedTuple):
    a1: float
    a2: float
    J: float


@dataclass(eq=False)
class LandscapeGrid:
    a1_axis: np.ndarray
    a2_axis: np.ndarray
    values: np.ndarray
    duration: float
    params: object

    def to_frame(self):
        a1, a2 = np.meshgrid(self.a1_axis, self.a2_axis, indexing="ij")
        return pd.DataFrame({"a1": a1.ravel(), "a2": a2.ravel(), "J": self.values.ravel()})


@dataclass(eq=False)
class DistanceStats:
    pair_distances: np.ndarray
    mean: float
    histogram: list
    n_qualified: int = 0
    n_unconverged: int = 0

    @property
    def insufficient(self):
        return len(self.pair_distances) == 0

    def to_frame(self):
        return pd.DataFrame(self.histogram, columns=["bin_low", "bin_high", "count"])


@dataclass(eq=False)
class RStats:
    r_values: np.ndarray
    mean: float
    std: float
    n_qualified: int = 0
    n_unconverged: int = 0

    @property
    def insufficient(self):
        return len(self.r_values) == 0


@dataclass(frozen=True)
class TrapStats:
    probability: float
    n_trapped: int
    n_converged: int
    n_unconverged: int


@dataclass(eq=False)
class ClusterSummary:
    centroid_a: np.ndarray
    centroid_b: np.ndarray
    size_a: int
    size_b: int

    @property
    def anti_alignment(self):
        """||c_A + c_B|| / ||c_A||; near 0 when the clusters are negatives of each other."""
        norm_a = np.linalg.norm(self.centroid_a)
        if self.size_b == 0 or norm_a == 0:
            return float("nan")
        return float(np.linalg.norm(self.centroid_a + self.centroid_b) / norm_a)

    def to_frame(self):
        return pd.DataFrame({
            "slot": np.arange(1, len(self.centroid_a) + 1),
            "centroid_a": self.centroid_a,
            "centroid_b": self.centroid_b,
        })


# ---------------------------------------------------------------------------
# Pure metrics
# ---------------------------------------------------------------------------

def random_seed(region, rng):
    """Amplitudes i.i.d. uniform on [-A, A]."""
    amplitudes = rng.uniform(-region.amplitude, region.amplitude, size=region.n_ts)
    return ControlField(amplitudes, region.duration)


def field_distance(f, g):
    """(1/T) integral |f - g| dt, i.e. the mean absolute slot difference."""
    if f.n_ts != g.n_ts or f.duration != g.duration:
        raise FieldMismatchError(
            f"cannot compare fields with (n_ts, T) = ({f.n_ts}, {f.duration}) "
            f"and ({g.n_ts}, {g.duration})"
        )
    return float(np.mean(np.abs(f.amplitudes - g.amplitudes)))


def _rms(delta):
    return np.sqrt(np.mean(np.square(delta), axis=-1))


def path_length(trajectory):
    """Sum over accepted steps of the RMS (time-averaged) step norm."""
    steps = np.diff(trajectory.amplitude_matrix(), axis=0)
    return float(np.sum(_rms(steps))) if len(steps) else 0.0


def euclidean_length(trajectory):
    return float(_rms(trajectory.final_field.amplitudes - trajectory.seed.amplitudes))


def r_metric(trajectory):
    straight = euclidean_length(trajectory)
    if straight < DEGENERATE_LENGTH:
        return 1.0
    return path_length(trajectory) / straight


def landscape_scan(T, half_width, resolution, params):
    """J(a1, a2) on a uniform grid over [-half_width, half_width]^2."""
    if resolution < 2:
        raise ValueError(f"resolution must be at least 2, got {resolution}")
    if not half_width > 0:
        raise ValueError(f"half_width must be positive, got {half_width}")

    axis = np.linspace(-half_width, half_width, int(resolution))
    steps = step_stack(axis, 0.5 * T, params)
    # <1| S(a2) S(a1) |0> for every (a1, a2) pair
    amplitude = (np.outer(steps[:, 0, 0], steps[:, 1, 0])
                 + np.outer(steps[:, 1, 0], steps[:, 1, 1]))
    values = transfer_fidelity(amplitude)
    return LandscapeGrid(axis, axis.copy(), values, T, params)


def count_grid_maxima(grid):
    """Interior points strictly above all 8 neighbours."""
    v = grid.values
    rows, cols = v.shape
    if rows < 3 or cols < 3:
        return 0, []

    center = v[1:-1, 1:-1]
    is_max = np.ones_like(center, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            neighbour = v[1 + di:rows - 1 + di, 1 + dj:cols - 1 + dj]
            is_max &= center > neighbour

    maxima = [
        GridMaximum(float(grid.a1_axis[i + 1]), float(grid.a2_axis[j + 1]), float(center[i, j]))
        for i, j in zip(*np.nonzero(is_max))
    ]
    return len(maxima), maxima


def maxima_frame(maxima):
    return pd.DataFrame(maxima, columns=list(GridMaximum._fields))


def cluster_by_sign(optimized):
    """Split by the sign of the inner product with the first field (ties go to A)."""
    if not optimized:
        raise ValueError("cannot cluster an empty list of fields")
    reference = optimized[0].amplitudes
    cluster_a, cluster_b = [], []
    for f in optimized:
        (cluster_a if np.dot(f.amplitudes, reference) >= 0 else cluster_b).append(f)
    return cluster_a, cluster_b


def cluster_summary(optimized):
    cluster_a, cluster_b = cluster_by_sign(optimized)
    n_ts = optimized[0].n_ts

    def centroid(cluster):
        if not cluster:
            return np.full(n_ts, np.nan)
        return np.mean([f.amplitudes for f in cluster], axis=0)

    return ClusterSummary(centroid(cluster_a), centroid(cluster_b), len(cluster_a), len(cluster_b))


def split_pair_distances(optimized):
    """Pair distances within the same sign cluster and across the two clusters."""
    cluster_a, cluster_b = cluster_by_sign(optimized)
    within = _pair_distances(cluster_a).tolist() + _pair_distances(cluster_b).tolist()
    cross = [field_distance(f, g) for f in cluster_a for g in cluster_b]
    return within, cross


def _pair_distances(fields):
    if len(fields) < 2:
        return np.empty(0)
    amplitudes = np.vstack([f.amplitudes for f in fields])
    return pdist(amplitudes, metric="cityblock") / amplitudes.shape[1]


def histogram_bin_count(distances):
    """
    Freedman-Diaconis bin count ceil(range / (2 IQR n^(-1/3))), clamped to
    [MIN_HISTOGRAM_BINS, MAX_HISTOGRAM_BINS]. A zero IQR or range gets the minimum.
    """
    distances = np.asarray(distances, dtype=float)
    spread = float(np.ptp(distances))
    q75, q25 = np.percentile(distances, [75, 25])
    width = 2.0 * (q75 - q25) / len(distances) ** (1.0 / 3.0)
    if width <= 0.0 or spread <= 0.0:
        return MIN_HISTOGRAM_BINS
    n_bins = min(np.ceil(spread / width), MAX_HISTOGRAM_BINS)
    return int(max(n_bins, MIN_HISTOGRAM_BINS))


def distance_histogram(distances):
    """(lo, hi, count) per bin, bins chosen by histogram_bin_count."""
    if len(distances) == 0:
        return []
    counts, edges = np.histogram(distances, bins=histogram_bin_count(distances))
    return [(float(lo), float(hi), int(c)) for lo, hi, c in zip(edges[:-1], edges[1:], counts)]


# ---------------------------------------------------------------------------
# Reductions over optimized trajectories
# ---------------------------------------------------------------------------

def below_speed_limit(duration, params):
    return duration < params.t_min() * (1.0 - 1e-12)


def qualifying(trajectories, duration, params, threshold=DEFAULT_TRAP_THRESHOLD):
    """
    Converged trajectories that reached J >= threshold. Below the speed limit
    no field gets there, so every converged trajectory counts.
    """
    lenient = below_speed_limit(duration, params)
    return [
        t for t in trajectories
        if t.converged and (lenient or t.final_objective >= threshold)
    ]


def _count_unconverged(trajectories):
    return sum(1 for t in trajectories if not t.converged)


def distance_statistics(trajectories, duration, params, threshold=DEFAULT_TRAP_THRESHOLD):
    chosen = qualifying(trajectories, duration, params, threshold)
    distances = _pair_distances([t.final_field for t in chosen])
    mean = float(np.mean(distances)) if len(distances) else float("nan")
    return DistanceStats(
        pair_distances=distances,
        mean=mean,
        histogram=distance_histogram(distances),
        n_qualified=len(chosen),
        n_unconverged=_count_unconverged(trajectories),
    )


def r_statistics(trajectories, duration, params, threshold=DEFAULT_TRAP_THRESHOLD):
    chosen = qualifying(trajectories, duration, params, threshold)
    r_values = np.array([r_metric(t) for t in chosen])
    if len(r_values):
        mean, std = float(np.mean(r_values)), float(np.std(r_values))
    else:
        mean = std = float("nan")
    return RStats(r_values, mean, std, len(chosen), _count_unconverged(trajectories))


def trap_statistics(trajectories, threshold=DEFAULT_TRAP_THRESHOLD):
    """Trapped = converged with terminal J below threshold; unconverged runs stay out."""
    converged = [t for t in trajectories if t.converged]
    trapped = sum(1 for t in converged if t.final_objective < threshold)
    probability = trapped / len(converged) if converged else float("nan")
    return TrapStats(probability, trapped, len(converged), len(trajectories) - len(converged))


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

@dataclass
class CellReport:
    """Everything a sweep cell produced, handed to the caller's callback."""
    cell_index: int
    t_ratio: float
    n_ts: int
    row: SweepRow
    details: object = None
    clusters: object = None
    mean_iterations: float = 0.0


class LandscapeProbe:
    def __init__(self, params, config=None, master_seed=0, jobs=1):
        self.params = params
        self.config = config or OptimizerConfig()
        self.master_seed = master_seed
        self.jobs = jobs

    def seeds(self, region, n_seeds, cell_index=0):
        """n_seeds fields, seed i drawn from the stream (master_seed, cell_index, i)."""
        return [
            random_seed(region, derive_stream(self.master_seed, cell_index, i))
            for i in range(n_seeds)
        ]

    def optimize_seeds(self, seeds):
        return optimize_batch(seeds, self.params, self.config, jobs=self.jobs)

    def run_region(self, region, n_seeds, cell_index=0):
        return self.optimize_seeds(self.seeds(region, n_seeds, cell_index))

    def distance_experiment(self, region, n_seeds, cell_index=0):
        if n_seeds < 2:
            raise ValueError("a distance experiment needs at least two seeds")
        trajectories = self.run_region(region, n_seeds, cell_index)
        return distance_statistics(trajectories, region.duration, self.params)

    def r_experiment(self, region, n_seeds, cell_index=0):
        trajectories = self.run_region(region, n_seeds, cell_index)
        return r_statistics(trajectories, region.duration, self.params)

    def trapping_experiment(self, region, n_seeds, threshold=DEFAULT_TRAP_THRESHOLD, cell_index=0):
        if n_seeds < 1:
            raise ValueError("a trapping experiment needs at least one seed")
        return trap_statistics(self.run_region(region, n_seeds, cell_index), threshold)

    def trapping_probability(self, region, n_seeds, threshold=DEFAULT_TRAP_THRESHOLD, cell_index=0):
        return self.trapping_experiment(region, n_seeds, threshold, cell_index).probability

    def sweep(self, experiment, t_ratios, nts_list, amplitude, n_seeds,
              threshold=DEFAULT_TRAP_THRESHOLD, on_cell=None):
        """
        One row per (T/T_min, N_ts) cell, cells numbered in row-major order.
        Insufficient cells get value NaN instead of aborting the sweep.
        """
        experiment = Experiment(experiment)
        if not t_ratios or not nts_list:
            raise ValueError("sweep axes must be non-empty")

        result = SweepResult()
        cells = [(t, n) for t in t_ratios for n in nts_list]
        for cell_index, (t_ratio, n_ts) in enumerate(cells):
            duration = t_ratio * self.params.t_min()
            region = SeedRegion(amplitude, n_ts, duration)
            trajectories = self.run_region(region, n_seeds, cell_index)
            report = self._reduce_cell(
                experiment, cell_index, t_ratio, n_ts, trajectories, duration, threshold
            )
            result.rows.append(report.row)
            logger.info(
                "cell %d (T/T_min=%g, N_ts=%d): %s=%.6g, mean iterations %.1f",
                cell_index, t_ratio, n_ts, report.row.statistic,
                report.row.value, report.mean_iterations,
            )
            if on_cell is not None:
                on_cell(report)
        return result

    def _reduce_cell(self, experiment, cell_index, t_ratio, n_ts, trajectories, duration, threshold):
        name = STATISTIC_NAMES[experiment]
        mean_iterations = float(np.mean([t.n_iterations for t in trajectories])) if trajectories else 0.0
        clusters = None

        if experiment is Experiment.MEAN_DISTANCE:
            details = distance_statistics(trajectories, duration, self.params, threshold)
            value, n_qualified = details.mean, details.n_qualified
            chosen = qualifying(trajectories, duration, self.params, threshold)
            if chosen:
                clusters = cluster_summary([t.final_field for t in chosen])
        elif experiment is Experiment.MEAN_R:
            details = r_statistics(trajectories, duration, self.params, threshold)
            value, n_qualified = details.mean, details.n_qualified
        else:
            details = trap_statistics(trajectories, threshold)
            value = details.probability
            n_qualified = details.n_converged - details.n_trapped

        if np.isnan(value):
            logger.warning("cell %d (T/T_min=%g, N_ts=%d) has too few qualifying runs",
                           cell_index, t_ratio, n_ts)

        row = SweepRow(
            t_ratio=float(t_ratio), n_ts=int(n_ts), statistic=name, value=float(value),
            n_qualified=int(n_qualified), n_unconverged=_count_unconverged(trajectories),
        )
        return CellReport(cell_index, t_ratio, n_ts, row, details, clusters, mean_iterations)
