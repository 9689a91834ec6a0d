# grape_service.py
"""
Exact fidelity gradient and a pure steepest-ascent optimizer (GRAPE-style)
that records every accepted iterate of the optimization path.
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
import dataclasses
from dataclasses import dataclass
from enum import Enum

import numpy as np

from config import (
    DEFAULT_ARMIJO_C, DEFAULT_BACKTRACK_FACTOR, DEFAULT_GRAD_TOLERANCE, DEFAULT_INITIAL_STEP,
    DEFAULT_MAX_ITERATIONS, DEFAULT_MIN_STEP, DEFAULT_SUCCESS_DELTA,
)
from dynamics_service import fidelity, hamiltonian, step_stack, SIGMA_Z

logger = logging.getLogger(__name__)

# Increases smaller than this many ulps of J cannot be resolved
ROUNDOFF_ULPS = 4


class Termination(Enum):
    GRADIENT_CONVERGED = "GradientConverged"
    FIDELITY_REACHED = "FidelityReached"
    MAX_ITERATIONS = "MaxIterations"
    STEP_UNDERFLOW = "StepUnderflow"


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    grad_tolerance: float = DEFAULT_GRAD_TOLERANCE
    success_delta: float = DEFAULT_SUCCESS_DELTA
    initial_step: float = DEFAULT_INITIAL_STEP
    backtrack_factor: float = DEFAULT_BACKTRACK_FACTOR
    min_step: float = DEFAULT_MIN_STEP
    armijo_c: float = DEFAULT_ARMIJO_C

    def __post_init__(self):
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError("max_iterations must be a positive integer")
        if self.grad_tolerance <= 0 or self.success_delta <= 0:
            raise ValueError("grad_tolerance and success_delta must be positive")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not 0 < self.min_step < self.initial_step:
            raise ValueError("need 0 < min_step < initial_step")
        if self.armijo_c < 0:
            raise ValueError("armijo_c must be non-negative")


@dataclass
class OptimizationTrajectory:
    iterates: list = dataclasses.field(default_factory=list)
    objectives: list = dataclasses.field(default_factory=list)
    grad_norms: list = dataclasses.field(default_factory=list)
    termination: Termination = Termination.MAX_ITERATIONS

    def __post_init__(self):
        if not len(self.iterates) == len(self.objectives) == len(self.grad_norms):
            raise ValueError("iterates, objectives and grad_norms must have equal lengths")

    @property
    def seed(self):
        return self.iterates[0]

    @property
    def final_field(self):
        return self.iterates[-1]

    @property
    def final_objective(self):
        return self.objectives[-1]

    @property
    def n_iterations(self):
        return len(self.iterates) - 1

    @property
    def converged(self):
        return self.termination is not Termination.MAX_ITERATIONS

    def amplitude_matrix(self):
        """Iterates stacked into an (s_max + 1, n_ts) array."""
        return np.vstack([f.amplitudes for f in self.iterates])


def slot_derivatives(amplitudes, dt, params):
    """
    d/d eps_k of exp(-i H(eps_k) dt) for every slot, shape (n, 2, 2).

    Worked in the eigenbasis H = V diag(lam) V^T, where the derivative is
    V [(V^T sigma_z V) * Phi] V^T with the divided differences
        Phi_jk = -i dt exp(-i (lam_j + lam_k) dt / 2) sinc((lam_j - lam_k) dt / 2),
    which reduce to -i dt exp(-i lam_j dt) on the diagonal.
    """
    eps = np.asarray(amplitudes, dtype=float)
    h = np.empty(eps.shape + (2, 2))
    h[...] = hamiltonian(0.0, params)
    h[..., 0, 0] = eps
    h[..., 1, 1] = -eps
    lam, vecs = np.linalg.eigh(h)

    mean = 0.5 * (lam[..., :, np.newaxis] + lam[..., np.newaxis, :])
    half_diff = 0.5 * (lam[..., :, np.newaxis] - lam[..., np.newaxis, :])
    phi = -1j * dt * np.exp(-1j * mean * dt) * np.sinc(half_diff * dt / np.pi)

    vt = np.swapaxes(vecs, -1, -2)
    dh_eigen = vt @ SIGMA_Z @ vecs
    return vecs @ (dh_eigen * phi) @ vt


def gradient(field, params):
    """
    dJ/d eps_k = 2 Re( conj(<1|U_T|0>) <1| R_k dU_k L_{k-1} |0> ), with
    L the propagator up to slot k-1 and R the propagator after slot k.
    """
    steps = step_stack(field.amplitudes, field.dt, params)
    n = field.n_ts

    forward = np.empty((n + 1, 2), dtype=complex)
    forward[0] = (1.0, 0.0)
    for k in range(n):
        forward[k + 1] = steps[k] @ forward[k]

    backward = np.empty((n + 1, 2), dtype=complex)
    backward[n] = (0.0, 1.0)
    for k in range(n - 1, -1, -1):
        backward[k] = backward[k + 1] @ steps[k]

    amplitude = forward[n, 1]
    derivs = slot_derivatives(field.amplitudes, field.dt, params)
    overlaps = np.einsum("ki,kij,kj->k", backward[1:], derivs, forward[:-1])
    return 2.0 * np.real(np.conj(amplitude) * overlaps)


def _accepts(trial, current, step, slope, config):
    """
    Armijo sufficient increase J(trial) - J >= c * eta * slope. Once that
    requirement drops below what J can resolve, a trial that leaves J
    unchanged is taken as well; a computed decrease never is.
    """
    if trial < current:
        return False
    required = config.armijo_c * step * slope
    if required <= ROUNDOFF_ULPS * np.spacing(current):
        return True
    return trial - current >= required


def ascent_direction(grad, dt):
    """
    grad J / dt, the functional derivative dJ/d eps(t) sampled on the slots.
    Slot gradients scale with dt, so this keeps eta = 1 a sensible first
    step at any N_ts.
    """
    return grad / dt


def optimize(seed, params, config=None):
    """
    Steepest ascent eps <- eps + eta * grad J / dt with backtracking on eta.
    The seed is iterate 0; every accepted step appends an iterate.
    """
    config = config or OptimizerConfig()
    current = seed
    objective = fidelity(current, params)
    grad = gradient(current, params)
    trajectory = OptimizationTrajectory(
        iterates=[current], objectives=[objective], grad_norms=[float(np.max(np.abs(grad)))]
    )

    while True:
        if objective >= 1.0 - config.success_delta:
            trajectory.termination = Termination.FIDELITY_REACHED
            break
        if trajectory.grad_norms[-1] < config.grad_tolerance:
            trajectory.termination = Termination.GRADIENT_CONVERGED
            break
        if trajectory.n_iterations >= config.max_iterations:
            trajectory.termination = Termination.MAX_ITERATIONS
            break

        direction = ascent_direction(grad, current.dt)
        slope = float(grad @ direction)
        step = config.initial_step
        accepted = None
        while step >= config.min_step:
            candidate = current.with_amplitudes(current.amplitudes + step * direction)
            trial = fidelity(candidate, params)
            if _accepts(trial, objective, step, slope, config):
                accepted = candidate
                break
            step *= config.backtrack_factor

        if accepted is None:
            trajectory.termination = Termination.STEP_UNDERFLOW
            break

        current, objective = accepted, trial
        grad = gradient(current, params)
        trajectory.iterates.append(current)
        trajectory.objectives.append(objective)
        trajectory.grad_norms.append(float(np.max(np.abs(grad))))

    logger.debug(
        "optimize: %s after %d iterations, J=%.12f",
        trajectory.termination.value, trajectory.n_iterations, objective,
    )
    return trajectory


def _optimize_task(args):
    seed, params, config = args
    return optimize(seed, params, config)


def optimize_batch(seeds, params, config=None, jobs=1):
    """
    optimize() for every seed, results in input order. jobs > 1 spreads
    seeds over worker processes; jobs=None uses every available core.
    """
    seeds = list(seeds)
    if not seeds:
        return []
    shapes = {(s.n_ts, s.duration) for s in seeds}
    if len(shapes) != 1:
        raise ValueError("all seeds in a batch must share n_ts and duration")

    config = config or OptimizerConfig()
    jobs = jobs or os.cpu_count() or 1
    tasks = [(seed, params, config) for seed in seeds]
    if jobs == 1 or len(seeds) == 1:
        return [_optimize_task(task) for task in tasks]

    chunksize = max(1, len(tasks) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(_optimize_task, tasks, chunksize=chunksize))
