# dynamics_service.py
"""
Exact dynamics of the driven Landau-Zener two-level system

    H(eps) = (gap / 2) * sigma_x + eps * sigma_z        (hbar = 1)

under piecewise-constant control, and the transfer fidelity |<1|U_T|0>|^2.
All functions are pure; all types are immutable.
"""

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]])

# Round-off allowed on |<1|U|0>|^2 before we call it a bug
FIDELITY_SLACK = 1e-12


class PropagationError(ArithmeticError):
    """The propagated fidelity left [0, 1] by more than round-off."""


@dataclass(frozen=True)
class SystemParams:
    gap: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.gap) or self.gap <= 0:
            raise ValueError(f"gap must be a positive finite number, got {self.gap}")

    def t_min(self):
        """Quantum speed limit: shortest duration admitting J = 1."""
        return np.pi / self.gap


@dataclass(frozen=True, eq=False)
class ControlField:
    """
    Piecewise-constant field: slot k (0-based, earliest first) holds
    amplitudes[k] for a duration dt = duration / n_ts.
    """
    amplitudes: np.ndarray
    duration: float

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=float).ravel()
        if amplitudes.size == 0:
            raise ValueError("a control field needs at least one time slot")
        if not np.isfinite(self.duration) or self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)
        object.__setattr__(self, "duration", float(self.duration))

    @property
    def n_ts(self):
        return self.amplitudes.size

    @property
    def dt(self):
        return self.duration / self.n_ts

    def with_amplitudes(self, amplitudes):
        return ControlField(amplitudes, self.duration)

    def negated(self):
        return ControlField(-self.amplitudes, self.duration)

    def time_reversed(self):
        return ControlField(self.amplitudes[::-1], self.duration)

    def refined(self, factor=2):
        """Same field on factor * n_ts slots (each value repeated)."""
        return ControlField(np.repeat(self.amplitudes, factor), self.duration)

    def __eq__(self, other):
        if not isinstance(other, ControlField):
            return NotImplemented
        return (self.duration == other.duration
                and np.array_equal(self.amplitudes, other.amplitudes))

    def __hash__(self):
        return hash((self.duration, self.amplitudes.tobytes()))

    def __repr__(self):
        return f"ControlField(n_ts={self.n_ts}, duration={self.duration!r})"


def zero_field(n_ts, duration):
    return ControlField(np.zeros(n_ts), duration)


def hamiltonian(eps, params):
    """(gap/2) sigma_x + eps sigma_z, a real symmetric 2x2 matrix."""
    return 0.5 * params.gap * SIGMA_X + eps * SIGMA_Z


def step_stack(amplitudes, dt, params):
    """
    Propagators exp(-i H(eps_k) dt) for every slot, shape (n, 2, 2).

    Closed form for a traceless 2x2 Hamiltonian with H^2 = Omega^2 I:
        exp(-i H dt) = cos(Omega dt) I - i sin(Omega dt) / Omega * H
    Omega >= gap/2 > 0, so the division is always safe.
    """
    eps = np.asarray(amplitudes, dtype=float)
    half_gap = 0.5 * params.gap
    omega = np.hypot(half_gap, eps)
    c = np.cos(omega * dt)
    s = np.sin(omega * dt) / omega

    stack = np.empty(eps.shape + (2, 2), dtype=complex)
    stack[..., 0, 0] = c - 1j * s * eps
    stack[..., 0, 1] = -1j * s * half_gap
    stack[..., 1, 0] = -1j * s * half_gap
    stack[..., 1, 1] = c + 1j * s * eps
    return stack


def step_propagator(eps, dt, params):
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    return step_stack(np.array([eps]), dt, params)[0]


def ordered_product(stack):
    """stack[n-1] @ ... @ stack[0] by pairwise reduction (earliest slot first)."""
    mats = np.asarray(stack)
    while len(mats) > 1:
        if len(mats) % 2:
            mats = np.concatenate([mats, IDENTITY[np.newaxis]])
        mats = mats[1::2] @ mats[0::2]
    return mats[0]


def total_propagator(field, params):
    return ordered_product(step_stack(field.amplitudes, field.dt, params))


def transfer_fidelity(amplitude):
    """
    |<1|U|0>|^2 from the complex amplitude(s) U[1, 0]. Works elementwise on
    arrays; round-off above 1 is clamped, anything larger is an error.
    """
    value = np.abs(amplitude) ** 2
    worst = np.max(value)
    if worst > 1.0 + FIDELITY_SLACK:
        raise PropagationError(f"fidelity {worst!r} outside [0, 1]")
    if worst > 1.0:
        logger.debug("clamping fidelity %r to 1", worst)
    return np.minimum(value, 1.0)


def fidelity(field, params):
    return float(transfer_fidelity(total_propagator(field, params)[1, 0]))


def objective_two_slot(a1, a2, T, params):
    """J(a1, a2, T): a1 for t <= T/2, a2 afterwards."""
    return fidelity(ControlField([a1, a2], T), params)
