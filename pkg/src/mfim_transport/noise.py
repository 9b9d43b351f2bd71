"""Thermal-relaxation Kraus channel and noisy Trotter evolution.

The single-qubit channel combines amplitude damping (T1) and dephasing
(T2) over one two-qubit gate duration.  Note the inner exponent of V1:
the completeness sum only closes with ``exp(-2 t / T2)`` there, which is
the standard thermal-relaxation unraveling for T2 <= 2 T1 (a plain
``exp(-t / T2)`` in that slot would break trace preservation at second
order in t / T2).
"""
from __future__ import annotations

from dataclasses import dataclass
from math import exp, inf, sqrt

import numpy as np

from .errors import InfeasibleNoiseParams, SizeLimitExceeded
from .model import ModelParams, trotter_circuit
from .simulator import DensityMatrix, StateVector, run_circuit

DM_SITE_LIMIT = 10
TRAJECTORY_SITE_LIMIT = 14
DEFAULT_TRAJECTORIES = 2000


@dataclass(frozen=True)
class NoiseParams:
    t1_us: float
    t2_us: float
    gate_time_us: float = 0.6
    delta_omega: float = 0.0  # |0>-|1> splitting, rad/us

    def __post_init__(self):
        if self.t1_us <= 0 or self.t2_us <= 0 or self.gate_time_us <= 0:
            raise InfeasibleNoiseParams("T1, T2 and the gate time must be positive")
        if self.t2_us > 2 * self.t1_us:
            raise InfeasibleNoiseParams(
                f"T2 <= 2 T1 required for complete positivity, got "
                f"T2 = {self.t2_us} > 2 * {self.t1_us}"
            )


PRESETS: dict[str, NoiseParams] = {
    "paper_base": NoiseParams(120.73, 107.29),
    "paper_minus50": NoiseParams(70.73, 57.29),
    "paper_plus60": NoiseParams(180.73, 167.29),
    "identity": NoiseParams(inf, inf),
}


@dataclass(frozen=True)
class KrausChannel:
    operators: tuple[np.ndarray, ...]
    coherence_factor: complex  # V0[1,1]
    survival: float  # exp(-t/T1)
    jump_weight: float  # V1[1,1]
    loss_weight: float  # V2[0,1]

    @property
    def is_identity(self) -> bool:
        return (
            self.coherence_factor == 1.0
            and self.jump_weight == 0.0
            and self.loss_weight == 0.0
        )

    def completeness_error(self) -> float:
        acc = np.zeros((2, 2), dtype=complex)
        for v in self.operators:
            acc += v.conj().T @ v
        return float(np.max(np.abs(acc - np.eye(2))))


def kraus_operators(noise: NoiseParams) -> KrausChannel:
    t = noise.gate_time_us
    survival = exp(-t / noise.t1_us)
    decay2 = exp(-t / noise.t2_us)
    lam = complex(np.exp(-1j * noise.delta_omega * t) * decay2)
    jump = sqrt(max(survival - decay2**2, 0.0))
    loss = sqrt(1.0 - survival)
    v0 = np.array([[1.0, 0.0], [0.0, lam]])
    v1 = np.array([[0.0, 0.0], [0.0, jump]], dtype=complex)
    v2 = np.array([[0.0, loss], [0.0, 0.0]], dtype=complex)
    return KrausChannel((v0, v1, v2), lam, survival, jump, loss)


def channel_for(noise: NoiseParams) -> KrausChannel:
    return kraus_operators(noise)


# -- in-place kernels (shared by the public ops and the pipeline loops) ----


def channel_dm_inplace(rho: np.ndarray, num_qubits: int, qubit: int, ch: KrausChannel) -> None:
    """Apply the channel to one qubit of a density matrix, in place.

    The three Kraus terms reduce to block operations on the four
    (row-bit, column-bit) sectors of the target qubit.
    """
    d = rho.shape[0]
    pre = d >> (qubit + 1)
    post = 1 << qubit
    v = rho.reshape(pre, 2, post, pre, 2, post)
    r00 = v[:, 0, :, :, 0, :]
    r11 = v[:, 1, :, :, 1, :]
    # populations first: r11 must still hold the pre-channel values
    r00 += (1.0 - ch.survival) * r11
    r11 *= ch.survival
    v[:, 0, :, :, 1, :] *= np.conj(ch.coherence_factor)
    v[:, 1, :, :, 0, :] *= ch.coherence_factor


def trajectory_step_inplace(
    psi: np.ndarray, num_qubits: int, qubit: int, ch: KrausChannel, rng: np.random.Generator
) -> int:
    """Sample one Kraus outcome (prob ||V_i psi||^2), apply and renormalize.

    Returns the sampled branch index.
    """
    pre = (1 << num_qubits) >> (qubit + 1)
    v = psi.reshape(pre, 2, 1 << qubit)
    p_excited = float(np.sum(np.abs(v[:, 1, :]) ** 2))
    lam2 = abs(ch.coherence_factor) ** 2
    p0 = (1.0 - p_excited) + lam2 * p_excited
    p1 = ch.jump_weight**2 * p_excited
    p2 = ch.loss_weight**2 * p_excited
    u = rng.random() * (p0 + p1 + p2)
    if u <= p0 or (p1 == 0.0 and p2 == 0.0):
        v[:, 1, :] *= ch.coherence_factor
        psi /= sqrt(p0)
        return 0
    if u <= p0 + p1:
        v[:, 0, :] = 0.0
        v[:, 1, :] *= ch.jump_weight
        psi /= sqrt(p1)
        return 1
    v[:, 0, :] = ch.loss_weight * v[:, 1, :]
    v[:, 1, :] = 0.0
    psi /= sqrt(p2)
    return 2


# -- public operations ------------------------------------------------------


def apply_channel(state: DensityMatrix, qubit: int, channel: KrausChannel) -> DensityMatrix:
    if not 0 <= qubit < state.num_qubits:
        raise ValueError(f"qubit {qubit} out of range")
    out = state.copy()
    channel_dm_inplace(out.entries, out.num_qubits, qubit, channel)
    return out


def trajectory_step(
    state: StateVector, qubit: int, channel: KrausChannel, rng: np.random.Generator
) -> StateVector:
    if not 0 <= qubit < state.num_qubits:
        raise ValueError(f"qubit {qubit} out of range")
    out = state.copy()
    trajectory_step_inplace(out.amplitudes, out.num_qubits, qubit, channel, rng)
    return out


def dm_noise_hook(channel: KrausChannel):
    """run_circuit hook: channel on both targets after each two-qubit gate."""
    if channel.is_identity:
        return None

    def hook(state: DensityMatrix, targets: tuple[int, ...]) -> None:
        for q in targets:
            channel_dm_inplace(state.entries, state.num_qubits, q, channel)

    return hook


def trajectory_noise_hook(channel: KrausChannel, rng: np.random.Generator):
    if channel.is_identity:
        return None

    def hook(state: StateVector, targets: tuple[int, ...]) -> None:
        for q in targets:
            trajectory_step_inplace(state.amplitudes, state.num_qubits, q, channel, rng)

    return hook


def noisy_trotter_run(
    state: StateVector | DensityMatrix,
    params: ModelParams,
    noise: NoiseParams,
    n_steps: int,
    rng: np.random.Generator | None = None,
):
    """Trotter evolution with the relaxation channel after every two-qubit
    gate.  A StateVector input is evolved as a single stochastic trajectory;
    a DensityMatrix input applies the channel exactly.
    """
    channel = kraus_operators(noise)
    if isinstance(state, DensityMatrix):
        if state.num_qubits > DM_SITE_LIMIT:
            raise SizeLimitExceeded(
                f"density-matrix runs capped at {DM_SITE_LIMIT} sites; "
                "use the trajectory backend"
            )
        hook = dm_noise_hook(channel)
    else:
        if state.num_qubits > TRAJECTORY_SITE_LIMIT:
            raise SizeLimitExceeded(
                f"trajectory runs capped at {TRAJECTORY_SITE_LIMIT} sites"
            )
        if rng is None and not channel.is_identity:
            raise ValueError("trajectory evolution needs an rng")
        hook = trajectory_noise_hook(channel, rng)
    return run_circuit(state, trotter_circuit(params, n_steps), noise_hook=hook)
