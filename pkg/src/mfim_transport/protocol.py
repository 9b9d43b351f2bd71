"""Hardware-style measurement pipeline for unequal-time correlators.

For one sampled bitstring ``y`` and each checkpoint the pipeline prepares
the states ``(I +/- P^nu_{L/2}) |y> / sqrt(2)`` (or their computational
surrogates), evolves them, and measures every site in either the X or Z
basis.  One Z-basis circuit yields all single-Z and bond-ZZ observables
at once and one X-basis circuit all single-X observables, so the circuit
count per checkpoint never grows with the chain length.  Correlators are
then reassembled from half differences of the +/- expectations weighted
by the energy-density coefficient products.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import sqrt

import numpy as np

from .errors import IncompletePlan, InvalidStateSpec
from .exact import SpectralData
from .model import ModelParams, coefficient_vector, trotter_step_circuit
from .noise import (
    DEFAULT_TRAJECTORIES,
    DM_SITE_LIMIT,
    KrausChannel,
    NoiseParams,
    channel_dm_inplace,
    kraus_operators,
    trajectory_step_inplace,
)
from .paulis import PauliString, x_at, z_at, zz_at
from .simulator import (
    _SITE_KETS,
    _apply_1q,
    _apply_gate_dm,
    _apply_gate_vec,
    GateKind,
    basis_change_circuit,
    index_to_bits,
)

_INV_SQRT2 = 1.0 / sqrt(2.0)

# reflection around the center site swaps the two bond operators
_REFLECTED_MU = {1: 1, 2: 2, 3: 4, 4: 3}

CB_ASSIGNMENTS = ("00", "01", "10", "11")


def nu_operator(params: ModelParams, nu: int) -> PauliString:
    """P^nu at the center site: X, Z, right bond ZZ, left bond ZZ."""
    c = params.num_sites // 2
    if nu == 1:
        return x_at(c)
    if nu == 2:
        return z_at(c)
    if nu == 3:
        return zz_at(c)
    if nu == 4:
        return zz_at(c - 1)
    raise ValueError(f"nu must be 1..4, got {nu}")


def nu_pair_sites(nu: int, num_sites: int) -> tuple[int, int]:
    """1-based site pair carrying the Bell block for nu in {3, 4}."""
    c = num_sites // 2
    if nu == 3:
        return (c, c + 1)
    if nu == 4:
        return (c - 1, c)
    raise ValueError(f"nu {nu} has no site pair")


@dataclass(frozen=True)
class PreparedStateSpec:
    y: str
    nu: int
    sign: int | None = None  # +1 / -1
    cb_bits: str | None = None  # "00".."11" on the nu pair

    def __post_init__(self):
        if self.nu not in (1, 2, 3, 4):
            raise InvalidStateSpec(f"nu must be 1..4, got {self.nu}")
        if (self.sign is None) == (self.cb_bits is None):
            raise InvalidStateSpec("exactly one of sign / cb_bits must be set")
        if self.sign is not None and self.sign not in (1, -1):
            raise InvalidStateSpec(f"sign must be +1 or -1, got {self.sign}")
        if self.cb_bits is not None:
            if self.nu not in (3, 4):
                raise InvalidStateSpec("computational surrogates exist for nu in {3,4} only")
            if self.cb_bits not in CB_ASSIGNMENTS:
                raise InvalidStateSpec(f"cb_bits must be one of {CB_ASSIGNMENTS}")

    @property
    def tag(self) -> str:
        if self.sign is not None:
            return "+" if self.sign > 0 else "-"
        return self.cb_bits


@dataclass(frozen=True)
class PlanEntry:
    state: PreparedStateSpec
    basis: str  # "x" | "z"


@dataclass
class CircuitPlan:
    y: str
    num_sites: int
    use_cb: bool
    use_rs: bool
    entries: list[PlanEntry] = field(default_factory=list)

    @property
    def prepared_states(self) -> list[PreparedStateSpec]:
        seen: dict[PreparedStateSpec, None] = {}
        for entry in self.entries:
            seen.setdefault(entry.state)
        return list(seen)


def build_plan(y: str, params: ModelParams, use_cb: bool = False, use_rs: bool = False) -> CircuitPlan:
    """Enumerate the distinct circuits needed for one sampled state.

    Counts per checkpoint: 16 plain, 12 with the reflection shortcut, 24
    with computational surrogates, 16 with both.
    """
    L = params.num_sites
    if len(y) != L:
        raise InvalidStateSpec(f"bitstring length {len(y)} != {L} sites")
    plan = CircuitPlan(y, L, use_cb, use_rs)
    nus = (1, 2, 3) if use_rs else (1, 2, 3, 4)
    for nu in nus:
        if use_cb and nu in (3, 4):
            specs = [PreparedStateSpec(y, nu, cb_bits=b) for b in CB_ASSIGNMENTS]
        else:
            specs = [PreparedStateSpec(y, nu, sign=s) for s in (1, -1)]
        for spec in specs:
            for basis in ("x", "z"):
                plan.entries.append(PlanEntry(spec, basis))
    return plan


def _pair_block(spec: PreparedStateSpec, num_sites: int) -> np.ndarray:
    """4-vector on the nu pair, little-endian within the pair."""
    a, b = nu_pair_sites(spec.nu, num_sites)
    if spec.cb_bits is not None:
        block = np.zeros(4, dtype=complex)
        block[int(spec.cb_bits[0]) + 2 * int(spec.cb_bits[1])] = 1.0
        return block
    sigma_a = 1.0 if spec.y[a - 1] == "1" else -1.0
    sigma_b = 1.0 if spec.y[b - 1] == "1" else -1.0
    block = np.zeros(4, dtype=complex)
    if spec.sign > 0:
        # (I + ZZ)|y_a y_b>/sqrt(2) = (|00> - sigma_a sigma_b |11>)/sqrt(2)
        block[0] = _INV_SQRT2
        block[3] = -sigma_a * sigma_b * _INV_SQRT2
    else:
        # (I - ZZ)|y_a y_b>/sqrt(2) ~ (sigma_a |10> + sigma_b |01>)/sqrt(2)
        block[1] = sigma_a * _INV_SQRT2
        block[2] = sigma_b * _INV_SQRT2
    return block


def prepare_state(spec: PreparedStateSpec) -> np.ndarray:
    """Prepared state as a product vector (Bell block only for nu in {3,4}).

    For nu in {1, 2} the projection of a Y eigenstate is itself an X or Z
    eigenstate, so the state is built directly:
    (I +/- X)|y_c>/sqrt(2) -> |+/->, (I +/- Z)|y_c>/sqrt(2) -> |0>/|1>.
    """
    L = len(spec.y)
    c = L // 2
    kets: list[np.ndarray | None] = [_SITE_KETS[("y", ch)] for ch in spec.y]
    if spec.nu == 1:
        x_plus = np.array([_INV_SQRT2, _INV_SQRT2], dtype=complex)
        x_minus = np.array([_INV_SQRT2, -_INV_SQRT2], dtype=complex)
        kets[c - 1] = x_plus if spec.sign > 0 else x_minus
    elif spec.nu == 2:
        kets[c - 1] = _SITE_KETS[("z", "0" if spec.sign > 0 else "1")]
    else:
        a, _ = nu_pair_sites(spec.nu, L)
        kets[a - 1] = _pair_block(spec, L)
        kets[a] = None  # consumed by the 4-dim block
    psi = np.ones(1, dtype=complex)
    for ket in kets:
        if ket is None:
            continue  # site consumed by the preceding 4-dim block
        psi = np.kron(ket, psi)  # each new site supplies the high bits
    return psi


# -- expectation records -----------------------------------------------------


@dataclass
class ExpectationRecord:
    """Whole-register observables of one prepared state at one checkpoint."""

    x_sites: np.ndarray  # <X_i>, length L
    z_sites: np.ndarray  # <Z_i>, length L
    zz_bonds: np.ndarray  # <Z_i Z_{i+1}>, length L-1


@lru_cache(maxsize=8)
def _parity_tables(num_sites: int) -> tuple[np.ndarray, np.ndarray]:
    """Sign tables turning basis-index weights into Z / ZZ expectations."""
    d = 1 << num_sites
    bits = (np.arange(d)[None, :] >> np.arange(num_sites)[:, None]) & 1
    z_signs = 1.0 - 2.0 * bits.astype(float)
    zz_signs = z_signs[:-1] * z_signs[1:]
    z_signs.flags.writeable = False
    zz_signs.flags.writeable = False
    return z_signs, zz_signs


def record_from_weights(
    z_weights: np.ndarray, x_weights: np.ndarray, num_sites: int
) -> ExpectationRecord:
    """Record from normalized basis-index weights (probabilities or
    counts/shots); ``x_weights`` come from the X-rotated register."""
    z_signs, zz_signs = _parity_tables(num_sites)
    return ExpectationRecord(
        x_sites=z_signs @ x_weights,
        z_sites=z_signs @ z_weights,
        zz_bonds=zz_signs @ z_weights,
    )


def _mean_record(records: list[ExpectationRecord]) -> ExpectationRecord:
    return ExpectationRecord(
        x_sites=np.mean([r.x_sites for r in records], axis=0),
        z_sites=np.mean([r.z_sites for r in records], axis=0),
        zz_bonds=np.mean([r.zz_bonds for r in records], axis=0),
    )


# -- evolution drivers -------------------------------------------------------


@dataclass
class TrotterSchedule:
    n_steps: int
    measure_every: int = 2

    def checkpoints(self) -> list[int]:
        return list(range(0, self.n_steps + 1, self.measure_every))

    def times(self, dt: float) -> np.ndarray:
        return np.array([k * dt for k in self.checkpoints()])


def _x_rotation_gates(num_sites: int):
    return basis_change_circuit(num_sites, "x" * num_sites).gates


def _statevector_record(
    psi: np.ndarray,
    num_sites: int,
    shots: int | None,
    rng: np.random.Generator | None,
    sink=None,
    sink_meta: dict | None = None,
) -> ExpectationRecord:
    rot = psi
    for gate in _x_rotation_gates(num_sites):
        rot = _apply_gate_vec(rot, num_sites, gate)
    p_z = np.abs(psi) ** 2
    p_x = np.abs(rot) ** 2
    if shots is None:
        return record_from_weights(p_z / p_z.sum(), p_x / p_x.sum(), num_sites)
    counts_z = rng.multinomial(shots, p_z / p_z.sum()).astype(float)
    counts_x = rng.multinomial(shots, p_x / p_x.sum()).astype(float)
    if sink is not None:
        for basis, counts in (("z", counts_z), ("x", counts_x)):
            sink(dict(sink_meta or {}, basis=basis, counts=_counts_dict(counts, num_sites)))
    return record_from_weights(counts_z / shots, counts_x / shots, num_sites)


def _counts_dict(counts: np.ndarray, num_sites: int) -> dict[str, int]:
    hits = np.nonzero(counts)[0]
    return {index_to_bits(int(b), num_sites): int(counts[b]) for b in hits}


def _dm_record(
    rho: np.ndarray,
    num_sites: int,
    shots: int | None,
    rng: np.random.Generator | None,
) -> ExpectationRecord:
    z_signs, zz_signs = _parity_tables(num_sites)
    diag = np.real(np.diag(rho)).copy()
    diag = np.clip(diag, 0.0, None)
    if shots is None:
        from .paulis import expectation_dm

        x_sites = np.array(
            [expectation_dm(x_at(i), rho, num_sites) for i in range(1, num_sites + 1)]
        )
        w_z = diag / diag.sum()
        return ExpectationRecord(
            x_sites=x_sites, z_sites=z_signs @ w_z, zz_bonds=zz_signs @ w_z
        )
    rot = rho
    for gate in _x_rotation_gates(num_sites):
        rot = _apply_gate_dm(rot, num_sites, gate)
    diag_x = np.clip(np.real(np.diag(rot)).copy(), 0.0, None)
    w_z = rng.multinomial(shots, diag / diag.sum()).astype(float) / shots
    w_x = rng.multinomial(shots, diag_x / diag_x.sum()).astype(float) / shots
    return record_from_weights(w_z, w_x, num_sites)


def _evolve_records_statevector(
    psi0: np.ndarray,
    params: ModelParams,
    schedule: TrotterSchedule,
    shots: int | None,
    rng: np.random.Generator | None,
    channel: KrausChannel | None = None,
    noise_rng: np.random.Generator | None = None,
    sink=None,
    sink_meta: dict | None = None,
) -> list[ExpectationRecord]:
    """Per-checkpoint records along one Trotter evolution (one trajectory
    when a non-identity channel is given)."""
    L = params.num_sites
    step_gates = trotter_step_circuit(params).gates
    noisy = channel is not None and not channel.is_identity
    checkpoints = set(schedule.checkpoints())
    psi = psi0.copy()
    records = []
    if 0 in checkpoints:
        records.append(
            _statevector_record(psi, L, shots, rng, sink, _meta(sink_meta, 0))
        )
    for k in range(1, schedule.n_steps + 1):
        for gate in step_gates:
            psi = _apply_gate_vec(psi, L, gate)
            if noisy and len(gate.targets) == 2:
                for q in gate.targets:
                    trajectory_step_inplace(psi, L, q, channel, noise_rng)
        if k in checkpoints:
            records.append(
                _statevector_record(psi, L, shots, rng, sink, _meta(sink_meta, k))
            )
    return records


def _meta(base: dict | None, step: int) -> dict | None:
    if base is None:
        return None
    return dict(base, t_step=step)


def _dm_step_kernel(params: ModelParams, channel: KrausChannel):
    """Precompiled Trotter step for the density-matrix backend.

    The bond gates stay individually interleaved with their noise
    channels (they do not commute with relaxation on a shared qubit);
    the noiseless single-qubit layers are fused, which leaves the
    channel placement untouched.
    """
    from .simulator import _diag_phases, gate_matrix

    L = params.num_sites
    d = 1 << L
    apply_noise = not channel.is_identity
    gates = trotter_step_circuit(params).gates
    bonds = []
    rz_phase = np.ones(d, dtype=complex)
    rx_mats: dict[int, np.ndarray] = {}
    for gate in gates:
        if gate.kind is GateKind.RZZ:
            bonds.append(
                (gate.targets, _diag_phases(L, gate.kind, gate.targets, gate.angle))
            )
        elif gate.kind is GateKind.RZ:
            rz_phase = rz_phase * _diag_phases(L, gate.kind, gate.targets, gate.angle)
        else:
            rx_mats[gate.targets[0]] = gate_matrix(gate)
    rx_pairs = []
    qubits = sorted(rx_mats)
    for i in range(0, len(qubits) - 1, 2):
        qa, qb = qubits[i], qubits[i + 1]
        rx_pairs.append((qa, np.kron(rx_mats[qb], rx_mats[qa])))  # qb is the high bit
    if len(qubits) % 2:
        q = qubits[-1]
        rx_pairs.append((q, rx_mats[q]))

    def step(rho: np.ndarray) -> np.ndarray:
        for targets, ph in bonds:
            rho *= ph[:, None]
            rho *= ph.conj()[None, :]
            if apply_noise:
                for q in targets:
                    channel_dm_inplace(rho, L, q, channel)
        rho *= rz_phase[:, None]
        rho *= rz_phase.conj()[None, :]
        for q, mat in rx_pairs:
            width = mat.shape[0]
            pre = d // (width << q)
            rho = np.einsum("ij,ajb->aib", mat, rho.reshape(pre, width, (1 << q) * d))
            rho = np.einsum(
                "ij,ajb->aib", mat.conj(), rho.reshape(d * pre, width, 1 << q)
            )
        return rho.reshape(d, d)

    return step


def _evolve_records_dm(
    psi0: np.ndarray,
    params: ModelParams,
    schedule: TrotterSchedule,
    channel: KrausChannel,
    shots: int | None,
    rng: np.random.Generator | None,
) -> list[ExpectationRecord]:
    L = params.num_sites
    rho = np.outer(psi0, psi0.conj())
    step = _dm_step_kernel(params, channel)
    checkpoints = set(schedule.checkpoints())
    records = []
    if 0 in checkpoints:
        records.append(_dm_record(rho, L, shots, rng))
    for k in range(1, schedule.n_steps + 1):
        rho = step(rho)
        if k in checkpoints:
            records.append(_dm_record(rho, L, shots, rng))
    return records


def _evolve_records_exact(
    psi0: np.ndarray,
    sd: SpectralData,
    times: np.ndarray,
    shots: int | None,
    rng: np.random.Generator | None,
) -> list[ExpectationRecord]:
    L = sd.params.num_sites
    return [
        _statevector_record(sd.propagate(psi0, t), L, shots, rng) for t in times
    ]


# -- plan execution ----------------------------------------------------------


@dataclass
class PlanResults:
    plan: CircuitPlan
    times: np.ndarray
    records: dict[tuple[int, str], list[ExpectationRecord]]

    def record(self, nu: int, tag: str, checkpoint: int) -> ExpectationRecord:
        try:
            return self.records[(nu, tag)][checkpoint]
        except KeyError as err:
            raise IncompletePlan(f"no results for nu={nu} tag={tag!r}") from err


def run_plan(
    plan: CircuitPlan,
    params: ModelParams,
    schedule: TrotterSchedule | None = None,
    *,
    sd: SpectralData | None = None,
    times: np.ndarray | None = None,
    shots: int | None = None,
    noise: NoiseParams | None = None,
    noise_backend: str = "dm",
    n_trajectories: int = DEFAULT_TRAJECTORIES,
    seed: int = 0,
    sink=None,
) -> PlanResults:
    """Execute every prepared state of a plan and collect its records.

    Evolution backend: exact propagation when ``sd``/``times`` are given,
    otherwise Trotter steps per ``schedule`` (state vector, or the noisy
    density-matrix / trajectory paths when ``noise`` is set).
    """
    if (sd is None) == (schedule is None):
        raise ValueError("give exactly one of sd(+times) or schedule")
    channel = kraus_operators(noise) if noise is not None else None
    if channel is not None and channel.is_identity and noise_backend == "trajectory":
        n_trajectories = 1  # all trajectories coincide; keeps reruns bit-stable
    results: dict[tuple[int, str], list[ExpectationRecord]] = {}
    tick_times = times if sd is not None else schedule.times(params.dt)
    for state_idx, spec in enumerate(plan.prepared_states):
        psi0 = prepare_state(spec)
        meta = {"y": plan.y, "nu": spec.nu, "sign": spec.sign, "cb": spec.cb_bits}
        shot_rng = np.random.default_rng(np.random.SeedSequence([seed, 1, state_idx]))
        if sd is not None:
            recs = _evolve_records_exact(psi0, sd, times, shots, shot_rng)
        elif channel is None:
            recs = _evolve_records_statevector(
                psi0, params, schedule, shots, shot_rng, sink=sink, sink_meta=meta
            )
        elif noise_backend == "dm":
            if params.num_sites > DM_SITE_LIMIT:
                raise IncompletePlan(
                    f"density-matrix backend capped at {DM_SITE_LIMIT} sites"
                )
            recs = _evolve_records_dm(psi0, params, schedule, channel, shots, shot_rng)
        elif noise_backend == "trajectory":
            per_traj = []
            for traj in range(n_trajectories):
                noise_rng = np.random.default_rng(
                    np.random.SeedSequence([seed, 2, state_idx, traj])
                )
                per_traj.append(
                    _evolve_records_statevector(
                        psi0,
                        params,
                        schedule,
                        shots,
                        shot_rng,
                        channel=channel,
                        noise_rng=noise_rng,
                    )
                )
            recs = [
                _mean_record([traj[k] for traj in per_traj])
                for k in range(len(per_traj[0]))
            ]
        else:
            raise ValueError(f"unknown noise backend {noise_backend!r}")
        results[(spec.nu, spec.tag)] = recs
    return PlanResults(plan, np.asarray(tick_times, dtype=float), results)


# -- correlator reconstruction ----------------------------------------------


def _difference_estimates(
    results: PlanResults, nu: int, checkpoint: int, use_cb: bool
) -> dict[int, np.ndarray]:
    """Half-difference estimates of Re <y| P^mu_i(t) P^nu |y> for all sites.

    Returns arrays indexed mu -> per-site values (P^3 at site L-1+ and
    P^4 at site 1 do not exist and read as 0).
    """
    L = results.plan.num_sites
    if use_cb and nu in (3, 4):
        r00 = results.record(nu, "00", checkpoint)
        r01 = results.record(nu, "01", checkpoint)
        r10 = results.record(nu, "10", checkpoint)
        r11 = results.record(nu, "11", checkpoint)
        diff_x = (r00.x_sites + r11.x_sites - r01.x_sites - r10.x_sites) / 4.0
        diff_z = (r00.z_sites + r11.z_sites - r01.z_sites - r10.z_sites) / 4.0
        diff_zz = (r00.zz_bonds + r11.zz_bonds - r01.zz_bonds - r10.zz_bonds) / 4.0
    else:
        plus = results.record(nu, "+", checkpoint)
        minus = results.record(nu, "-", checkpoint)
        diff_x = (plus.x_sites - minus.x_sites) / 2.0
        diff_z = (plus.z_sites - minus.z_sites) / 2.0
        diff_zz = (plus.zz_bonds - minus.zz_bonds) / 2.0
    p3 = np.zeros(L)
    p3[: L - 1] = diff_zz  # P^3_i = Z_i Z_{i+1}
    p4 = np.zeros(L)
    p4[1:] = diff_zz  # P^4_i = Z_{i-1} Z_i
    return {1: diff_x, 2: diff_z, 3: p3, 4: p4}


def reflected_estimates(est3: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
    """Fill the left-bond estimates from mirrored right-bond ones.

    Reflection around the center site maps site i to L - i and swaps the
    two bond operators.  Site L and the bond touching it have no mirror
    image inside the chain; those entries are left at zero (their weights
    only matter once correlations reach the boundary).
    """
    out = {}
    for mu, source_mu in ((1, 1), (2, 2), (3, 4), (4, 3)):
        src = est3[source_mu]
        L = len(src)
        filled = np.zeros(L)
        # est4[mu](i) = est3[reflected mu](L - i) for i = 1 .. L-1
        filled[: L - 1] = src[L - 2 :: -1]
        out[mu] = filled
    return out


def mitarai_fuji_estimate(
    results: PlanResults, checkpoint: int, mu: int, nu: int, r: int
) -> float:
    """Re <y| P^mu_{L/2+r}(t) P^nu_{L/2}(0) |y> from the executed plan."""
    L = results.plan.num_sites
    est = _difference_estimates(results, nu, checkpoint, results.plan.use_cb)
    site = L // 2 + r
    if not 1 <= site <= L:
        raise ValueError(f"offset {r} leaves the chain")
    return float(est[mu][site - 1])


def correlators_from_results(params: ModelParams, results: PlanResults) -> np.ndarray:
    """C^y_r(t) for all offsets; shape (n_checkpoints, L)."""
    L = params.num_sites
    c = L // 2
    center_coeffs = coefficient_vector(params, c)
    site_coeffs = np.stack(
        [coefficient_vector(params, i) for i in range(1, L + 1)], axis=1
    )  # (4, L)
    use_cb, use_rs = results.plan.use_cb, results.plan.use_rs
    n_cp = len(results.times)
    out = np.zeros((n_cp, L))
    for k in range(n_cp):
        total = np.zeros(L)
        est_cache: dict[int, dict[int, np.ndarray]] = {}
        for nu in (1, 2, 3, 4):
            if use_rs and nu == 4:
                est = reflected_estimates(est_cache[3])
            else:
                est = _difference_estimates(results, nu, k, use_cb)
                est_cache[nu] = est
            weighted = sum(site_coeffs[mu - 1] * est[mu] for mu in (1, 2, 3, 4))
            total += center_coeffs[nu - 1] * weighted
        out[k] = total
    return out


# -- computational-surrogate error term --------------------------------------


@dataclass
class OffDiagonalTerm:
    plus: float
    minus: float

    @property
    def estimate_shift(self) -> float:
        """Error inherited by the half-difference estimate."""
        return (self.plus - self.minus) / 2.0


def off_diagonal_term(
    sd: SpectralData, y: str, mu: int, r: int, t: float, nu: int = 3
) -> OffDiagonalTerm:
    """Exact surrogate error for one prepared pair, from the four cross
    matrix elements of P^mu(t) between the evolved computational states.

    ``plus``/``minus`` are the amounts by which the true Bell-pair
    expectations exceed their computational surrogates.
    """
    params = sd.params
    L = params.num_sites
    site = L // 2 + r
    a, b = nu_pair_sites(nu, L)
    sigma = lambda s: 1.0 if y[s - 1] == "1" else -1.0
    sign_product = -sigma(a) * sigma(b)  # phase of |11> in the + Bell block
    evolved = {
        bits: sd.propagate(prepare_state(PreparedStateSpec(y, nu, cb_bits=bits)), t)
        for bits in CB_ASSIGNMENTS
    }
    if mu == 1:
        op = x_at(site)
    elif mu == 2:
        op = z_at(site)
    elif mu == 3:
        op = zz_at(site)
    else:
        op = zz_at(site - 1)
    from .paulis import matrix_element

    cross_plus = matrix_element(op, evolved["00"], evolved["11"], L)
    cross_minus = matrix_element(op, evolved["01"], evolved["10"], L)
    return OffDiagonalTerm(
        plus=sign_product * cross_plus.real,
        minus=-sign_product * cross_minus.real,
    )


# -- ensemble-level pipeline --------------------------------------------------


def pipeline_correlators(
    params: ModelParams,
    bitstrings: list[str],
    schedule: TrotterSchedule | None = None,
    *,
    sd: SpectralData | None = None,
    times: np.ndarray | None = None,
    use_cb: bool = False,
    use_rs: bool = False,
    shots: int | None = None,
    noise: NoiseParams | None = None,
    noise_backend: str = "dm",
    n_trajectories: int = DEFAULT_TRAJECTORIES,
    seed: int = 0,
    sink=None,
):
    """Run the full measurement pipeline over an ensemble of bitstrings.

    Returns a CorrelatorGrid with per-sample values retained.
    """
    from .sampling import CorrelatorGrid, offsets_for, _attach_reference

    per_sample = []
    tick_times = None
    for y_idx, y in enumerate(bitstrings):
        plan = build_plan(y, params, use_cb=use_cb, use_rs=use_rs)
        results = run_plan(
            plan,
            params,
            schedule,
            sd=sd,
            times=times,
            shots=shots,
            noise=noise,
            noise_backend=noise_backend,
            n_trajectories=n_trajectories,
            seed=int(np.random.SeedSequence([seed, 7, y_idx]).generate_state(1)[0]),
            sink=(lambda rec, _y=y: sink(dict(rec, y=_y))) if sink else None,
        )
        per_sample.append(correlators_from_results(params, results))
        tick_times = results.times
    per_sample = np.asarray(per_sample)
    grid = CorrelatorGrid(
        times=tick_times,
        offsets=offsets_for(params.num_sites),
        mean=per_sample.mean(axis=0),
        per_sample=per_sample,
        metadata={
            "backend": "exact" if sd is not None else "trotter",
            "shots": shots,
            "use_cb": use_cb,
            "use_rs": use_rs,
            "noise": None if noise is None else vars(noise).copy(),
            "noise_backend": noise_backend if noise is not None else None,
            "ensemble_size": len(bitstrings),
            "seed": seed,
        },
    )
    _attach_reference(grid, params)
    return grid
