"""Mixed-field Ising chain: Hamiltonian, energy densities, Trotter step.

Two parameterizations are supported.  The ``MAIN`` variant is the
Rydberg-style chain

    H = 4 V sum_i n_i n_{i+1} + Omega sum_i X_i,    n_i = (I + Z_i) / 2,

whose Pauli expansion carries a scalar identity offset ``(L - 1) V``.
The ``APPENDIX`` variant specifies transverse and longitudinal fields
``h_x`` (with small per-site perturbations ``r_j``) and ``h_z`` directly
and is traceless.  In both cases the Hamiltonian is decomposed into
normalized site-local energy densities ``h_i`` with unit
infinite-temperature second moment in the bulk.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from math import sqrt

import numpy as np

from .errors import SizeLimitExceeded, UnsupportedVariant
from .paulis import (
    PauliString,
    dense_sum,
    infinite_temperature_product,
    merge_terms,
    x_at,
    z_at,
    zz_at,
)
from .simulator import Circuit, Gate, GateKind

DENSE_SITE_LIMIT = 14
PERTURBATION_SCALE = 0.01


class Variant(Enum):
    MAIN = "main"
    APPENDIX = "appendix"


@dataclass(frozen=True)
class ModelParams:
    num_sites: int
    variant: Variant = Variant.MAIN
    v: float = 1.0
    omega: float = 2.0
    h_x: float = -1.05
    h_z: float = 0.5
    dt: float = 0.1
    field_seed: int = 7

    def __post_init__(self):
        if self.num_sites < 4 or self.num_sites % 2:
            raise ValueError(f"num_sites must be even and >= 4, got {self.num_sites}")
        if self.normalization <= 0.0:
            raise ValueError("normalization must be positive")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")

    @property
    def normalization(self) -> float:
        if self.variant is Variant.MAIN:
            return sqrt(self.omega**2 + 4.5 * self.v**2)
        # appendix normalization uses the unperturbed h_x
        return sqrt(self.v**2 / 2 + self.h_x**2 + self.h_z**2)

    @property
    def dimension(self) -> int:
        return 1 << self.num_sites

    @property
    def identity_offset(self) -> float:
        """Scalar part of the Hamiltonian (from expanding 4V n n)."""
        if self.variant is Variant.MAIN:
            return (self.num_sites - 1) * self.v
        return 0.0

    def site_x_fields(self) -> np.ndarray:
        """Per-site transverse fields; appendix sites carry r_j draws."""
        if self.variant is Variant.MAIN:
            return np.full(self.num_sites, self.omega)
        rng = np.random.default_rng(np.random.SeedSequence(self.field_seed))
        r = rng.uniform(-PERTURBATION_SCALE, PERTURBATION_SCALE, self.num_sites)
        return self.h_x + r

    def site_z_fields(self) -> np.ndarray:
        """Per-site Z coefficients of H (halved on the chain ends)."""
        hz = 2.0 * self.v if self.variant is Variant.MAIN else self.h_z
        z = np.full(self.num_sites, hz)
        z[0] = hz / 2
        z[-1] = hz / 2
        return z


@dataclass(frozen=True)
class EnergyDensity:
    site: int
    terms: tuple[PauliString, ...]
    normalization: float

    def as_list(self) -> list[PauliString]:
        return list(self.terms)


def coefficient_vector(params: ModelParams, site: int) -> np.ndarray:
    """Weights of (X_i, Z_i, Z_i Z_{i+1}, Z_{i-1} Z_i) in h_i, boundary aware.

    The single-site fields of H each belong to exactly one h_i, so the X
    and Z weights coincide with the per-site field arrays; only the bond
    terms are split half-and-half between neighbours.
    """
    L = params.num_sites
    if not 1 <= site <= L:
        raise ValueError(f"site {site} out of range 1..{L}")
    x = params.site_x_fields()[site - 1]
    z = params.site_z_fields()[site - 1]
    right = params.v / 2 if site < L else 0.0
    left = params.v / 2 if site > 1 else 0.0
    return np.array([x, z, right, left]) / params.normalization


def energy_density(params: ModelParams, site: int) -> EnergyDensity:
    coeffs = coefficient_vector(params, site)
    ops = [x_at(site), z_at(site)]
    terms = [ops[0].scaled(coeffs[0]), ops[1].scaled(coeffs[1])]
    if coeffs[2]:
        terms.append(zz_at(site).scaled(coeffs[2]))
    if coeffs[3]:
        terms.append(zz_at(site - 1).scaled(coeffs[3]))
    return EnergyDensity(site, tuple(terms), params.normalization)


def hamiltonian_terms(params: ModelParams) -> list[PauliString]:
    """Traceless Pauli part of H, equal to N * sum_i h_i exactly."""
    n = params.normalization
    terms: list[PauliString] = []
    for i in range(1, params.num_sites + 1):
        terms.extend(t.scaled(n) for t in energy_density(params, i).terms)
    return merge_terms(terms)


def dense_hamiltonian(params: ModelParams, include_offset: bool = False) -> np.ndarray:
    if params.num_sites > DENSE_SITE_LIMIT:
        raise SizeLimitExceeded(
            f"dense Hamiltonian capped at {DENSE_SITE_LIMIT} sites, got {params.num_sites}"
        )
    mat = dense_sum(hamiltonian_terms(params), params.num_sites)
    if include_offset and params.identity_offset:
        mat += params.identity_offset * np.eye(params.dimension)
    return mat


def sum_rule_constant(params: ModelParams) -> float:
    """Closed form of sum_r C_r(t) for the MAIN variant."""
    if params.variant is not Variant.MAIN:
        raise UnsupportedVariant(
            "no closed-form sum rule for the appendix variant; "
            "use sum_rule_constant_numeric"
        )
    return (params.omega**2 + 5 * params.v**2) / (params.omega**2 + 4.5 * params.v**2)


def equal_time_correlator(params: ModelParams, i: int, j: int) -> float:
    """<h_i h_j> at infinite temperature by Pauli orthogonality."""
    return infinite_temperature_product(
        energy_density(params, i).as_list(), energy_density(params, j).as_list()
    )


def sum_rule_constant_numeric(params: ModelParams) -> float:
    """sum_r C_r(0) from the trace oracle; works for both variants."""
    j = params.num_sites // 2
    return sum(
        equal_time_correlator(params, i, j) for i in range(1, params.num_sites + 1)
    )


def h_squared_infinity(params: ModelParams) -> float:
    """<H^2> at infinite temperature (traceless part) by Pauli trace."""
    terms = hamiltonian_terms(params)
    return infinite_temperature_product(terms, terms)


def h_squared_closed_form(params: ModelParams) -> float:
    """Closed form of <H^2> for the appendix variant.

    Per-site second moments give N^2 (L - 2) for the bulk plus
    2 (V^2/4 + h_x^2 + h_z^2/4) for the two ends; the shared-bond cross
    terms 2 (L - 1) <h_j h_{j+1}> add (L - 1) V^2 / 2 on top.
    """
    if params.variant is not Variant.APPENDIX:
        raise UnsupportedVariant("closed form stated for the appendix variant")
    L, v, hx, hz = params.num_sites, params.v, params.h_x, params.h_z
    n2 = params.normalization**2
    return n2 * (L - 2) + 2 * (v**2 / 4 + hx**2 + hz**2 / 4) + (L - 1) * v**2 / 2


def trotter_step_circuit(params: ModelParams) -> Circuit:
    """One first-order step: all-bond RZZ, then RZ, then RX layers.

    Angles follow exp(-i theta P / 2), so a Hamiltonian term ``c * P``
    integrated for ``dt`` becomes a rotation by ``theta = 2 c dt``.
    """
    L, dt = params.num_sites, params.dt
    circ = Circuit(L)
    for q in range(L - 1):
        circ.append(Gate(GateKind.RZZ, (q, q + 1), 2.0 * params.v * dt))
    for q, hz in enumerate(params.site_z_fields()):
        circ.append(Gate(GateKind.RZ, (q,), 2.0 * hz * dt))
    for q, hx in enumerate(params.site_x_fields()):
        circ.append(Gate(GateKind.RX, (q,), 2.0 * hx * dt))
    return circ


def trotter_circuit(params: ModelParams, n_steps: int) -> Circuit:
    circ = Circuit(params.num_sites)
    step = trotter_step_circuit(params)
    for _ in range(n_steps):
        circ.extend(step.gates)
    return circ
