"""Exact-diagonalization reference dynamics and spectral diagnostics.

Everything here is dense and capped at 14 sites.  Unequal-time
correlators are evaluated in the eigenbasis; sampling-basis statistics
use a batched two-branch scheme (evolve ``|psi>`` and ``h_j |psi>`` side
by side, read off ``<a| h_i |b>``), which turns ensembles of product
states into matrix columns.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import sqrt

import numpy as np

from .errors import SizeLimitExceeded
from .model import (
    ModelParams,
    dense_hamiltonian,
    energy_density,
    h_squared_infinity,
    trotter_step_circuit,
)
from .paulis import apply_terms
from .simulator import _apply_1q, _apply_gate_vec, product_state_vector, _SITE_KETS

FULL_BASIS_SITE_LIMIT = 12

# w columns are the single-site y kets (bit 0, bit 1); W = kron of w per site
_W1 = np.array([[1.0, 1.0], [-1j, 1j]]) / sqrt(2.0)


@dataclass
class SpectralData:
    """Eigendecomposition of the traceless Pauli part of H."""

    params: ModelParams
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dimension(self) -> int:
        return self.params.dimension

    def phases(self, t: float) -> np.ndarray:
        return np.exp(-1j * self.eigenvalues * t)

    def propagate(self, states: np.ndarray, t: float) -> np.ndarray:
        """U(t) applied to a vector or to each column of a matrix."""
        q = self.eigenvectors
        inner = q.conj().T @ states
        if states.ndim == 1:
            return q @ (self.phases(t) * inner)
        return q @ (self.phases(t)[:, None] * inner)

    def residual(self, n: int) -> float:
        """|| H v_n - E_n v_n || for one eigenpair (spot-check helper)."""
        h = dense_hamiltonian(self.params)
        v = self.eigenvectors[:, n]
        return float(np.linalg.norm(h @ v - self.eigenvalues[n] * v))


def spectral_data(params: ModelParams) -> SpectralData:
    evals, evecs = np.linalg.eigh(dense_hamiltonian(params))
    return SpectralData(params, evals, evecs)


def _rotated_operator(sd: SpectralData, site: int) -> np.ndarray:
    """h_site in the energy eigenbasis (one dense product)."""
    terms = energy_density(sd.params, site).as_list()
    hq = apply_terms(terms, sd.eigenvectors, sd.params.num_sites)
    return sd.eigenvectors.conj().T @ hq


def exact_correlator(
    sd: SpectralData, i: int, j: int, times: np.ndarray
) -> tuple[np.ndarray, float]:
    """C_ij(t) = tr(h_i(t) h_j) / d over a time grid.

    Returns the real part plus the largest imaginary residue seen (the
    trace of a product of two Hermitian operators is real, so the residue
    is a pure numerics diagnostic).
    """
    b = _rotated_operator(sd, i)
    if i == j:
        b = b * b.T
    else:
        b = b * _rotated_operator(sd, j).T
    d = sd.dimension
    vals = np.empty(len(times), dtype=complex)
    for k, t in enumerate(times):
        q = np.exp(1j * sd.eigenvalues * t)
        vals[k] = q @ (b @ q.conj()) / d
    return vals.real.copy(), float(np.max(np.abs(vals.imag)))


def exact_correlator_profile(
    sd: SpectralData, times: np.ndarray, j: int | None = None
) -> np.ndarray:
    """C_r(t) for every site offset; shape (n_times, L)."""
    L = sd.params.num_sites
    j = L // 2 if j is None else j
    hj_rot_t = _rotated_operator(sd, j).T.copy()
    d = sd.dimension
    out = np.empty((len(times), L))
    phases = [np.exp(1j * sd.eigenvalues * t) for t in times]
    for col, i in enumerate(range(1, L + 1)):
        b = _rotated_operator(sd, i)
        b *= hj_rot_t
        for k, q in enumerate(phases):
            out[k, col] = (q @ (b @ q.conj())).real / d
    return out


def two_branch_values(
    sd: SpectralData,
    states: np.ndarray,
    times: np.ndarray,
    j: int | None = None,
    sites: list[int] | None = None,
) -> np.ndarray:
    """<psi| h_i(t) h_j |psi> for column states; shape (n_t, n_sites, n_states).

    Complex values; the correlator estimators use the real part.
    """
    params = sd.params
    L = params.num_sites
    j = L // 2 if j is None else j
    sites = list(range(1, L + 1)) if sites is None else sites
    if states.ndim == 1:
        states = states[:, None]
    hj = energy_density(params, j).as_list()
    q = sd.eigenvectors
    stacked = np.concatenate([states, apply_terms(hj, states, L)], axis=1)
    rotated = q.conj().T @ stacked
    n = states.shape[1]
    site_terms = [energy_density(params, i).as_list() for i in sites]
    out = np.empty((len(times), len(sites), n), dtype=complex)
    for k, t in enumerate(times):
        evolved = q @ (sd.phases(t)[:, None] * rotated)
        a, b = evolved[:, :n], evolved[:, n:]
        for s, terms in enumerate(site_terms):
            out[k, s] = np.sum(a.conj() * apply_terms(terms, b, L), axis=0)
    return out


def state_correlator(
    sd: SpectralData, psi: np.ndarray, i: int, j: int, times: np.ndarray
) -> np.ndarray:
    """Two-branch correlator for a single state, complex-valued."""
    return two_branch_values(sd, psi, times, j=j, sites=[i])[:, 0, 0]


def state_correlator_trotter(
    params: ModelParams,
    psi: np.ndarray,
    i: int,
    j: int,
    n_steps: int,
    measure_every: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Two-branch correlator under first-order Trotter steps.

    Returns (times, values) with a checkpoint every ``measure_every``
    steps, step 0 included.
    """
    L = params.num_sites
    hi = energy_density(params, i).as_list()
    hj = energy_density(params, j).as_list()
    step = trotter_step_circuit(params)
    a = psi.copy()
    b = apply_terms(hj, psi, L)
    ticks = [0.0]
    vals = [complex(np.vdot(a, apply_terms(hi, b, L)))]
    for k in range(1, n_steps + 1):
        for gate in step.gates:
            a = _apply_gate_vec(a, L, gate)
            b = _apply_gate_vec(b, L, gate)
        if k % measure_every == 0:
            ticks.append(k * params.dt)
            vals.append(complex(np.vdot(a, apply_terms(hi, b, L))))
    return np.array(ticks), np.array(vals)


# -- product-basis ensembles ----------------------------------------------


def y_basis_matrix(num_sites: int) -> np.ndarray:
    """All 2^L y-basis product states as columns (column index = bitstring)."""
    if num_sites > FULL_BASIS_SITE_LIMIT:
        raise SizeLimitExceeded(
            f"full product basis capped at {FULL_BASIS_SITE_LIMIT} sites"
        )
    w = _W1
    for _ in range(num_sites - 1):
        w = np.kron(_W1, w)
    return w


def to_y_basis(arr: np.ndarray, num_sites: int) -> np.ndarray:
    """Overlaps <y_b|psi> for every y bitstring, via L local rotations.

    Works on a vector or columnwise on a matrix without forming the dense
    basis transform.
    """
    out = np.asarray(arr, dtype=complex).copy()
    wdag = _W1.conj().T
    for q in range(num_sites):
        out = _apply_1q(out, num_sites, q, wdag)
    return out


def product_basis_columns(bitstrings: list[str], basis: str = "y") -> np.ndarray:
    cols = [
        product_state_vector([_SITE_KETS[(basis, ch)] for ch in bits])
        for bits in bitstrings
    ]
    return np.stack(cols, axis=1)


def random_bitstrings(num_sites: int, n: int, rng: np.random.Generator) -> list[str]:
    draws = rng.integers(0, 2, size=(n, num_sites))
    return ["".join("1" if b else "0" for b in row) for row in draws]


def haar_states(dim: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random columns from normalized i.i.d. complex Gaussians."""
    z = rng.normal(size=(dim, n)) + 1j * rng.normal(size=(dim, n))
    return z / np.linalg.norm(z, axis=0, keepdims=True)


@dataclass
class FluctuationProfile:
    times: np.ndarray
    offsets: np.ndarray
    mean: np.ndarray  # (n_t, n_offsets)
    std: np.ndarray
    basis: str
    num_sites: int
    sample_size: int | None  # None: full basis


def fluctuation_profile(
    sd: SpectralData,
    times: np.ndarray,
    offsets: list[int] | None = None,
    basis: str = "y",
    sample: int | None = None,
    rng: np.random.Generator | None = None,
) -> FluctuationProfile:
    """Mean and standard deviation of Re <p| h_{L/2+r}(t) h_{L/2} |p> over a
    product-state ensemble (full basis by default, or ``sample`` random
    members)."""
    L = sd.params.num_sites
    offsets = offsets if offsets is not None else [0]
    sites = [L // 2 + r for r in offsets]
    if sample is None:
        if basis == "y":
            states = y_basis_matrix(L)
        else:
            if L > FULL_BASIS_SITE_LIMIT:
                raise SizeLimitExceeded(
                    f"full product basis capped at {FULL_BASIS_SITE_LIMIT} sites"
                )
            states = np.eye(1 << L, dtype=complex)
    else:
        if rng is None:
            raise ValueError("sampled profiles need an rng")
        states = product_basis_columns(random_bitstrings(L, sample, rng), basis)
    vals = two_branch_values(sd, states, times, sites=sites).real
    return FluctuationProfile(
        times=np.asarray(times, dtype=float),
        offsets=np.asarray(offsets, dtype=int),
        mean=vals.mean(axis=2),
        std=vals.std(axis=2),
        basis=basis,
        num_sites=L,
        sample_size=sample,
    )


def relative_error(
    sd: SpectralData,
    times: np.ndarray,
    basis: str = "y",
    sample: int | None = None,
    rng: np.random.Generator | None = None,
    floor: float = 1e-6,
) -> tuple[np.ndarray, np.ndarray]:
    """F_0(L, t) / C_0(t) plus a mask flagging |C_0| below ``floor``."""
    j = sd.params.num_sites // 2
    c0, _ = exact_correlator(sd, j, j, times)
    prof = fluctuation_profile(sd, times, [0], basis=basis, sample=sample, rng=rng)
    small = np.abs(c0) < floor
    eps = np.where(small, np.nan, prof.std[:, 0] / np.where(small, 1.0, c0))
    return eps, ~small


# -- spectral (ETH-style) diagnostics --------------------------------------


@dataclass
class DiagonalStats:
    site: int
    energies_per_site: np.ndarray
    diagonal_elements: np.ndarray
    delta_sq: float


def eth_diagonal_stats(sd: SpectralData, site: int) -> DiagonalStats:
    """Scatter of <n|h_i|n> against E_n/L and its summed square deviation
    from the smooth value E_n/(N L)."""
    params = sd.params
    L = params.num_sites
    hq = apply_terms(energy_density(params, site).as_list(), sd.eigenvectors, L)
    diag = np.einsum("in,in->n", sd.eigenvectors.conj(), hq).real
    smooth = sd.eigenvalues / (params.normalization * L)
    return DiagonalStats(
        site=site,
        energies_per_site=sd.eigenvalues / L,
        diagonal_elements=diag,
        delta_sq=float(np.sum((diag - smooth) ** 2)),
    )


@dataclass
class IprStats:
    eigenstate_iprs: np.ndarray
    average: float
    scaled_average: float  # d * average


def ipr_stats(sd: SpectralData) -> IprStats:
    g = to_y_basis(sd.eigenvectors, sd.params.num_sites)
    iprs = np.sum(np.abs(g) ** 4, axis=0)
    avg = float(iprs.mean())
    return IprStats(iprs, avg, avg * sd.dimension)


def ipr_of_state(psi: np.ndarray, num_sites: int) -> float:
    """y-basis inverse participation ratio of a (possibly unnormalized)
    vector, with no renormalization applied."""
    return float(np.sum(np.abs(to_y_basis(psi, num_sites)) ** 4))


@dataclass
class LongTimeStats:
    window: tuple[float, float]
    correlator_average: float
    predicted_plateau: float
    plateau_error: float  # correlator_average - predicted_plateau
    fluctuation_average: float  # time average of F_0^2
    h_squared: float


def long_time_stats(
    sd: SpectralData,
    window: tuple[float, float] = (12.0, 75.0),
    step: float = 0.25,
    fluct_sample: int | None = None,
    rng: np.random.Generator | None = None,
) -> LongTimeStats:
    params = sd.params
    L = params.num_sites
    t0, t1 = window
    n = int(round((t1 - t0) / step)) + 1
    times = np.linspace(t0, t1, n)
    j = L // 2
    c0, _ = exact_correlator(sd, j, j, times)
    h2 = h_squared_infinity(params)
    plateau = h2 / (params.normalization**2 * L**2)
    if fluct_sample is None and L > 10:
        fluct_sample = 256  # full-basis profiles get slow above 2^10
    prof = fluctuation_profile(sd, times, [0], basis="y", sample=fluct_sample, rng=rng)
    span = t1 - t0
    return LongTimeStats(
        window=window,
        correlator_average=float(np.trapezoid(c0, times)) / span,
        predicted_plateau=plateau,
        plateau_error=float(np.trapezoid(c0, times)) / span - plateau,
        fluctuation_average=float(np.trapezoid(prof.std[:, 0] ** 2, times)) / span,
        h_squared=h2,
    )


def overlap_flatness(
    sd: SpectralData, bits: str, window: int = 64
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coarse-grained d |<y|n>|^2 against eigenenergy.

    Averages over consecutive blocks of ``window`` eigenstates in energy
    order; returns (block mean energies, block means, raw overlaps).
    """
    psi = product_state_vector([_SITE_KETS[("y", ch)] for ch in bits])
    overlaps = np.abs(psi.conj() @ sd.eigenvectors) ** 2
    scaled = sd.dimension * overlaps
    nblocks = sd.dimension // window
    cut = nblocks * window
    block_vals = scaled[:cut].reshape(nblocks, window).mean(axis=1)
    block_energy = sd.eigenvalues[:cut].reshape(nblocks, window).mean(axis=1)
    return block_energy, block_vals, overlaps


# -- sampling-basis vs Haar benchmark ---------------------------------------


@dataclass
class TypicalityReport:
    times: np.ndarray
    y_std_c0: np.ndarray
    haar_std_c0: np.ndarray
    y_std_sv: np.ndarray
    haar_std_sv: np.ndarray
    ratio_c0: float
    ratio_sv: float


def _per_state_sv(values: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Spatial variance per state from per-state correlators (n_t, L, n)."""
    r = offsets[None, :, None]
    denom = values.sum(axis=1)
    m1 = (r * values).sum(axis=1) / denom
    m2 = (r**2 * values).sum(axis=1) / denom
    return m2 - m1**2


def typicality_comparison(
    sd: SpectralData,
    times: np.ndarray,
    rng: np.random.Generator,
    n_y: int = 400,
    n_haar: int = 200,
    ratio_window: tuple[float, float] = (2.0, 15.0),
) -> TypicalityReport:
    """Standard deviations of per-state C_0 and spatial variance for the
    y-product ensemble against Haar-random states, with the summary ratio
    taken as the median over ``ratio_window``."""
    L = sd.params.num_sites
    offsets = np.arange(-L // 2 + 1, L // 2 + 1)
    y_states = product_basis_columns(random_bitstrings(L, n_y, rng), "y")
    h_states = haar_states(sd.dimension, n_haar, rng)
    y_vals = two_branch_values(sd, y_states, times).real
    h_vals = two_branch_values(sd, h_states, times).real
    center = int(np.where(offsets == 0)[0][0])
    y_std_c0 = y_vals[:, center, :].std(axis=1)
    h_std_c0 = h_vals[:, center, :].std(axis=1)
    y_sv = _per_state_sv(y_vals, offsets)
    h_sv = _per_state_sv(h_vals, offsets)
    y_std_sv = y_sv.std(axis=1)
    h_std_sv = h_sv.std(axis=1)
    t = np.asarray(times)
    inside = (t >= ratio_window[0]) & (t <= ratio_window[1])
    ratio_c0 = float(np.median(y_std_c0[inside] / h_std_c0[inside]))
    ratio_sv = float(np.median(y_std_sv[inside] / h_std_sv[inside]))
    return TypicalityReport(
        times=t,
        y_std_c0=y_std_c0,
        haar_std_c0=h_std_c0,
        y_std_sv=y_std_sv,
        haar_std_sv=h_std_sv,
        ratio_c0=ratio_c0,
        ratio_sv=ratio_sv,
    )
