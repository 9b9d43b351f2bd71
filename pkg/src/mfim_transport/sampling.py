"""Random product-state ensembles and sample-averaged correlator estimates."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SizeLimitExceeded
from .exact import (
    SpectralData,
    exact_correlator,
    exact_correlator_profile,
    product_basis_columns,
    random_bitstrings,
    two_branch_values,
)
from .model import ModelParams, sum_rule_constant, Variant

# Fixed 12-member y-basis ensemble used by the hardware-style presets.
FIXED_ENSEMBLE_12 = (
    "100010111110",
    "010001100101",
    "110101111101",
    "010001111011",
    "011101101100",
    "011101000001",
    "100011011010",
    "111010110010",
    "000011010110",
    "111110001111",
    "001011001110",
    "011011101000",
)


@dataclass(frozen=True)
class Ensemble:
    kind: str  # "y", "z", or "haar"
    num_sites: int
    members: tuple[str, ...] = ()  # bitstrings for product kinds
    haar_seed: int | None = None
    size: int = 0

    def __post_init__(self):
        if self.kind not in ("y", "z", "haar"):
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if self.kind != "haar":
            object.__setattr__(self, "size", len(self.members))
            for bits in self.members:
                if len(bits) != self.num_sites:
                    raise ValueError(
                        f"bitstring {bits!r} does not match {self.num_sites} sites"
                    )
        elif self.size < 1:
            raise ValueError("haar ensembles need an explicit size >= 1")


def draw_ensemble(
    kind: str, num_sites: int, size: int, rng: np.random.Generator
) -> Ensemble:
    """Draw ``size`` i.i.d. members (with replacement for product kinds)."""
    if size < 1:
        raise ValueError("ensemble size must be >= 1")
    if kind == "haar":
        return Ensemble(kind, num_sites, haar_seed=int(rng.integers(2**63)), size=size)
    return Ensemble(kind, num_sites, tuple(random_bitstrings(num_sites, size, rng)))


def fixed_ensemble() -> Ensemble:
    """The frozen 12-state y ensemble (12 sites)."""
    return Ensemble("y", 12, FIXED_ENSEMBLE_12)


@dataclass
class CorrelatorGrid:
    """Sampled estimates C^S_r(t) plus the retained per-sample values.

    ``offsets`` spans r = -L/2+1 .. L/2 so that site L/2 + r runs over the
    whole chain; ``per_sample`` has shape (S, n_times, L).
    """

    times: np.ndarray
    offsets: np.ndarray
    mean: np.ndarray
    per_sample: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def num_sites(self) -> int:
        return len(self.offsets)

    @property
    def sample_count(self) -> int:
        return self.per_sample.shape[0]

    def center_column(self) -> int:
        return int(np.where(self.offsets == 0)[0][0])


def offsets_for(num_sites: int) -> np.ndarray:
    return np.arange(-num_sites // 2 + 1, num_sites // 2 + 1)


def ensemble_columns(ensemble: Ensemble, rng: np.random.Generator | None = None):
    from .exact import haar_states  # local import keeps module load light

    if ensemble.kind == "haar":
        gen = np.random.default_rng(ensemble.haar_seed)
        return haar_states(1 << ensemble.num_sites, ensemble.size, gen)
    return product_basis_columns(list(ensemble.members), ensemble.kind)


def estimate_correlators_exact(
    sd: SpectralData, ensemble: Ensemble, times: np.ndarray
) -> CorrelatorGrid:
    """Sample-averaged correlators under exact evolution (two-branch)."""
    states = ensemble_columns(ensemble)
    vals = two_branch_values(sd, states, times).real  # (n_t, L, S)
    per_sample = np.moveaxis(vals, 2, 0)
    grid = CorrelatorGrid(
        times=np.asarray(times, dtype=float),
        offsets=offsets_for(sd.params.num_sites),
        mean=per_sample.mean(axis=0),
        per_sample=per_sample,
        metadata={"backend": "exact", "ensemble": ensemble.kind, "size": ensemble.size},
    )
    _attach_reference(grid, sd.params)
    return grid


def _attach_reference(grid: CorrelatorGrid, params: ModelParams) -> None:
    if params.variant is Variant.MAIN:
        grid.metadata["sum_rule_reference"] = sum_rule_constant(params)


def spatial_variance_estimator(
    grid: CorrelatorGrid, floor: float = 0.05
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample-averaged spatial variance from the mean grid.

    Time points whose summed correlator falls below ``floor`` in magnitude
    are flagged invalid and should be excluded from fits.
    """
    return _sv_from_values(grid.mean, grid.offsets, floor)


def per_sample_spatial_variance(
    grid: CorrelatorGrid, k: int, floor: float = 0.05
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Single-sample variant (biased estimator, kept for diagnostics)."""
    return _sv_from_values(grid.per_sample[k], grid.offsets, floor)


def _sv_from_values(values: np.ndarray, offsets: np.ndarray, floor: float):
    denom = values.sum(axis=1)
    valid = np.abs(denom) >= floor
    safe = np.where(valid, denom, 1.0)
    m1 = (values * offsets[None, :]).sum(axis=1) / safe
    m2 = (values * offsets[None, :] ** 2).sum(axis=1) / safe
    sv = np.where(valid, m2 - m1**2, np.nan)
    return values.sum(axis=1), sv, valid


@dataclass
class ConvergenceReport:
    sizes: np.ndarray
    correlator_errors: np.ndarray  # (trials, n_sizes)
    variance_errors: np.ndarray
    correlator_slope: float
    variance_slope: float


def _loglog_slope(sizes: np.ndarray, errors: np.ndarray) -> float:
    return float(np.polyfit(np.log(sizes), np.log(errors), 1)[0])


def convergence_errors(
    sd: SpectralData,
    sizes: list[int],
    trials: int,
    rng: np.random.Generator,
    t_max: float = 15.0,
    t_step: float = 0.25,
) -> ConvergenceReport:
    """Time-averaged squared errors of C^S_0 and of the sampled spatial
    variance against the exact curves, per ensemble size and trial.

    Per-bitstring correlator curves are cached, so repeated draws across
    trials and sizes cost nothing extra.
    """
    params = sd.params
    L = params.num_sites
    times = np.linspace(0.0, t_max, int(round(t_max / t_step)) + 1)
    span = times[-1] - times[0]
    exact_prof = exact_correlator_profile(sd, times)  # (n_t, L)
    offsets = offsets_for(L)
    center = int(np.where(offsets == 0)[0][0])
    c_exact = exact_prof[:, center]
    _, sv_exact, _ = _sv_from_values(exact_prof, offsets, floor=0.0)

    draws = [
        [random_bitstrings(L, s, rng) for s in sizes] for _ in range(trials)
    ]
    unique = sorted({b for trial in draws for batch in trial for b in batch})
    states = product_basis_columns(unique, "y")
    vals = two_branch_values(sd, states, times).real  # (n_t, L, n_unique)
    curve = {bits: vals[:, :, k] for k, bits in enumerate(unique)}

    e_c = np.empty((trials, len(sizes)))
    e_sv = np.empty((trials, len(sizes)))
    for ti, trial in enumerate(draws):
        for si, batch in enumerate(trial):
            avg = np.mean([curve[b] for b in batch], axis=0)  # (n_t, L)
            diff_c = avg[:, center] - c_exact
            e_c[ti, si] = np.trapezoid(diff_c**2, times) / span
            _, sv_est, _ = _sv_from_values(avg, offsets, floor=0.0)
            e_sv[ti, si] = np.trapezoid((sv_est - sv_exact) ** 2, times) / span
    sizes_arr = np.asarray(sizes, dtype=float)
    return ConvergenceReport(
        sizes=sizes_arr,
        correlator_errors=e_c,
        variance_errors=e_sv,
        correlator_slope=_loglog_slope(sizes_arr, e_c.mean(axis=0)),
        variance_slope=_loglog_slope(sizes_arr, e_sv.mean(axis=0)),
    )
