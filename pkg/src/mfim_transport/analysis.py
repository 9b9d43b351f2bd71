"""Sum rule, renormalization mitigation, spatial variance, power-law fits."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FitWindowError
from .sampling import CorrelatorGrid

DEFAULT_FLOOR = 0.05


def sum_rule(grid: CorrelatorGrid) -> tuple[np.ndarray, np.ndarray, float | None]:
    """Summed correlator series and, when known, its conserved reference."""
    series = grid.mean.sum(axis=1)
    return grid.times, series, grid.metadata.get("sum_rule_reference")


@dataclass
class MitigatedGrid:
    """Renormalized correlators C_r / sum_r C_r with a validity mask.

    Checkpoints whose measured sum falls below ``floor`` in magnitude are
    flagged instead of divided through; renormalized rows sum to one
    wherever valid.
    """

    grid: CorrelatorGrid
    sum_series: np.ndarray
    renormalized: np.ndarray
    valid: np.ndarray
    floor: float

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def offsets(self) -> np.ndarray:
        return self.grid.offsets


def renormalize(grid: CorrelatorGrid, floor: float = DEFAULT_FLOOR) -> MitigatedGrid:
    sums = grid.mean.sum(axis=1)
    valid = np.abs(sums) >= floor
    safe = np.where(valid, sums, 1.0)
    renorm = np.where(valid[:, None], grid.mean / safe[:, None], np.nan)
    return MitigatedGrid(grid, sums, renorm, valid, floor)


def spatial_variance(mitigated: MitigatedGrid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Variance of the renormalized spatial distribution per checkpoint."""
    r = mitigated.offsets.astype(float)[None, :]
    vals = mitigated.renormalized
    m1 = np.nansum(r * vals, axis=1)
    m2 = np.nansum(r**2 * vals, axis=1)
    sv = np.where(mitigated.valid, m2 - m1**2, np.nan)
    return mitigated.times, sv, mitigated.valid


@dataclass
class TransportFit:
    kind: str  # "decay" (a t^{-1/z}) or "growth" (b t^{2/z})
    amplitude: float
    exponent_z: float
    window: tuple[float, float]
    residual_rms: float
    n_points: int
    log_slope: float

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "amplitude": self.amplitude,
            "z": self.exponent_z,
            "window": list(self.window),
            "residual_rms": self.residual_rms,
            "n_points": self.n_points,
            "log_slope": self.log_slope,
        }


def fit_power_law(
    times: np.ndarray,
    values: np.ndarray,
    window: tuple[float, float],
    kind: str = "decay",
) -> TransportFit:
    """Ordinary least squares of log(value) on log(t) inside the window.

    Nonpositive values and flagged (NaN) points are excluded; fewer than
    five surviving points refuse the fit.
    """
    if kind not in ("decay", "growth"):
        raise ValueError(f"kind must be 'decay' or 'growth', got {kind!r}")
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = (
        (t >= window[0]) & (t <= window[1]) & (t > 0.0) & np.isfinite(v) & (v > 0.0)
    )
    if keep.sum() < 5:
        raise FitWindowError(
            f"{int(keep.sum())} usable points in window {window}; need >= 5"
        )
    slope, intercept = np.polyfit(np.log(t[keep]), np.log(v[keep]), 1)
    fitted = intercept + slope * np.log(t[keep])
    rms = float(np.sqrt(np.mean((np.log(v[keep]) - fitted) ** 2)))
    z = -1.0 / slope if kind == "decay" else 2.0 / slope
    return TransportFit(
        kind=kind,
        amplitude=float(np.exp(intercept)),
        exponent_z=float(z),
        window=(float(window[0]), float(window[1])),
        residual_rms=rms,
        n_points=int(keep.sum()),
        log_slope=float(slope),
    )


def linear_trend(times: np.ndarray, values: np.ndarray, window: tuple[float, float]) -> float:
    """Plain linear slope of a series inside a window (drift diagnostic)."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = (t >= window[0]) & (t <= window[1]) & np.isfinite(v)
    if keep.sum() < 2:
        raise FitWindowError(f"not enough points in {window} for a trend")
    return float(np.polyfit(t[keep], v[keep], 1)[0])


def heatmap_rows(mitigated: MitigatedGrid):
    """Long-format (t, r, value) rows of the renormalized grid."""
    for k, t in enumerate(mitigated.times):
        for col, r in enumerate(mitigated.offsets):
            yield float(t), int(r), float(mitigated.renormalized[k, col])


def time_averaged_squared_error(
    times: np.ndarray, series: np.ndarray, reference: np.ndarray, mask: np.ndarray | None = None
) -> float:
    """Trapezoid average of |series - reference|^2 over the masked window."""
    keep = np.isfinite(series) & np.isfinite(reference)
    if mask is not None:
        keep &= mask
    t = times[keep]
    if len(t) < 2:
        raise FitWindowError("need at least two valid points to average")
    diff = (series[keep] - reference[keep]) ** 2
    return float(np.trapezoid(diff, t) / (t[-1] - t[0]))
