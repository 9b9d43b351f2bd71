"""Named experiment runners: compose the modules and write result files.

Every run writes CSV data plus a ``meta.json`` sidecar embedding the
configuration, its hash, and the package version.  Identical
configuration and seed reproduce every CSV byte for byte (no timestamps
in data files; floats are written with shortest round-trip formatting).
"""
from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    MitigatedGrid,
    fit_power_law,
    heatmap_rows,
    linear_trend,
    renormalize,
    spatial_variance,
    sum_rule,
    time_averaged_squared_error,
)
from .config import ExperimentConfig
from .errors import ConfigError, FitWindowError
from .exact import (
    eth_diagonal_stats,
    exact_correlator_profile,
    fluctuation_profile,
    ipr_stats,
    long_time_stats,
    overlap_flatness,
    relative_error,
    spectral_data,
    typicality_comparison,
)
from .model import ModelParams, Variant, sum_rule_constant
from .noise import PRESETS as NOISE_PRESETS
from .protocol import TrotterSchedule, pipeline_correlators
from .sampling import (
    CorrelatorGrid,
    FIXED_ENSEMBLE_12,
    convergence_errors,
    draw_ensemble,
)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(cell) for cell in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


class JsonlSink:
    """Append-only JSON-lines writer for raw measurement counts."""

    def __init__(self, path: Path):
        self._fh = open(path, "w")

    def __call__(self, record: dict) -> None:
        self._fh.write(json.dumps(record, sort_keys=True) + "\n")

    def close(self) -> None:
        self._fh.close()


def _meta_payload(config: ExperimentConfig, extra: dict | None = None) -> dict:
    payload = {
        "version": __version__,
        "config": config.raw,
        "config_hash": config.config_hash(),
        "seed": config.seed,
    }
    if extra:
        payload.update(extra)
    return payload


def ensemble_bitstrings(config: ExperimentConfig) -> list[str]:
    kind = config.ensemble.get("kind", "fixed12")
    if kind == "fixed12":
        return list(FIXED_ENSEMBLE_12)
    if kind == "explicit":
        return list(config.ensemble["bitstrings"])
    ens = draw_ensemble(
        kind, config.model.num_sites, config.ensemble["size"], config.rng("ensemble")
    )
    return list(ens.members)


def write_correlator_grid(path: Path, grid: CorrelatorGrid) -> None:
    """Columnar CSV: one row per (t, r), mean plus per-sample columns."""
    s = grid.sample_count
    header = ["t", "r", "mean"] + [f"sample_{k:02d}" for k in range(s)]
    rows = []
    for i, t in enumerate(grid.times):
        for c, r in enumerate(grid.offsets):
            rows.append(
                [t, int(r), grid.mean[i, c]] + [grid.per_sample[k, i, c] for k in range(s)]
            )
    write_csv(path, header, rows)


def _transport_outputs(
    config: ExperimentConfig, grid: CorrelatorGrid, out: Path, tag: str = ""
) -> dict:
    """Shared post-processing of a transport run: sum rule, mitigation,
    spatial variance, heatmap, and the power-law fits."""
    suffix = f"_{tag}" if tag else ""
    write_correlator_grid(out / f"correlators{suffix}.csv", grid)
    times, sums, reference = sum_rule(grid)
    write_csv(
        out / f"sum_rule{suffix}.csv",
        ["t", "value"] + (["reference"] if reference is not None else []),
        (
            [t, s] + ([reference] if reference is not None else [])
            for t, s in zip(times, sums)
        ),
    )
    mitigated = renormalize(grid, config.floor)
    write_csv(
        out / f"renormalized{suffix}.csv",
        ["t", "r", "value", "valid"],
        (
            (t, r, v, mitigated.valid[i])
            for i, t in enumerate(mitigated.times)
            for r, v in zip(mitigated.offsets, mitigated.renormalized[i])
        ),
    )
    write_csv(out / f"heatmap{suffix}.csv", ["t", "r", "value"], heatmap_rows(mitigated))
    sv_t, sv, sv_valid = spatial_variance(mitigated)
    write_csv(
        out / f"spatial_variance{suffix}.csv",
        ["t", "value", "valid"],
        zip(sv_t, sv, sv_valid),
    )

    fits: dict = {"floor": config.floor}
    center = grid.center_column()
    try:
        decay = fit_power_law(
            mitigated.times,
            mitigated.renormalized[:, center],
            config.decay_window,
            "decay",
        )
        fits["decay"] = decay.as_dict()
    except FitWindowError as err:
        fits["decay"] = {"error": str(err)}
    try:
        growth = fit_power_law(sv_t, sv, config.growth_window, "growth")
        fits["growth"] = growth.as_dict()
    except FitWindowError as err:
        fits["growth"] = {"error": str(err)}
    try:
        fits["sum_rule_trend"] = linear_trend(times, sums, config.decay_window)
    except FitWindowError:
        fits["sum_rule_trend"] = None
    if reference is not None:
        fits["sum_rule_reference"] = reference
    write_json(out / f"fits{suffix}.json", fits)
    return fits


def _run_pipeline_grid(
    config: ExperimentConfig,
    bitstrings: list[str],
    noise_params,
    sink=None,
) -> CorrelatorGrid:
    schedule = TrotterSchedule(config.n_steps, config.measure_every)
    return pipeline_correlators(
        config.model,
        bitstrings,
        schedule,
        use_cb=config.use_cb,
        use_rs=config.use_rs,
        shots=config.shots,
        noise=noise_params,
        noise_backend=config.noise_backend,
        n_trajectories=config.n_trajectories,
        seed=config.stream_seed("pipeline"),
        sink=sink,
    )


def run_ideal(config: ExperimentConfig, out_dir: str | Path) -> dict:
    """Shot-and-Trotter pipeline without noise."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bits = ensemble_bitstrings(config)
    sink = JsonlSink(out / "raw_counts.jsonl") if config.shots else None
    try:
        grid = _run_pipeline_grid(config, bits, None, sink)
    finally:
        if sink:
            sink.close()
    fits = _transport_outputs(config, grid, out)
    write_json(out / "meta.json", _meta_payload(config, {"ensemble": bits, "fits": fits}))
    return fits


def run_noisy(config: ExperimentConfig, out_dir: str | Path) -> dict:
    """Noisy pipeline plus optional preset comparison and a noiseless
    reference for the mitigation improvement factor."""
    if config.noise is None:
        raise ConfigError("run-noisy needs a noise section")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bits = ensemble_bitstrings(config)

    grid = _run_pipeline_grid(config, bits, config.noise)
    fits = _transport_outputs(config, grid, out)

    # noiseless reference with identical ensemble, schedule and options
    ref_config = ExperimentConfig(**{**vars(config), "shots": None, "noise": None})
    ref_grid = _run_pipeline_grid(ref_config, bits, None)
    _transport_outputs(config, ref_grid, out, tag="noiseless")

    summary: dict = {"fits": fits, "presets": {}}
    mit_noisy = renormalize(grid, config.floor)
    mit_ref = renormalize(ref_grid, config.floor)
    center = grid.center_column()
    usable = mit_noisy.sum_series >= 0.2
    try:
        raw_err = time_averaged_squared_error(
            grid.times, grid.mean[:, center], ref_grid.mean[:, center], usable
        )
        ren_err = time_averaged_squared_error(
            grid.times,
            mit_noisy.renormalized[:, center],
            mit_ref.renormalized[:, center],
            usable & mit_noisy.valid & mit_ref.valid,
        )
        summary["improvement"] = {
            "raw_error": raw_err,
            "renormalized_error": ren_err,
            "factor": raw_err / ren_err if ren_err > 0 else float("inf"),
            "window_points": int(usable.sum()),
        }
    except FitWindowError as err:
        summary["improvement"] = {"error": str(err)}

    for name in config.compare_presets:
        if NOISE_PRESETS[name] == config.noise:
            preset_grid = grid  # main run already used these parameters
        else:
            preset_grid = _run_pipeline_grid(config, bits, NOISE_PRESETS[name])
        t, sums, _ = sum_rule(preset_grid)
        write_csv(out / f"sum_rule_{name}.csv", ["t", "value"], zip(t, sums))
        summary["presets"][name] = {"sum_rule_final": float(sums[-1])}
    write_json(out / "noise_summary.json", summary)
    write_json(out / "meta.json", _meta_payload(config, {"ensemble": bits}))
    return summary


def run_exact(config: ExperimentConfig, out_dir: str | Path) -> dict:
    """Exact-diagonalization correlators, fluctuation bands, relative errors."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sec = config.exact
    t_max = float(sec.get("t_max", 15.0))
    t_step = float(sec.get("t_step", 0.25))
    times = np.linspace(0.0, t_max, int(round(t_max / t_step)) + 1)
    sd = spectral_data(config.model)
    profile = exact_correlator_profile(sd, times)
    offsets = np.arange(-config.model.num_sites // 2 + 1, config.model.num_sites // 2 + 1)
    write_csv(
        out / "exact_correlators.csv",
        ["t", "r", "value"],
        (
            (t, int(r), profile[i, c])
            for i, t in enumerate(times)
            for c, r in enumerate(offsets)
        ),
    )
    summary: dict = {}
    sums = profile.sum(axis=1)
    if config.model.variant is Variant.MAIN:
        ref = sum_rule_constant(config.model)
        summary["sum_rule_max_deviation"] = float(np.max(np.abs(sums - ref)))
        summary["sum_rule_reference"] = ref
    fl_offsets = list(sec.get("fluctuation_offsets", [0]))
    sample = sec.get("fluct_sample")
    if sample is None and config.model.num_sites > 10:
        sample = 256
    prof = fluctuation_profile(
        sd, times, fl_offsets, basis="y", sample=sample, rng=config.rng("fluct")
    )
    write_csv(
        out / "fluctuations.csv",
        ["t"] + [f"mean_r{r}" for r in fl_offsets] + [f"std_r{r}" for r in fl_offsets],
        (
            [t] + list(prof.mean[i]) + list(prof.std[i])
            for i, t in enumerate(times)
        ),
    )
    bases = list(sec.get("rel_err_bases", []))
    if bases:
        columns = {}
        for basis in bases:
            eps, _ = relative_error(
                sd, times, basis=basis, sample=sample, rng=config.rng("rel", basis)
            )
            columns[basis] = eps
        write_csv(
            out / "rel_err.csv",
            ["t"] + [f"eps_{b}" for b in bases],
            ([t] + [columns[b][i] for b in bases] for i, t in enumerate(times)),
        )
    write_json(out / "meta.json", _meta_payload(config, {"summary": summary}))
    return summary


def _loglog_fit(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def eth_report(config: ExperimentConfig, out_dir: str | Path) -> dict:
    """Spectral diagnostics over a range of chain lengths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sec = config.eth
    sizes = list(sec.get("sizes", [8, 10, 12]))
    window = tuple(sec.get("window", [12.0, 75.0]))
    step = float(sec.get("step", 0.25))
    fluct_sample = sec.get("fluct_sample")
    site_offsets = list(sec.get("delta_site_offsets", [0]))
    rows = []
    per_size: dict[int, dict] = {}
    for L in sizes:
        params = ModelParams(**{**_model_kwargs(config.model), "num_sites": L})
        sd = spectral_data(params)
        delta = {
            off: eth_diagonal_stats(sd, L // 2 + off).delta_sq for off in site_offsets
        }
        sample = fluct_sample if L > 10 else None
        lt = long_time_stats(sd, window, step, fluct_sample=sample, rng=config.rng("lt", L))
        ipr = ipr_stats(sd)
        per_size[L] = {"delta": delta, "lt": lt, "ipr": ipr}
        rows.append(
            [L, 1 << L]
            + [delta[off] for off in site_offsets]
            + [lt.plateau_error, lt.fluctuation_average, ipr.scaled_average]
        )
        scatter = eth_diagonal_stats(sd, L // 2)
        write_csv(
            out / f"eth_scatter_L{L}.csv",
            ["energy_per_site", "diagonal"],
            zip(scatter.energies_per_site, scatter.diagonal_elements),
        )
        write_csv(
            out / f"ipr_scatter_L{L}.csv",
            ["energy_per_site", "ipr"],
            zip(sd.eigenvalues / L, ipr.eigenstate_iprs),
        )
        if L == max(sizes) and sec.get("overlap_bitstring"):
            be, bv, _ = overlap_flatness(sd, sec["overlap_bitstring"])
            write_csv(out / "overlap_curve.csv", ["energy", "value"], zip(be, bv))
    write_csv(
        out / "eth_scaling.csv",
        ["L", "d"]
        + [f"delta_sq_off{off}" for off in site_offsets]
        + ["plateau_error", "fluctuation_average", "d_times_ipr"],
        rows,
    )
    sizes_arr = np.array(sizes, dtype=float)
    fits = {
        "delta_sq_alpha": {
            str(off): _loglog_fit(
                sizes_arr, np.array([per_size[L]["delta"][off] for L in sizes])
            )
            for off in site_offsets
        },
        "plateau_error_slope_log2_per_L": float(
            np.polyfit(
                sizes, np.log2(np.abs([per_size[L]["lt"].plateau_error for L in sizes])), 1
            )[0]
        ),
        "fluctuation_slope_log2_per_L": float(
            np.polyfit(
                sizes, np.log2([per_size[L]["lt"].fluctuation_average for L in sizes]), 1
            )[0]
        ),
        "d_times_ipr": {str(L): per_size[L]["ipr"].scaled_average for L in sizes},
        "window": list(window),
    }
    write_json(out / "eth_fits.json", fits)
    write_json(out / "meta.json", _meta_payload(config))
    return fits


def _model_kwargs(params: ModelParams) -> dict:
    return {
        "num_sites": params.num_sites,
        "variant": params.variant,
        "v": params.v,
        "omega": params.omega,
        "h_x": params.h_x,
        "h_z": params.h_z,
        "dt": params.dt,
        "field_seed": params.field_seed,
    }


def sampling_report(config: ExperimentConfig, out_dir: str | Path) -> dict:
    """Convergence of the sample-averaged estimators and the typicality
    benchmark against Haar states."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sec = config.sampling
    sizes = list(sec.get("sizes", [1, 2, 4, 8, 16, 32]))
    trials = int(sec.get("trials", 5))
    t_max = float(sec.get("t_max", 15.0))
    t_step = float(sec.get("t_step", 0.25))
    sd = spectral_data(config.model)
    report = convergence_errors(
        sd, sizes, trials, config.rng("convergence"), t_max=t_max, t_step=t_step
    )
    write_csv(
        out / "convergence.csv",
        ["S", "trial", "e2_correlator", "e2_spatial_variance"],
        (
            (s, k, report.correlator_errors[k, i], report.variance_errors[k, i])
            for i, s in enumerate(sizes)
            for k in range(trials)
        ),
    )
    times = np.linspace(0.0, t_max, int(round(t_max / t_step)) + 1)
    typ = typicality_comparison(
        sd,
        times,
        config.rng("typicality"),
        n_y=int(sec.get("n_y", 400)),
        n_haar=int(sec.get("n_haar", 200)),
        ratio_window=tuple(sec.get("ratio_window", [2.0, 15.0])),
    )
    write_csv(
        out / "typicality.csv",
        ["t", "y_std_c0", "haar_std_c0", "y_std_sv", "haar_std_sv"],
        zip(typ.times, typ.y_std_c0, typ.haar_std_c0, typ.y_std_sv, typ.haar_std_sv),
    )
    summary = {
        "correlator_slope": report.correlator_slope,
        "variance_slope": report.variance_slope,
        "ratio_c0": typ.ratio_c0,
        "ratio_sv": typ.ratio_sv,
        "sizes": sizes,
        "trials": trials,
    }
    write_json(out / "sampling_summary.json", summary)
    write_json(out / "meta.json", _meta_payload(config))
    return summary


def fit_from_csv(
    path: str | Path, kind: str, window: tuple[float, float], column: str = "value", r: int = 0
) -> dict:
    """Standalone power-law fit over a previously written series CSV.

    Accepts the (t, value[, valid]) series files and the long-format
    (t, r, value) files; for the latter the ``r`` offset row is selected.
    """
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    data = [line.split(",") for line in lines[1:]]
    if "r" in header:
        t_i, r_i, v_i = header.index("t"), header.index("r"), header.index(column)
        rows = [row for row in data if int(row[r_i]) == r]
        times = np.array([float(row[t_i]) for row in rows])
        values = np.array([float(row[v_i]) for row in rows])
    else:
        t_i, v_i = header.index("t"), header.index(column)
        times = np.array([float(row[t_i]) for row in data])
        values = np.array([float(row[v_i]) for row in data])
    fit = fit_power_law(times, values, window, kind)
    return fit.as_dict()
