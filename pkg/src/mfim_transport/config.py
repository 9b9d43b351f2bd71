"""Experiment configuration: JSON schema, presets, seed derivation.

A configuration is a single JSON document.  Unknown keys anywhere in the
document are hard errors so that typos cannot silently fall back to
defaults.  All random streams derive from the single ``seed`` entry.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError
from .model import ModelParams, Variant
from .noise import NoiseParams, PRESETS as NOISE_PRESETS

_MODEL_KEYS = {"num_sites", "variant", "v", "omega", "h_x", "h_z", "dt", "field_seed"}
_ENSEMBLE_KEYS = {"kind", "size", "bitstrings"}
_NOISE_KEYS = {"preset", "t1_us", "t2_us", "gate_time_us", "delta_omega"}
_FIT_KEYS = {"decay_window", "growth_window"}
_SAMPLING_KEYS = {"sizes", "trials", "t_max", "t_step", "n_y", "n_haar", "ratio_window"}
_ETH_KEYS = {
    "sizes",
    "window",
    "step",
    "fluct_sample",
    "overlap_bitstring",
    "delta_site_offsets",
}
_EXACT_KEYS = {"t_max", "t_step", "rel_err_bases", "fluctuation_offsets", "fluct_sample"}
_TOP_KEYS = {
    "workflow",
    "model",
    "ensemble",
    "n_steps",
    "measure_every",
    "shots",
    "use_cb",
    "use_rs",
    "noise",
    "compare_presets",
    "noise_backend",
    "n_trajectories",
    "fit",
    "floor",
    "seed",
    "sampling",
    "eth",
    "exact",
}

WORKFLOWS = ("run-ideal", "run-noisy", "run-exact", "eth-report", "sampling-report", "fit")


def _check_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


@dataclass
class ExperimentConfig:
    workflow: str
    model: ModelParams
    ensemble: dict = field(default_factory=lambda: {"kind": "fixed12"})
    n_steps: int = 90
    measure_every: int = 2
    shots: int | None = None
    use_cb: bool = False
    use_rs: bool = False
    noise: NoiseParams | None = None
    noise_name: str | None = None
    compare_presets: list[str] = field(default_factory=list)
    noise_backend: str = "dm"
    n_trajectories: int = 2000
    decay_window: tuple[float, float] = (2.0, 9.0)
    growth_window: tuple[float, float] = (2.0, 9.0)
    floor: float = 0.05
    seed: int = 1234
    sampling: dict = field(default_factory=dict)
    eth: dict = field(default_factory=dict)
    exact: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def config_hash(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def rng(self, *path) -> np.random.Generator:
        return rng_stream(self.seed, *path)

    def stream_seed(self, *path) -> int:
        return derive_seed(self.seed, *path)


def _path_words(path) -> list[int]:
    words = []
    for part in path:
        if isinstance(part, (int, np.integer)):
            words.append(int(part) & 0xFFFFFFFF)
        else:
            digest = hashlib.sha256(str(part).encode()).digest()
            words.append(int.from_bytes(digest[:4], "little"))
    return words


def rng_stream(master_seed: int, *path) -> np.random.Generator:
    """Deterministic generator for one task, independent of run order."""
    return np.random.default_rng(np.random.SeedSequence([master_seed] + _path_words(path)))


def derive_seed(master_seed: int, *path) -> int:
    seq = np.random.SeedSequence([master_seed] + _path_words(path))
    return int(seq.generate_state(1)[0])


def _parse_model(section: dict) -> ModelParams:
    _check_keys(section, _MODEL_KEYS, "model")
    kwargs = dict(section)
    if "variant" in kwargs:
        try:
            kwargs["variant"] = Variant(kwargs["variant"])
        except ValueError as err:
            raise ConfigError(f"model.variant must be 'main' or 'appendix'") from err
    try:
        return ModelParams(**kwargs)
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad model section: {err}") from err


def _parse_noise(section: dict | None) -> tuple[NoiseParams | None, str | None]:
    if section is None:
        return None, None
    _check_keys(section, _NOISE_KEYS, "noise")
    if "preset" in section:
        extras = set(section) - {"preset"}
        if extras:
            raise ConfigError(f"noise.preset excludes explicit fields {sorted(extras)}")
        name = section["preset"]
        if name not in NOISE_PRESETS:
            raise ConfigError(
                f"unknown noise preset {name!r}; choices: {sorted(NOISE_PRESETS)}"
            )
        return NOISE_PRESETS[name], name
    try:
        return NoiseParams(**section), None
    except (TypeError, ValueError) as err:
        raise ConfigError(f"bad noise section: {err}") from err


def _parse_window(value, where: str) -> tuple[float, float]:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(x, (int, float)) for x in value)
    ):
        raise ConfigError(f"{where} must be [t_min, t_max]")
    lo, hi = float(value[0]), float(value[1])
    if hi <= lo:
        raise ConfigError(f"{where}: need t_min < t_max, got {value}")
    return lo, hi


def load_config(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    _check_keys(data, _TOP_KEYS, "top level")
    workflow = data.get("workflow")
    if workflow not in WORKFLOWS:
        raise ConfigError(f"workflow must be one of {WORKFLOWS}, got {workflow!r}")
    if "model" not in data:
        raise ConfigError("missing required section 'model'")
    model = _parse_model(data["model"])

    ensemble = dict(data.get("ensemble", {"kind": "fixed12"}))
    _check_keys(ensemble, _ENSEMBLE_KEYS, "ensemble")
    kind = ensemble.get("kind", "fixed12")
    if kind not in ("fixed12", "y", "z", "explicit"):
        raise ConfigError(f"ensemble.kind must be fixed12|y|z|explicit, got {kind!r}")
    if workflow in ("run-ideal", "run-noisy"):
        if kind == "fixed12" and model.num_sites != 12:
            raise ConfigError("the fixed 12-state ensemble requires num_sites = 12")
        if kind in ("y", "z") and "size" not in ensemble:
            raise ConfigError(f"ensemble.kind={kind!r} needs an explicit size")
        if kind == "explicit" and not ensemble.get("bitstrings"):
            raise ConfigError("ensemble.kind='explicit' needs bitstrings")

    noise, noise_name = _parse_noise(data.get("noise"))
    compare = list(data.get("compare_presets", []))
    for name in compare:
        if name not in NOISE_PRESETS:
            raise ConfigError(f"unknown preset {name!r} in compare_presets")
    backend = data.get("noise_backend", "dm")
    if backend not in ("dm", "trajectory"):
        raise ConfigError("noise_backend must be 'dm' or 'trajectory'")

    fit = dict(data.get("fit", {}))
    _check_keys(fit, _FIT_KEYS, "fit")
    decay_window = _parse_window(fit.get("decay_window", [2.0, 9.0]), "fit.decay_window")
    growth_window = _parse_window(fit.get("growth_window", list(decay_window)), "fit.growth_window")

    sampling = dict(data.get("sampling", {}))
    _check_keys(sampling, _SAMPLING_KEYS, "sampling")
    eth = dict(data.get("eth", {}))
    _check_keys(eth, _ETH_KEYS, "eth")
    exact_sec = dict(data.get("exact", {}))
    _check_keys(exact_sec, _EXACT_KEYS, "exact")

    shots = data.get("shots")
    if shots is not None and (not isinstance(shots, int) or shots < 1):
        raise ConfigError(f"shots must be a positive integer or null, got {shots!r}")
    n_steps = data.get("n_steps", 90)
    measure_every = data.get("measure_every", 2)
    if not isinstance(n_steps, int) or n_steps < 0:
        raise ConfigError("n_steps must be a non-negative integer")
    if not isinstance(measure_every, int) or measure_every < 1:
        raise ConfigError("measure_every must be a positive integer")

    return ExperimentConfig(
        workflow=workflow,
        model=model,
        ensemble=ensemble,
        n_steps=n_steps,
        measure_every=measure_every,
        shots=shots,
        use_cb=bool(data.get("use_cb", False)),
        use_rs=bool(data.get("use_rs", False)),
        noise=noise,
        noise_name=noise_name,
        compare_presets=compare,
        noise_backend=backend,
        n_trajectories=int(data.get("n_trajectories", 2000)),
        decay_window=decay_window,
        growth_window=growth_window,
        floor=float(data.get("floor", 0.05)),
        seed=int(data.get("seed", 1234)),
        sampling=sampling,
        eth=eth,
        exact=exact_sec,
        raw=data,
    )


def load_config_file(path: str | Path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON ({err})") from err
    return load_config(data)


# -- bundled experiment presets ---------------------------------------------

_MAIN12 = {"num_sites": 12, "variant": "main", "v": 1.0, "omega": 2.0, "dt": 0.1}
_CHAOTIC = {"variant": "appendix", "v": 1.0, "h_x": -1.05, "h_z": 0.5, "dt": 0.1}

PRESETS: dict[str, dict] = {
    # classical sampling benchmark (correlator + SV convergence, typicality)
    "fig1": {
        "workflow": "sampling-report",
        "model": _MAIN12,
        "seed": 901,
        "sampling": {
            "sizes": [1, 2, 4, 8, 16, 32],
            "trials": 5,
            "t_max": 15.0,
            "t_step": 0.25,
            "n_y": 400,
            "n_haar": 200,
            "ratio_window": [2.0, 15.0],
        },
    },
    # hardware-style ideal run, transverse field 2
    "fig2": {
        "workflow": "run-ideal",
        "model": _MAIN12,
        "ensemble": {"kind": "fixed12"},
        "n_steps": 90,
        "measure_every": 2,
        "shots": 8192,
        "use_cb": True,
        "use_rs": True,
        "fit": {"decay_window": [2.0, 8.0], "growth_window": [2.0, 8.0]},
        "seed": 902,
    },
    # transverse-field sweep points
    "fig3-om3": {
        "workflow": "run-ideal",
        "model": dict(_MAIN12, omega=3.0),
        "ensemble": {"kind": "fixed12"},
        "n_steps": 90,
        "measure_every": 2,
        "shots": 8192,
        "use_cb": True,
        "use_rs": True,
        "fit": {"decay_window": [1.5, 5.0], "growth_window": [1.5, 5.0]},
        "seed": 903,
    },
    "fig3-om6": {
        "workflow": "run-ideal",
        "model": dict(_MAIN12, omega=6.0),
        "ensemble": {"kind": "fixed12"},
        "n_steps": 90,
        "measure_every": 2,
        "shots": 8192,
        "use_cb": True,
        "use_rs": True,
        "fit": {"decay_window": [0.8, 5.0], "growth_window": [0.8, 5.0]},
        "seed": 904,
    },
    # noisy sum-rule decay and renormalization contrast (desk scale: 10
    # sites on the density-matrix backend)
    "fig5": {
        "workflow": "run-noisy",
        "model": dict(_MAIN12, num_sites=10),
        "ensemble": {"kind": "y", "size": 2},
        "n_steps": 90,
        "measure_every": 2,
        "use_cb": True,
        "use_rs": True,
        "noise": {"preset": "paper_base"},
        "compare_presets": ["paper_minus50", "paper_base", "paper_plus60"],
        "noise_backend": "dm",
        "fit": {"decay_window": [2.0, 9.0]},
        "seed": 905,
    },
    # spectral diagnostics on the strongly chaotic parameter set
    "eth": {
        "workflow": "eth-report",
        "model": dict(_CHAOTIC, num_sites=12),
        "seed": 906,
        "eth": {
            "sizes": [8, 10, 12],
            "window": [12.0, 75.0],
            "step": 0.25,
            "fluct_sample": 256,
            "overlap_bitstring": "110100110111",
            "delta_site_offsets": [0, 2],
        },
    },
    "overlaps": {
        "workflow": "eth-report",
        "model": dict(_CHAOTIC, num_sites=12),
        "seed": 907,
        "eth": {
            "sizes": [12],
            "window": [12.0, 75.0],
            "step": 0.25,
            "fluct_sample": 256,
            "overlap_bitstring": "110100110111",
            "delta_site_offsets": [0],
        },
    },
    # dynamical relative error of y- vs z-basis sampling
    "rel-err": {
        "workflow": "run-exact",
        "model": dict(_MAIN12, num_sites=10),
        "seed": 908,
        "exact": {"t_max": 15.0, "t_step": 0.25, "rel_err_bases": ["y", "z"]},
    },
    "rel-err-chaotic": {
        "workflow": "run-exact",
        "model": dict(_CHAOTIC, num_sites=10),
        "seed": 909,
        "exact": {"t_max": 15.0, "t_step": 0.25, "rel_err_bases": ["y", "z"]},
    },
}

# spelling used in a few external references
PRESETS["paper-fig2"] = PRESETS["fig2"]
PRESETS["paper-fig3-om3"] = PRESETS["fig3-om3"]
PRESETS["paper-fig3-om6"] = PRESETS["fig3-om6"]


def preset_config(name: str, overrides: dict | None = None) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choices: {sorted(PRESETS)}")
    data = json.loads(json.dumps(PRESETS[name]))  # deep copy
    for key, value in (overrides or {}).items():
        data[key] = value
    return load_config(data)
