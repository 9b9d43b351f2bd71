import json
from pathlib import Path

import numpy as np
import pytest

from mfim_transport import cli, config, workflows
from mfim_transport.errors import ConfigError

TINY_RUN = {
    "workflow": "run-ideal",
    "model": {"num_sites": 6, "variant": "main", "v": 1.0, "omega": 2.0, "dt": 0.1},
    "ensemble": {"kind": "y", "size": 2},
    "n_steps": 10,
    "measure_every": 2,
    "shots": 128,
    "use_cb": True,
    "use_rs": True,
    "fit": {"decay_window": [0.2, 1.0]},
    "seed": 21,
}


def test_all_presets_load():
    for name in config.PRESETS:
        cfg = config.preset_config(name)
        assert cfg.workflow in config.WORKFLOWS


def test_unknown_keys_rejected():
    bad = dict(TINY_RUN, not_a_key=1)
    with pytest.raises(ConfigError, match="not_a_key"):
        config.load_config(bad)
    bad = dict(TINY_RUN, model=dict(TINY_RUN["model"], omga=2.0))
    with pytest.raises(ConfigError, match="omga"):
        config.load_config(bad)
    bad = dict(TINY_RUN, fit={"decay_window": [2.0, 9.0], "wndow": 1})
    with pytest.raises(ConfigError, match="wndow"):
        config.load_config(bad)


def test_workflow_and_window_validation():
    with pytest.raises(ConfigError, match="workflow"):
        config.load_config(dict(TINY_RUN, workflow="run-everything"))
    with pytest.raises(ConfigError, match="t_min"):
        config.load_config(dict(TINY_RUN, fit={"decay_window": [5.0, 1.0]}))
    with pytest.raises(ConfigError, match="shots"):
        config.load_config(dict(TINY_RUN, shots=-4))
    with pytest.raises(ConfigError, match="fixed 12-state"):
        config.load_config(dict(TINY_RUN, ensemble={"kind": "fixed12"}))


def test_noise_section_validation():
    good = dict(TINY_RUN, workflow="run-noisy", noise={"preset": "paper_base"})
    cfg = config.load_config(good)
    assert cfg.noise.t1_us == 120.73
    with pytest.raises(ConfigError, match="preset"):
        config.load_config(
            dict(TINY_RUN, noise={"preset": "paper_base", "t1_us": 10.0})
        )
    with pytest.raises(ConfigError, match="unknown noise preset"):
        config.load_config(dict(TINY_RUN, noise={"preset": "nope"}))
    custom = config.load_config(
        dict(TINY_RUN, noise={"t1_us": 100.0, "t2_us": 90.0, "gate_time_us": 0.5})
    )
    assert custom.noise.gate_time_us == 0.5


def test_rng_streams_are_stable():
    a = config.rng_stream(7, "pipeline", 0).integers(1 << 30)
    b = config.rng_stream(7, "pipeline", 0).integers(1 << 30)
    c = config.rng_stream(7, "pipeline", 1).integers(1 << 30)
    d = config.rng_stream(8, "pipeline", 0).integers(1 << 30)
    assert a == b
    assert a != c and a != d
    assert config.derive_seed(7, "x") == config.derive_seed(7, "x")


def test_config_hash_changes_with_content():
    c1 = config.load_config(TINY_RUN)
    c2 = config.load_config(dict(TINY_RUN, seed=22))
    assert c1.config_hash() != c2.config_hash()
    assert c1.config_hash() == config.load_config(dict(TINY_RUN)).config_hash()


def test_run_ideal_outputs_and_determinism(tmp_path):
    cfg = config.load_config(TINY_RUN)
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    workflows.run_ideal(cfg, out1)
    workflows.run_ideal(cfg, out2)
    expected = {
        "correlators.csv",
        "sum_rule.csv",
        "renormalized.csv",
        "spatial_variance.csv",
        "heatmap.csv",
        "fits.json",
        "raw_counts.jsonl",
        "meta.json",
    }
    assert {p.name for p in out1.iterdir()} == expected
    for name in expected:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name
    meta = json.loads((out1 / "meta.json").read_text())
    assert meta["config_hash"] == cfg.config_hash()
    assert meta["version"]
    record = json.loads((out1 / "raw_counts.jsonl").read_text().splitlines()[0])
    assert {"y", "t_step", "nu", "sign", "cb", "basis", "counts"} <= set(record)


def test_run_ideal_zero_steps(tmp_path):
    cfg = config.load_config(dict(TINY_RUN, n_steps=0, shots=None))
    workflows.run_ideal(cfg, tmp_path)
    lines = (tmp_path / "renormalized.csv").read_text().strip().splitlines()[1:]
    center = [l for l in lines if l.split(",")[1] == "0"]
    value = float(center[0].split(",")[2])
    from mfim_transport.model import ModelParams, sum_rule_constant

    c = sum_rule_constant(ModelParams(num_sites=6, v=1.0, omega=2.0))
    assert value == pytest.approx(1.0 / c, abs=1e-10)


def test_cli_round_trip(tmp_path, capsys):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps(TINY_RUN))
    rc = cli.main(
        ["run-ideal", "--config", str(cfg_file), "--out", str(tmp_path / "out")]
    )
    assert rc == 0
    assert (tmp_path / "out" / "fits.json").exists()
    rc = cli.main(
        [
            "fit",
            "--input",
            str(tmp_path / "out" / "renormalized.csv"),
            "--kind",
            "decay",
            "--window",
            "0.2",
            "1.0",
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert '"z"' in out


def test_cli_seed_override(tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps(TINY_RUN))
    cli.main(["run-ideal", "--config", str(cfg_file), "--seed", "99",
              "--out", str(tmp_path / "s99")])
    cli.main(["run-ideal", "--config", str(cfg_file), "--out", str(tmp_path / "s21")])
    a = (tmp_path / "s99" / "correlators.csv").read_bytes()
    b = (tmp_path / "s21" / "correlators.csv").read_bytes()
    assert a != b


def test_cli_workflow_mismatch(tmp_path, capsys):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps(TINY_RUN))
    rc = cli.main(["run-noisy", "--config", str(cfg_file), "--out", str(tmp_path)])
    assert rc == 2
    assert "workflow" in capsys.readouterr().err


def test_run_noisy_identity_matches_ideal(tmp_path):
    base = dict(TINY_RUN, shots=None)
    ideal_cfg = config.load_config(base)
    workflows.run_ideal(ideal_cfg, tmp_path / "ideal")
    noisy = dict(base, workflow="run-noisy", noise={"preset": "identity"},
                 noise_backend="trajectory")
    workflows.run_noisy(config.load_config(noisy), tmp_path / "noisy")
    a = (tmp_path / "ideal" / "correlators.csv").read_bytes()
    b = (tmp_path / "noisy" / "correlators.csv").read_bytes()
    assert a == b


def test_run_exact_and_reports_smoke(tmp_path):
    exact_cfg = config.load_config(
        {
            "workflow": "run-exact",
            "model": {"num_sites": 6, "variant": "main", "v": 1.0, "omega": 2.0, "dt": 0.1},
            "exact": {"t_max": 3.0, "t_step": 0.5, "rel_err_bases": ["y", "z"]},
            "seed": 4,
        }
    )
    summary = workflows.run_exact(exact_cfg, tmp_path / "exact")
    assert summary["sum_rule_max_deviation"] < 1e-8
    assert (tmp_path / "exact" / "rel_err.csv").exists()

    eth_cfg = config.load_config(
        {
            "workflow": "eth-report",
            "model": {"num_sites": 6, "variant": "appendix", "v": 1.0, "h_x": -1.05,
                      "h_z": 0.5, "dt": 0.1},
            "eth": {"sizes": [4, 6], "window": [12.0, 20.0], "step": 0.5,
                    "overlap_bitstring": "101101", "delta_site_offsets": [0]},
            "seed": 4,
        }
    )
    fits = workflows.eth_report(eth_cfg, tmp_path / "eth")
    assert "delta_sq_alpha" in fits
    assert (tmp_path / "eth" / "eth_scaling.csv").exists()
    assert (tmp_path / "eth" / "overlap_curve.csv").exists()

    samp_cfg = config.load_config(
        {
            "workflow": "sampling-report",
            "model": {"num_sites": 6, "variant": "main", "v": 1.0, "omega": 2.0, "dt": 0.1},
            "sampling": {"sizes": [1, 2, 4], "trials": 2, "t_max": 4.0, "t_step": 0.5,
                         "n_y": 30, "n_haar": 20, "ratio_window": [1.0, 4.0]},
            "seed": 4,
        }
    )
    summary = workflows.sampling_report(samp_cfg, tmp_path / "sampling")
    assert summary["correlator_slope"] < 0.0
    assert (tmp_path / "sampling" / "typicality.csv").exists()
