"""End-to-end acceptance suite.

Each test covers one numbered exit criterion at its stated tolerance and
prints a PASS line once its assertions hold.  The whole module runs in
roughly three quarters of an hour on one desktop core; run it alone with
``pytest tests/test_acceptance.py -v -s``.
"""
import json

import numpy as np
import pytest

from mfim_transport import analysis, config, exact, model, noise, paulis, protocol, sampling, workflows
from mfim_transport.model import ModelParams, Variant, energy_density, equal_time_correlator

pytestmark = pytest.mark.acceptance


def report(criterion: int, message: str) -> None:
    print(f"PASS criterion {criterion}: {message}")


@pytest.fixture(scope="module")
def out_root(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


# -- 1: equal-time exactness -------------------------------------------------


def test_criterion_1_equal_time_exactness():
    # all 64 y states at 6 sites
    p6 = ModelParams(num_sites=6, v=1.0, omega=2.0, dt=0.1)
    schedule = protocol.TrotterSchedule(0, 1)
    oracle6 = np.array([equal_time_correlator(p6, i, 3) for i in range(1, 7)])
    worst = 0.0
    for idx in range(64):
        bits = format(idx, "06b")[::-1]
        res = protocol.run_plan(protocol.build_plan(bits, p6), p6, schedule)
        rec = protocol.correlators_from_results(p6, res)[0]
        worst = max(worst, float(np.max(np.abs(rec - oracle6))))
    assert worst < 1e-9

    # 50 random y states at 12 sites
    p12 = ModelParams(num_sites=12, v=1.0, omega=2.0, dt=0.1)
    oracle12 = np.array([equal_time_correlator(p12, i, 6) for i in range(1, 13)])
    rng = np.random.default_rng(42)
    worst12 = 0.0
    for bits in exact.random_bitstrings(12, 50, rng):
        res = protocol.run_plan(protocol.build_plan(bits, p12), p12, schedule)
        rec = protocol.correlators_from_results(p12, res)[0]
        worst12 = max(worst12, float(np.max(np.abs(rec - oracle12))))
    assert worst12 < 1e-9

    # F_r(L, 0) = 0 over the full y basis at 12 sites
    w = exact.y_basis_matrix(12)
    hc = energy_density(p12, 6).as_list()
    hc_w = paulis.apply_terms(hc, w, 12)
    max_std = 0.0
    for site in range(1, 13):
        hr_w = paulis.apply_terms(energy_density(p12, site).as_list(), w, 12)
        vals = np.einsum("ij,ij->j", hr_w.conj(), hc_w).real
        max_std = max(max_std, float(vals.std()))
    assert max_std < 1e-10
    report(1, f"reconstruction dev {max(worst, worst12):.2e}, F(0) std {max_std:.2e}")


# -- 2: sum-rule constancy ---------------------------------------------------


def test_criterion_2_sum_rule_constancy():
    times = np.linspace(0.0, 15.0, 61)
    devs = {}
    for omega in (2.0, 3.0, 6.0):
        params = ModelParams(num_sites=10, v=1.0, omega=omega, dt=0.1)
        sd = exact.spectral_data(params)
        sums = exact.exact_correlator_profile(sd, times).sum(axis=1)
        reference = model.sum_rule_constant(params)
        devs[omega] = float(np.max(np.abs(sums - reference)))
        assert devs[omega] < 1e-8, omega
    report(2, "max deviation " + ", ".join(f"om{o}={d:.1e}" for o, d in devs.items()))


# -- 3 and 4: ideal transport runs -------------------------------------------


def _ideal_run(preset, out_root):
    cfg = config.preset_config(preset)
    return workflows.run_ideal(cfg, out_root / preset), cfg


def test_criterion_3_ideal_transport_reproduction(out_root):
    fits, _ = _ideal_run("fig2", out_root)
    z = fits["decay"]["z"]
    assert 1.80 <= z <= 2.05
    growth_exp = 2.0 / fits["growth"]["z"]
    deviation = abs(growth_exp - 2.0 / z) / (2.0 / z)
    assert deviation <= 0.15
    report(3, f"z = {z:.3f}, SV growth exponent {growth_exp:.3f} (dev {deviation:.1%})")


def test_criterion_4_transverse_field_sweep(out_root):
    fits3, _ = _ideal_run("fig3-om3", out_root)
    z3 = fits3["decay"]["z"]
    assert 1.35 <= z3 <= 1.75
    fits6, _ = _ideal_run("fig3-om6", out_root)
    z6 = fits6["decay"]["z"]
    assert 0.85 <= z6 <= 1.20
    report(4, f"z(omega=3) = {z3:.3f}, z(omega=6) = {z6:.3f}")


# -- 5 and 6: sampling convergence and typicality ------------------------------


@pytest.fixture(scope="module")
def sampling_summary(out_root):
    cfg = config.preset_config("fig1")
    return workflows.sampling_report(cfg, out_root / "fig1")


def test_criterion_5_sampling_convergence(sampling_summary):
    s_c = sampling_summary["correlator_slope"]
    s_v = sampling_summary["variance_slope"]
    assert -1.3 <= s_c <= -0.7
    assert -1.3 <= s_v <= -0.7
    report(5, f"log-log slopes: correlator {s_c:.2f}, spatial variance {s_v:.2f}")


def test_criterion_6_typicality_ratio(sampling_summary):
    r_c = sampling_summary["ratio_c0"]
    r_v = sampling_summary["ratio_sv"]
    assert 2.5 <= r_c <= 4.5
    assert 2.5 <= r_v <= 4.5
    report(6, f"y/Haar std ratios: correlator {r_c:.2f}, spatial variance {r_v:.2f}")


# -- 7: spectral diagnostics ---------------------------------------------------


def test_criterion_7_eth_suite(out_root):
    cfg = config.preset_config("eth")
    fits = workflows.eth_report(cfg, out_root / "eth")
    alpha = fits["delta_sq_alpha"]["0"]
    assert 2.0 <= alpha <= 4.0
    alpha_off = fits["delta_sq_alpha"]["2"]
    assert 2.0 <= alpha_off <= 4.0
    f_slope = fits["fluctuation_slope_log2_per_L"]
    assert -1.3 <= f_slope <= -0.7
    e_slope = fits["plateau_error_slope_log2_per_L"]
    assert -0.8 <= e_slope <= -0.25
    for L, value in fits["d_times_ipr"].items():
        assert 1.0 <= value <= 5.0, L
    report(
        7,
        f"alpha = {alpha:.2f}/{alpha_off:.2f}, fluctuation slope {f_slope:.2f}, "
        f"plateau slope {e_slope:.2f}, d*IPR in "
        f"[{min(fits['d_times_ipr'].values()):.2f}, {max(fits['d_times_ipr'].values()):.2f}]",
    )


# -- 8: noise suite -------------------------------------------------------------


def test_criterion_8_noise_suite(out_root):
    for name in ("paper_base", "paper_minus50", "paper_plus60"):
        ch = noise.kraus_operators(noise.PRESETS[name])
        assert ch.completeness_error() < 1e-12, name

    base_cfg = {
        "workflow": "run-noisy",
        "model": {"num_sites": 10, "variant": "main", "v": 1.0, "omega": 2.0, "dt": 0.1},
        "ensemble": {"kind": "y", "size": 2},
        "n_steps": 90,
        "measure_every": 2,
        "use_cb": True,
        "use_rs": True,
        "noise": {"preset": "paper_base"},
        "noise_backend": "dm",
        "fit": {"decay_window": [2.0, 8.0]},
        "seed": 905,
    }
    summary = workflows.run_noisy(
        config.load_config(base_cfg), out_root / "noise_base"
    )
    factor = summary["improvement"]["factor"]
    assert factor >= 3.0

    at_t5 = {}
    for name, steps, out in (
        ("paper_base", None, out_root / "noise_base"),
        ("paper_minus50", 60, out_root / "noise_minus50"),
        ("paper_plus60", 60, out_root / "noise_plus60"),
    ):
        if steps is not None:
            cfg = config.load_config(
                dict(base_cfg, noise={"preset": name}, n_steps=steps)
            )
            workflows.run_noisy(cfg, out)
        rows = (out / "sum_rule.csv").read_text().strip().splitlines()[1:]
        series = {float(r.split(",")[0]): float(r.split(",")[1]) for r in rows}
        at_t5[name] = series[5.0]
    assert at_t5["paper_minus50"] < at_t5["paper_base"] < at_t5["paper_plus60"]
    report(
        8,
        f"CPTP exact, decay order at t=5 "
        f"{at_t5['paper_minus50']:.3f} < {at_t5['paper_base']:.3f} < "
        f"{at_t5['paper_plus60']:.3f}, mitigation factor {factor:.1f}",
    )


# -- 9: simplification validation ------------------------------------------------


def test_criterion_9_simplification_validation():
    p12 = ModelParams(num_sites=12, v=1.0, omega=2.0, dt=0.1)
    schedule = protocol.TrotterSchedule(90, 2)
    bits = list(sampling.FIXED_ENSEMBLE_12)
    center_curves = {}
    times = None
    for tag, cb, rs in (
        ("none", False, False),
        ("cb", True, False),
        ("rs", False, True),
        ("cb+rs", True, True),
    ):
        grid = protocol.pipeline_correlators(
            p12, bits, schedule, use_cb=cb, use_rs=rs, seed=77
        )
        mitigated = analysis.renormalize(grid)
        center_curves[tag] = mitigated.renormalized[:, grid.center_column()]
        times = grid.times
    window = (times > 0.0) & (times <= 9.0)
    worst = 0.0
    tags = list(center_curves)
    for i, a in enumerate(tags):
        for b in tags[i + 1 :]:
            diff = float(
                np.mean(np.abs(center_curves[a][window] - center_curves[b][window]))
            )
            worst = max(worst, diff)
            assert diff < 0.02, (a, b)
    report(9, f"worst pairwise time-averaged difference {worst:.4f}")


# -- 10: property regression -------------------------------------------------------


def test_criterion_10_property_regression():
    rng = np.random.default_rng(0)

    # gate unitarity and norm preservation along a Trotter evolution
    p8 = ModelParams(num_sites=8, v=1.0, omega=2.0, dt=0.1)
    from mfim_transport.simulator import gate_matrix, prepare_product_state, run_circuit

    step = model.trotter_step_circuit(p8)
    for gate in step.gates:
        m = gate_matrix(gate)
        assert np.max(np.abs(m.conj().T @ m - np.eye(len(m)))) < 1e-12
    state = prepare_product_state("10011010", "y")
    evolved = run_circuit(state, model.trotter_circuit(p8, 50))
    assert evolved.norm_error() < 1e-9

    # Pauli orthogonality by brute force at up to 4 sites
    for L in (2, 3, 4):
        d = 1 << L
        masks = [(x, z) for x in range(d) for z in range(d)]
        picks = rng.choice(len(masks), size=40, replace=False)
        for k in picks:
            x, z = masks[k]
            pa = paulis.PauliString(x, z, 1.0)
            for k2 in rng.choice(len(masks), size=5, replace=False):
                x2, z2 = masks[k2]
                pb = paulis.PauliString(x2, z2, 1.0)
                tr = np.trace(paulis.dense(pa, L) @ paulis.dense(pb, L)).real / d
                expected = 1.0 if (x, z) == (x2, z2) else 0.0
                assert abs(tr - expected) < 1e-12

    # estimator unbiasedness over the full basis at 6 sites
    p6 = ModelParams(num_sites=6, v=1.0, omega=2.0, dt=0.1)
    sd6 = exact.spectral_data(p6)
    times = np.array([0.0, 1.0, 2.0])
    w = exact.y_basis_matrix(6)
    mean = exact.two_branch_values(sd6, w, times, sites=[3]).real.mean(axis=2)[:, 0]
    c_exact, _ = exact.exact_correlator(sd6, 3, 3, times)
    assert np.max(np.abs(mean - c_exact)) < 1e-9

    # renormalization scale invariance
    grid = sampling.estimate_correlators_exact(
        sd6, sampling.draw_ensemble("y", 6, 3, rng), np.linspace(0.0, 5.0, 11)
    )
    lam = rng.uniform(0.2, 1.5, size=len(grid.times))
    scaled = sampling.CorrelatorGrid(
        grid.times, grid.offsets, grid.mean * lam[:, None],
        grid.per_sample * lam[None, :, None], dict(grid.metadata),
    )
    a = analysis.renormalize(grid).renormalized
    b = analysis.renormalize(scaled).renormalized
    assert np.nanmax(np.abs(a - b)) < 1e-12

    # determinism of the full pipeline
    sch = protocol.TrotterSchedule(6, 2)
    g1 = protocol.pipeline_correlators(p6, ["101010"], sch, shots=256, seed=5)
    g2 = protocol.pipeline_correlators(p6, ["101010"], sch, shots=256, seed=5)
    assert np.array_equal(g1.per_sample, g2.per_sample)

    report(10, "unitarity, norms, orthogonality, unbiasedness, scale invariance, determinism")
