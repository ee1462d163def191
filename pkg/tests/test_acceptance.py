"""Acceptance criteria, one test each, run at the stated tolerances.

Every test records a PASS/FAIL line that is repeated in the terminal
summary under "acceptance criteria".
"""

from __future__ import annotations

import itertools
import json
import math

import numpy as np
import pytest
from scipy.stats import kstest

from conftest import CONFIGS, make_spec
from glfield import io, studies
from glfield.cli import main
from glfield.dynamics import AutonomousDynamics, blow_up_time, integrated_intensity, invert_integrated_intensity
from glfield.network import load_config
from glfield.oracle import oracle_fixed_point
from glfield.ph import ph_problem, solve_ph_fixed_point
from glfield.rmf import simulate_rmf, simulate_rmf_threshold

pytestmark = pytest.mark.acceptance

ZERO = {"kind": "constant", "params": {"value": 0.0}}
CONST1 = {"kind": "constant", "params": {"value": 1.0}}


def test_1_dynamics_exactness(record_acceptance):
    worst = 0.0
    grid = itertools.product(["leaky", "quadratic"], [0.05, 1.0, 7.0], [0.1, 1.0, 4.0],
                             [0.0, 0.3, 1.0, 10.0, 1e3], np.r_[0.0, np.geomspace(1e-12, 40.0, 60)])
    for kind, b, tau, lam0, area in grid:
        if kind == "quadratic" and area > 15.0 * tau:
            continue  # double-precision conditioning limit, see the dynamics tests
        dyn = AutonomousDynamics(kind, b, tau)
        dt = invert_integrated_intensity(dyn, lam0, area)
        err = abs(integrated_intensity(dyn, lam0, dt) - area) / max(1.0, area)
        worst = max(worst, err)
    blow = abs(blow_up_time(AutonomousDynamics("quadratic", 1.0, 1.0), 0.0) - math.pi / 2)
    ok = worst <= 1e-9 and blow <= 1e-12
    record_acceptance("1 dynamics exactness", ok,
                      f"max round-trip error {worst:.2e} (tol 1e-9), blow-up error {blow:.1e} (tol 1e-12)")
    assert ok


def test_2_renewal_sanity(record_acceptance):
    spec, run = make_spec(kind="leaky", b=1.0, w=0.0, r=1.0, init=CONST1,
                          run={"T": 26_000.0, "K": 2, "M": 2, "trials": 1})
    isi = simulate_rmf(spec, run, sample_times=[0.0])[0].log.isi()[:100_000]
    p = kstest(isi, "expon").pvalue
    ok = isi.size == 100_000 and p > 0.01
    record_acceptance("2 renewal sanity", ok, f"KS p-value {p:.3f} on {isi.size} ISIs (level 0.01)")
    assert ok


def test_3_quadratic_isi_ceiling(record_acceptance):
    spec, run = make_spec(kind="quadratic", b=1.0, tau=1.0, w=1.0, r=0.0, init=ZERO,
                          run={"T": 10_000.0, "K": 4, "M": 8, "trials": 4})
    n, longest = 0, 0.0
    for res in simulate_rmf(spec, run, sample_times=[0.0]):
        isi = res.log.isi()
        n += isi.size
        longest = max(longest, float(isi.max()))
    ok = n >= 1_000_000 and longest <= math.pi / 2
    record_acceptance("3 quadratic ISI ceiling", ok,
                      f"{n} spikes, longest interval {longest:.6f} <= pi/2 = {math.pi / 2:.6f}")
    assert ok


def test_4_tail_bound(record_acceptance):
    spec, run = load_config(CONFIGS / "tail_quadratic.json")
    lam, rows = studies.tail_study(spec, run, n_samples=100_000)
    ok = lam.size >= 100_000 and all(r["pass"] for r in rows)
    detail = ", ".join(f"L={r['L']:g}: {r['empirical']:.4f}<={r['bound']:.4f}+3SE" for r in rows)
    record_acceptance("4 tail bound", ok, f"{lam.size} samples; {detail}")
    assert ok


@pytest.mark.slow
def test_5_propagation_of_chaos(record_acceptance):
    parts, ok = [], True
    for name in ("poc_leaky", "poc_quadratic"):
        spec, run = load_config(CONFIGS / f"{name}.json")
        st = studies.poc_scaling_study(spec, run)
        rep = studies.poc_report(st)
        ok &= rep.passed
        tv = "/".join(f"{e.value:.4f}" for e in st.tv)
        parts.append(f"{name}: slope {st.fit.slope:.3f} (<= -0.3), TV {tv}, monotone "
                     f"{rep.checks[1].passed}")
    record_acceptance("5 propagation of chaos", ok, "; ".join(parts))
    assert ok


@pytest.mark.slow
def test_6_tlln(record_acceptance):
    parts, ok = [], True
    for name in ("tail_quadratic", "poc_leaky"):
        spec, run = load_config(CONFIGS / f"{name}.json")
        fit = studies.tlln_study(spec, run)
        good = abs(fit.slope + 0.5) <= 0.2
        ok &= good
        parts.append(f"{name}: slope {fit.slope:.3f}")
    record_acceptance("6 TLLN", ok, "; ".join(parts) + " (target -0.5 +- 0.2)")
    assert ok


def test_7_threshold_coupling(record_acceptance, tmp_path):
    spec, run = load_config(CONFIGS / "poc_quadratic.json")
    run = run.replace(T=1.0, trials=10)
    same, events = True, 0
    for a, b in zip(simulate_rmf(spec, run), simulate_rmf_threshold(spec, run, 1e6)):
        io.write_event_log(tmp_path / "a.csv", a.log)
        io.write_event_log(tmp_path / "b.csv", b.log)
        same &= (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        events += len(a.log)
    ok = same and events > 0
    record_acceptance("7 threshold coupling", ok, f"C=1e6, T=1: {run.trials} logs, {events} events, "
                      f"byte-identical={same}")
    assert ok


@pytest.mark.slow
def test_8_lln_k(record_acceptance):
    spec, run = load_config(CONFIGS / "field_gaussian.json")
    st = studies.lln_k_study(spec, run)
    rep = studies.lln_k_report(st)
    detail = ", ".join(f"{c.name}={'ok' if c.passed else 'FAIL'}({c.metric:.4g})" for c in rep.checks)
    record_acceptance("8 K-limit study", rep.passed, detail)
    assert rep.passed


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["leaky", "quadratic"])
def test_9_oracle_equivalence(record_acceptance, kind):
    spec, run = load_config(CONFIGS / f"oracle_{kind}.json")
    problem = ph_problem(spec, run.K)
    mc, mc_rep = solve_ph_fixed_point(spec, run, 6, 20_000, alpha=1.0)
    orc, _, info = oracle_fixed_point(problem, run.knots(), spec.initial, 20, alpha=1.0)
    diff = float(np.max(np.abs(mc.values - orc.values)))
    tol = max(0.02 * float(np.max(orc.values)), 2 * mc_rep.std_error)
    ok = diff <= tol and info["max_mass_error"] <= 1e-6
    record_acceptance(f"9 oracle equivalence ({kind})", ok,
                      f"sup diff {diff:.4f} <= {tol:.4f}; mass error {info['max_mass_error']:.1e}")
    assert ok


def test_10_cli_determinism(record_acceptance, tmp_path, monkeypatch):
    monkeypatch.delenv("GLFIELD_JOBS", raising=False)
    commands = [
        ["simulate-rmf", "--config", str(CONFIGS / "poc_quadratic.json"), "--trials", "4"],
        ["solve-ph", "--config", str(CONFIGS / "oracle_leaky.json"), "--iterations", "2", "--trials", "400"],
        ["verify", "--study", "tail", "--config", str(CONFIGS / "tail_quadratic.json"), "--trials", "20000"],
    ]
    ok, n_files = True, 0
    for i, cmd in enumerate(commands):
        digests = []
        for jobs in ("1", "3"):
            out = tmp_path / f"{i}_{jobs}"
            assert main(cmd + ["--seed", "5", "--jobs", jobs, "--out-dir", str(out)]) == 0
            files = json.loads((out / "manifest.json").read_text())["files"]
            digests.append({f["path"]: f["sha256"] for f in files})
        ok &= digests[0] == digests[1]
        n_files += len(digests[0])
    record_acceptance("10 determinism", ok, f"{len(commands)} commands, {n_files} output files, "
                      f"identical hashes across --jobs 1/3: {ok}")
    assert ok
