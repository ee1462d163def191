from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_spec
from glfield.errors import PreconditionError
from glfield.field import (
    FieldSolution,
    aggregate_input_study,
    empirical_measure_error,
    field_problem,
    lln_array_check,
    solve_neural_field,
    trapezoid_weights,
)
from glfield.oracle import solve_density_oracle
from glfield.ph import FixedPointReport, RateField

CONST1 = {"kind": "constant", "params": {"value": 1.0}}
K_LIST = [8, 16, 32, 64, 128]


def _flat_solution(spec, run, level=1.0, Q=9):
    nodes = np.linspace(spec.domain.lo, spec.domain.hi, Q)
    return FieldSolution(RateField.constant(nodes, run.knots(), level), trapezoid_weights(nodes),
                         FixedPointReport())


@settings(max_examples=50, deadline=None)
@given(lo=st.floats(-10, 10), length=st.floats(1e-3, 20), Q=st.integers(2, 300))
def test_trapezoid_weights_sum_to_length(lo, length, Q):
    q = trapezoid_weights(np.linspace(lo, lo + length, Q))
    assert abs(q.sum() - length) <= 1e-12 * max(1.0, length)
    assert np.all(q > 0)


def test_field_needs_two_nodes():
    spec, _ = make_spec()
    with pytest.raises(PreconditionError):
        field_problem(spec, 1)


def test_uncoupled_field_is_single_site_solution():
    spec, run = make_spec(kind="leaky", b=1.0, w=0.0, r=0.5, init=CONST1)
    sol = solve_neural_field(spec, run, Q=5, n_iter=2, trials_per_iter=4000)
    problem, _ = field_problem(spec, 5)
    exact = solve_density_oracle(problem, 0, None, run.knots(), spec.initial).mean
    se = sol.report.std_error
    assert np.max(np.abs(sol.rates.values - exact[None, :])) <= 5 * se + 1e-3
    assert sol.report.converged


def test_constant_kernel_field_is_x_independent():
    spec, run = make_spec(kind="leaky", b=1.0, w=1.0, r=0.5, init=CONST1)
    sol = solve_neural_field(spec, run, Q=9, n_iter=3, trials_per_iter=4000, alpha=1.0)
    spread = np.ptp(sol.rates.values, axis=0).max()
    # two nodes are independent MC estimates of the same value
    assert spread <= 5 * math.sqrt(2) * sol.report.std_error
    assert np.all(sol.rates.values >= 0)


@pytest.mark.slow
def test_quadrature_refinement_within_noise():
    spec, run = make_spec(kind="leaky", b=1.0, w=1.0, r=0.5, init=CONST1,
                          kernel={"kind": "gaussian", "params": {"amplitude": 1.0, "width": 0.2}},
                          run={"T": 1.0, "dt_out": 0.25})
    coarse = solve_neural_field(spec, run, Q=32, n_iter=3, trials_per_iter=2000, alpha=1.0)
    fine = solve_neural_field(spec, run, Q=64, n_iter=3, trials_per_iter=2000, alpha=1.0)
    diff = np.abs(fine.interpolate(coarse.rates.sites) - coarse.rates.values).max()
    se = math.hypot(coarse.report.std_error, fine.report.std_error)
    assert diff <= 5 * se


def test_cumulative_of_flat_field():
    spec, run = make_spec()
    sol = _flat_solution(spec, run, level=2.0)
    assert np.allclose(sol.cumulative([0.1, 0.55], 1.5), 3.0, atol=1e-14)


def test_zero_kernel_aggregate_is_zero():
    spec, run = make_spec(w=0.0)
    agg = aggregate_input_study(spec, _flat_solution(spec, run), 0.5, 2.0, K_LIST, 1000)
    for s in agg.stats:
        assert s.mean == 0.0 and s.var == 0.0 and s.target == 0.0
    cond = lln_array_check(agg)
    assert cond["condition1"] and cond["condition2"] and not cond["inconclusive"]


def test_aggregate_matches_exact_moments():
    spec, run = make_spec(kernel={"kind": "gaussian", "params": {"amplitude": 2.0, "width": 0.3}})
    agg = aggregate_input_study(spec, _flat_solution(spec, run), 0.3, 2.0, K_LIST, 50_000, seed=1)
    for s in agg.stats:
        assert s.mean >= 0
        assert abs(s.mean - s.exact_mean) <= 4 * s.mean_se
        assert s.var == pytest.approx(s.exact_var, rel=0.05)
    # exact mean converges to the D-average of w(x, .) * int m
    assert abs(agg.stats[-1].exact_mean - agg.target) < abs(agg.stats[0].exact_mean - agg.target)


def test_aggregate_is_deterministic_and_chunk_free():
    spec, run = make_spec(w=1.0)
    sol = _flat_solution(spec, run)
    a = aggregate_input_study(spec, sol, 0.5, 2.0, [4, 8, 16], 3000, seed=2)
    b = aggregate_input_study(spec, sol, 0.5, 2.0, [4, 8, 16], 3000, seed=2)
    assert a.rows() == b.rows()


def test_aggregate_preconditions():
    spec, run = make_spec(w=1.0)
    sol = _flat_solution(spec, run)
    with pytest.raises(PreconditionError):
        aggregate_input_study(spec, sol, 0.5, 2.0, [16, 8], 10)


def test_single_trial_is_inconclusive():
    spec, run = make_spec(w=1.0)
    agg = aggregate_input_study(spec, _flat_solution(spec, run), 0.5, 2.0, K_LIST, 1)
    cond = lln_array_check(agg)
    assert cond["inconclusive"] and cond["condition1"] is None


def test_constant_kernel_passes_from_k4():
    spec, run = make_spec(w=1.0)
    agg = aggregate_input_study(spec, _flat_solution(spec, run), 0.5, 2.0, [4] + K_LIST, 200_000)
    cond = lln_array_check(agg)
    assert cond["condition1"] and cond["condition2"]


def test_constant_kernel_variance_ratio_is_7_over_127():
    # Var(A^K) = c^2 Lambda / (K - 1) for an x-independent integrand, so the
    # ratio between K = 128 and K = 8 is 7/127 > 0.05
    spec, run = make_spec(w=1.0)
    agg = aggregate_input_study(spec, _flat_solution(spec, run), 0.5, 2.0, K_LIST, 10)
    ratio = agg.stats[-1].exact_var / agg.stats[0].exact_var
    assert ratio == pytest.approx(7 / 127, rel=1e-12)


@pytest.mark.parametrize("f,lip", [(lambda y: y, 1.0), (np.cos, 1.0)])
@pytest.mark.parametrize("K", [8, 32, 128])
def test_empirical_measure_converges(f, lip, K):
    spec, _ = make_spec()
    err = empirical_measure_error(spec, 0.3, K, f)
    assert err <= 2 * spec.domain.length / K * lip
