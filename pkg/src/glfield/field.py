"""Neural-field limit with stochastic resets, and the K -> infinity study.

The interaction integral over D is discretised by the composite trapezoid
rule on Q uniform nodes: node y drives node x with Poisson arrivals at
rate m(y, t), each adding ``w(x, y) * q_y``. The field is then the fixed
point of the same Picard iteration used for the Poisson-Hypothesis
network (:func:`glfield.ph.fixed_point`).

For the convergence study the aggregate input

    A^K(x, t) = sum_{y in D_K(x), y != x} w(x, y) / (K - 1) * Nhat_y([0, t])

is sampled directly: the Nhat_y are independent Poisson counts with means
int_0^t m(y, s) ds read off the converged field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from glfield.errors import PreconditionError
from glfield.network import NetworkSpec, RunConfig, build_nested_grids
from glfield.ph import FixedPointReport, InputProblem, RateField, fixed_point
from glfield.rng import generator


def trapezoid_weights(nodes: np.ndarray) -> np.ndarray:
    h = np.diff(nodes)
    q = np.zeros(len(nodes))
    q[:-1] += h / 2
    q[1:] += h / 2
    return q


def field_problem(spec: NetworkSpec, Q: int) -> tuple[InputProblem, np.ndarray]:
    if Q < 2:
        raise PreconditionError(f"need at least 2 quadrature nodes, got {Q}")
    nodes = np.linspace(spec.domain.lo, spec.domain.hi, Q)
    q = trapezoid_weights(nodes)
    jump = spec.kernel.matrix(nodes) * q[None, :]
    dyn = spec.dynamics
    problem = InputProblem(dyn.code, dyn.b, dyn.tau, nodes, spec.reset(nodes), spec.initial.code,
                           spec.initial.mean, np.ascontiguousarray(jump))
    return problem, q


@dataclass
class FieldSolution:
    rates: RateField
    weights: np.ndarray
    report: FixedPointReport

    def interpolate(self, y) -> np.ndarray:
        """Field values at arbitrary positions y (rows) and the knots (columns)."""
        y = np.atleast_1d(np.asarray(y, float))
        return np.stack([np.interp(y, self.rates.sites, self.rates.values[:, j])
                         for j in range(len(self.rates.knots))], axis=1)

    def cumulative(self, y, t: float) -> np.ndarray:
        """int_0^t m(y, s) ds at positions y (piecewise-linear in both y and s)."""
        vals = self.interpolate(y)
        k = self.rates.knots
        grid = np.union1d(k[k < t], [t])
        cols = np.stack([np.interp(grid, k, row) for row in vals])
        return np.trapezoid(cols, grid, axis=1)


def solve_neural_field(spec: NetworkSpec, run: RunConfig, Q: int = 32, n_iter: int = 6,
                       trials_per_iter: int = 2000, alpha: float = 0.5, tol: float | None = None,
                       jobs: int | None = None) -> FieldSolution:
    problem, q = field_problem(spec, Q)
    rates, report = fixed_point(problem, run.knots(), n_iter, trials_per_iter, run.seed,
                                alpha=alpha, tol=tol, jobs=jobs)
    return FieldSolution(rates, q, report)


@dataclass
class AggregateStats:
    K: int
    mean: float
    var: float
    exact_mean: float
    exact_var: float
    target: float
    trials: int

    @property
    def abs_err(self) -> float:
        return abs(self.mean - self.target)

    @property
    def mean_se(self) -> float:
        return math.sqrt(self.var / self.trials) if self.trials > 1 else math.nan


@dataclass
class AggregateInput:
    x: float
    t: float
    target: float
    stats: list[AggregateStats] = field(default_factory=list)

    def rows(self):
        return [{"K": s.K, "mean_A": s.mean, "var_A": s.var, "target": s.target,
                 "abs_err": s.abs_err} for s in self.stats]


def limit_target(spec: NetworkSpec, solution: FieldSolution, x: float, t: float,
                 n_fine: int = 8193) -> float:
    """Limit of E[A^K(x, t)]: the D-average of w(x, y) int_0^t m(y, s) ds."""
    y = np.linspace(spec.domain.lo, spec.domain.hi, n_fine)
    g = spec.kernel(x, y) * solution.cumulative(y, t)
    return float(simpson(g, x=y) / spec.domain.length)


def aggregate_input_study(spec: NetworkSpec, solution: FieldSolution, x: float, t: float,
                          K_list, trials: int, seed: int = 0, chunk: int = 100_000) -> AggregateInput:
    K_list = list(K_list)
    if any(b <= a for a, b in zip(K_list, K_list[1:])):
        raise PreconditionError("K_list must be increasing")
    if K_list[0] < 2:
        raise PreconditionError("K must be >= 2")
    grids = build_nested_grids(spec.domain, x, K_list[-1])
    target = limit_target(spec, solution, x, t)
    out = AggregateInput(x, t, target)
    for K in K_list:
        ys = grids.grid(K)[1:]
        coef = spec.kernel(x, ys) / (K - 1)
        lam = solution.cumulative(ys, t)
        s1 = 0.0
        s2 = 0.0
        shift = float(coef @ lam)  # centre to keep the variance sum accurate
        done = 0
        c = 0
        while done < trials:
            n = min(chunk, trials - done)
            counts = generator(seed, K, c).poisson(lam, size=(n, len(ys)))
            a = counts @ coef - shift
            s1 += a.sum()
            s2 += (a * a).sum()
            done += n
            c += 1
        mean = shift + s1 / trials
        var = (s2 - s1 * s1 / trials) / (trials - 1) if trials > 1 else math.nan
        out.stats.append(AggregateStats(K, float(mean), float(max(var, 0.0)) if trials > 1 else math.nan,
                                        shift, float(coef ** 2 @ lam), target, trials))
    return out


def lln_array_check(study: AggregateInput, cauchy_tol: float = 0.05, var_ratio: float = 0.05) -> dict:
    """Finite-K surrogates of the two conditions of the triangular-array LLN.

    Condition 1: the row means settle (last increment within ``cauchy_tol``
    of the last mean, plus 3 standard errors). Condition 2: the row
    variances decrease and the last is at most ``var_ratio`` of the first.
    A single trial gives no variance estimate and is reported inconclusive.
    """
    st = study.stats
    if st[0].trials < 2:
        return {"condition1": None, "condition2": None, "inconclusive": True,
                "reason": "variance needs at least two trials"}
    means = np.array([s.mean for s in st])
    ses = np.array([s.mean_se for s in st])
    var = np.array([s.var for s in st])
    inc = np.abs(np.diff(means))
    slack = 3 * np.hypot(ses[1:], ses[:-1])
    last_ok = inc[-1] <= cauchy_tol * abs(means[-1]) + slack[-1] if inc.size else True
    rel_se = math.sqrt(2.0 / st[0].trials)
    decreasing = bool(np.all(var[1:] <= var[:-1] * (1 + 3 * rel_se) + 1e-300))
    ratio = var[-1] / var[0] if var[0] > 0 else 0.0
    cond2 = decreasing and ratio <= var_ratio
    return {
        "condition1": bool(last_ok),
        "condition2": bool(cond2),
        "inconclusive": False,
        "increments": inc.tolist(),
        "variance_ratio": float(ratio),
        "variance_decreasing": decreasing,
    }


def empirical_measure_error(spec: NetworkSpec, x: float, K: int, f) -> float:
    """|D| * mean of f over D_K(x) minus {x}, against the Lebesgue integral of f."""
    ys = build_nested_grids(spec.domain, x, K).grid(K)[1:]
    yy = np.linspace(spec.domain.lo, spec.domain.hi, 20001)
    exact = simpson(f(yy), x=yy)
    return float(abs(spec.domain.length * np.mean(f(ys)) - exact))
