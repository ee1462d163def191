"""GL dynamics under the Poisson Hypothesis.

Each site is an independent neuron driven by independent inhomogeneous
Poisson inputs: site y fires into x at rate m(y, t) (the mean intensity
at y) and every arrival raises lam(x) by ``jump[x, y]``. The mean-rate
field m is the unknown of a self-consistency problem solved by damped
Picard iteration with an exact Monte Carlo inner loop.

The same machinery serves the neural-field solver, which only swaps the
jump matrix for quadrature-weighted kernel values (see
:mod:`glfield.field`).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit

from glfield import _kernels as kern
from glfield.errors import DomainError, PreconditionError
from glfield.network import NetworkSpec, RunConfig
from glfield.rmf import _map_trials
from glfield.rng import seed_key


@dataclass
class RateField:
    """Nonnegative mean-rate field on ``sites`` x ``knots``, linear in t."""

    sites: np.ndarray
    knots: np.ndarray
    values: np.ndarray  # (n_sites, n_knots)

    def __post_init__(self):
        self.sites = np.asarray(self.sites, float)
        self.knots = np.asarray(self.knots, float)
        self.values = np.asarray(self.values, float)
        if self.values.shape != (len(self.sites), len(self.knots)):
            raise DomainError("values must have shape (n_sites, n_knots)")
        if np.any(np.diff(self.knots) <= 0):
            raise DomainError("knots must be strictly increasing")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise DomainError("rate field must be finite and nonnegative")

    def __call__(self, site: int, t):
        return np.interp(t, self.knots, self.values[site])

    def integral(self, t: float) -> np.ndarray:
        """Per-site integral of m over [0, t] (exact for the linear interpolant)."""
        k = self.knots
        tt = np.clip(t, k[0], k[-1])
        grid = np.union1d(k[k < tt], [tt])
        vals = np.stack([np.interp(grid, k, v) for v in self.values])
        return np.trapezoid(vals, grid, axis=1) if grid.size > 1 else np.zeros(len(self.sites))

    @classmethod
    def constant(cls, sites, knots, levels) -> "RateField":
        levels = np.broadcast_to(np.asarray(levels, float), (len(sites),))
        return cls(sites, knots, np.repeat(levels[:, None], len(knots), axis=1))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "t", "m"])
            for i, x in enumerate(self.sites):
                for j, t in enumerate(self.knots):
                    w.writerow([f"{x:.17g}", f"{t:.17g}", f"{self.values[i, j]:.17g}"])

    @classmethod
    def from_csv(cls, path) -> "RateField":
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        sites = np.unique(rows[:, 0])
        knots = np.unique(rows[:, 1])
        values = np.empty((len(sites), len(knots)))
        values[np.searchsorted(sites, rows[:, 0]), np.searchsorted(knots, rows[:, 1])] = rows[:, 2]
        return cls(sites, knots, values)


@dataclass
class FixedPointReport:
    deltas: list = field(default_factory=list)
    trials: list = field(default_factory=list)
    converged: bool = False
    tolerance: float = 0.0
    alpha: float = 0.5
    std_error: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


@dataclass(frozen=True)
class InputProblem:
    """Independent-neuron problem: one neuron per site, Poisson inputs.

    ``jump[x, y]`` is the increment of lam(x) per arrival from site y;
    zero entries mean y does not drive x.
    """

    kind: int
    b: float
    tau: float
    sites: np.ndarray
    reset: np.ndarray
    init: tuple[int, float, float]
    init_mean: float
    jump: np.ndarray

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    def sources(self, x: int) -> tuple[np.ndarray, np.ndarray]:
        src = np.flatnonzero(self.jump[x] > 0)
        return src, np.ascontiguousarray(self.jump[x, src])


def ph_problem(spec: NetworkSpec, K: int) -> InputProblem:
    """Problem for the K-site network: jumps w(x, y) / (K - 1), no self-input."""
    sites = spec.sites(K)
    jump = spec.kernel.matrix(sites) / (K - 1)
    np.fill_diagonal(jump, 0.0)
    dyn = spec.dynamics
    return InputProblem(dyn.code, dyn.b, dyn.tau, sites, spec.reset(sites), spec.initial.code,
                        spec.initial.mean, jump)


# ---------------------------------------------------------------------------
# single-neuron kernel


@njit(cache=True, nogil=True)
def _next_arrival(t, area, knots, tot, seg):
    J = knots.shape[0] - 1
    while seg < J:
        a = knots[seg]
        h = knots[seg + 1] - a
        slope = (tot[seg + 1] - tot[seg]) / h
        R = tot[seg] + slope * (t - a)
        rem = knots[seg + 1] - t
        full = R * rem + 0.5 * slope * rem * rem
        if full >= area and full > 0.0:
            disc = R * R + 2.0 * slope * area
            if disc < 0.0:
                disc = 0.0
            den = R + math.sqrt(disc)
            d = 2.0 * area / den if den > 0.0 else rem
            if d > rem:
                d = rem
            return t + d, seg
        area -= full
        t = knots[seg + 1]
        seg += 1
    return math.inf, seg


@njit(cache=True, nogil=True)
def _attribute(s, seg, u, knots, cum):
    J = knots.shape[0] - 1
    if seg >= J:
        seg = J - 1
    f = (s - knots[seg]) / (knots[seg + 1] - knots[seg])
    n = cum.shape[0]
    total = (1.0 - f) * cum[n - 1, seg] + f * cum[n - 1, seg + 1]
    target = u * total
    lo = 0
    hi = n - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if (1.0 - f) * cum[mid, seg] + f * cum[mid, seg + 1] > target:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True, nogil=True)
def _ph_neuron(kind, b, tau, reset, init_code, p0, p1, src_jump, knots, cum, tot,
               sample_times, key0, key1, trial, stream, T, record):
    S = sample_times.shape[0]
    lam_s = np.zeros(S)
    cnt_s = np.zeros(S, np.int64)
    cap = 64 if record else 1
    spikes = np.empty(cap)
    n_spk = 0
    has_input = src_jump.shape[0] > 0

    lam = kern.draw_initial(init_code, p0, p1, kern.uniform(key0, key1, trial, kern.P_INIT, stream, 0))
    anchor = 0.0
    ndraw = 0
    n_arr = 0
    cand = kern.invert(kind, b, tau, lam, kern.exp1(key0, key1, trial, kern.P_EXP, stream, ndraw))
    ndraw += 1
    seg = 0
    nxt = math.inf
    if has_input:
        nxt, seg = _next_arrival(0.0, kern.exp1(key0, key1, trial, kern.P_ARRIVAL, stream, n_arr),
                                 knots, tot, seg)
    count = 0
    si = 0
    while True:
        t = cand if cand < nxt else nxt
        if not t < T:
            break
        while si < S and sample_times[si] < t:
            lam_s[si] = kern.flow(kind, b, tau, lam, sample_times[si] - anchor)
            cnt_s[si] = count
            si += 1
        if cand < nxt:
            if record:
                if n_spk == cap:
                    sp2 = np.empty(2 * cap)
                    sp2[:n_spk] = spikes[:n_spk]
                    spikes = sp2
                    cap *= 2
                spikes[n_spk] = t
                n_spk += 1
            count += 1
            lam = reset
        else:
            u = kern.uniform(key0, key1, trial, kern.P_ATTR, stream, n_arr)
            y = _attribute(t, seg, u, knots, cum)
            lam = kern.flow(kind, b, tau, lam, t - anchor) + src_jump[y]
            n_arr += 1
            nxt, seg = _next_arrival(t, kern.exp1(key0, key1, trial, kern.P_ARRIVAL, stream, n_arr),
                                     knots, tot, seg)
        anchor = t
        cand = t + kern.invert(kind, b, tau, lam, kern.exp1(key0, key1, trial, kern.P_EXP, stream, ndraw))
        ndraw += 1
    while si < S and sample_times[si] <= T:
        lam_s[si] = kern.flow(kind, b, tau, lam, sample_times[si] - anchor)
        cnt_s[si] = count
        si += 1
    return lam_s, cnt_s, spikes[:n_spk].copy()


@njit(cache=True, nogil=True)
def _ph_batch(kind, b, tau, reset, init_code, p0, p1, src_jump, knots, cum, tot,
              sample_times, key0, key1, trial_lo, trial_hi, stream, T):
    n = trial_hi - trial_lo
    S = sample_times.shape[0]
    lam = np.empty((n, S))
    cnt = np.empty((n, S), np.int64)
    for r in range(n):
        a, c, _ = _ph_neuron(kind, b, tau, reset, init_code, p0, p1, src_jump, knots, cum, tot,
                             sample_times, key0, key1, trial_lo + r, stream, T, False)
        lam[r] = a
        cnt[r] = c
    return lam, cnt


def _drive(problem: InputProblem, rates: RateField, x: int):
    src, src_jump = problem.sources(x)
    r = rates.values[src]
    if src.size == 0:
        r = np.zeros((1, len(rates.knots)))
    cum = np.ascontiguousarray(np.cumsum(r, axis=0))
    tot = np.ascontiguousarray(cum[-1])
    return src, src_jump, cum, tot


@dataclass
class SingleNeuronRun:
    site: int
    spikes: np.ndarray
    sample_times: np.ndarray
    lam: np.ndarray
    counts: np.ndarray


def simulate_input_neuron(problem: InputProblem, rates: RateField, x: int, T: float, seed: int,
                          trial: int = 0, sample_times=None) -> SingleNeuronRun:
    if np.any(rates.values < 0):
        raise DomainError("rate field has negative values")
    if rates.knots[0] > 0 or rates.knots[-1] < T:
        raise PreconditionError("rate field must cover [0, T]")
    src, src_jump, cum, tot = _drive(problem, rates, x)
    sample_times = rates.knots if sample_times is None else np.asarray(sample_times, float)
    key0, key1 = seed_key(seed)
    code, p0, p1 = problem.init
    lam, cnt, spikes = _ph_neuron(problem.kind, problem.b, problem.tau, problem.reset[x], code, p0, p1,
                                  src_jump, rates.knots, cum, tot, np.ascontiguousarray(sample_times),
                                  key0, key1, trial, x, T, True)
    return SingleNeuronRun(x, spikes, sample_times, lam, cnt)


def simulate_single_neuron_ph(x: int, rate_field: RateField, spec: NetworkSpec, run: RunConfig,
                              seed: int | None = None, trial: int = 0) -> SingleNeuronRun:
    """Exact sample of the neuron at site index ``x`` of D_K given the rate field."""
    problem = ph_problem(spec, run.K)
    return simulate_input_neuron(problem, rate_field, x, run.T,
                                 run.seed if seed is None else seed, trial)


def input_samples(problem: InputProblem, rates: RateField, x: int, sample_times, n: int,
                  T: float, seed: int, trial_offset: int = 0, jobs: int | None = None,
                  chunk: int = 4096) -> tuple[np.ndarray, np.ndarray]:
    """lam(x, t) and spike counts N_x([0, t)) at ``sample_times`` over n trials."""
    src, src_jump, cum, tot = _drive(problem, rates, x)
    key0, key1 = seed_key(seed)
    code, p0, p1 = problem.init
    st = np.ascontiguousarray(sample_times, dtype=float)
    edges = list(range(trial_offset, trial_offset + n, chunk)) + [trial_offset + n]

    def work(k):
        return _ph_batch(problem.kind, problem.b, problem.tau, problem.reset[x], code, p0, p1,
                         src_jump, rates.knots, cum, tot, st, key0, key1, edges[k], edges[k + 1], x, T)

    parts = _map_trials(work, range(len(edges) - 1), jobs)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


# ---------------------------------------------------------------------------
# fixed point

_ITER_STRIDE = 1 << 26  # trial-index offset between Picard iterations


def fixed_point(problem: InputProblem, knots, n_iter: int, trials_per_iter: int, seed: int,
                alpha: float = 0.5, tol: float | None = None, jobs: int | None = None,
                estimator=None) -> tuple[RateField, FixedPointReport]:
    """Damped Picard iteration on the mean-rate field.

    ``estimator(rates, it, n)`` returns (mean, standard error) arrays of shape
    (n_sites, n_knots); the default is the Monte Carlo estimator. The first
    update is undamped, so an uncoupled problem is solved in one step; the
    last iteration uses twice the trial budget.
    """
    if n_iter < 1:
        raise PreconditionError("n_iter must be >= 1")
    if not 0 < alpha <= 1:
        raise PreconditionError("alpha must be in (0, 1]")
    knots = np.asarray(knots, float)
    T = float(knots[-1])
    if estimator is None:
        if trials_per_iter < 100:
            raise PreconditionError("trials_per_iter must be >= 100")

        def estimator(rates, it, n):
            mean = np.empty_like(rates.values)
            se = np.zeros_like(rates.values)
            for x in range(problem.n_sites):
                lam, _ = input_samples(problem, rates, x, knots, n, T, seed,
                                       trial_offset=it * _ITER_STRIDE, jobs=jobs)
                mean[x] = lam.mean(axis=0)
                se[x] = lam.std(axis=0, ddof=1) / math.sqrt(n)
            return mean, se

    rates = RateField.constant(problem.sites, knots, problem.init_mean)
    report = FixedPointReport(alpha=alpha)
    se = np.zeros_like(rates.values)
    for it in range(n_iter):
        n = 2 * trials_per_iter if it == n_iter - 1 else trials_per_iter
        est, se = estimator(rates, it, n)
        a = 1.0 if it == 0 else alpha
        new = (1 - a) * rates.values + a * est
        report.deltas.append(float(np.max(np.abs(new - rates.values))))
        report.trials.append(int(n))
        rates = RateField(problem.sites, knots, np.maximum(new, 0.0))
    report.std_error = float(np.max(se))
    # two independent estimates differ by sqrt(2) SE; 5 SE covers the sup over the grid
    noise = 5.0 * math.sqrt(2.0) * alpha * report.std_error
    report.tolerance = max(1e-9 if tol is None else tol, noise)
    report.converged = report.deltas[-1] <= report.tolerance
    return rates, report


def solve_ph_fixed_point(spec: NetworkSpec, run: RunConfig, n_iter: int, trials_per_iter: int,
                         alpha: float = 0.5, tol: float | None = None,
                         jobs: int | None = None) -> tuple[RateField, FixedPointReport]:
    return fixed_point(ph_problem(spec, run.K), run.knots(), n_iter, trials_per_iter, run.seed,
                       alpha=alpha, tol=tol, jobs=jobs)


def gronwall_cap(problem: InputProblem, rates: RateField, T: float, dyn_b: float | None = None) -> float:
    """Crude a-priori bound on any mean-rate iterate over [0, T].

    (E lam(0) + b T / tau + |J|_inf sup m T + max r T) * exp(c T) with
    c = max r + row-sum of the jump matrix.
    """
    b = problem.b if dyn_b is None else dyn_b
    jrow = float(np.max(problem.jump.sum(axis=1))) if problem.jump.size else 0.0
    sup_m = float(np.max(rates.values))
    rmax = float(np.max(problem.reset))
    base = problem.init_mean + b * T / problem.tau + jrow * sup_m * T + rmax * T
    return base * math.exp((rmax + jrow) * T)
