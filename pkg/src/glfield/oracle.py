"""Deterministic forward-equation solver for one Poisson-driven neuron.

Evolves the law p(lam, t) of a single neuron's intensity under the
autonomous drift, Poisson input jumps and spike resets, and returns the mean
intensity. It is an independent check on the Monte Carlo sampler.

Leaky dynamics use a first-order upwind finite-volume scheme on a uniform
intensity grid. Quadratic dynamics have heavy intensity tails (P(lam > L)
~ 1/L**2) that no uniform intensity grid resolves, so they are discretised
on nodes of the co-phase ``phi = atan2(sqrt(b), lam)``: the drift is a
uniform translation there, and with one node per time step transport is
exact. Hazards are integrated exactly along characteristics. Every step
conserves mass; jumps or initial mass beyond the grid are clamped to the
boundary and reported as truncated mass.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from glfield import _kernels as kern
from glfield.errors import PreconditionError, StabilityError
from glfield.network import InitialLaw
from glfield.ph import InputProblem, RateField


class TruncationWarning(UserWarning):
    """Mass left the discretised intensity range."""


@dataclass
class OracleResult:
    times: np.ndarray
    mean: np.ndarray
    mass: np.ndarray  # total mass at the output times
    max_mass_error: float
    truncated: float
    dt: float
    survival: np.ndarray | None = None  # absorbing mode only

    @property
    def mean_first_spike(self) -> float:
        """Integral of the survival curve over the horizon (absorbing mode)."""
        if self.survival is None:
            raise ValueError("only available in absorbing mode")
        return float(np.trapezoid(self.survival, self.times))


def _split(pos: np.ndarray, n: int, lo: int = 0):
    """Linear splitting of fractional node positions onto nodes lo..n-1."""
    pos = np.clip(pos, lo, n - 1)
    i0 = np.minimum(np.floor(pos).astype(np.int64), n - 2)
    f = pos - i0
    return i0, f


def _deposit(p: np.ndarray, pos, mass, lo: int = 0):
    i0, f = _split(np.atleast_1d(np.asarray(pos, float)), p.size, lo)
    mass = np.broadcast_to(np.asarray(mass, float), i0.shape)
    np.add.at(p, i0, mass * (1 - f))
    np.add.at(p, i0 + 1, mass * f)


def _initial_points(law: InitialLaw, n_quantiles: int = 20000):
    if law.kind == "constant":
        return np.array([law.params["value"]]), np.array([1.0])
    u = (np.arange(n_quantiles) + 0.5) / n_quantiles
    return law.ppf(u), np.full(n_quantiles, 1.0 / n_quantiles)


def solve_density_oracle(problem: InputProblem, x: int, rates: RateField | None, times,
                         initial: InitialLaw, n_cells: int = 2000, lam_max: float | None = None,
                         dt: float | None = None, absorbing: bool = False) -> OracleResult:
    """Mean intensity E[lam(x, t)] at ``times`` for the neuron at site ``x``.

    ``rates`` gives the input rate m(y, t) of every source site (None means
    no input). ``dt`` defaults to the largest stable step that divides the
    output spacing; an explicit ``dt`` above the stability bound raises
    :class:`StabilityError`. For quadratic dynamics the co-phase grid is
    tied to ``dt`` and ``n_cells`` sets the step when ``dt`` is None.
    """
    times = np.asarray(times, float)
    if times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise PreconditionError("times must start at 0 and increase")
    T = float(times[-1])
    src = np.flatnonzero(problem.jump[x] > 0)
    jumps = problem.jump[x, src]
    if rates is None or src.size == 0:
        src = np.array([], dtype=np.int64)
        jumps = np.array([])
        rate_fn = lambda t: np.zeros(0)  # noqa: E731
        nu_max = 0.0
    else:
        rv = rates.values[src]
        rate_fn = lambda t: np.array([np.interp(t, rates.knots, r) for r in rv])  # noqa: E731
        nu_max = float(rv.sum(axis=0).max())
    r_x = float(problem.reset[x])
    b, tau = problem.b, problem.tau

    if problem.kind == kern.LEAKY:
        if lam_max is None:
            lam0_hi = initial.sup if math.isfinite(initial.sup) else -initial.mean * math.log(1e-9)
            expected_jumps = nu_max * T + 10 * math.sqrt(nu_max * T + 1)
            lam_max = max(b, r_x, lam0_hi) + (jumps.max() if jumps.size else 0.0) * expected_jumps + 1.0
        delta = lam_max / n_cells
        phi_max = max(b, lam_max - b)
        bound = 0.5 * min(delta * tau / phi_max, 1.0 / (lam_max + nu_max))
        stepper = _LeakyStepper(n_cells, delta, b, tau, r_x, jumps)
    else:
        sb = math.sqrt(b)
        if dt is None:
            dt = tau * (math.pi / 2) / (n_cells * sb)
        bound = math.inf
        stepper = None

    if dt is None:
        dt = bound
    elif dt > bound * (1 + 1e-12):
        raise StabilityError(f"dt={dt} exceeds the stability bound {bound}")
    # land exactly on the output times
    gaps = np.diff(times)
    sub = np.maximum(1, np.ceil(gaps / dt - 1e-9).astype(int))
    if problem.kind != kern.LEAKY:
        # co-phase nodes require a uniform step
        h = float(np.min(gaps / sub))
        sub = np.rint(gaps / h).astype(int)
        if np.any(np.abs(sub * h - gaps) > 1e-9 * max(1.0, T)):
            raise PreconditionError("output times must be multiples of a common step for quadratic dynamics")
        stepper = _QuadStepper(h, b, tau, r_x, jumps)
        dt = h

    pts, wts = _initial_points(initial)
    p = stepper.initial(pts, wts)
    mean = [stepper.mean(p)]
    mass = [p.sum()]
    survival = [p.sum()]
    max_err = abs(p.sum() - 1.0)
    t = 0.0
    for k, gap in enumerate(gaps):
        h = gap / sub[k]
        for _ in range(sub[k]):
            q = 1.0 - np.exp(-rate_fn(t + 0.5 * h) * h)
            p = stepper.step(p, h, q, absorbing)
            t += h
            if not absorbing:
                max_err = max(max_err, abs(p.sum() - 1.0))
        mean.append(stepper.mean(p))
        mass.append(p.sum())
        survival.append(p.sum())
    if stepper.truncated > 1e-6:
        warnings.warn(f"truncated mass {stepper.truncated:.3g} exceeds 1e-6", TruncationWarning, stacklevel=2)
    return OracleResult(times, np.array(mean), np.array(mass), max_err, stepper.truncated, float(dt),
                        np.array(survival) if absorbing else None)


class _LeakyStepper:
    def __init__(self, n, delta, b, tau, r, jumps):
        self.n, self.delta = n, delta
        self.centers = (np.arange(n) + 0.5) * delta
        faces = np.arange(1, n) * delta
        self.v = (b - faces) / tau
        self.r = r
        self.shift = [(int(s), s - int(s)) for s in jumps / delta]
        self.truncated = 0.0

    def initial(self, pts, wts):
        p = np.zeros(self.n)
        pos = pts / self.delta - 0.5
        self.truncated += float(wts[pos > self.n - 0.5].sum())
        _deposit(p, pos, wts)
        return p

    def mean(self, p):
        return float(self.centers @ p)

    def step(self, p, h, q, absorbing):
        flux = np.where(self.v > 0, self.v * p[:-1], self.v * p[1:]) / self.delta
        new = p.copy()
        new[:-1] -= h * flux
        new[1:] += h * flux
        fired = new * -np.expm1(-self.centers * h)
        new -= fired
        out = new.copy()
        n = self.n
        for qy, (k, f) in zip(q, self.shift):
            moved = qy * new
            out -= moved
            for off, wgt in ((k, 1 - f), (k + 1, f)):
                if wgt == 0.0:
                    continue
                if off < n:
                    out[off:] += wgt * moved[: n - off]
                spill = wgt * moved[max(0, n - off):].sum()
                if spill > 0:
                    out[-1] += spill
                    self.truncated += spill
        if not absorbing:
            _deposit(out, self.r / self.delta - 0.5, fired.sum())
        return out


class _QuadStepper:
    def __init__(self, h, b, tau, r, jumps):
        self.sb = sb = math.sqrt(b)
        self.dphi = dphi = sb * h / tau
        self.n = n = int(math.ceil((math.pi / 2) / dphi)) + 2
        self.phi = phi = np.arange(n) * dphi
        with np.errstate(divide="ignore"):
            self.lam = np.where(phi > 0, sb / np.tan(np.maximum(phi, 1e-300)), np.inf)
        s = np.sin(phi)
        ratio = np.ones(n)
        ratio[1:] = np.minimum(1.0, s[:-1] / s[1:]) ** tau
        ratio[1] = 0.0
        self.survive = ratio  # survival of mass moving from node j to j-1
        self.r_pos = math.atan2(sb, r) / dphi
        self.jump_maps = []
        lam_ok = self.lam[1:]
        for J in jumps:
            target = np.arctan2(sb, lam_ok + J) / dphi
            self.jump_maps.append(_split(np.maximum(target, 1.0), n, 1))
        self.truncated = 0.0

    def initial(self, pts, wts):
        p = np.zeros(self.n)
        pos = np.arctan2(self.sb, pts) / self.dphi
        self.truncated += float(wts[pos < 1.0].sum())
        _deposit(p, pos, wts, lo=1)
        return p

    def mean(self, p):
        return float(self.lam[1:] @ p[1:])

    def step(self, p, h, q, absorbing):
        moved = p[1:] * self.survive[1:]
        fired = p[1:].sum() - moved.sum()
        new = np.zeros_like(p)
        new[: self.n - 1] = moved  # node 0 is blow-up and stays empty since survive[1] == 0
        out = new.copy()
        for qy, (i0, f) in zip(q, self.jump_maps):
            m = qy * new[1:]
            out[1:] -= m
            np.add.at(out, i0, m * (1 - f))
            np.add.at(out, i0 + 1, m * f)
        if not absorbing:
            _deposit(out, self.r_pos, fired, lo=1)
        return out


def oracle_fixed_point(problem: InputProblem, knots, initial: InitialLaw, n_iter: int,
                       alpha: float = 0.5, n_cells: int = 2000, tol: float = 1e-6):
    """Picard iteration of the mean-rate field with the oracle as inner solver."""
    from glfield.ph import fixed_point

    knots = np.asarray(knots, float)
    info = {"max_mass_error": 0.0, "truncated": 0.0}

    def estimator(rates, it, n):
        mean = np.empty_like(rates.values)
        for x in range(problem.n_sites):
            res = solve_density_oracle(problem, x, rates, knots, initial, n_cells=n_cells)
            mean[x] = res.mean
            info["max_mass_error"] = max(info["max_mass_error"], res.max_mass_error)
            info["truncated"] = max(info["truncated"], res.truncated)
        return mean, np.zeros_like(mean)

    rates, report = fixed_point(problem, knots, n_iter, 0, 0, alpha=alpha, tol=tol, estimator=estimator)
    return rates, report, info
