"""Exact event-driven simulation of replica-mean-field GL networks.

M replicas of a K-site network. Neuron ``i = m * K + x`` is replica ``m``
at site ``x`` (0-based). Between events every intensity follows the
autonomous flow; the next spike of a neuron is drawn by inverting its
compensator at a fresh unit-exponential budget. When neuron (n, y) spikes:

* its own intensity resets to r(y);
* for every other site x a target replica V is drawn uniformly from
  {0..M-1} minus {n}, and lam_V(x) jumps by w(x, y) / (K - 1);
* every neuron whose intensity changed draws a fresh budget.

Fresh budgets after a jump are exact in law because the time-changed
process is a unit-rate Poisson process and hence memoryless.

The threshold variant adds deterministic resets to r(x) whenever an
intensity reaches the level C (by flow or by a jump). Those resets are not
spikes: they are logged with kind 1 and route nothing.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from glfield import _kernels as kern
from glfield.errors import EngineInvariantViolation, PreconditionError
from glfield.network import NetworkSpec, RunConfig
from glfield.rng import seed_key

SPIKE = 0
THRESHOLD_RESET = 1
_LAMBDA_GUARD = 1e300


@njit(cache=True, nogil=True)
def _schedule(kind, b, tau, lam, t0, key0, key1, trial, i, draw, threshold):
    area = kern.exp1(key0, key1, trial, kern.P_EXP, i, draw)
    ts = t0 + kern.invert(kind, b, tau, lam, area)
    ev = 0
    if threshold < math.inf:
        th = t0 + kern.hitting(kind, b, tau, lam, threshold)
        if th < ts:
            ts = th
            ev = 1
    return ts, ev


@njit(cache=True, nogil=True)
def _rmf_trial(kind, b, tau, jump, reset, init_code, init_p0, init_p1, M, K, T,
               sample_times, key0, key1, trial, threshold, record, want_arrivals):
    N = M * K
    lam = np.empty(N)
    anchor = np.zeros(N)
    cand = np.empty(N)
    ckind = np.zeros(N, np.int8)
    ndraw = np.zeros(N, np.int64)
    nspk = np.zeros(N, np.int64)
    for i in range(N):
        u = kern.uniform(key0, key1, trial, kern.P_INIT, i, 0)
        lam[i] = kern.draw_initial(init_code, init_p0, init_p1, u)
    for i in range(N):
        cand[i], ckind[i] = _schedule(kind, b, tau, lam[i], 0.0, key0, key1, trial, i, 0, threshold)
        ndraw[i] = 1
    heap = np.empty(N, np.int64)
    pos = np.empty(N, np.int64)
    kern.heap_build(heap, pos, cand)

    S = sample_times.shape[0]
    lam_s = np.zeros((S, N))
    cnt_s = np.zeros((S, N), np.int64)
    KA = K if want_arrivals else 0
    arrivals = np.zeros((KA, N), np.int64)
    arr_s = np.zeros((S, KA, N), np.int64)

    cap = 1024 if record else 1
    ev_t = np.empty(cap)
    ev_i = np.empty(cap, np.int64)
    ev_k = np.empty(cap, np.int8)
    ev_tg = np.full((cap, K), -1, np.int32)
    n_ev = 0
    status = 0
    si = 0

    while True:
        i = heap[0]
        t = cand[i]
        if not t < T:
            break
        while si < S and sample_times[si] < t:
            s = sample_times[si]
            for j in range(N):
                lam_s[si, j] = kern.flow(kind, b, tau, lam[j], s - anchor[j])
                cnt_s[si, j] = nspk[j]
            for y in range(KA):
                for j in range(N):
                    arr_s[si, y, j] = arrivals[y, j]
            si += 1

        y = i % K
        n = i // K
        rec = -1
        if record:
            if n_ev + K + 1 > cap:
                new = 2 * cap + K + 1
                ev_t2 = np.empty(new)
                ev_i2 = np.empty(new, np.int64)
                ev_k2 = np.empty(new, np.int8)
                ev_tg2 = np.full((new, K), -1, np.int32)
                ev_t2[:n_ev] = ev_t[:n_ev]
                ev_i2[:n_ev] = ev_i[:n_ev]
                ev_k2[:n_ev] = ev_k[:n_ev]
                ev_tg2[:n_ev] = ev_tg[:n_ev]
                ev_t, ev_i, ev_k, ev_tg = ev_t2, ev_i2, ev_k2, ev_tg2
                cap = new
            rec = n_ev
            ev_t[rec] = t
            ev_i[rec] = i
            ev_k[rec] = ckind[i]
            n_ev += 1

        is_spike = ckind[i] == 0
        lam[i] = reset[y]
        anchor[i] = t
        cand[i], ckind[i] = _schedule(kind, b, tau, lam[i], t, key0, key1, trial, i, ndraw[i], threshold)
        ndraw[i] += 1
        kern.heap_update(heap, pos, cand, i)
        if not is_spike:
            continue

        k_spk = nspk[i]
        nspk[i] += 1
        for x in range(K):
            if x == y:
                continue
            u = kern.uniform(key0, key1, trial, kern.P_ROUTE + 16 * x, i, k_spk)
            v = int(u * (M - 1))
            if v >= M - 1:
                v = M - 2
            if v >= n:
                v += 1
            tgt = v * K + x
            if record:
                ev_tg[rec, x] = v
            if want_arrivals:
                arrivals[y, tgt] += 1
            dj = jump[x, y]
            if dj == 0.0:
                continue
            lt = kern.flow(kind, b, tau, lam[tgt], t - anchor[tgt]) + dj
            if not lt < _LAMBDA_GUARD:
                status = 1
                break
            anchor[tgt] = t
            if lt >= threshold:
                # the jump itself crossed the threshold: immediate reset
                lt = reset[x]
                if record:
                    ev_t[n_ev] = t
                    ev_i[n_ev] = tgt
                    ev_k[n_ev] = 1
                    n_ev += 1
            lam[tgt] = lt
            cand[tgt], ckind[tgt] = _schedule(kind, b, tau, lt, t, key0, key1, trial, tgt,
                                              ndraw[tgt], threshold)
            ndraw[tgt] += 1
            kern.heap_update(heap, pos, cand, tgt)
        if status != 0:
            break

    while si < S and sample_times[si] <= T:
        s = sample_times[si]
        for j in range(N):
            lam_s[si, j] = kern.flow(kind, b, tau, lam[j], s - anchor[j])
            cnt_s[si, j] = nspk[j]
        for y in range(KA):
            for j in range(N):
                arr_s[si, y, j] = arrivals[y, j]
        si += 1

    return (status, ev_t[:n_ev].copy(), ev_i[:n_ev].copy(), ev_k[:n_ev].copy(),
            ev_tg[:n_ev].copy(), lam_s, cnt_s, arr_s, nspk)


@njit(cache=True, nogil=True)
def _rmf_batch(kind, b, tau, jump, reset, init_code, init_p0, init_p1, M, K, T,
               sample_times, key0, key1, trial_lo, trial_hi, threshold, want_arrivals):
    n = trial_hi - trial_lo
    S = sample_times.shape[0]
    N = M * K
    KA = K if want_arrivals else 0
    lam = np.empty((n, S, N))
    cnt = np.empty((n, S, N), np.int64)
    arr = np.empty((n, S, KA, N), np.int64)
    status = 0
    for r in range(n):
        out = _rmf_trial(kind, b, tau, jump, reset, init_code, init_p0, init_p1, M, K, T,
                         sample_times, key0, key1, trial_lo + r, threshold, False, want_arrivals)
        if out[0] != 0:
            status = out[0]
        lam[r] = out[5]
        cnt[r] = out[6]
        arr[r] = out[7]
    return status, lam, cnt, arr


# ---------------------------------------------------------------------------
# python surface


def default_jobs() -> int:
    env = os.environ.get("GLFIELD_JOBS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class EngineParams:
    """Flat numeric view of a network with K sites, as consumed by the kernels."""

    kind: int
    b: float
    tau: float
    jump: np.ndarray
    reset: np.ndarray
    init: tuple[int, float, float]
    sites: np.ndarray

    @classmethod
    def from_spec(cls, spec: NetworkSpec, K: int) -> "EngineParams":
        sites = spec.sites(K)
        jump = spec.kernel.matrix(sites) / (K - 1)
        np.fill_diagonal(jump, 0.0)
        dyn = spec.dynamics
        return cls(dyn.code, dyn.b, dyn.tau, np.ascontiguousarray(jump),
                   np.ascontiguousarray(spec.reset(sites)), spec.initial.code, sites)


@dataclass
class EventLog:
    """Globally ordered record of one trial.

    ``targets[e, x]`` is the target replica routed to site x by spike ``e``
    (-1 at the spiking site and for threshold resets).
    """

    t: np.ndarray
    m: np.ndarray
    x: np.ndarray
    kind: np.ndarray
    targets: np.ndarray
    M: int
    K: int
    T: float

    def __len__(self) -> int:
        return len(self.t)

    @property
    def spikes(self) -> np.ndarray:
        return self.kind == SPIKE

    def spike_counts(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Counts N_{m,x}([0, t)) and routed arrivals A[y, m, x] over [0, t).

        ``A[y, m, x]`` is the number of spikes from site y routed to replica
        m at site x.
        """
        if not 0 <= t <= self.T:
            raise ValueError(f"t={t} outside [0, {self.T}]")
        sel = self.spikes & (self.t < t)
        counts = np.zeros((self.M, self.K), np.int64)
        np.add.at(counts, (self.m[sel], self.x[sel]), 1)
        arrivals = np.zeros((self.K, self.M, self.K), np.int64)
        src = self.x[sel]
        tg = self.targets[sel]
        for x in range(self.K):
            ok = tg[:, x] >= 0
            np.add.at(arrivals, (src[ok], tg[ok, x], np.full(ok.sum(), x)), 1)
        return counts, arrivals

    def isi(self) -> np.ndarray:
        """Inter-spike intervals of all neurons, including time to first spike.

        Threshold resets restart the interval like a spike would.
        """
        out = []
        neuron = self.m * self.K + self.x
        order = np.lexsort((self.t, neuron))
        nt, tt = neuron[order], self.t[order]
        kk = self.kind[order]
        starts = np.r_[True, nt[1:] != nt[:-1]]
        prev = np.where(starts, 0.0, np.r_[0.0, tt[:-1]])
        out = (tt - prev)[kk == SPIKE]
        return out


@dataclass
class TrialResult:
    trial: int
    log: EventLog | None
    sample_times: np.ndarray
    lam: np.ndarray  # (S, M, K)
    counts: np.ndarray  # (S, M, K)


def _check_threshold(spec: NetworkSpec, params: EngineParams, threshold):
    if threshold is None:
        return math.inf
    C = float(threshold)
    if not C > params.reset.max():
        raise PreconditionError(f"threshold {C} must exceed max reset {params.reset.max()}")
    if not C > spec.initial.sup:
        raise PreconditionError(f"threshold {C} must exceed sup of initial law {spec.initial.sup}")
    return C


def _run_one(spec, run, params, trial, sample_times, C, record):
    key0, key1 = seed_key(run.seed)
    code, p0, p1 = params.init
    out = _rmf_trial(params.kind, params.b, params.tau, params.jump, params.reset, code, p0, p1,
                     run.M, run.K, run.T, sample_times, key0, key1, trial, C, record, False)
    status, ev_t, ev_i, ev_k, ev_tg = out[:5]
    if status:
        raise EngineInvariantViolation(f"intensity overflow in trial {trial}")
    log = None
    if record:
        log = EventLog(ev_t, ev_i // run.K, ev_i % run.K, ev_k, ev_tg, run.M, run.K, run.T)
    S = len(sample_times)
    return TrialResult(trial, log, sample_times,
                       out[5].reshape(S, run.M, run.K), out[6].reshape(S, run.M, run.K))


def _map_trials(fn, trials, jobs):
    jobs = max(1, int(jobs or default_jobs()))
    if jobs == 1 or len(trials) <= 1:
        return [fn(t) for t in trials]
    with ThreadPoolExecutor(jobs) as pool:
        return list(pool.map(fn, trials))


def simulate_rmf(spec: NetworkSpec, run: RunConfig, trials=None, sample_times=None,
                 threshold: float | None = None, record: bool = True, jobs: int | None = None):
    """Simulate independent trials of the replica-mean-field dynamics.

    Returns one :class:`TrialResult` per trial (default ``range(run.trials)``).
    Intensities are sampled at ``sample_times`` (default: multiples of
    ``run.dt_out``). Passing ``threshold`` gives the threshold variant.
    """
    params = EngineParams.from_spec(spec, run.K)
    C = _check_threshold(spec, params, threshold)
    if sample_times is None:
        sample_times = run.knots()
    sample_times = np.ascontiguousarray(sample_times, dtype=float)
    trials = list(range(run.trials)) if trials is None else list(trials)
    return _map_trials(lambda tr: _run_one(spec, run, params, tr, sample_times, C, record), trials, jobs)


def simulate_rmf_threshold(spec: NetworkSpec, run: RunConfig, C: float, **kw):
    return simulate_rmf(spec, run, threshold=C, **kw)


@dataclass
class RMFSamples:
    """Intensities and counts at fixed times over many trials.

    Shapes: ``lam`` and ``counts`` are (trials, S, M, K); ``arrivals`` is
    (trials, S, K_src, M, K) or None.
    """

    sample_times: np.ndarray
    lam: np.ndarray
    counts: np.ndarray
    arrivals: np.ndarray | None


def rmf_samples(spec: NetworkSpec, run: RunConfig, sample_times, n_trials: int,
                trial_offset: int = 0, threshold: float | None = None,
                arrivals: bool = False, jobs: int | None = None, chunk: int = 256) -> RMFSamples:
    """Batch version of :func:`simulate_rmf` keeping only sampled quantities."""
    params = EngineParams.from_spec(spec, run.K)
    C = _check_threshold(spec, params, threshold)
    sample_times = np.ascontiguousarray(sample_times, dtype=float)
    key0, key1 = seed_key(run.seed)
    code, p0, p1 = params.init
    edges = list(range(trial_offset, trial_offset + n_trials, chunk)) + [trial_offset + n_trials]

    def work(k):
        return _rmf_batch(params.kind, params.b, params.tau, params.jump, params.reset, code, p0, p1,
                          run.M, run.K, run.T, sample_times, key0, key1, edges[k], edges[k + 1],
                          C, arrivals)

    parts = _map_trials(work, range(len(edges) - 1), jobs)
    if any(p[0] for p in parts):
        raise EngineInvariantViolation("intensity overflow")
    S, M, K = len(sample_times), run.M, run.K
    lam = np.concatenate([p[1] for p in parts]).reshape(n_trials, S, M, K)
    cnt = np.concatenate([p[2] for p in parts]).reshape(n_trials, S, M, K)
    arr = None
    if arrivals:
        arr = np.concatenate([p[3] for p in parts]).reshape(n_trials, S, K, M, K)
    return RMFSamples(sample_times, lam, cnt, arr)


def spike_counts(log: EventLog, t: float):
    return log.spike_counts(t)
