"""Statistical estimators behind the verification studies.

Everything here is a pure function of sample arrays: re-running an
analysis on the same logs reproduces it bit-for-bit (bootstrap resamples
use a fixed, explicit seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from glfield.errors import DomainError
from glfield.rng import generator

N_BOOT = 200
Z95 = 1.959963984540054


@dataclass
class TVEstimate:
    value: float
    edges: np.ndarray
    n_a: int
    n_b: int
    ci: tuple[float, float]
    boot_se: float
    sweep: dict = field(default_factory=dict)  # n_bins -> value

    def to_dict(self) -> dict:
        return {"value": self.value, "n_bins": len(self.edges) - 1, "n_a": self.n_a, "n_b": self.n_b,
                "ci": list(self.ci), "boot_se": self.boot_se,
                "sweep": {str(k): v for k, v in self.sweep.items()}}


def default_bins(n_a: int, n_b: int) -> int:
    return max(2, math.ceil(min(n_a, n_b) ** (1 / 3) - 1e-9))


def _hist(x: np.ndarray, edges: np.ndarray) -> np.ndarray:
    # right-closed last bin, so the pooled maximum is counted
    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, len(edges) - 2)
    return np.bincount(idx, minlength=len(edges) - 1)


def _common_edges(a: np.ndarray, b: np.ndarray, n_bins: int) -> np.ndarray:
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, n_bins + 1)


def estimate_tv(samples_a, samples_b, n_bins: int | None = None, edges=None,
                n_boot: int = N_BOOT, seed: int = 0, sweep: bool = True) -> TVEstimate:
    """Histogram estimate of the total-variation distance between two laws.

    Both sample sets are binned on common equal-width bins over the pooled
    range (``n_bins`` defaults to ceil(cbrt(min(n_a, n_b)))), or on explicit
    ``edges`` (samples outside are clamped to the end bins). The 95%
    interval is a normal bootstrap interval from multinomial resampling of
    the bin counts. ``sweep`` adds the estimate at half and double the bins.
    """
    a = np.ravel(np.asarray(samples_a, float))
    b = np.ravel(np.asarray(samples_b, float))
    if a.size == 0 or b.size == 0:
        raise DomainError("both sample sets must be nonempty")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DomainError("samples must be finite")
    if edges is None:
        n_bins = default_bins(a.size, b.size) if n_bins is None else int(n_bins)
        if n_bins < 2:
            raise DomainError(f"n_bins must be >= 2, got {n_bins}")
        edges = _common_edges(a, b, n_bins)
    else:
        edges = np.asarray(edges, float)
        if edges.size < 3 or np.any(np.diff(edges) <= 0):
            raise DomainError("edges must be increasing with at least 2 bins")
    pa = _hist(a, edges) / a.size
    pb = _hist(b, edges) / b.size
    value = float(min(1.0, 0.5 * np.abs(pa - pb).sum()))

    rng = generator(seed, 0x7B)
    ra = rng.multinomial(a.size, pa, size=n_boot) / a.size
    rb = rng.multinomial(b.size, pb, size=n_boot) / b.size
    boot = 0.5 * np.abs(ra - rb).sum(axis=1)
    se = float(boot.std(ddof=1)) if n_boot > 1 else 0.0
    ci = (max(0.0, value - Z95 * se), min(1.0, value + Z95 * se))

    out = TVEstimate(value, edges, a.size, b.size, ci, se)
    if sweep:
        nb = len(edges) - 1
        for k in (max(2, nb // 2), nb * 2):
            e = np.linspace(edges[0], edges[-1], k + 1)
            out.sweep[k] = float(0.5 * np.abs(_hist(a, e) / a.size - _hist(b, e) / b.size).sum())
    return out


@dataclass
class ScalingFit:
    x: np.ndarray
    y: np.ndarray
    slope: float
    intercept: float
    r2: float

    def predict(self, x) -> np.ndarray:
        return np.exp(self.intercept) * np.asarray(x, float) ** self.slope

    def to_dict(self) -> dict:
        return {"x": self.x.tolist(), "y": self.y.tolist(), "slope": self.slope,
                "intercept": self.intercept, "r2": self.r2}


def fit_scaling(x, y) -> ScalingFit:
    """Least-squares fit of log y = intercept + slope * log x."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.size < 3 or x.size != y.size:
        raise DomainError("a scaling fit needs at least 3 paired points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("log-log fit needs positive values")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (intercept + slope * lx)
    ss = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss if ss > 0 else 1.0
    return ScalingFit(x, y, float(slope), float(intercept), float(r2))


def tlln_metric(counts) -> float:
    """E| (1/(M-1)) sum_n (X_n - E X_n) | from an (M, trials) count matrix.

    E X_n is estimated per row by the mean across trials.
    """
    X = np.asarray(counts, float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DomainError("counts must be an (M, trials) matrix with M >= 2")
    M = X.shape[0]
    centered = X - X.mean(axis=1, keepdims=True)
    return float(np.mean(np.abs(centered.sum(axis=0))) / (M - 1))


def tail_bound(L) -> np.ndarray:
    return 1.0 / np.sqrt(1.0 + np.asarray(L, float) ** 2)


def check_tail_bound(samples, L_list) -> list[dict]:
    """Empirical P(lam > L) against 1/sqrt(1 + L^2) plus 3 binomial SE."""
    s = np.ravel(np.asarray(samples, float))
    n = s.size
    if n == 0:
        raise DomainError("no samples")
    out = []
    for L in L_list:
        p = float(np.mean(s > L))
        se = math.sqrt(p * (1 - p) / n)
        bound = float(tail_bound(L))
        out.append({"L": float(L), "empirical": p, "bound": bound, "se": se,
                    "pass": bool(p <= bound + 3 * se)})
    return out


def _poisson_tv(samples: np.ndarray, mean: float) -> float:
    if mean == 0.0:
        return float(np.mean(samples != 0))
    kmax = int(samples.max())
    emp = np.bincount(samples, minlength=kmax + 1) / samples.size
    pmf = sps.poisson.pmf(np.arange(kmax + 1), mean)
    tail = sps.poisson.sf(kmax, mean)
    return float(0.5 * (np.abs(emp - pmf).sum() + tail))


@dataclass
class ChenStein:
    M: int
    mean_spikes: float
    term1: float
    term2: float
    tv_poisson: float
    tv_se: float

    @property
    def total(self) -> float:
        return self.term1 + self.term2

    def to_dict(self) -> dict:
        return {"M": self.M, "mean_spikes": self.mean_spikes, "term1": self.term1, "term2": self.term2,
                "total": self.total, "tv_poisson": self.tv_poisson, "tv_se": self.tv_se}


def chen_stein_terms(arrivals, spikes, n_boot: int = N_BOOT, seed: int = 0) -> ChenStein:
    """Right-hand-side terms of the Chen-Stein estimate for one source/target pair.

    ``spikes`` is a (trials, M) array of source spike counts N_{n,y}[0, t)
    and ``arrivals`` a (trials, M) array of the counts A(y, x, t) routed
    into each replica's target neuron. Returns both bound terms with
    empirical expectations, and the empirical TV between the arrival counts
    and a Poisson law with the same mean (with a bootstrap SE).
    """
    N = np.asarray(spikes, np.int64)
    A = np.ravel(np.asarray(arrivals, np.int64))
    if N.ndim != 2 or N.shape[1] < 2:
        raise DomainError("spikes must be a (trials, M) array with M >= 2")
    M = N.shape[1]
    EN = float(N.mean())
    if EN == 0.0:
        term1 = term2 = 0.0
    else:
        others = N.sum(axis=1, keepdims=True) - N  # sum over n != m
        dev = np.abs((M - 1) * EN - others)
        term1 = min(1.0, 0.74 / math.sqrt(EN)) * float(dev.mean()) / (M - 1)
        term2 = min(1.0, 1.0 / EN) * EN / (M - 1)
    mean_a = float(A.mean())
    tv = _poisson_tv(A, mean_a)
    if mean_a == 0.0:
        se = 0.0
    else:
        rng = generator(seed, 0xC5)
        counts = np.bincount(A)
        p = counts / A.size
        ks = np.arange(counts.size)
        boot = []
        for _ in range(n_boot):
            c = rng.multinomial(A.size, p)
            sample = np.repeat(ks, c)
            boot.append(_poisson_tv(sample, float(sample.mean())))
        se = float(np.std(boot, ddof=1))
    return ChenStein(M, EN, term1, term2, tv, se)
