"""Jitted primitives shared by the engines.

Everything here is nopython numba code operating on plain scalars and
arrays. The public, validated wrappers live in :mod:`glfield.dynamics` and
:mod:`glfield.rng`.

Dynamics kind codes: ``LEAKY = 0``, ``QUADRATIC = 1``.

Quadratic dynamics are evaluated in the co-phase variable
``phi = atan2(sqrt(b), lam)``, which decreases linearly in time at rate
``sqrt(b)/tau`` and reaches 0 at blow-up. Working with ``phi`` instead of
``pi/2 - theta`` keeps full relative precision close to the blow-up time.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

LEAKY = 0
QUADRATIC = 1

HALF_PI = math.pi / 2.0
PHI_FLOOR = 1e-12  # smallest co-phase used when evaluating tan/cot

# stream purposes, stored in the low byte of counter word 3
P_INIT = 1
P_EXP = 2
P_ROUTE = 3
P_ARRIVAL = 4
P_ATTR = 5

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


@njit(cache=True, nogil=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32-10 block function on 32-bit words held in uint64."""
    c0 = np.uint64(c0) & _MASK
    c1 = np.uint64(c1) & _MASK
    c2 = np.uint64(c2) & _MASK
    c3 = np.uint64(c3) & _MASK
    k0 = np.uint64(k0) & _MASK
    k1 = np.uint64(k1) & _MASK
    for _ in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        n0 = ((p1 >> _S32) ^ c1 ^ k0) & _MASK
        n1 = p1 & _MASK
        n2 = ((p0 >> _S32) ^ c3 ^ k1) & _MASK
        n3 = p0 & _MASK
        c0, c1, c2, c3 = n0, n1, n2, n3
        k0 = (k0 + _W0) & _MASK
        k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


@njit(cache=True, nogil=True)
def _to_open_unit(a, b):
    # 53 random bits from two words, shifted by half an ulp into (0, 1)
    hi = np.float64(a >> np.uint64(5))
    lo = np.float64(b >> np.uint64(6))
    return (hi * 67108864.0 + lo + 0.5) * (1.0 / 9007199254740992.0)


@njit(cache=True, nogil=True)
def uniform2(key0, key1, trial, purpose, stream, index):
    """Two independent open-unit uniforms addressed by a counter tuple."""
    w0, w1, w2, w3 = philox4x32(index, stream, trial, purpose, key0, key1)
    return _to_open_unit(w0, w1), _to_open_unit(w2, w3)


@njit(cache=True, nogil=True)
def uniform(key0, key1, trial, purpose, stream, index):
    u, _ = uniform2(key0, key1, trial, purpose, stream, index)
    return u


@njit(cache=True, nogil=True)
def exp1(key0, key1, trial, purpose, stream, index):
    """Unit exponential variate, strictly positive."""
    return -math.log(uniform(key0, key1, trial, purpose, stream, index))


# ---------------------------------------------------------------------------
# autonomous flow


@njit(cache=True, nogil=True)
def flow(kind, b, tau, lam0, dt):
    if kind == LEAKY:
        return b + (lam0 - b) * math.exp(-dt / tau)
    sb = math.sqrt(b)
    phi = math.atan2(sb, lam0) - sb * dt / tau
    if phi < PHI_FLOOR:
        phi = PHI_FLOOR
    return sb / math.tan(phi)


@njit(cache=True, nogil=True)
def integrated(kind, b, tau, lam0, dt):
    if kind == LEAKY:
        return b * dt - tau * (lam0 - b) * math.expm1(-dt / tau)
    sb = math.sqrt(b)
    phi0 = math.atan2(sb, lam0)
    phi1 = phi0 - sb * dt / tau
    if phi1 <= 0.0:
        return math.inf
    return -tau * math.log(math.sin(phi1) / math.sin(phi0))


@njit(cache=True, nogil=True)
def blow_up(b, tau, lam0):
    sb = math.sqrt(b)
    return tau * math.atan2(sb, lam0) / sb


@njit(cache=True, nogil=True)
def hitting(kind, b, tau, lam0, level):
    """Time for the flow from lam0 < level to reach level; inf if never."""
    if kind == LEAKY:
        if b <= level:
            return math.inf
        return tau * math.log((b - lam0) / (b - level))
    sb = math.sqrt(b)
    return tau * (math.atan2(sb, lam0) - math.atan2(sb, level)) / sb


@njit(cache=True, nogil=True)
def invert(kind, b, tau, lam0, area):
    """Duration dt with integrated(kind, b, tau, lam0, dt) == area."""
    if area <= 0.0:
        return 0.0
    if kind == QUADRATIC:
        # phase decrement d = phi0 - phi1 with sin(phi1) = sin(phi0) q, written
        # without cancellation: every term below is a sum of nonnegatives
        sb = math.sqrt(b)
        h = math.hypot(sb, lam0)
        s0 = sb / h
        c0 = lam0 / h
        omq = -math.expm1(-area / tau)
        q = 1.0 - omq
        c1 = math.sqrt(c0 * c0 + s0 * s0 * omq * (1.0 + q))
        sin_d = s0 * omq * (s0 * s0 * (1.0 + q) / (c1 + c0) + c0)
        cos_d = c0 * c1 + s0 * s0 * q
        d = min(math.atan2(sin_d, cos_d), math.atan2(sb, lam0))
        return tau * d / sb
    c = lam0 - b
    if c == 0.0:
        return area / b
    # the compensator is at least b t - tau b, so area / b + tau brackets the root
    lo = area / max(lam0, b) if lam0 > 0.0 else 0.0
    hi = area / b + tau
    if lam0 > 0.0:
        hi = min(hi, area / min(lam0, b))
    t = min(max(area / b, lo), hi)
    for _ in range(200):
        f = b * t - tau * c * math.expm1(-t / tau) - area
        if f > 0.0:
            hi = t
        else:
            lo = t
        d = b + c * math.exp(-t / tau)
        if d > 0.0:
            tn = t - f / d
        else:
            tn = 0.5 * (lo + hi)
        if not (lo < tn < hi):
            tn = 0.5 * (lo + hi)
        # relative stop: tiny durations still need full precision when lam0 is large
        if abs(tn - t) <= 4e-16 * tn or hi - lo <= 4e-16 * hi:
            return tn
        t = tn
    return t


# ---------------------------------------------------------------------------
# indexed binary min-heap keyed by (time[i], i)


@njit(cache=True, nogil=True)
def _less(time, a, b):
    ta = time[a]
    tb = time[b]
    return ta < tb or (ta == tb and a < b)


@njit(cache=True, nogil=True)
def heap_sift_up(heap, pos, time, k):
    item = heap[k]
    while k > 0:
        parent = (k - 1) >> 1
        other = heap[parent]
        if _less(time, item, other):
            heap[k] = other
            pos[other] = k
            k = parent
        else:
            break
    heap[k] = item
    pos[item] = k


@njit(cache=True, nogil=True)
def heap_sift_down(heap, pos, time, k, n):
    item = heap[k]
    while True:
        child = 2 * k + 1
        if child >= n:
            break
        right = child + 1
        if right < n and _less(time, heap[right], heap[child]):
            child = right
        other = heap[child]
        if _less(time, other, item):
            heap[k] = other
            pos[other] = k
            k = child
        else:
            break
    heap[k] = item
    pos[item] = k


@njit(cache=True, nogil=True)
def heap_build(heap, pos, time):
    n = heap.shape[0]
    for i in range(n):
        heap[i] = i
        pos[i] = i
    for k in range(n // 2 - 1, -1, -1):
        heap_sift_down(heap, pos, time, k, n)


@njit(cache=True, nogil=True)
def heap_update(heap, pos, time, item):
    """Restore heap order after time[item] changed."""
    k = pos[item]
    heap_sift_up(heap, pos, time, k)
    heap_sift_down(heap, pos, time, pos[item], heap.shape[0])


@njit(cache=True, nogil=True)
def draw_initial(code, p0, p1, u):
    """Initial intensity from a unit uniform: 0 const, 1 uniform, 2 exponential."""
    if code == 0:
        return p0
    if code == 1:
        return p0 + (p1 - p0) * u
    return -p0 * math.log(u)
