"""Autonomous intensity flow between events.

Two intrinsic evolutions are supported:

* leaky:      d lam/dt = (b - lam) / tau
* quadratic:  d lam/dt = (b + lam**2) / tau

For both, the flow, its time integral (the compensator used for exact
time-change sampling), the inverse of that integral, and hitting times of
a level are available in closed form (the leaky inverse is a safeguarded
Newton solve). The quadratic flow diverges in finite time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from glfield import _kernels as kern
from glfield.errors import BlowUpExceeded, DomainError, KindError

Kind = Literal["leaky", "quadratic"]


@dataclass(frozen=True)
class AutonomousDynamics:
    kind: Kind
    b: float
    tau: float

    def __post_init__(self):
        if self.kind not in ("leaky", "quadratic"):
            raise KindError(f"unknown dynamics kind {self.kind!r}")
        if not (math.isfinite(self.b) and self.b > 0):
            raise DomainError(f"b must be finite and > 0, got {self.b}")
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise DomainError(f"tau must be finite and > 0, got {self.tau}")

    @property
    def code(self) -> int:
        return kern.LEAKY if self.kind == "leaky" else kern.QUADRATIC

    def phi(self, lam: float) -> float:
        """Right-hand side Phi(lam) of the autonomous equation (before 1/tau)."""
        return self.b - lam if self.kind == "leaky" else self.b + lam * lam


def _check(dyn: AutonomousDynamics, lambda0: float, dt: float, allow_blowup: bool = False):
    if lambda0 < 0 or not math.isfinite(lambda0):
        raise DomainError(f"lambda0 must be finite and >= 0, got {lambda0}")
    if dt < 0 or math.isnan(dt):
        raise DomainError(f"dt must be >= 0, got {dt}")
    if dyn.kind == "quadratic":
        t_star = blow_up_time(dyn, lambda0)
        if dt > t_star or (dt == t_star and not allow_blowup):
            raise BlowUpExceeded(f"dt={dt} is past the blow-up time {t_star}")


def flow(dyn: AutonomousDynamics, lambda0: float, dt: float) -> float:
    """Intensity reached after ``dt`` of autonomous evolution from ``lambda0``."""
    _check(dyn, lambda0, dt)
    return kern.flow(dyn.code, dyn.b, dyn.tau, float(lambda0), float(dt))


def integrated_intensity(dyn: AutonomousDynamics, lambda0: float, dt: float) -> float:
    """Integral of the flow over ``[0, dt]``; ``inf`` exactly at blow-up."""
    _check(dyn, lambda0, dt, allow_blowup=True)
    return kern.integrated(dyn.code, dyn.b, dyn.tau, float(lambda0), float(dt))


def invert_integrated_intensity(dyn: AutonomousDynamics, lambda0: float, area: float) -> float:
    """Unique ``dt`` whose integrated intensity equals ``area``.

    Always finite: the quadratic compensator diverges at blow-up and the
    leaky one grows at least like ``min(lambda0, b) * dt``.
    """
    if area < 0 or math.isnan(area):
        raise DomainError(f"area must be >= 0, got {area}")
    if lambda0 < 0 or not math.isfinite(lambda0):
        raise DomainError(f"lambda0 must be finite and >= 0, got {lambda0}")
    return kern.invert(dyn.code, dyn.b, dyn.tau, float(lambda0), float(area))


def blow_up_time(dyn: AutonomousDynamics, lambda0: float) -> float:
    if dyn.kind != "quadratic":
        raise KindError("leaky dynamics never blow up")
    if lambda0 < 0:
        raise DomainError(f"lambda0 must be >= 0, got {lambda0}")
    return kern.blow_up(dyn.b, dyn.tau, float(lambda0))


def hitting_time(dyn: AutonomousDynamics, lambda0: float, level: float) -> float | None:
    """Time for the flow to reach ``level`` from below, or None if it never does."""
    if lambda0 < 0:
        raise DomainError(f"lambda0 must be >= 0, got {lambda0}")
    if level <= lambda0:
        raise DomainError(f"level {level} must exceed lambda0 {lambda0}")
    t = kern.hitting(dyn.code, dyn.b, dyn.tau, float(lambda0), float(level))
    return None if math.isinf(t) else t
