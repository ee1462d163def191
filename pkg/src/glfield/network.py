"""Spatial domain, nested site grids, kernels, resets and run configuration.

Experiment configs are UTF-8 JSON documents::

    {
      "domain":   {"lo": 0.0, "hi": 1.0, "anchor": 0.3},
      "dynamics": {"kind": "leaky", "b": 1.0, "tau": 1.0},
      "kernel":   {"kind": "gaussian", "params": {"amplitude": 2.0, "width": 0.2}},
      "reset":    {"kind": "constant", "params": {"value": 0.0}},
      "initial":  {"kind": "uniform", "params": {"low": 0.0, "high": 2.0}},
      "run":      {"T": 2.0, "K": 5, "M": 16, "trials": 100, "seed": 0, "dt_out": 0.1}
    }

Only ``domain`` and ``dynamics`` are required; everything else has a default
(see ``DEFAULTS``). Unknown keys are rejected at every level.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from glfield.dynamics import AutonomousDynamics
from glfield.errors import (
    DomainError,
    GLFieldError,
    ParseError,
    SchemaError,
    ValidationError,
)

DEFAULTS: dict[str, Any] = {
    "kernel": {"kind": "constant", "params": {"c": 0.0}},
    "reset": {"kind": "constant", "params": {"value": 0.0}},
    "initial": {"kind": "constant", "params": {"value": 0.0}},
    "run": {"T": 2.0, "K": 5, "M": 16, "trials": 100, "seed": 0, "dt_out": 0.1},
}


@dataclass(frozen=True)
class SpatialDomain:
    lo: float
    hi: float
    anchor: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.hi > self.lo):
            raise DomainError(f"need finite lo < hi, got [{self.lo}, {self.hi}]")
        if self.anchor is not None and not self.lo <= self.anchor <= self.hi:
            raise DomainError(f"anchor {self.anchor} outside [{self.lo}, {self.hi}]")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def center(self) -> float:
        return self.anchor if self.anchor is not None else 0.5 * (self.lo + self.hi)


# ---------------------------------------------------------------------------
# nested grids


def radical_inverse_base2(i: int) -> float:
    """Van der Corput point of index ``i`` (i >= 1 gives 1/2, 1/4, 3/4, ...)."""
    v, f = 0.0, 0.5
    while i:
        if i & 1:
            v += f
        i >>= 1
        f *= 0.5
    return v


@dataclass(frozen=True)
class NestedGrids:
    """Sequence of site sets D_1 c D_2 c ... with |D_l| = l, D_1 = {anchor}.

    ``points`` lists sites in insertion order, so ``D_l == points[:l]``.
    """

    domain: SpatialDomain
    anchor: float
    points: np.ndarray

    def grid(self, l: int) -> np.ndarray:
        if not 1 <= l <= len(self.points):
            raise DomainError(f"grid size {l} not in [1, {len(self.points)}]")
        return self.points[:l]

    def fill_distance(self, l: int) -> float:
        """Largest distance from a point of the domain to the nearest site of D_l."""
        pts = np.sort(self.grid(l))
        gaps = np.diff(pts)
        inner = gaps.max() / 2 if gaps.size else 0.0
        return float(max(pts[0] - self.domain.lo, self.domain.hi - pts[-1], inner))


def build_nested_grids(domain: SpatialDomain, anchor: float, l_max: int) -> NestedGrids:
    if not domain.lo <= anchor <= domain.hi:
        raise DomainError(f"anchor {anchor} outside [{domain.lo}, {domain.hi}]")
    if l_max < 1:
        raise DomainError(f"l_max must be >= 1, got {l_max}")
    tol = 1e-12 * domain.length
    pts = [float(anchor)]
    i = 1
    while len(pts) < l_max:
        p = domain.lo + domain.length * radical_inverse_base2(i)
        i += 1
        if min(abs(p - q) for q in pts) > tol:
            pts.append(p)
    return NestedGrids(domain, float(anchor), np.array(pts))


# ---------------------------------------------------------------------------
# kernel, reset, initial law

_KERNEL_PARAMS = {
    "constant": ("c",),
    "gaussian": ("amplitude", "width"),
    "cosine": ("amplitude", "frequency"),
    "tabulated": ("nodes", "values"),
}


@dataclass(frozen=True)
class WeightKernel:
    """Nonnegative continuous interaction weight w(x, y).

    ``gaussian``: amplitude * exp(-(x - y)**2 / (2 width**2))
    ``cosine``:   amplitude * (1 + cos(2 pi frequency (x - y))) / 2
    ``tabulated``: bilinear interpolation of ``values[i][j] = w(nodes[i], nodes[j])``
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KERNEL_PARAMS:
            raise DomainError(f"unknown kernel kind {self.kind!r}")
        p = self.params
        if self.kind == "constant" and p["c"] < 0:
            raise DomainError("constant kernel must be >= 0")
        if self.kind in ("gaussian", "cosine") and p["amplitude"] < 0:
            raise DomainError("kernel amplitude must be >= 0")
        if self.kind == "gaussian" and p["width"] <= 0:
            raise DomainError("gaussian width must be > 0")
        if self.kind == "tabulated":
            nodes = np.asarray(p["nodes"], float)
            vals = np.asarray(p["values"], float)
            if nodes.ndim != 1 or nodes.size < 2 or np.any(np.diff(nodes) <= 0):
                raise DomainError("tabulated kernel nodes must be strictly increasing")
            if vals.shape != (nodes.size, nodes.size):
                raise DomainError("tabulated kernel values must be len(nodes) x len(nodes)")
            if np.any(vals < 0) or not np.all(np.isfinite(vals)):
                raise DomainError("tabulated kernel values must be finite and >= 0")
            interp = RegularGridInterpolator((nodes, nodes), vals, bounds_error=False, fill_value=None)
            object.__setattr__(self, "_interp", interp)

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        p = self.params
        if self.kind == "constant":
            return np.full(x.shape, float(p["c"]))
        if self.kind == "gaussian":
            return p["amplitude"] * np.exp(-((x - y) ** 2) / (2 * p["width"] ** 2))
        if self.kind == "cosine":
            return p["amplitude"] * 0.5 * (1 + np.cos(2 * np.pi * p["frequency"] * (x - y)))
        out = self._interp(np.stack([x.ravel(), y.ravel()], axis=-1)).reshape(x.shape)
        return np.maximum(out, 0.0)

    def matrix(self, xs, ys=None) -> np.ndarray:
        xs = np.asarray(xs, float)
        ys = xs if ys is None else np.asarray(ys, float)
        return self(xs[:, None], ys[None, :])

    @property
    def sup(self) -> float:
        p = self.params
        if self.kind == "constant":
            return float(p["c"])
        if self.kind in ("gaussian", "cosine"):
            return float(p["amplitude"])
        return float(np.max(p["values"]))

    @property
    def is_zero(self) -> bool:
        return self.sup == 0.0


@dataclass(frozen=True)
class ResetField:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind == "constant":
            if not self.params["value"] >= 0:
                raise DomainError("reset value must be >= 0")
        elif self.kind == "tabulated":
            nodes = np.asarray(self.params["nodes"], float)
            vals = np.asarray(self.params["values"], float)
            if nodes.ndim != 1 or nodes.size < 2 or np.any(np.diff(nodes) <= 0):
                raise DomainError("tabulated reset nodes must be strictly increasing")
            if vals.shape != nodes.shape or np.any(vals < 0):
                raise DomainError("tabulated reset values must match nodes and be >= 0")
        else:
            raise DomainError(f"unknown reset kind {self.kind!r}")

    def __call__(self, x):
        x = np.asarray(x, float)
        if self.kind == "constant":
            return np.full(x.shape, float(self.params["value"]))
        return np.interp(x, self.params["nodes"], self.params["values"])

    @property
    def max(self) -> float:
        if self.kind == "constant":
            return float(self.params["value"])
        return float(np.max(self.params["values"]))


_INITIAL_CODES = {"constant": 0, "uniform": 1, "exponential": 2}


@dataclass(frozen=True)
class InitialLaw:
    """Law of lambda(x, 0), drawn i.i.d. for every neuron and replica."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        p = self.params
        if self.kind == "constant":
            ok = math.isfinite(p["value"]) and p["value"] >= 0
        elif self.kind == "uniform":
            ok = math.isfinite(p["high"]) and 0 <= p["low"] <= p["high"]
        elif self.kind == "exponential":
            ok = math.isfinite(p["mean"]) and p["mean"] > 0
        else:
            raise DomainError(f"unknown initial law {self.kind!r}")
        if not ok:
            raise DomainError(f"invalid parameters for initial law {self.kind}: {p}")

    @property
    def code(self) -> tuple[int, float, float]:
        p = self.params
        if self.kind == "constant":
            return 0, float(p["value"]), 0.0
        if self.kind == "uniform":
            return 1, float(p["low"]), float(p["high"])
        return 2, float(p["mean"]), 0.0

    @property
    def mean(self) -> float:
        p = self.params
        if self.kind == "constant":
            return float(p["value"])
        if self.kind == "uniform":
            return 0.5 * (p["low"] + p["high"])
        return float(p["mean"])

    @property
    def sup(self) -> float:
        p = self.params
        if self.kind == "constant":
            return float(p["value"])
        if self.kind == "uniform":
            return float(p["high"])
        return math.inf

    def ppf(self, u):
        """Quantile function, used to discretise the law on a grid."""
        u = np.asarray(u, float)
        p = self.params
        if self.kind == "constant":
            return np.full(u.shape, float(p["value"]))
        if self.kind == "uniform":
            return p["low"] + (p["high"] - p["low"]) * u
        return -p["mean"] * np.log1p(-u)


@dataclass(frozen=True)
class NetworkSpec:
    domain: SpatialDomain
    dynamics: AutonomousDynamics
    kernel: WeightKernel
    reset: ResetField
    initial: InitialLaw

    def grids(self, l_max: int) -> NestedGrids:
        return build_nested_grids(self.domain, self.domain.center, l_max)

    def sites(self, K: int) -> np.ndarray:
        """The K sites D_K of a finite network; site 0 is the anchor."""
        return self.grids(K).grid(K)


@dataclass(frozen=True)
class RunConfig:
    T: float = 2.0
    K: int = 5
    M: int = 16
    trials: int = 100
    seed: int = 0
    dt_out: float = 0.1

    def __post_init__(self):
        for name in ("T", "dt_out"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"run.{name}", f"must be finite and > 0, got {v}")
        if self.K < 2:
            raise ValidationError("run.K", f"must be >= 2, got {self.K}")
        if self.M < 2:
            raise ValidationError("run.M", f"must be >= 2, got {self.M}")
        if self.trials < 1:
            raise ValidationError("run.trials", f"must be >= 1, got {self.trials}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("run.seed", f"must be in [0, 2**64), got {self.seed}")

    def knots(self) -> np.ndarray:
        """Output times 0, dt_out, 2 dt_out, ..., ending exactly at T."""
        n = max(1, int(math.ceil(self.T / self.dt_out - 1e-9)))
        t = np.arange(n + 1) * self.dt_out
        t[-1] = self.T
        return t

    def replace(self, **kw) -> "RunConfig":
        d = self.__dict__ | kw
        return RunConfig(**d)


# ---------------------------------------------------------------------------
# config ingestion

_TOP_KEYS = ("domain", "dynamics", "kernel", "reset", "initial", "run")
_SECTION_KEYS = {
    "domain": ({"lo", "hi"}, {"anchor"}),
    "dynamics": ({"kind", "b"}, {"tau"}),
    "kernel": ({"kind"}, {"params"}),
    "reset": ({"kind"}, {"params"}),
    "initial": ({"kind"}, {"params"}),
    "run": (set(), {"T", "K", "M", "trials", "seed", "dt_out"}),
}
_LAW_PARAMS = {
    "reset": {"constant": ("value",), "tabulated": ("nodes", "values")},
    "initial": {"constant": ("value",), "uniform": ("low", "high"), "exponential": ("mean",)},
    "kernel": _KERNEL_PARAMS,
}
_INT_FIELDS = ("K", "M", "trials", "seed")


def _number(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(name, f"must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ValidationError(name, "must be finite")
    return float(value)


def _integer(value, name):
    v = _number(value, name)
    if v != int(v):
        raise ValidationError(name, f"must be an integer, got {value!r}")
    return int(v)


def _check_keys(section: str, obj, required: set, optional: set):
    if not isinstance(obj, dict):
        raise SchemaError(f"{section} must be an object")
    missing = required - obj.keys()
    if missing:
        raise SchemaError(f"{section}: missing key(s) {sorted(missing)}")
    extra = obj.keys() - required - optional
    if extra:
        raise SchemaError(f"{section}: unknown key(s) {sorted(extra)}")


def _law_params(section: str, obj) -> tuple[str, dict]:
    kind = obj["kind"]
    table = _LAW_PARAMS[section]
    if kind not in table:
        raise ValidationError(f"{section}.kind", f"unknown kind {kind!r}")
    params = obj.get("params", {})
    names = table[kind]
    _check_keys(f"{section}.params", params, set(names), set())
    out = {}
    for name in names:
        v = params[name]
        if name in ("nodes", "values"):
            arr = np.asarray(v, dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{section}.params.{name}", "must be finite")
            out[name] = arr.tolist()
        else:
            out[name] = _number(v, f"{section}.params.{name}")
    return kind, out


def config_from_dict(doc: dict) -> tuple[NetworkSpec, RunConfig]:
    """Validate a parsed config document and apply defaults."""
    _check_keys("config", doc, {"domain", "dynamics"}, set(_TOP_KEYS))
    doc = copy.deepcopy(doc)
    for key, default in DEFAULTS.items():
        doc.setdefault(key, copy.deepcopy(default))
    for key in _TOP_KEYS:
        required, optional = _SECTION_KEYS[key]
        _check_keys(key, doc[key], required, optional)

    d = doc["domain"]
    lo, hi = _number(d["lo"], "domain.lo"), _number(d["hi"], "domain.hi")
    anchor = _number(d["anchor"], "domain.anchor") if "anchor" in d else None
    try:
        domain = SpatialDomain(lo, hi, anchor)
    except DomainError as exc:
        raise ValidationError("domain", str(exc)) from None

    dy = doc["dynamics"]
    if dy["kind"] not in ("leaky", "quadratic"):
        raise ValidationError("dynamics.kind", f"must be 'leaky' or 'quadratic', got {dy['kind']!r}")
    b = _number(dy["b"], "dynamics.b")
    tau = _number(dy.get("tau", 1.0), "dynamics.tau")
    if b <= 0:
        raise ValidationError("dynamics.b", f"must be > 0, got {b}")
    if tau <= 0:
        raise ValidationError("dynamics.tau", f"must be > 0, got {tau}")
    dynamics = AutonomousDynamics(dy["kind"], b, tau)

    built = {}
    for section, cls in (("kernel", WeightKernel), ("reset", ResetField), ("initial", InitialLaw)):
        kind, params = _law_params(section, doc[section])
        try:
            built[section] = cls(kind, params)
        except (DomainError, KeyError) as exc:
            raise ValidationError(f"{section}.params", str(exc)) from None

    r = DEFAULTS["run"] | doc["run"]
    kw = {}
    for name, v in r.items():
        kw[name] = _integer(v, f"run.{name}") if name in _INT_FIELDS else _number(v, f"run.{name}")
    run = RunConfig(**kw)

    spec = NetworkSpec(domain, dynamics, built["kernel"], built["reset"], built["initial"])
    sites = spec.sites(run.K)
    w = spec.kernel.matrix(sites)
    if np.any(w < 0):
        raise ValidationError("kernel", "weights must be nonnegative on the grid")
    return spec, run


def load_config(path) -> tuple[NetworkSpec, RunConfig]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return config_from_dict(doc)


def config_to_dict(spec: NetworkSpec, run: RunConfig) -> dict:
    domain = {"lo": spec.domain.lo, "hi": spec.domain.hi}
    if spec.domain.anchor is not None:
        domain["anchor"] = spec.domain.anchor
    return {
        "domain": domain,
        "dynamics": {"kind": spec.dynamics.kind, "b": spec.dynamics.b, "tau": spec.dynamics.tau},
        "kernel": {"kind": spec.kernel.kind, "params": dict(spec.kernel.params)},
        "reset": {"kind": spec.reset.kind, "params": dict(spec.reset.params)},
        "initial": {"kind": spec.initial.kind, "params": dict(spec.initial.params)},
        "run": {"T": run.T, "K": run.K, "M": run.M, "trials": run.trials,
                "seed": run.seed, "dt_out": run.dt_out},
    }


def serialize(spec: NetworkSpec, run: RunConfig) -> str:
    return json.dumps(config_to_dict(spec, run), indent=2)


__all__ = [
    "GLFieldError", "SpatialDomain", "NestedGrids", "build_nested_grids", "WeightKernel",
    "ResetField", "InitialLaw", "NetworkSpec", "RunConfig", "load_config", "config_from_dict",
    "config_to_dict", "serialize", "radical_inverse_base2",
]
