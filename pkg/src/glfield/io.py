"""CSV writers for simulation output and the experiment manifest."""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from glfield import __version__

FLOAT = "{:.17g}"


def _f(v) -> str:
    return FLOAT.format(float(v))


def write_event_log(path, log) -> None:
    """Header ``t,m,x,kind``; kind 0 is a spike, 1 a threshold reset."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "m", "x", "kind"])
        for t, m, x, k in zip(log.t, log.m, log.x, log.kind):
            w.writerow([_f(t), int(m), int(x), int(k)])


def write_routing(path, log) -> None:
    """One row per routed input: ``t,source_m,source_x,target_m,target_x``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "source_m", "source_x", "target_m", "target_x"])
        for e in range(len(log)):
            row = log.targets[e]
            for x in np.flatnonzero(row >= 0):
                w.writerow([_f(log.t[e]), int(log.m[e]), int(log.x[e]), int(row[x]), int(x)])


def write_trajectory(path, sample_times, lam) -> None:
    """Intensities ``t,m,x,lambda`` at the sample times; ``lam`` is (S, M, K)."""
    S, M, K = lam.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "m", "x", "lambda"])
        for s in range(S):
            for m in range(M):
                for x in range(K):
                    w.writerow([_f(sample_times[s]), m, x, _f(lam[s, m, x])])


def write_sites(path, sites) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "position"])
        for i, s in enumerate(sites):
            w.writerow([i, _f(s)])


def write_rows(path, rows: list[dict]) -> None:
    if not rows:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: _f(v) if isinstance(v, float) else v for k, v in r.items()})


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


@dataclass
class ExperimentManifest:
    command: str
    config: str | None
    seed: int | None
    version: str = __version__
    started: str = field(default_factory=_now)
    finished: str | None = None
    files: list = field(default_factory=list)

    def write(self, out_dir) -> Path:
        """Hash every file under ``out_dir`` and write the manifest last."""
        out = Path(out_dir)
        target = out / "manifest.json"
        self.files = [
            {"path": p.relative_to(out).as_posix(), "sha256": sha256(p), "bytes": p.stat().st_size}
            for p in sorted(out.rglob("*")) if p.is_file() and p != target
        ]
        self.finished = _now()
        doc = {"command": self.command, "config": self.config, "seed": self.seed,
               "version": self.version, "started": self.started, "finished": self.finished,
               "files": self.files}
        target.write_text(json.dumps(doc, indent=2))
        return target


def output_dirs(out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    dirs = {name: out / name for name in ("logs", "fields", "reports", "plots")}
    for d in dirs.values():
        d.mkdir(parents=True, exist_ok=True)
    return dirs
