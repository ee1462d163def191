from __future__ import annotations

import copy
from pathlib import Path

import pytest

from glfield.network import config_from_dict

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def make_config(kind="leaky", b=1.0, tau=1.0, w=0.0, r=0.0, init=None, run=None, domain=None, kernel=None):
    """Config document with a constant kernel unless ``kernel`` is given."""
    doc = {
        "domain": domain or {"lo": 0.0, "hi": 1.0},
        "dynamics": {"kind": kind, "b": b, "tau": tau},
        "kernel": kernel or {"kind": "constant", "params": {"c": w}},
        "reset": {"kind": "constant", "params": {"value": r}},
        "initial": init or {"kind": "constant", "params": {"value": 0.0}},
        "run": {"T": 2.0, "K": 5, "M": 4, "trials": 10, "seed": 0, "dt_out": 0.1},
    }
    if run:
        doc["run"].update(run)
    return copy.deepcopy(doc)


def make_spec(**kw):
    return config_from_dict(make_config(**kw))


@pytest.fixture
def record_acceptance():
    def record(criterion: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[criterion] = (bool(ok), detail)
        print(f"[acceptance] {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[0])):
        ok, detail = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {name}: {detail}")
