"""Shared fixtures: cached lattice runs and the acceptance summary."""
from __future__ import annotations

import functools

import pytest

from fpuriemann.io import load_recipe
from fpuriemann.lattice import SimConfig, run

ACCEPTANCE: dict = {}


def record_criterion(n: int, ok: bool, detail: str = "") -> None:
    """Store one acceptance line; a later failing part overrides a pass."""
    prev = ACCEPTANCE.get(n)
    if prev is not None and not prev[0]:
        return
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")


@functools.lru_cache(maxsize=None)
def _run_recipe(figure: str, name: str, N: int):
    cfg = load_recipe(figure).run(name)
    if N != cfg.N:
        d = cfg.to_dict()
        d.pop("dt")
        cfg = SimConfig.from_dict(d | {"N": N})
    return run(cfg)


@pytest.fixture(scope="session")
def recipe_run():
    """recipe_run(figure, name=None, N=None) -> RunResult, computed once per session."""

    def get(figure: str, name=None, N=None):
        cfg = load_recipe(figure).run(name)
        return _run_recipe(figure, cfg.name, int(N or cfg.N))

    return get


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
