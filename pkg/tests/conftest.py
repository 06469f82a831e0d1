"""Shared fixtures.

The dipole fixtures are session-scoped because one MoM solve of the
validation mesh takes several seconds.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gsmant import shapes
from gsmant.constants import wavenumber
from gsmant.gsm import Gsm, gsm_from_system
from gsmant.mom import ELECTRIC, MAGNETIC, ImpedanceSystem, OperatorBlocks
from gsmant.pipeline import ElementModel, coax_spec

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def record():
    """Store one acceptance line; the summary prints them after the run."""
    def _record(n: int, ok: bool, detail: str) -> None:
        ACCEPTANCE[n] = (bool(ok), detail)
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    return _record


# validation dipole: 12 azimuthal facets, graded feed, 16 port modes at 2 GHz
DIPOLE = shapes.CoaxDipole(n_phi=12, feed_segment=0.15e-3)
# coarse dipole for unit tests and array runs
SMALL_DIPOLE = shapes.CoaxDipole(feed_segment=0.15e-3)
FREQ = 2e9


def dipole_model(d: shapes.CoaxDipole, modes: int | None = None) -> ElementModel:
    return ElementModel(d.mesh(), {1: (coax_spec(d.r_inner, d.r_outer), modes)}, np.zeros(3))


@dataclass
class DipoleCase:
    model: ElementModel
    blocks: OperatorBlocks
    system_M: ImpedanceSystem
    system_E: ImpedanceSystem
    gsm_M: Gsm
    gsm_E: Gsm


def _case(d: shapes.CoaxDipole, modes: int | None) -> DipoleCase:
    model = dipole_model(d, modes)
    blocks = model.operators(wavenumber(FREQ))
    sM = model.system(FREQ, MAGNETIC, blocks=blocks)
    sE = model.system(FREQ, ELECTRIC, blocks=blocks)
    return DipoleCase(model, blocks, sM, sE, gsm_from_system(sM, FREQ, model.radius),
                      gsm_from_system(sE, FREQ, model.radius))


@pytest.fixture(scope="session")
def dipole() -> DipoleCase:
    return _case(DIPOLE, 16)


@pytest.fixture(scope="session")
def small_dipole() -> DipoleCase:
    return _case(SMALL_DIPOLE, None)
