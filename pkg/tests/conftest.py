from __future__ import annotations

import pytest

from plasmon_cqed.cavity import EmitterSpec, ModeProfile, NanocavityParams
from plasmon_cqed.config import DriveBlock, InitialBlock, ModelBlock, RunConfig
from plasmon_cqed.lindblad import EvolutionConfig

ACCEPTANCE_LINES: list[str] = []


def make_config(emitters=(), initial="photon", t_max=100.0, cav=None, drive=None, evolution=None, sweep=None,
                profile=None, **model) -> RunConfig:
    cav = cav or NanocavityParams()
    return RunConfig(
        cavity=cav,
        emitters=tuple(emitters),
        profile=profile or ModeProfile(),
        model=ModelBlock(**model),
        drive=drive,
        initial=InitialBlock(initial),
        evolution=evolution or EvolutionConfig(t_max=t_max),
        sweep=sweep,
    )


@pytest.fixture
def cav():
    return NanocavityParams()


@pytest.fixture
def resonant_emitter(cav):
    return EmitterSpec(omega_qe=cav.omega_cav)


@pytest.fixture
def driven_single(cav, resonant_emitter):
    return make_config((resonant_emitter,), initial="ground", drive=DriveBlock(omega_p=cav.omega_cav))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
