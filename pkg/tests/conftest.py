import pytest

from hamsym.hamiltonian import make_system
from hamsym.symexpr import ProbeConfig
from hamsym.systemio import BUNDLED_EXAMPLES, parse_system_text


@pytest.fixture(scope="session")
def probes():
    return ProbeConfig(count=64, tolerance=1e-9, seed=42)


def _build(name):
    sf = parse_system_text(BUNDLED_EXAMPLES[name], name_hint=name)
    system = make_system(sf.space, sf.symplectic, sf.hamiltonian)
    return sf, system


@pytest.fixture(scope="session")
def pendulum():
    return _build("pendulum.sys")


@pytest.fixture(scope="session")
def iso():
    return _build("iso_oscillator.sys")


@pytest.fixture(scope="session")
def aniso():
    return _build("aniso_oscillator.sys")


def candidate_named(sf, name):
    for cand in sf.symmetries:
        if cand.name == name:
            return cand
    raise KeyError(name)
