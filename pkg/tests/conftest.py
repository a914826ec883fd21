"""Shared fixtures: study devices and amplitude-solved pulses.

Solving the pulse amplitude takes a second or two per device, so the
pulses are session-scoped and shared across test modules.
"""

import pytest

from czsim import pulses
from czsim.device import DeviceParams


@pytest.fixture(scope="session")
def default_dev():
    return DeviceParams.from_ghz()


@pytest.fixture(scope="session")
def bench_dev():
    """Strong static-ZZ device used for the repetition studies."""
    return DeviceParams.from_ghz(omega1_idle=6.10)


@pytest.fixture(scope="session")
def shape_dev():
    """Intermediate-detuning device used for the fault-angle shape fits."""
    return DeviceParams.from_ghz(omega1_idle=6.5)


def solved_pulse(dev, t_gate, family="slepian"):
    solved = pulses._solve_theta(family, dev, t_gate, pulses.FINAL_STEPS)
    assert solved is not None, f"no amplitude at {t_gate} for {family}"
    theta, _ = solved
    return pulses.build_pulse(family, dev, t_gate, theta)


@pytest.fixture(scope="session")
def slepian_pulse(default_dev):
    return solved_pulse(default_dev, 176.9e-9)


@pytest.fixture(scope="session")
def bench_pulse(bench_dev):
    return solved_pulse(bench_dev, 180e-9)


@pytest.fixture(scope="session")
def shape_pulse(shape_dev):
    return solved_pulse(shape_dev, 180e-9)
