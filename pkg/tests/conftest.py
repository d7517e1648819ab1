import numpy as np
import pytest

from hwlsfp.hardware import HardwareProfile, build_bussgang_matrices
from hwlsfp.harness import preset_profile
from hwlsfp.scenario import SystemConfig, build_channel_statistics, generate_network

ACCEPTANCE = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if passed else 'FAIL'} ({detail})")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def desk_system():
    return SystemConfig(n_cells=2, n_ues=2, n_antennas=16, seed=1)


@pytest.fixture(scope="session")
def desk_stats(desk_system):
    return build_channel_statistics(generate_network(desk_system), desk_system)


@pytest.fixture(scope="session")
def ideal_bg(desk_system):
    return build_bussgang_matrices(HardwareProfile.ideal(desk_system.n_antennas), 2, 2)


@pytest.fixture(scope="session")
def severe_bg(desk_system):
    return build_bussgang_matrices(preset_profile("severe", desk_system.n_antennas), 2, 2)


@pytest.fixture(scope="session")
def moderate_bg(desk_system):
    return build_bussgang_matrices(preset_profile("moderate", desk_system.n_antennas), 2, 2)
