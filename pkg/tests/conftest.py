import numpy as np
import pytest

from bohmbloch import scenarios as sc
from bohmbloch.crystal import electron_kinematics, get_preset


@pytest.fixture(scope="session")
def cu():
    return get_preset("Cu-fcc")


@pytest.fixture(scope="session")
def kin200():
    return electron_kinematics(200.0)


@pytest.fixture(scope="session")
def zone200(cu):
    return sc.zone_axis_setup(cu, energy_kev=200.0)


@pytest.fixture(scope="session")
def zone30(cu):
    return sc.zone_axis_setup(cu, energy_kev=30.0)


@pytest.fixture(scope="session")
def bragg200(cu):
    return sc.two_beam_setup(cu, (2, 0, 0), 200.0, at_bragg=True)


@pytest.fixture(scope="session")
def normal200(cu):
    return sc.two_beam_setup(cu, (2, 0, 0), 200.0, at_bragg=False)


@pytest.fixture(scope="session")
def row200(cu):
    return sc.systematic_row_setup(cu, (1, 0, 0), 3, 200.0)


@pytest.fixture(scope="session")
def vacuum():
    return sc.zone_axis_setup(sc.vacuum_cell(), energy_kev=200.0)


@pytest.fixture(scope="session")
def all_solutions(zone200, zone30, bragg200, normal200, row200):
    return {"zone_axis_200": zone200[1], "zone_axis_30": zone30[1], "two_beam": bragg200[1],
            "two_beam_normal": normal200[1], "systematic_row": row200[1]}


def random_points(rng, cell, n, z_max=500.0):
    a = cell.lattice_constant
    return np.column_stack([rng.uniform(0, a, n), rng.uniform(0, a, n), rng.uniform(0, z_max, n)])


def fd5(f, r, axis, h):
    """Fourth-order central difference of f along one axis."""
    e = np.zeros(3)
    e[axis] = h
    return (-f(r + 2 * e) + 8 * f(r + e) - 8 * f(r - e) + f(r - 2 * e)) / (12 * h)


ACCEPTANCE_LINES: list[str] = []


def report(number: int, ok: bool, detail: str) -> str:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
