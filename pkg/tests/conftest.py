import pytest

from monoped_codesign import codesign as cd
from monoped_codesign import gearbox as gb
from monoped_codesign.gearbox import GearboxDesign
from monoped_codesign.motors import load_catalog


@pytest.fixture(scope="session")
def catalog():
    return load_catalog()


@pytest.fixture(scope="session")
def motor(catalog):
    by_name = {m.name: m for m in catalog}

    def get(short):
        matches = [m for name, m in by_name.items() if short in name]
        assert len(matches) == 1, short
        return matches[0]
    return get


@pytest.fixture(scope="session")
def maps(catalog):
    return {m.id: gb.build_actuator_map(m) for m in catalog}


@pytest.fixture(scope="session")
def table(catalog, maps):
    return cd.ActuatorTable(catalog, maps)


@pytest.fixture(scope="session")
def nominal_design(table):
    return cd.build_design(cd.NOMINAL, table)


# published reference gearboxes: (design, motor short name, ratio, eta, actuator mass)
REFERENCE_SETS = {
    "sspg_6.0": (GearboxDesign.sspg(22, 44, 110, 3, 0.6), "U10", 6.0, 0.952, 0.853),
    "sspg_4.4": (GearboxDesign.sspg(30, 36, 102, 3, 0.5), "M6C12", 4.4, 0.956, 0.5),
    "sspg_7.2": (GearboxDesign.sspg(25, 65, 155, 3, 0.5), "MN8014", 7.2, 0.96, 0.847),
    "cpg_4.0": (GearboxDesign.cpg(30, 40, 56, 126, 3, 0.5), "M6C12", 4.0, 0.963, 0.51),
    "wpg_21.4": (GearboxDesign.wpg(28, 46, 120, 30, 104, 4, 0.6), "U8", 21.4, 0.871, 0.762),
}


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py::test_criterion_" not in getattr(rep, "nodeid", "") or rep.when != "call":
                continue
            props = dict(rep.user_properties)
            lines.append((props.get("n", 0), f"criterion {props.get('n', '?'):>2}: "
                          f"{'PASS' if rep.passed else 'FAIL'}  {props.get('title', '')}  {props.get('detail', '')}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line.rstrip())
