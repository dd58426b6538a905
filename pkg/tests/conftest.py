import os
import sys

import pytest
from hypothesis import HealthCheck, settings

from threewave.coupling import Subsystem
from threewave.rotor import MoleculeSpec

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# Illustrative carvone-like constants (MHz, Debye); supplied as model input.
CARVONE = MoleculeSpec(2237.2, 656.3, 579.6, 2.0, 3.0, 0.5, name="carvone")
CARVONE_LEVELS = ("2_02", "3_13", "3_12")
J01_LEVELS = ("0_00", "1_11", "1_10")


@pytest.fixture(scope="session")
def carvone():
    return CARVONE


@pytest.fixture(scope="session")
def carvone_system():
    return Subsystem.from_labels(CARVONE, CARVONE_LEVELS)


@pytest.fixture(scope="session")
def j01_system():
    return Subsystem.from_labels(CARVONE, J01_LEVELS)


def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in list(sys.modules.items()) if name.endswith("test_acceptance")), None)
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
