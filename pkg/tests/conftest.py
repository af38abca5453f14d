import json
from pathlib import Path

import pytest
from hypothesis import settings

from drangesim.device import DeviceConfig, generate_device

ORACLES = Path(__file__).parent / "oracles"

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def load_oracle(name):
    with open(ORACLES / name) as fh:
        return json.load(fh)


SMALL = DeviceConfig(seed=7, banks_per_channel=2, subarrays_per_bank=2, columns_per_row=4)


@pytest.fixture(scope="session")
def small_device():
    return generate_device(SMALL)


@pytest.fixture(scope="session")
def default_device():
    return generate_device(DeviceConfig(seed=0))


def pytest_terminal_summary(terminalreporter):
    rows = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py::test_criterion_" in rep.nodeid and rep.when == "call":
                name = rep.nodeid.split("::")[-1][len("test_criterion_"):]
                num, _, label = name.partition("_")
                rows.append((int(num), label.replace("_", " "), "PASS" if outcome == "passed" else "FAIL"))
    if rows:
        terminalreporter.section("acceptance criteria")
        for num, label, verdict in sorted(rows):
            terminalreporter.write_line(f"criterion {num:2d} {label:<32} {verdict}")
