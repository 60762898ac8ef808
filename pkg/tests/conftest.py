import sys

import numpy as np
import pytest

from crispy.core import GiB, ClusterConfig, Family, MachineType
from crispy.synthetic import example_catalog


@pytest.fixture
def catalog():
    return example_catalog()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def python():
    return sys.executable


def machine(name="m4.xlarge", memory_gib=16, price=0.2, cores=4, family=Family.M):
    return MachineType(name, family, cores, int(memory_gib * GiB), price)


def config(name="m4.xlarge", nodes=4, memory_gib=16, price=0.2):
    return ClusterConfig(machine(name, memory_gib, price), nodes)


_ACCEPTANCE = []


@pytest.fixture
def criterion(request):
    """Record one acceptance verdict: ``criterion(n, ok, detail)``.

    Verdicts are printed in the terminal summary, one line per criterion.
    """

    def record(n, ok, detail):
        _ACCEPTANCE.append((n, "PASS" if ok else "FAIL", detail))
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, detail

    def skip(n, why):
        _ACCEPTANCE.append((n, "SKIP", why))
        pytest.skip(why)

    record.skip = skip
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, verdict, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"criterion {n}: {verdict:4s} {detail}")
