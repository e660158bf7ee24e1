import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from imgattest.plonkish import CircuitBuilder  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


class Toy:
    """a + b = 5 (row 0), a + c = 7 (row 1), a in {0..3}; a copied between rows."""

    def __init__(self, a=2, b=3, c=5, a1=None):
        bld = CircuitBuilder()
        self.x = bld.advice_column()
        self.y = bld.advice_column()
        self.pub = bld.instance_column()
        (self.tab,) = bld.add_table(np.arange(4))
        self.gate = bld.add_gate("sum", [self.x.cur + self.y.cur - self.pub.cur])
        bld.enable_gate(self.gate, [0, 1])
        lsel = bld.selector_column()
        self.lookup = bld.add_lookup([self.x.cur], [self.tab], lsel)
        bld.enable_selector(lsel, [0])
        bld.add_copy(self.x.cell(0), self.x.cell(1))
        bld.assign_advice(self.x, 0, [a, a if a1 is None else a1])
        bld.assign_advice(self.y, 0, [b, c])
        bld.expose(self.pub.cell(0), 5)
        bld.expose(self.pub.cell(1), 7)
        self.builder = bld
        self.layout = bld.finalize()
        self.witness = bld.witness(self.layout)
        self.instance = bld.instance()


@pytest.fixture
def toy():
    return Toy


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# -- acceptance report: one line per criterion at the end of the run ----------------

_criteria: dict[int, tuple[str, str, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    n, title = mark.args
    if rep.failed or rep.when == "call":
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        printed = [ln for ln in rep.capstdout.splitlines() if ln.startswith(f"criterion {n}:")]
        detail = printed[-1].split(None, 3)[3] if printed and len(printed[-1].split(None, 3)) > 3 else title
        _criteria[n] = (detail, status, rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        detail, status, dur = _criteria[n]
        terminalreporter.write_line(f"criterion {n}: {status}  {detail}  [{dur:.1f}s]")
