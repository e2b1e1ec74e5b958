import numpy as np
import pytest

from gspmec.workload import VmState


def make_vm(server=1, index=0, valuation=0.04, bid=None, quality=2.0, app=0, vcpus=2, freq=3.2, rate=32.0):
    return VmState(
        server_id=server,
        vm_index=index,
        app_id=app,
        valuation=valuation,
        vcpus=vcpus,
        cpu_freq_ghz=freq,
        compute_rate=rate,
        quality=quality,
        current_bid=valuation if bid is None else bid,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
