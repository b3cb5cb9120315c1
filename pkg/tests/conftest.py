from pathlib import Path

import pytest

from eprlab import kernel
from eprlab.model import InstructionSet, Setting, StationId
from eprlab.strategies import TimeDependentStrategy, TimeDependentConfig

CONFIGS = Path(__file__).resolve().parents[1] / "src" / "eprlab" / "configs"

BACKENDS = sorted(kernel.BACKENDS)


def flip_strategy(period: int = 2, mirrored: bool = True) -> TimeDependentStrategy:
    """Period-2 sign flip at setting 1; settings 2 and 3 fixed GGR-like."""
    tables = {}
    for who in StationId:
        tables[(who, Setting.S1)] = tuple([0, 1] * (period // 2)) if period % 2 == 0 else (0,) * period
        tables[(who, Setting.S2)] = (0,) * period
        tables[(who, Setting.S3)] = (1,) * period
    if not mirrored:
        tables[(StationId.STATION2, Setting.S1)] = tuple([1, 0] * (period // 2))
    return TimeDependentStrategy("flip", TimeDependentConfig(period, tables, ((1,), (-1,))))


@pytest.fixture
def ggr():
    return InstructionSet.parse("GGR")


@pytest.fixture
def configs_dir():
    return CONFIGS


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
