import numpy as np
import pytest

from tactire.data.cycles import (
    ExperimentLog,
    Flag,
    FlagKind,
    RangingCycle,
    SensorGeometry,
)


def make_random_log(rng, max_cycles=12, length=64) -> ExperimentLog:
    n = int(rng.integers(0, max_cycles + 1))
    cycles = [
        RangingCycle(
            t_ex=50.0 * i,
            samples=rng.integers(0, 4096, size=length, dtype=np.uint16),
            wheel_angle=float(rng.uniform(0, 10)),
            trigger_delay=float(rng.uniform(0.3, 7.5)),
        )
        for i in range(n)
    ]
    flag_times = np.sort(rng.uniform(0, 50.0 * max(n, 1), size=rng.integers(0, 4)))
    flags = [
        Flag(t, FlagKind(int(rng.integers(0, len(FlagKind))))) for t in flag_times
    ]
    return ExperimentLog(cycles, flags, SensorGeometry())


@pytest.fixture
def random_log():
    """Factory of small random raw logs."""
    return make_random_log
