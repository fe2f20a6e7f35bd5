"""Return-peak isolation on normalized, smoothed traces."""
from dataclasses import asdict, dataclass
from typing import Any, Dict

import numpy as np
from scipy import signal

from tactire.data.cycles import ranging_time_of_sample, SAMPLE_RATE


@dataclass(frozen=True)
class PeakParams:
    ema_alpha: float = 0.75
    min_height: float = 0.3
    min_distance: int = 20
    min_prominence: float = 0.6
    min_threshold: float = 0.0001

    def __post_init__(self):
        for name in ("ema_alpha", "min_height", "min_prominence", "min_threshold"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ValueError(f"{name} must be within (0, 1], got {value}")
        if self.min_distance < 1:
            raise ValueError(f"min_distance must be >= 1, got {self.min_distance}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class PeakSet:
    indices: np.ndarray
    amplitudes: np.ndarray
    prominences: np.ndarray
    source_cycle: int = -1
    sample_rate: float = SAMPLE_RATE

    @property
    def t_r(self) -> np.ndarray:
        return ranging_time_of_sample(self.indices, self.sample_rate)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(zip(self.t_r, self.amplitudes))


def find_peaks(
    trace: np.ndarray,
    params: PeakParams = PeakParams(),
    source_cycle: int = -1,
    sample_rate: float = SAMPLE_RATE,
) -> PeakSet:
    """Local maxima filtered by height, threshold, distance, then prominence.

    Plateaus report their midpoint. The distance filter keeps the highest
    peaks first and drops neighbours strictly closer than `min_distance`.
    """
    trace = np.asarray(trace, dtype=np.float64)
    indices, props = signal.find_peaks(
        trace,
        height=params.min_height,
        threshold=params.min_threshold,
        distance=params.min_distance,
        prominence=params.min_prominence,
    )
    return PeakSet(
        indices=indices.astype(np.int64),
        amplitudes=trace[indices],
        prominences=np.asarray(props["prominences"], dtype=np.float64),
        source_cycle=source_cycle,
        sample_rate=sample_rate,
    )
