"""
Obstacle-height heuristic.

A collision moves the contact reflection along the tube. Pooling return-peak
ranging times over +/- epsilon around the collision, the spread between the
80th and 20th percentile gives the ranging-time change dt_c, which maps to a
contact-angle change dtheta = c*dt_c/d and, for a rigid wheel touching a
step, to the obstacle height h = d*sin^2(dtheta/2).
"""
import csv
from dataclasses import asdict, dataclass
import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from tactire.data.cycles import ExperimentLog, ranging_time_of_sample, SensorGeometry
from tactire.data.peaks import find_peaks, PeakParams, PeakSet
from tactire.data.trace_transforms import (
    align_and_trim,
    DegenerateTraceError,
    NoSendPulseError,
    peak_trace,
)
from tactire.data.windowing import PipelineConfig
from tactire.utils.typing import TimeRange

EPSILON_MS = 500.0
UPPER_PERCENTILE = 80.0
LOWER_PERCENTILE = 20.0


class DeadZoneError(ValueError):
    pass


class DeltaThetaRangeError(ValueError):
    pass


class InsufficientPeaksError(ValueError):
    pass


@dataclass(frozen=True)
class HeightEstimate:
    delta_t_c: float  # ms
    delta_theta: float  # rad
    height_h: float  # m
    window_t_ex: TimeRange
    epsilon: float = EPSILON_MS
    n_cycles: int = 0
    n_peaks: int = 0
    percentiles: Tuple[float, float] = (0.0, 0.0)  # (upper, lower), ms
    compensated: bool = False

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["window_t_ex"] = list(self.window_t_ex)
        d["percentiles"] = list(self.percentiles)
        return d


def dead_zone_time(geom: SensorGeometry) -> float:
    """Ranging time of the hub end of the tube, ms."""
    return 2 * geom.inner_length / geom.speed_of_sound * 1e3


def dead_zone_samples(geom: SensorGeometry, sample_rate: float) -> int:
    return int(math.ceil(dead_zone_time(geom) * sample_rate / 1e3))


def peak_time_to_theta(t_r: float, geom: SensorGeometry) -> float:
    """Contact angle of a reflection seen at ranging time t_r (ms)."""
    if t_r < dead_zone_time(geom):
        raise DeadZoneError(
            f"t_r = {t_r:.4f} ms lies inside the dead zone "
            f"(< {dead_zone_time(geom):.4f} ms)"
        )
    x = geom.speed_of_sound * t_r * 1e-3 / 2
    return (x - geom.inner_length) * 2 / geom.wheel_diameter


def delta_theta_from_delta_t(delta_t_c: float, geom: SensorGeometry) -> float:
    if not delta_t_c > 0:
        raise DeltaThetaRangeError(f"delta_t_c must be positive, got {delta_t_c}")
    delta_theta = geom.speed_of_sound * delta_t_c * 1e-3 / geom.wheel_diameter
    if delta_theta >= 2 * math.pi:
        raise DeltaThetaRangeError(
            f"delta_theta = {delta_theta:.4f} rad is not below 2*pi"
        )
    return delta_theta


def height_from_delta_theta(delta_theta: float, geom: SensorGeometry) -> float:
    if not 0 < delta_theta < 2 * math.pi:
        raise DeltaThetaRangeError(
            f"delta_theta must lie in (0, 2*pi), got {delta_theta}"
        )
    return geom.wheel_diameter * math.sin(delta_theta / 2) ** 2


def cycle_peaks(
    log: ExperimentLog,
    t_ex_window: TimeRange,
    params: PeakParams = PeakParams(),
    geom: Optional[SensorGeometry] = None,
    cfg: PipelineConfig = PipelineConfig(),
) -> List[PeakSet]:
    """Peaks beyond the dead zone of every cycle with t_ex in the window."""
    geom = log.geometry if geom is None else geom
    lo, hi = t_ex_window
    mean = log.trial_mean_amplitude()
    peak_sets = []
    for i, cycle in enumerate(log.cycles):
        if not lo <= cycle.t_ex <= hi:
            continue
        try:
            shifted = align_and_trim(cycle, mean, cfg.shifted_length)
            trace = peak_trace(
                shifted,
                dead_zone_samples(geom, cycle.sample_rate),
                params.ema_alpha,
                cfg.baseline_cutoff,
            )
        except (NoSendPulseError, DegenerateTraceError) as e:
            logging.warning(f"cycle {i} at t_ex={cycle.t_ex} ms skipped: {e}")
            continue
        peaks = find_peaks(trace, params, source_cycle=i, sample_rate=cycle.sample_rate)
        keep = peaks.t_r > dead_zone_time(geom)
        peak_sets.append(
            PeakSet(
                indices=peaks.indices[keep],
                amplitudes=peaks.amplitudes[keep],
                prominences=peaks.prominences[keep],
                source_cycle=i,
                sample_rate=cycle.sample_rate,
            )
        )
    return peak_sets


def _reference_angle(log: ExperimentLog, t_ex: float) -> float:
    times = log.cycle_times
    angles = np.array([c.wheel_angle for c in log.cycles])
    return float(np.interp(t_ex, times, angles))


def pooled_ranging_times(
    log: ExperimentLog,
    peak_sets: Sequence[PeakSet],
    geom: SensorGeometry,
    collision_t_ex: float,
    compensate_rotation: bool = False,
) -> np.ndarray:
    """All peak ranging times of the window, in ms.

    With `compensate_rotation`, each cycle's times are moved to the wheel
    angle at the collision: rolling by dphi shifts a fixed contact's ranging
    time by -dphi*d/c.
    """
    if not peak_sets:
        return np.zeros(0)
    phi_c = _reference_angle(log, collision_t_ex) if compensate_rotation else 0.0
    pooled = []
    for peaks in peak_sets:
        t_r = peaks.t_r
        if compensate_rotation:
            phi = log.cycles[peaks.source_cycle].wheel_angle
            t_r = t_r + (phi - phi_c) * geom.wheel_diameter / geom.speed_of_sound * 1e3
        pooled.append(t_r)
    return np.concatenate(pooled)


def estimate_height(
    log: ExperimentLog,
    collision_t_ex: float,
    params: PeakParams = PeakParams(),
    geom: Optional[SensorGeometry] = None,
    *,
    epsilon: float = EPSILON_MS,
    compensate_rotation: bool = False,
    cfg: PipelineConfig = PipelineConfig(),
) -> HeightEstimate:
    geom = log.geometry if geom is None else geom
    window = (collision_t_ex - epsilon, collision_t_ex + epsilon)
    peak_sets = cycle_peaks(log, window, params, geom, cfg)
    t_r = pooled_ranging_times(
        log, peak_sets, geom, collision_t_ex, compensate_rotation
    )
    if len(t_r) < 2:
        raise InsufficientPeaksError(
            f"{len(t_r)} return peaks in t_ex window {window}, need at least 2"
        )
    upper, lower = np.percentile(t_r, [UPPER_PERCENTILE, LOWER_PERCENTILE])
    delta_t_c = float(upper - lower)
    delta_theta = delta_theta_from_delta_t(delta_t_c, geom)
    height = height_from_delta_theta(delta_theta, geom)
    logging.info(
        f"collision at {collision_t_ex:.1f} ms: {len(t_r)} peaks from "
        f"{len(peak_sets)} cycles, dt_c={delta_t_c:.4f} ms, h={height * 100:.2f} cm"
    )
    return HeightEstimate(
        delta_t_c=delta_t_c,
        delta_theta=delta_theta,
        height_h=height,
        window_t_ex=window,
        epsilon=epsilon,
        n_cycles=len(peak_sets),
        n_peaks=len(t_r),
        percentiles=(float(upper), float(lower)),
        compensated=compensate_rotation,
    )


PEAK_TABLE_FIELDS = ("cycle_index", "t_ex", "t_r", "amplitude", "prominence")


def peak_table(log: ExperimentLog, peak_sets: Sequence[PeakSet]) -> List[Dict]:
    rows = []
    for peaks in peak_sets:
        t_ex = log.cycles[peaks.source_cycle].t_ex
        t_r = ranging_time_of_sample(peaks.indices, peaks.sample_rate)
        for k in range(len(peaks)):
            rows.append(
                {
                    "cycle_index": peaks.source_cycle,
                    "t_ex": t_ex,
                    "t_r": float(t_r[k]),
                    "amplitude": float(peaks.amplitudes[k]),
                    "prominence": float(peaks.prominences[k]),
                }
            )
    return rows


def write_peak_table(path: str, rows: Sequence[Dict]):
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=PEAK_TABLE_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
