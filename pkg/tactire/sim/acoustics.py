"""
Synthesizes raw ranging cycles from wheel contact states.

Each cycle is a 4000-sample ADC record: a trigger-delay segment of baseline
noise, the rangefinder's send burst, one echo per contact at its
time-of-flight position, random clutter echoes, and Gaussian noise.
"""
import dataclasses
from dataclasses import dataclass
import logging
import math
from typing import Any, Dict, Optional, Sequence

import numpy as np

from tactire.data.cycles import (
    ADC_MAX,
    ExperimentLog,
    Flag,
    MAX_TRIGGER_JITTER_MS,
    RangingCycle,
    RAW_LENGTH,
    SAMPLE_RATE,
    SensorGeometry,
)
from tactire.sim.scene import (
    ContactKind,
    ContactState,
    ObstacleKind,
    run_trial,
    ScenePlan,
)
from tactire.utils.typing import TimeRange

TRIGGER_LATENCY_MS = 0.3


@dataclass(frozen=True)
class AcousticParams:
    """Signal model constants. Amplitudes are ADC counts, times ms."""

    baseline_level: float = 512.0
    send_pulse_amplitude: float = 3000.0
    reflection_gain_g0: float = 1500.0
    depth_ref: float = 0.004  # m
    attenuation_coeff: float = 0.15  # 1/m along the tube
    noise_std: float = 6.0
    clutter_rate: float = 0.15  # expected spurious echoes per cycle
    # the trigger delay is trigger_latency + U(0, trigger_jitter_max)
    trigger_latency: float = TRIGGER_LATENCY_MS
    trigger_jitter_max: float = MAX_TRIGGER_JITTER_MS - TRIGGER_LATENCY_MS
    triangle_echo_gain: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if value < 0:
                raise ValueError(f"{f.name} must be non-negative, got {value}")
        for name in ("trigger_latency", "trigger_jitter_max"):
            if getattr(self, name) > MAX_TRIGGER_JITTER_MS:
                raise ValueError(
                    f"{name} must be <= {MAX_TRIGGER_JITTER_MS} ms, "
                    f"got {getattr(self, name)}"
                )
        longest = self.trigger_latency + self.trigger_jitter_max
        if longest > MAX_TRIGGER_JITTER_MS + 1e-9:
            raise ValueError(
                f"trigger delay can reach {longest} ms, above the "
                f"{MAX_TRIGGER_JITTER_MS} ms bound"
            )

    @classmethod
    def clean(cls, **kwargs) -> "AcousticParams":
        """No noise and no clutter; trigger jitter is kept."""
        return cls(noise_std=0.0, clutter_rate=0.0, **kwargs)

    def send_pulse_width(
        self, geom: SensorGeometry, sample_rate: float = SAMPLE_RATE
    ) -> int:
        width = geom.pulse_cycles * sample_rate / geom.pulse_frequency
        return max(1, int(round(width)))

    def reflection_gain(self, depth: float, absorption: float = 0.0) -> float:
        if self.depth_ref == 0:
            return self.reflection_gain_g0 * (1.0 - absorption)
        return (
            self.reflection_gain_g0
            * min(depth / self.depth_ref, 1.0)
            * (1.0 - absorption)
        )

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "AcousticParams":
        return cls(**d)


def time_of_flight(theta: float, geom: SensorGeometry) -> float:
    """Round trip from the send pulse to a contact at angle theta and back, ms."""
    x = geom.inner_length + theta * geom.wheel_diameter / 2
    return 2 * x / geom.speed_of_sound * 1e3


def _add_burst(trace: np.ndarray, center: float, width: int, amplitude: float):
    """Adds a Hann-windowed burst envelope centred at fractional sample `center`."""
    lo = max(int(math.floor(center - width / 2)), 0)
    hi = min(int(math.ceil(center + width / 2)) + 1, len(trace))
    if hi <= lo:
        return
    n = np.arange(lo, hi, dtype=np.float64)
    u = (n - center) / width + 0.5
    inside = (u > 0) & (u < 1)
    trace[lo:hi] += np.where(inside, amplitude * np.sin(np.pi * u) ** 2, 0.0)


def cycle_rng(params: AcousticParams, cycle_index: int) -> np.random.Generator:
    return np.random.default_rng([params.rng_seed, cycle_index])


def synthesize_cycle(
    state: ContactState,
    params: AcousticParams,
    geom: SensorGeometry,
    rng: Optional[np.random.Generator] = None,
    sample_rate: float = SAMPLE_RATE,
) -> RangingCycle:
    """Renders one raw ranging cycle for the contacts in `state`."""
    if rng is None:
        rng = np.random.default_rng(params.rng_seed)
    trace = np.full(RAW_LENGTH, params.baseline_level, dtype=np.float64)
    width = params.send_pulse_width(geom, sample_rate)

    delay = params.trigger_latency + rng.uniform(0.0, params.trigger_jitter_max)
    start = int(round(delay * sample_rate / 1e3))
    trigger_delay = start * 1e3 / sample_rate
    _add_burst(trace, start + width / 2, width, params.send_pulse_amplitude)

    for contact in state.contacts:
        tof = time_of_flight(contact.theta, geom)
        center = start + tof * sample_rate / 1e3
        if center >= RAW_LENGTH:
            continue
        x = contact.theta * geom.wheel_diameter / 2
        amplitude = params.reflection_gain(
            contact.indentation_depth, contact.absorption
        )
        if contact.kind == ContactKind.GROUND:
            amplitude += contact.texture
        amplitude = max(amplitude, 0.0) * math.exp(-params.attenuation_coeff * 2 * x)
        _add_burst(trace, center, width, amplitude)
        if contact.obstacle_shape == ObstacleKind.TRIANGLE:
            # the second face returns a weaker copy one burst length later
            echo = center + geom.pulse_cycles / geom.pulse_frequency * sample_rate
            if echo < RAW_LENGTH:
                _add_burst(trace, echo, width, amplitude * params.triangle_echo_gain)

    dead_zone = start + 2 * geom.inner_length / geom.speed_of_sound * sample_rate
    for _ in range(rng.poisson(params.clutter_rate)):
        center = rng.uniform(dead_zone, RAW_LENGTH)
        amplitude = rng.uniform(0.1, 0.9) * params.reflection_gain_g0
        _add_burst(trace, center, width, amplitude)

    if params.noise_std > 0:
        trace += rng.normal(0.0, params.noise_std, size=RAW_LENGTH)
    clipped = int(np.count_nonzero((trace < 0) | (trace > ADC_MAX)))
    if clipped:
        logging.warning(f"clamped {clipped} samples at t_ex={state.t_ex} ms")
    samples = np.rint(np.clip(trace, 0, ADC_MAX)).astype(np.uint16)
    return RangingCycle(
        t_ex=state.t_ex,
        samples=samples,
        wheel_angle=state.wheel_angle,
        sample_rate=sample_rate,
        trigger_delay=trigger_delay,
    )


def synthesize_trial(
    states: Sequence[ContactState],
    params: AcousticParams,
    geom: SensorGeometry,
    flags: Sequence[Flag] = (),
    scene: Optional[ScenePlan] = None,
    t_ex_range: Optional[TimeRange] = None,
) -> ExperimentLog:
    """One raw cycle per state, flags copied from the simulator.

    Cycle i draws its randomness from `cycle_rng(params, i)`, so restricting
    the log to `t_ex_range` reproduces exactly the cycles of the full log.
    """
    cycles = []
    for i, state in enumerate(states):
        if t_ex_range is not None:
            lo, hi = t_ex_range
            if not lo <= state.t_ex <= hi:
                continue
        cycles.append(synthesize_cycle(state, params, geom, cycle_rng(params, i)))
    return ExperimentLog(
        cycles=tuple(cycles), flags=tuple(flags), geometry=geom, scene=scene
    )


def simulate_log(
    scene: ScenePlan,
    geom: SensorGeometry,
    params: AcousticParams = AcousticParams(),
    duration: Optional[float] = None,
    t_ex_range: Optional[TimeRange] = None,
) -> ExperimentLog:
    """Runs the kinematics of `scene` and renders its raw log.

    The acoustic seed is the scene's own seed, so every trial of an
    experiment gets independent noise.
    """
    result = run_trial(scene, geom, duration)
    params = dataclasses.replace(params, rng_seed=scene.seed)
    return synthesize_trial(
        result.states, params, geom, result.flags, scene, t_ex_range
    )
