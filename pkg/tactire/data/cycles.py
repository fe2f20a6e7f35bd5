"""
Value types shared by the simulator, the preprocessing pipeline and the
telemetry layer.

Amplitudes are integer ADC counts (0-4096 for 0-1.8 V). Times are ms. Every
container here is frozen; sample arrays are made read-only on construction.
"""
import dataclasses
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

if TYPE_CHECKING:
    from tactire.sim.scene import ScenePlan

SAMPLE_RATE = 200_000.0
RAW_LENGTH = 4000
SHIFTED_LENGTH = 2000
BASELINED_LENGTH = 1750
ADC_MAX = 4096
ADC_VOLTS = 1.8
TRIGGER_PERIOD_MS = 50.0
MAX_TRIGGER_JITTER_MS = 7.5


class Stage(str, Enum):
    RAW = "raw"
    SHIFTED = "shifted"
    BASELINED = "baselined"


class Task(str, Enum):
    TERRAIN = "terrain"
    OBSTACLE_SHAPE = "obstacle_shape"


class Terrain(str, Enum):
    WOOD = "Wood"
    OUTDOOR = "Outdoor"
    SOFT = "Soft"
    RIBBED = "Ribbed"
    NFM = "NFM"


class ObstacleShape(str, Enum):
    FLAT = "Flat"
    SEMICIRCLE = "SemiCircle"
    TRIANGLE = "Triangle"


class FlagKind(IntEnum):
    CONTACT_START = 0
    CONTACT_END = 1


TASK_LABELS: Dict[Task, Tuple[str, ...]] = {
    Task.TERRAIN: tuple(t.value for t in Terrain),
    Task.OBSTACLE_SHAPE: tuple(s.value for s in ObstacleShape),
}


class InvalidLabelError(ValueError):
    pass


class SampleRangeError(ValueError):
    pass


def ranging_time_of_sample(index, sample_rate: float = SAMPLE_RATE):
    """Ranging time in ms of sample `index` (scalar or array) after the send onset."""
    if sample_rate <= 0:
        raise ValueError(f"sample_rate must be positive, got {sample_rate}")
    index = np.asarray(index, dtype=np.float64)
    if np.any(index < 0):
        raise ValueError(f"sample index must be non-negative, got {index}")
    t = index * 1e3 / sample_rate
    return float(t) if t.ndim == 0 else t


@dataclass(frozen=True)
class ClassLabel:
    task: Task
    value: str

    def __post_init__(self):
        object.__setattr__(self, "task", Task(self.task))
        value = self.value.value if isinstance(self.value, Enum) else str(self.value)
        if value not in TASK_LABELS[self.task]:
            raise InvalidLabelError(
                f"{value!r} is not a {self.task.value} label; "
                f"expected one of {TASK_LABELS[self.task]}"
            )
        object.__setattr__(self, "value", value)

    @property
    def index(self) -> int:
        return TASK_LABELS[self.task].index(self.value)

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SensorGeometry:
    """Wheel and waveguide dimensions plus acoustic constants.

    Defaults are the prototype: 27 cm wheel, ~15 cm dead zone inside the hub,
    42 kHz rangefinder, driven at 6 RPM. The outer length is the full
    circumference so `outer_length` and `wheel_diameter` are derived.
    """

    wheel_radius: float = 0.135
    inner_length: float = 0.15
    speed_of_sound: float = 343.0
    pulse_frequency: float = 42_000.0
    pulse_cycles: int = 8
    angular_speed: float = 2 * np.pi * 6.0 / 60.0

    @classmethod
    def from_rpm(cls, rpm: float, **kwargs) -> "SensorGeometry":
        return cls(angular_speed=2 * np.pi * rpm / 60.0, **kwargs)

    @property
    def wheel_diameter(self) -> float:
        return 2 * self.wheel_radius

    @property
    def outer_length(self) -> float:
        return np.pi * self.wheel_diameter

    @property
    def total_length(self) -> float:
        return self.inner_length + self.outer_length

    @property
    def wavelength(self) -> float:
        return self.speed_of_sound / self.pulse_frequency

    @property
    def rpm(self) -> float:
        return self.angular_speed * 60.0 / (2 * np.pi)

    def violations(self) -> List[str]:
        problems = []
        if self.wheel_radius <= 0:
            problems.append(f"wheel_radius must be positive, got {self.wheel_radius}")
        if self.inner_length < 0:
            problems.append(f"inner_length must be >= 0, got {self.inner_length}")
        if self.total_length <= 0:
            problems.append(f"total length must be positive, got {self.total_length}")
        if self.speed_of_sound <= 0:
            problems.append(
                f"speed_of_sound must be positive, got {self.speed_of_sound}"
            )
        if self.pulse_frequency <= 0:
            problems.append(
                f"pulse_frequency must be positive, got {self.pulse_frequency}"
            )
        if self.pulse_cycles < 1:
            problems.append(f"pulse_cycles must be >= 1, got {self.pulse_cycles}")
        return problems

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "SensorGeometry":
        return cls(**d)


def _raw_samples(samples) -> np.ndarray:
    """RAW samples as uint16; values the type cannot hold exactly are rejected
    instead of wrapping."""
    arr = np.asarray(samples)
    if arr.size == 0 or arr.dtype == np.uint16:
        return arr
    if arr.dtype.kind not in "biuf":
        raise SampleRangeError(f"RAW samples must be numeric, got {arr.dtype}")
    if arr.dtype.kind == "f" and not np.all(np.isfinite(arr) & (arr == np.round(arr))):
        raise SampleRangeError("RAW samples must be whole ADC counts")
    lo, hi = arr.min(), arr.max()
    if lo < 0 or hi > np.iinfo(np.uint16).max:
        raise SampleRangeError(
            f"RAW samples span [{lo}, {hi}], outside the uint16 range"
        )
    return arr


def _readonly(samples, dtype=None) -> np.ndarray:
    arr = np.array(samples, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RangingCycle:
    """One send/receive trace.

    `trigger_delay` is simulator ground truth (ms between query and send
    pulse); it is not part of the wire format and is ignored by equality.
    """

    t_ex: float
    samples: np.ndarray
    wheel_angle: float = 0.0
    sample_rate: float = SAMPLE_RATE
    stage: Stage = Stage.RAW
    trigger_delay: Optional[float] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "stage", Stage(self.stage))
        if self.stage == Stage.RAW:
            samples = _readonly(_raw_samples(self.samples), np.uint16)
        else:
            samples = _readonly(self.samples, np.float64)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "t_ex", float(self.t_ex))
        object.__setattr__(self, "wheel_angle", float(self.wheel_angle))

    def __eq__(self, other):
        if not isinstance(other, RangingCycle):
            return NotImplemented
        return (
            self.t_ex == other.t_ex
            and self.wheel_angle == other.wheel_angle
            and self.sample_rate == other.sample_rate
            and self.stage == other.stage
            and np.array_equal(self.samples, other.samples)
        )

    __hash__ = None

    def __len__(self):
        return len(self.samples)

    @property
    def ranging_times(self) -> np.ndarray:
        return ranging_time_of_sample(np.arange(len(self.samples)), self.sample_rate)

    @property
    def volts(self) -> np.ndarray:
        return self.samples.astype(np.float64) * ADC_VOLTS / ADC_MAX

    def replace(self, **kwargs) -> "RangingCycle":
        return dataclasses.replace(self, **kwargs)


@dataclass(frozen=True)
class Flag:
    t_ex: float
    kind: FlagKind

    def __post_init__(self):
        object.__setattr__(self, "t_ex", float(self.t_ex))
        object.__setattr__(self, "kind", FlagKind(self.kind))


@dataclass(frozen=True, eq=False)
class TraceWindow:
    """N consecutive processed traces, the classifier's unit of input."""

    traces: np.ndarray
    label: ClassLabel
    t_ex_span: Tuple[float, float]
    stage: Stage
    trial_id: str = ""
    obstacle_height: Optional[float] = None

    def __post_init__(self):
        traces = np.asarray(self.traces)
        if traces.ndim != 2 or traces.shape[0] < 1:
            raise ValueError(
                "window traces must be a non-empty (N, length) array, "
                f"got {traces.shape}"
            )
        object.__setattr__(self, "traces", _readonly(traces, np.float64))
        object.__setattr__(self, "stage", Stage(self.stage))

    @property
    def window_size(self) -> int:
        return self.traces.shape[0]

    @property
    def trace_length(self) -> int:
        return self.traces.shape[1]


@dataclass(frozen=True, eq=False)
class ExperimentLog:
    cycles: Tuple[RangingCycle, ...]
    flags: Tuple[Flag, ...]
    geometry: SensorGeometry
    scene: Optional["ScenePlan"] = None

    def __post_init__(self):
        object.__setattr__(self, "cycles", tuple(self.cycles))
        object.__setattr__(self, "flags", tuple(self.flags))

    def __eq__(self, other):
        if not isinstance(other, ExperimentLog):
            return NotImplemented
        return (
            self.geometry == other.geometry
            and self.scene == other.scene
            and self.flags == other.flags
            and len(self.cycles) == len(other.cycles)
            and all(a == b for a, b in zip(self.cycles, other.cycles))
        )

    __hash__ = None

    def __len__(self):
        return len(self.cycles)

    @property
    def cycle_times(self) -> np.ndarray:
        return np.array([c.t_ex for c in self.cycles], dtype=np.float64)

    def flag_times(self, kind: FlagKind = FlagKind.CONTACT_START) -> List[float]:
        return [f.t_ex for f in self.flags if f.kind == kind]

    def first_flag_index(
        self, kind: FlagKind = FlagKind.CONTACT_START
    ) -> Optional[int]:
        """Index of the first cycle at or after the first flag of `kind`."""
        times = self.flag_times(kind)
        if not times:
            return None
        return int(np.searchsorted(self.cycle_times, times[0], side="left"))

    def trial_mean_amplitude(self) -> float:
        if not self.cycles:
            raise ValueError("empty log has no mean amplitude")
        means = [np.mean(c.samples, dtype=np.float64) for c in self.cycles]
        return float(np.mean(means))


@dataclass(frozen=True)
class Violation:
    cycle_index: Optional[int]
    invariant: str
    message: str


def expected_length(stage: Stage, shifted_length: int = SHIFTED_LENGTH) -> int:
    return {
        Stage.RAW: RAW_LENGTH,
        Stage.SHIFTED: shifted_length,
        Stage.BASELINED: BASELINED_LENGTH,
    }[Stage(stage)]


def validate_log(
    log: ExperimentLog,
    jitter_tolerance: float = MAX_TRIGGER_JITTER_MS,
    shifted_length: int = SHIFTED_LENGTH,
) -> List[Violation]:
    """Checks every type invariant of a log. Never raises."""
    violations = [
        Violation(None, "geometry", problem) for problem in log.geometry.violations()
    ]
    prev_t = None
    for i, cycle in enumerate(log.cycles):
        want = expected_length(cycle.stage, shifted_length)
        if len(cycle.samples) != want:
            violations.append(
                Violation(
                    i,
                    "sample-count",
                    f"{cycle.stage.value} cycle has {len(cycle.samples)} samples, "
                    f"expected {want}",
                )
            )
        if len(cycle.samples) and (
            np.min(cycle.samples) < 0 or np.max(cycle.samples) > ADC_MAX
        ):
            violations.append(
                Violation(i, "sample-range", f"samples outside [0, {ADC_MAX}]")
            )
        if prev_t is not None:
            if cycle.t_ex <= prev_t:
                violations.append(
                    Violation(
                        i, "monotonicity", f"t_ex {cycle.t_ex} does not follow {prev_t}"
                    )
                )
            elif abs(cycle.t_ex - prev_t - TRIGGER_PERIOD_MS) > jitter_tolerance:
                violations.append(
                    Violation(
                        i,
                        "trigger-spacing",
                        f"spacing {cycle.t_ex - prev_t:.3f} ms is not "
                        f"{TRIGGER_PERIOD_MS} +- {jitter_tolerance} ms",
                    )
                )
        prev_t = cycle.t_ex
    flag_times = [f.t_ex for f in log.flags]
    if any(b < a for a, b in zip(flag_times, flag_times[1:])):
        violations.append(
            Violation(None, "flag-order", "flags are not ordered in t_ex")
        )
    return violations


def stack_samples(cycles: Sequence[RangingCycle]) -> np.ndarray:
    lengths = {len(c.samples) for c in cycles}
    if len(lengths) > 1:
        raise ValueError(f"cannot stack cycles of different lengths {sorted(lengths)}")
    return np.stack([np.asarray(c.samples, dtype=np.float64) for c in cycles])
