"""
Cuts experiment logs into classifier windows.

Terrain: consecutive non-overlapping windows of shifted traces over the
region where the wheel is on the material. Obstacle shape: one window
around the ContactStart flag and one flat-ground window before it.
"""
from collections import Counter
from dataclasses import asdict, dataclass, field
import logging
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from tactire.data.cycles import (
    BASELINED_LENGTH,
    ClassLabel,
    ExperimentLog,
    FlagKind,
    ObstacleShape,
    SAMPLE_RATE,
    SHIFTED_LENGTH,
    Stage,
    Task,
    Terrain,
    TraceWindow,
)
from tactire.data.trace_transforms import (
    align_and_trim,
    baseline_rectify_normalize_batch,
    BASELINE_CUTOFF_HZ,
    DROP_PREFIX,
)


@dataclass(frozen=True)
class PipelineConfig:
    shifted_length: int = SHIFTED_LENGTH
    # obstacle traces are shifted long enough to keep 1750 samples after the drop
    obstacle_shifted_length: int = DROP_PREFIX + BASELINED_LENGTH
    baseline_cutoff: float = BASELINE_CUTOFF_HZ
    drop_prefix: int = DROP_PREFIX
    keep_length: int = BASELINED_LENGTH
    terrain_window: int = 5
    obstacle_window: int = 90
    obstacle_pre_flag: int = 15
    sample_rate: float = SAMPLE_RATE

    def __post_init__(self):
        if self.drop_prefix + self.keep_length > self.obstacle_shifted_length:
            raise ValueError(
                f"drop_prefix + keep_length = {self.drop_prefix + self.keep_length} "
                f"exceeds obstacle_shifted_length = {self.obstacle_shifted_length}"
            )
        if min(self.terrain_window, self.obstacle_window) < 1:
            raise ValueError("window sizes must be >= 1")
        if not 0 <= self.obstacle_pre_flag <= self.obstacle_window:
            raise ValueError("obstacle_pre_flag must lie within the obstacle window")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class WindowReport:
    extracted: int = 0
    skipped: Counter = field(default_factory=Counter)

    def skip(self, reason: str, trial_id: str, count: int = 1):
        self.skipped[reason] += count
        logging.info(f"skipped {count} window(s) of {trial_id}: {reason}")

    def merge(self, other: "WindowReport"):
        self.extracted += other.extracted
        self.skipped.update(other.skipped)

    def to_dict(self) -> Dict[str, Any]:
        return {"extracted": self.extracted, "skipped": dict(self.skipped)}


def _trial_id(log: ExperimentLog) -> str:
    return log.scene.name if log.scene is not None else ""


def terrain_windows(
    log: ExperimentLog, cfg: PipelineConfig, report: WindowReport
) -> List[TraceWindow]:
    trial_id = _trial_id(log)
    if log.scene is None:
        report.skip("missing-scene", trial_id)
        return []
    terrain = log.scene.terrain.name
    if terrain == Terrain.WOOD:
        start = 0
    else:
        start = log.first_flag_index(FlagKind.CONTACT_START)
        if start is None:
            report.skip("missing-flag", trial_id)
            return []
    region = log.cycles[start:]
    n_windows, remainder = divmod(len(region), cfg.terrain_window)
    if remainder:
        logging.debug(f"{trial_id}: dropping {remainder} trailing traces")
    if n_windows == 0:
        report.skip("region-too-short", trial_id)
        return []
    mean = log.trial_mean_amplitude()
    label = ClassLabel(Task.TERRAIN, terrain.value)
    windows = []
    for w in range(n_windows):
        chunk = region[w * cfg.terrain_window : (w + 1) * cfg.terrain_window]
        shifted = [align_and_trim(c, mean, cfg.shifted_length) for c in chunk]
        windows.append(
            TraceWindow(
                traces=np.stack([c.samples for c in shifted]),
                label=label,
                t_ex_span=(chunk[0].t_ex, chunk[-1].t_ex),
                stage=Stage.SHIFTED,
                trial_id=trial_id,
            )
        )
    report.extracted += len(windows)
    return windows


def obstacle_window_bounds(flag_index: int, n_traces: int, cfg: PipelineConfig):
    """[start, end) of the obstacle window, or None when it does not fit."""
    start = max(0, flag_index - cfg.obstacle_pre_flag)
    end = start + cfg.obstacle_window
    return (start, end) if end <= n_traces else None


def flat_window_bounds(flag_index: int, cfg: PipelineConfig):
    """[start, end) of the flat-ground window ending 15 traces before the flag."""
    end = flag_index - cfg.obstacle_pre_flag
    start = end - cfg.obstacle_window
    return (start, end) if start >= 0 else None


def _processed_window(log, bounds, label, cfg, height) -> TraceWindow:
    start, end = bounds
    mean = log.trial_mean_amplitude()
    shifted = [
        align_and_trim(c, mean, cfg.obstacle_shifted_length)
        for c in log.cycles[start:end]
    ]
    processed = baseline_rectify_normalize_batch(
        shifted, cfg.baseline_cutoff, cfg.drop_prefix, cfg.keep_length
    )
    return TraceWindow(
        traces=np.stack([c.samples for c in processed]),
        label=label,
        t_ex_span=(log.cycles[start].t_ex, log.cycles[end - 1].t_ex),
        stage=Stage.BASELINED,
        trial_id=_trial_id(log),
        obstacle_height=height,
    )


def obstacle_windows(
    log: ExperimentLog, cfg: PipelineConfig, report: WindowReport
) -> List[TraceWindow]:
    trial_id = _trial_id(log)
    flag_index = log.first_flag_index(FlagKind.CONTACT_START)
    if flag_index is None:
        report.skip("missing-flag", trial_id, 2)
        return []
    shape = log.scene.obstacle_label if log.scene is not None else None
    height = log.scene.obstacles[0].height if shape is not None else None
    windows = []
    bounds = obstacle_window_bounds(flag_index, len(log.cycles), cfg)
    if shape is None:
        report.skip("unlabelled-obstacle", trial_id)
    elif bounds is None:
        report.skip("obstacle-window-does-not-fit", trial_id)
    else:
        label = ClassLabel(Task.OBSTACLE_SHAPE, shape.value)
        windows.append(_processed_window(log, bounds, label, cfg, height))
    bounds = flat_window_bounds(flag_index, cfg)
    if bounds is None:
        report.skip("flat-window-does-not-fit", trial_id)
    else:
        label = ClassLabel(Task.OBSTACLE_SHAPE, ObstacleShape.FLAT.value)
        windows.append(_processed_window(log, bounds, label, cfg, None))
    report.extracted += len(windows)
    return windows


def make_windows(
    log: ExperimentLog,
    task: Task,
    cfg: PipelineConfig = PipelineConfig(),
    report: Optional[WindowReport] = None,
) -> List[TraceWindow]:
    """Windows of one trial. Windows that do not fit are counted in `report`."""
    report = WindowReport() if report is None else report
    if Task(task) == Task.TERRAIN:
        return terrain_windows(log, cfg, report)
    return obstacle_windows(log, cfg, report)


def save_windows(
    path: str, windows: Sequence[TraceWindow], blocks: Optional[Sequence[int]] = None
):
    """Stores windows in an .npz archive (see docs/formats.md)."""
    if not windows:
        raise ValueError("no windows to save")
    blocks = [1] * len(windows) if blocks is None else list(blocks)
    np.savez_compressed(
        path,
        traces=np.stack([w.traces for w in windows]).astype(np.float32),
        task=np.array(windows[0].label.task.value),
        labels=np.array([w.label.value for w in windows]),
        t_ex_span=np.array([w.t_ex_span for w in windows], dtype=np.float64),
        stage=np.array(windows[0].stage.value),
        trial_ids=np.array([w.trial_id for w in windows]),
        blocks=np.array(blocks, dtype=np.int64),
        heights=np.array(
            [
                np.nan if w.obstacle_height is None else w.obstacle_height
                for w in windows
            ]
        ),
    )


def load_windows(path: str, with_blocks: bool = False):
    """Windows of an archive, plus their block ids when `with_blocks`."""
    with np.load(path) as data:
        task = Task(str(data["task"]))
        stage = Stage(str(data["stage"]))
        windows = [
            TraceWindow(
                traces=traces,
                label=ClassLabel(task, str(label)),
                t_ex_span=tuple(span),
                stage=stage,
                trial_id=str(trial_id),
                obstacle_height=None if np.isnan(height) else float(height),
            )
            for traces, label, span, trial_id, height in zip(
                data["traces"],
                data["labels"],
                data["t_ex_span"],
                data["trial_ids"],
                data["heights"],
            )
        ]
        if "blocks" in data.files:
            blocks = data["blocks"].tolist()
        else:
            blocks = [1] * len(windows)
    return (windows, blocks) if with_blocks else windows
