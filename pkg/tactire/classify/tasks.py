"""End-to-end classification: simulate, window, train, evaluate."""
import dataclasses
from dataclasses import asdict, dataclass
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import tqdm

from tactire.classify.dataset import (
    block_split,
    Dataset,
    make_dataset,
    random_trial_split,
)
from tactire.classify.logistic import LRModel, train_lr
from tactire.classify.metrics import evaluate, EvalReport
from tactire.data.cycles import (
    ADC_MAX,
    ExperimentLog,
    SensorGeometry,
    Task,
    TraceWindow,
)
from tactire.data.windowing import make_windows, PipelineConfig, WindowReport
from tactire.sim.acoustics import AcousticParams, synthesize_trial
from tactire.sim.scene import collision_events, run_trial, ScenePlan
from tactire.utils.typing import TimeRange


@dataclass(frozen=True)
class Protocol:
    """Train/test protocol of a task.

    "block": windows of `train_block` train and all other blocks test; obstacle
    windows in training must have one of `train_heights`.
    "random": whole trials go to test with probability `test_fraction`.
    """

    kind: str = "block"
    train_block: int = 1
    train_heights: Optional[Tuple[float, ...]] = (0.025,)
    test_fraction: float = 0.3
    C: float = 0.5
    max_iters: int = 2000
    tol: float = 1e-5
    feature_scale: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("block", "random"):
            raise ValueError(
                f"protocol kind must be 'block' or 'random', got {self.kind}"
            )
        if self.train_heights is not None:
            object.__setattr__(self, "train_heights", tuple(self.train_heights))

    @classmethod
    def for_task(cls, task: Task, **kwargs) -> "Protocol":
        if Task(task) == Task.TERRAIN:
            kwargs = {"kind": "random", "train_heights": None, **kwargs}
        return cls(**kwargs)

    def scale_for(self, task: Task) -> float:
        if self.feature_scale is not None:
            return self.feature_scale
        # terrain windows hold shifted ADC counts, obstacle windows are normalized
        return 1.0 / ADC_MAX if Task(task) == Task.TERRAIN else 1.0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class TaskResult:
    model: LRModel
    report: EvalReport
    dataset: Dataset
    window_report: WindowReport


def obstacle_t_ex_range(
    contact_starts: Sequence, cfg: PipelineConfig, trigger_period: float = 50.0
) -> Optional[TimeRange]:
    """Experiment-time span that covers both obstacle-task windows."""
    if not contact_starts:
        return None
    t = contact_starts[0].t_ex
    before = (cfg.obstacle_pre_flag + cfg.obstacle_window + 1) * trigger_period
    after = (cfg.obstacle_window + 1) * trigger_period
    return t - before, t + after


def simulate_for_task(
    scene: ScenePlan,
    task: Task,
    geom: SensorGeometry,
    params: AcousticParams,
    cfg: PipelineConfig,
) -> ExperimentLog:
    """Raw log of one scene; obstacle trials only render cycles near the contact."""
    result = run_trial(scene, geom)
    t_ex_range = None
    if Task(task) == Task.OBSTACLE_SHAPE:
        starts = collision_events(result)
        t_ex_range = obstacle_t_ex_range(starts, cfg)
    params = dataclasses.replace(params, rng_seed=scene.seed)
    return synthesize_trial(
        result.states, params, geom, result.flags, scene, t_ex_range
    )


def collect_windows(
    task: Task,
    scenes: Sequence[ScenePlan],
    geom: SensorGeometry,
    params: AcousticParams,
    cfg: PipelineConfig,
    progress: bool = False,
) -> Tuple[List[TraceWindow], List[int], WindowReport]:
    windows, blocks = [], []
    report = WindowReport()
    desc = f"{Task(task).value} trials"
    for scene in tqdm.tqdm(scenes, desc=desc, disable=not progress):
        log = simulate_for_task(scene, task, geom, params, cfg)
        new = make_windows(log, task, cfg, report)
        windows.extend(new)
        blocks.extend([scene.block] * len(new))
    logging.info(f"windows: {report.to_dict()}")
    return windows, blocks, report


def split_windows(
    windows: Sequence[TraceWindow], blocks: Sequence[int], protocol: Protocol
) -> List[str]:
    if protocol.kind == "block":
        return block_split(
            windows, blocks, protocol.train_block, protocol.train_heights
        )
    return random_trial_split(windows, protocol.test_fraction, protocol.seed)


def fit_task(
    task: Task,
    windows: Sequence[TraceWindow],
    blocks: Sequence[int],
    protocol: Protocol,
    window_report: Optional[WindowReport] = None,
) -> TaskResult:
    split = split_windows(windows, blocks, protocol)
    data = make_dataset(windows, split, protocol.seed)
    model = train_lr(
        data,
        C=protocol.C,
        max_iters=protocol.max_iters,
        tol=protocol.tol,
        feature_scale=protocol.scale_for(task),
    )
    report = evaluate(model, data)
    return TaskResult(model, report, data, window_report or WindowReport())


def run_task(
    task: Task,
    scenes: Sequence[ScenePlan],
    protocol: Optional[Protocol] = None,
    geom: SensorGeometry = SensorGeometry(),
    params: AcousticParams = AcousticParams(),
    cfg: PipelineConfig = PipelineConfig(),
    progress: bool = False,
) -> EvalReport:
    return run_task_full(task, scenes, protocol, geom, params, cfg, progress).report


def run_task_full(
    task: Task,
    scenes: Sequence[ScenePlan],
    protocol: Optional[Protocol] = None,
    geom: SensorGeometry = SensorGeometry(),
    params: AcousticParams = AcousticParams(),
    cfg: PipelineConfig = PipelineConfig(),
    progress: bool = False,
) -> TaskResult:
    """Like `run_task`, also returning the model, dataset and window report."""
    task = Task(task)
    protocol = Protocol.for_task(task) if protocol is None else protocol
    windows, blocks, report = collect_windows(task, scenes, geom, params, cfg, progress)
    return fit_task(task, windows, blocks, protocol, report)
