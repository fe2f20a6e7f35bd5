"""Windows flattened into feature matrices with a train/test assignment."""
from dataclasses import dataclass
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from tactire.data.cycles import Task, TASK_LABELS, TraceWindow

TRAIN = "train"
TEST = "test"


class RaggedWindowError(ValueError):
    pass


class DegenerateDataError(ValueError):
    pass


class ProtocolError(ValueError):
    pass


def flatten(window: TraceWindow) -> np.ndarray:
    """Row-major concatenation of the window's traces."""
    traces = window.traces
    if traces.ndim != 2:
        raise RaggedWindowError(f"window traces have shape {traces.shape}")
    return traces.reshape(-1)


def flatten_traces(traces: Sequence[np.ndarray]) -> np.ndarray:
    lengths = {len(t) for t in traces}
    if len(lengths) != 1:
        raise RaggedWindowError(f"traces of unequal lengths {sorted(lengths)}")
    return np.concatenate([np.asarray(t, dtype=np.float64) for t in traces])


@dataclass(frozen=True, eq=False)
class Dataset:
    windows: Tuple[TraceWindow, ...]
    split: Tuple[str, ...]
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "windows", tuple(self.windows))
        object.__setattr__(self, "split", tuple(self.split))
        if not self.windows:
            raise DegenerateDataError("dataset holds no windows")
        if len(self.split) != len(self.windows):
            raise ValueError(
                f"{len(self.split)} split entries for {len(self.windows)} windows"
            )
        if set(self.split) - {TRAIN, TEST}:
            raise ValueError(f"split entries must be {TRAIN!r} or {TEST!r}")
        shapes = {w.traces.shape for w in self.windows}
        if len(shapes) != 1:
            raise RaggedWindowError(f"windows of different shapes {sorted(shapes)}")
        tasks = {w.label.task for w in self.windows}
        if len(tasks) != 1:
            raise ValueError(f"windows mix tasks {sorted(t.value for t in tasks)}")
        check_disjoint_trials(self.windows, self.split)

    @property
    def task(self) -> Task:
        return self.windows[0].label.task

    @property
    def feature_dim(self) -> int:
        return self.windows[0].traces.size

    @property
    def classes(self) -> Tuple[str, ...]:
        present = {w.label.value for w in self.windows}
        return tuple(c for c in TASK_LABELS[self.task] if c in present)

    def indices(self, part: Optional[str] = None) -> np.ndarray:
        if part is None:
            return np.arange(len(self.windows))
        return np.flatnonzero(np.array(self.split) == part)

    def features(self, part: Optional[str] = None) -> np.ndarray:
        """(M, feature_dim) float32 matrix of the windows in `part`."""
        idx = self.indices(part)
        out = np.empty((len(idx), self.feature_dim), dtype=np.float32)
        for row, i in enumerate(idx):
            out[row] = flatten(self.windows[i])
        return out

    def labels(self, part: Optional[str] = None) -> np.ndarray:
        return np.array([self.windows[i].label.value for i in self.indices(part)])

    def heights(self, part: Optional[str] = None) -> List[Optional[float]]:
        return [self.windows[i].obstacle_height for i in self.indices(part)]

    def counts(self) -> Dict[str, int]:
        return {TRAIN: len(self.indices(TRAIN)), TEST: len(self.indices(TEST))}


def check_disjoint_trials(windows: Sequence[TraceWindow], split: Sequence[str]):
    train = {w.trial_id for w, s in zip(windows, split) if s == TRAIN}
    test = {w.trial_id for w, s in zip(windows, split) if s == TEST}
    shared = train & test
    if shared:
        raise ProtocolError(
            f"{len(shared)} trial(s) have windows in both splits, "
            f"e.g. {sorted(shared)[0]}"
        )


def block_split(
    windows: Sequence[TraceWindow],
    blocks: Sequence[int],
    train_block: int = 1,
    train_heights: Optional[Sequence[float]] = None,
) -> List[str]:
    """Windows of `train_block` train, every other block tests.

    With `train_heights`, obstacle windows of the training block must carry
    one of those heights.
    """
    split = [TRAIN if b == train_block else TEST for b in blocks]
    if train_heights is not None:
        for w, s in zip(windows, split):
            h = w.obstacle_height
            if s != TRAIN or h is None:
                continue
            if not np.any(np.isclose(h, train_heights)):
                raise ProtocolError(
                    f"training window of {w.trial_id} has obstacle height {h} m, "
                    f"allowed {list(train_heights)}"
                )
    return split


def random_trial_split(
    windows: Sequence[TraceWindow], test_fraction: float = 0.3, seed: int = 0
) -> List[str]:
    """Assigns whole trials to the test split with a seeded shuffle."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    trials = sorted({w.trial_id for w in windows})
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(trials))
    n_test = max(1, int(round(test_fraction * len(trials))))
    test = {trials[i] for i in order[:n_test]}
    return [TEST if w.trial_id in test else TRAIN for w in windows]


def make_dataset(
    windows: Sequence[TraceWindow], split: Sequence[str], seed: int = 0
) -> Dataset:
    data = Dataset(windows, split, seed)
    logging.info(
        f"{data.task.value} dataset: {data.counts()} windows, "
        f"feature_dim={data.feature_dim}, classes={data.classes}"
    )
    return data
