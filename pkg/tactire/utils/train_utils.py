from collections import defaultdict
from contextlib import contextmanager
import os
import time

import flax

DATA_DIR_ENV = "TACTIRE_DATA_DIR"
DEFAULT_DATA_DIR = "./tactire_data"


def data_dir() -> str:
    """Output root: $TACTIRE_DATA_DIR, else ./tactire_data."""
    return os.environ.get(DATA_DIR_ENV) or DEFAULT_DATA_DIR


def format_name_with_config(name: str, config: dict) -> str:
    """Run name from a template over the config.

    Keys are either a leaf name (`{seed}`) or its full underscore path
    (`{geometry_rpm}`).

    Example:
        name = "{experiment}_seed{seed}"
        config = {"experiment": "height", "seed": 3}
        format_name_with_config(name, config) -> "height_seed3"
    """
    config_flat = flax.traverse_util.flatten_dict(config, sep="_")
    config_final = {k.split("_")[-1]: v for k, v in config_flat.items()}
    format_dict = {**config_final, **config_flat}
    return name.format(**format_dict)


class Timer:
    """
    Wall-clock totals per pipeline stage. Usage:

        timer = Timer()
        for scene in scenes:
            with timer("simulate"):
                log = simulate_log(scene)

        timer.tick("train")
        model = train_lr(...)
        timer.tock("train")

        timer.summary() -> {"time/simulate": 4.2, "time/simulate_mean": 0.08, ...}
    """

    def __init__(self, clock=time.perf_counter):
        self.clock = clock
        self.reset()

    @contextmanager
    def __call__(self, key):
        self.tick(key)
        try:
            yield None
        finally:
            self.tock(key)

    def reset(self):
        self.counts = defaultdict(int)
        self.times = defaultdict(float)
        self.start_times = {}

    def tick(self, key):
        if key in self.start_times:
            raise ValueError(f"Timer is already ticking for stage {key!r}")
        self.start_times[key] = self.clock()

    def tock(self, key):
        if key not in self.start_times:
            raise ValueError(f"Timer is not ticking for stage {key!r}")
        self.counts[key] += 1
        self.times[key] += self.clock() - self.start_times.pop(key)

    def get_total_times(self):
        return dict(self.times)

    def summary(self, prefix="time/"):
        """Total and mean seconds per stage, keyed for wandb.log."""
        out = {}
        for key, total in self.times.items():
            out[f"{prefix}{key}"] = total
            out[f"{prefix}{key}_mean"] = total / self.counts[key]
        return out
