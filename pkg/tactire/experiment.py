"""
Experiment runner: simulates every scene of an experiment config and writes
trial files, processed windows, reports and plot-ready CSVs.

Output layout under <save_dir>/<name>/:

    trials/<scene>.awts|.jsonl       raw trial files
    config.json                      the resolved config
    terrain, obstacle:
        windows.npz, window_report.json, model.awlr,
        eval_report.json, confusion.csv, pr_points.csv
    height:
        height_estimates.json, boxplot.csv, peaks/<scene>.csv
    figures/*.png                    when plots=True
"""
import json
import logging
import os
from typing import Any, Dict, List, Optional

from ml_collections import ConfigDict
import tqdm
import wandb

from tactire.classify.metrics import group_name, write_confusion_csv, write_pr_csv
from tactire.classify.tasks import fit_task, Protocol, simulate_for_task
from tactire.data.cycles import FlagKind, SensorGeometry, Task
from tactire.data.peaks import PeakParams
from tactire.data.windowing import (
    make_windows,
    PipelineConfig,
    save_windows,
    WindowReport,
)
from tactire.localize.height import (
    cycle_peaks,
    DeltaThetaRangeError,
    estimate_height,
    InsufficientPeaksError,
    peak_table,
    write_peak_table,
)
from tactire.localize.summary import group_box_stats, write_boxplot_csv
from tactire.sim.acoustics import AcousticParams, simulate_log
from tactire.sim.scene import ScenePlan
from tactire.telemetry.trial_file import write_trial
from tactire.utils import visualization_lib
from tactire.utils.config_utils import ConfigSchemaError, load_experiment_file, require
from tactire.utils.spec import ModuleSpec
from tactire.utils.train_utils import data_dir, format_name_with_config, Timer

TASKS = {"terrain": Task.TERRAIN, "obstacle": Task.OBSTACLE_SHAPE}
TRIAL_FORMATS = {"awts": ".awts", "jsonl": ".jsonl"}


def geometry_from_config(config: ConfigDict) -> SensorGeometry:
    kwargs = config.to_dict()
    rpm = kwargs.pop("rpm")
    geom = SensorGeometry.from_rpm(rpm, **kwargs)
    problems = geom.violations()
    if problems:
        raise ConfigSchemaError("; ".join(problems), "geometry")
    return geom


def protocol_from_config(config: ConfigDict) -> Protocol:
    kwargs = config.to_dict()
    kwargs["feature_scale"] = kwargs["feature_scale"] or None
    kwargs["train_heights"] = tuple(kwargs["train_heights"]) or None
    return Protocol(**kwargs)


def scenes_from_config(config: ConfigDict) -> List[ScenePlan]:
    make_scenes = ModuleSpec.instantiate(config.scenes.to_dict())
    return make_scenes(seed=config.seed)


def _dump_json(path: str, obj: Any):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


class ExperimentRunner:
    def __init__(self, config: ConfigDict, out_dir: Optional[str] = None):
        require(config, "experiment", ("terrain", "obstacle", "height"))
        require(config, "trial_format", TRIAL_FORMATS)
        self.config = config
        self.name = format_name_with_config(config.name, config.to_dict())
        root = out_dir or config.save_dir or data_dir()
        self.out_dir = os.path.join(root, self.name)
        self.geom = geometry_from_config(config.geometry)
        try:
            self.params = AcousticParams(**config.acoustics.to_dict())
            self.cfg = PipelineConfig(**config.pipeline.to_dict())
            self.peak_params = PeakParams(**config.peaks.to_dict())
        except (TypeError, ValueError) as e:
            raise ConfigSchemaError(str(e)) from e
        self.timer = Timer()
        self.artifacts: Dict[str, str] = {}
        self.images: Dict[str, wandb.Image] = {}

    def path(self, *parts: str) -> str:
        path = os.path.join(self.out_dir, *parts)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        return path

    def figure_path(self, name: str) -> Optional[str]:
        return self.path("figures", name) if self.config.plots else None

    def record(self, key: str, path: str) -> str:
        self.artifacts[key] = path
        return path

    def log_figure(self, key: str, figure: visualization_lib.WandBFigure):
        self.images[f"figures/{key}"] = wandb.Image(figure.image)

    def write_trial(self, scene: ScenePlan, log):
        if not self.config.write_trials:
            return
        suffix = TRIAL_FORMATS[self.config.trial_format]
        path = self.path("trials", f"{scene.name}{suffix}")
        write_trial(path, log, scene.seed, self.params.to_dict())

    def run(self) -> Dict[str, str]:
        config = self.config
        os.makedirs(self.out_dir, exist_ok=True)
        _dump_json(self.record("config", self.path("config.json")), config.to_dict())
        wandb.init(
            config=config.to_dict(),
            name=self.name,
            project=config.wandb.project,
            group=config.wandb.group,
            entity=config.wandb.entity,
            mode=config.wandb.mode,
        )
        with self.timer("scenes"):
            scenes = scenes_from_config(config)
        logging.info(f"{self.name}: {len(scenes)} scenes -> {self.out_dir}")
        if config.experiment == "height":
            metrics = self.run_height(scenes)
        else:
            metrics = self.run_classification(TASKS[config.experiment], scenes)
        logging.info(f"timings: {self.timer.get_total_times()}")
        wandb.log({**metrics, **self.timer.summary(), **self.images})
        wandb.finish()
        return self.artifacts

    def run_height(self, scenes: List[ScenePlan]) -> Dict[str, float]:
        config = self.config
        records = []
        groups: Dict[str, List[float]] = {}
        truths: Dict[str, float] = {}
        quiet = not config.progress
        for scene in tqdm.tqdm(scenes, desc="height trials", disable=quiet):
            with self.timer("simulate"):
                log = simulate_log(scene, self.geom, self.params)
            self.write_trial(scene, log)
            height = scene.obstacles[0].height if scene.obstacles else None
            group = group_name(height)
            record = {"trial": scene.name, "group": group, "true_height": height}
            records.append(record)
            starts = log.flag_times(FlagKind.CONTACT_START)
            if not starts:
                record["error"] = "no collision flag"
                logging.warning(f"{scene.name}: no collision flag")
                continue
            record["collision_t_ex"] = starts[0]
            with self.timer("localize"):
                try:
                    estimate = estimate_height(
                        log,
                        starts[0],
                        self.peak_params,
                        self.geom,
                        epsilon=config.height.epsilon,
                        compensate_rotation=config.height.compensate_rotation,
                        cfg=self.cfg,
                    )
                except (InsufficientPeaksError, DeltaThetaRangeError) as e:
                    record["error"] = str(e)
                    logging.warning(f"{scene.name}: {e}")
                    continue
                eps = config.height.epsilon
                window = (starts[0] - eps, starts[0] + eps)
                peaks = cycle_peaks(log, window, self.peak_params, self.geom, self.cfg)
            rows = peak_table(log, peaks)
            write_peak_table(self.path("peaks", f"{scene.name}.csv"), rows)
            if config.plots:
                visualization_lib.plot_peak_panel(
                    rows, starts[0], self.figure_path(f"peaks_{scene.name}.png")
                )
            record["estimate"] = estimate.to_dict()
            groups.setdefault(group, []).append(estimate.height_h)
            truths[group] = height

        path = self.path("height_estimates.json")
        _dump_json(self.record("height_estimates", path), records)
        stats = group_box_stats(groups)
        write_boxplot_csv(self.record("boxplot", self.path("boxplot.csv")), stats)
        if config.plots:
            figure = visualization_lib.plot_height_boxplot(
                groups, truths, self.figure_path("height_boxplot.png")
            )
            self.log_figure("height_boxplot", figure)
        for s in stats:
            logging.info(
                f"{s.group}: n={s.n} median={s.median * 100:.2f} cm "
                f"(true {truths[s.group] * 100:.2f} cm)"
            )
        return {f"median/{s.group}": s.median for s in stats}

    def run_classification(
        self, task: Task, scenes: List[ScenePlan]
    ) -> Dict[str, float]:
        config = self.config
        windows, blocks = [], []
        window_report = WindowReport()
        desc = f"{task.value} trials"
        for scene in tqdm.tqdm(scenes, desc=desc, disable=not config.progress):
            with self.timer("simulate"):
                log = simulate_for_task(scene, task, self.geom, self.params, self.cfg)
            self.write_trial(scene, log)
            with self.timer("windows"):
                new = make_windows(log, task, self.cfg, window_report)
            windows.extend(new)
            blocks.extend([scene.block] * len(new))
        _dump_json(
            self.record("window_report", self.path("window_report.json")),
            window_report.to_dict(),
        )
        save_windows(self.record("windows", self.path("windows.npz")), windows, blocks)

        with self.timer("train"):
            protocol = protocol_from_config(config.protocol)
            result = fit_task(task, windows, blocks, protocol, window_report)
        report = result.report
        result.model.save(self.record("model", self.path("model.awlr")))
        path = self.record("eval_report", self.path("eval_report.json"))
        _dump_json(path, report.to_dict())
        path = self.record("confusion", self.path("confusion.csv"))
        write_confusion_csv(report, path)
        write_pr_csv(report, self.record("pr_points", self.path("pr_points.csv")))
        if config.plots:
            figure = visualization_lib.plot_confusion(
                report, self.figure_path("confusion.png")
            )
            self.log_figure("confusion", figure)
            figure = visualization_lib.plot_pr_curves(
                report, self.figure_path("pr_curves.png")
            )
            self.log_figure("pr_curves", figure)
        return {
            "accuracy": report.accuracy,
            "macro_precision": report.macro_precision,
            "weighted_precision": report.weighted_precision,
        }


def run_experiment(
    config: ConfigDict, out_dir: Optional[str] = None
) -> Dict[str, str]:
    """Runs one experiment config; returns the written artifacts by name."""
    return ExperimentRunner(config, out_dir).run()


def cli_run(
    config: ConfigDict,
    experiment_file: Optional[str] = None,
    out_dir: Optional[str] = None,
) -> Dict[str, str]:
    """`run_experiment` after merging an optional JSON experiment file."""
    if experiment_file is not None:
        config = load_experiment_file(config, experiment_file)
    return run_experiment(config, out_dir)
