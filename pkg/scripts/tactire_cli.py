"""
Command line entrypoints for single steps of the pipeline.

    tactire_cli.py design   [--geometry=geom.json] [--rpm=6]
    tactire_cli.py simulate --scene=scene.json --out=trial.awts
    tactire_cli.py process  --trial=trial.awts --task=terrain --out=windows.npz
    tactire_cli.py train    --windows=windows.npz --out=model.awlr [--protocol=p.json]
    tactire_cli.py eval     --model=model.awlr --windows=windows.npz --out=report.json
    tactire_cli.py height   --trial=trial.awts [--flag_time=12345.6] --out=height.json
    tactire_cli.py serve    --trial=trial.awts --port=5005 [--pace=realtime]
    tactire_cli.py replay   --host=127.0.0.1 --port=5005 --out=received.awts

File formats are described in docs/formats.md.
"""
import json
import os
from typing import Any, Callable, Dict

from absl import app, flags, logging

from tactire.classify.dataset import Dataset, TEST
from tactire.classify.logistic import LRModel
from tactire.classify.metrics import evaluate, write_confusion_csv, write_pr_csv
from tactire.classify.tasks import fit_task, Protocol
from tactire.data.cycles import FlagKind, SensorGeometry, Task
from tactire.data.peaks import PeakParams
from tactire.data.windowing import (
    load_windows,
    make_windows,
    PipelineConfig,
    save_windows,
)
from tactire.localize.height import (
    cycle_peaks,
    EPSILON_MS,
    estimate_height,
    peak_table,
    write_peak_table,
)
from tactire.sensor.design import design_report
from tactire.sim.acoustics import AcousticParams, simulate_log
from tactire.sim.scene import load_scene
from tactire.telemetry.server import connect_and_receive, Pace, TrialServer
from tactire.telemetry.trial_file import read_trial, write_trial

FLAGS = flags.FLAGS

flags.DEFINE_string("geometry", None, "JSON file with SensorGeometry fields.")
flags.DEFINE_float("rpm", None, "Wheel speed; overrides the geometry's angular speed.")
flags.DEFINE_string("scene", None, "Scene JSON file.")
flags.DEFINE_string("params", None, "JSON file with AcousticParams fields.")
flags.DEFINE_string("pipeline", None, "JSON file with PipelineConfig fields.")
flags.DEFINE_string("peaks", None, "JSON file with PeakParams fields.")
flags.DEFINE_string("protocol", None, "JSON file with Protocol fields.")
flags.DEFINE_string("trial", None, "Trial file (.awts or .jsonl).")
flags.DEFINE_string("windows", None, "Windows archive (.npz).")
flags.DEFINE_string("model", None, "Model file (.awlr).")
flags.DEFINE_string("out", None, "Output path.")
flags.DEFINE_enum("task", "terrain", [t.value for t in Task], "Classification task.")
flags.DEFINE_float(
    "flag_time", None, "Collision time in ms; default first ContactStart flag."
)
flags.DEFINE_float(
    "epsilon", EPSILON_MS, "Half width of the localization window in ms."
)
flags.DEFINE_bool(
    "compensate_rotation", True, "Shift peak times by the encoder angle."
)
flags.DEFINE_string("peak_table", None, "CSV path for the per-cycle peak table.")
flags.DEFINE_string("host", "127.0.0.1", "Server host.")
flags.DEFINE_integer("port", 5005, "Server port.")
flags.DEFINE_enum(
    "pace", Pace.REALTIME.value, [p.value for p in Pace], "Stream pacing."
)


def _read_json(path: str) -> Dict[str, Any]:
    with open(path, "r") as f:
        return json.load(f)


def _write_json(obj: Any, path: str = None):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path is None:
        print(text)
        return
    with open(path, "w") as f:
        f.write(text + "\n")
    logging.info(f"wrote {path}")


def _geometry() -> SensorGeometry:
    kwargs = _read_json(FLAGS.geometry) if FLAGS.geometry else {}
    if FLAGS.rpm is not None:
        kwargs.pop("angular_speed", None)
        return SensorGeometry.from_rpm(FLAGS.rpm, **kwargs)
    return SensorGeometry(**kwargs)


def _from_json_flag(cls, path):
    return cls(**_read_json(path)) if path else cls()


def _require(*names: str):
    for name in names:
        assert getattr(FLAGS, name) is not None, f"--{name} is required"


def design():
    report = design_report(_geometry())
    _write_json(report.to_dict(), FLAGS.out)
    print(report.format_table())


def simulate():
    _require("scene", "out")
    scene = load_scene(FLAGS.scene)
    params = _from_json_flag(AcousticParams, FLAGS.params)
    log = simulate_log(scene, _geometry(), params)
    write_trial(FLAGS.out, log, scene.seed, params.to_dict())


def process():
    _require("trial", "out")
    log, _ = read_trial(FLAGS.trial)
    cfg = _from_json_flag(PipelineConfig, FLAGS.pipeline)
    block = log.scene.block if log.scene is not None else 1
    windows = make_windows(log, Task(FLAGS.task), cfg)
    save_windows(FLAGS.out, windows, [block] * len(windows))
    logging.info(f"{len(windows)} windows -> {FLAGS.out}")


def train():
    _require("windows", "out")
    windows, blocks = load_windows(FLAGS.windows, with_blocks=True)
    task = windows[0].label.task
    if FLAGS.protocol:
        protocol = Protocol.for_task(task, **_read_json(FLAGS.protocol))
    else:
        protocol = Protocol.for_task(task)
    result = fit_task(task, windows, blocks, protocol)
    result.model.save(FLAGS.out)
    _write_json(result.report.to_dict())


def evaluate_model():
    _require("model", "windows")
    model = LRModel.load(FLAGS.model)
    windows = load_windows(FLAGS.windows)
    report = evaluate(model, Dataset(windows, [TEST] * len(windows)))
    _write_json(report.to_dict(), FLAGS.out)
    if FLAGS.out:
        stem = os.path.splitext(FLAGS.out)[0]
        write_confusion_csv(report, f"{stem}_confusion.csv")
        write_pr_csv(report, f"{stem}_pr_points.csv")


def height():
    _require("trial")
    log, header = read_trial(FLAGS.trial)
    flag_time = FLAGS.flag_time
    if flag_time is None:
        starts = log.flag_times(FlagKind.CONTACT_START)
        assert starts, f"{FLAGS.trial} holds no ContactStart flag; pass --flag_time"
        flag_time = starts[0]
    params = _from_json_flag(PeakParams, FLAGS.peaks)
    cfg = _from_json_flag(PipelineConfig, FLAGS.pipeline)
    estimate = estimate_height(
        log,
        flag_time,
        params,
        header.geometry,
        epsilon=FLAGS.epsilon,
        compensate_rotation=FLAGS.compensate_rotation,
        cfg=cfg,
    )
    _write_json(estimate.to_dict(), FLAGS.out)
    if FLAGS.peak_table:
        window = (flag_time - FLAGS.epsilon, flag_time + FLAGS.epsilon)
        peaks = cycle_peaks(log, window, params, header.geometry, cfg)
        write_peak_table(FLAGS.peak_table, peak_table(log, peaks))


def serve():
    _require("trial")
    log, header = read_trial(FLAGS.trial)
    with TrialServer(
        log, FLAGS.host, FLAGS.port, Pace(FLAGS.pace), header.seed, header.params
    ) as server:
        logging.info(f"serving {FLAGS.trial} on {server.address}")
        server.serve_one()


def replay():
    _require("out")
    log = connect_and_receive(FLAGS.host, FLAGS.port)
    write_trial(FLAGS.out, log)


COMMANDS: Dict[str, Callable[[], None]] = {
    "design": design,
    "simulate": simulate,
    "process": process,
    "train": train,
    "eval": evaluate_model,
    "height": height,
    "serve": serve,
    "replay": replay,
}


def main(argv):
    assert len(argv) == 2 and argv[1] in COMMANDS, (
        f"usage: {argv[0]} {{{','.join(COMMANDS)}}} [--flags]"
    )
    COMMANDS[argv[1]]()


if __name__ == "__main__":
    app.run(main)
