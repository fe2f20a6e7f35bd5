"""
Runs one of the three experiments end to end.

    python scripts/run_experiment.py --config=scripts/configs/config.py:height \
        --config.seed=3 --experiment=overrides.json
"""
import json
import os

from absl import app, flags, logging
from ml_collections import config_flags

from tactire.experiment import cli_run

FLAGS = flags.FLAGS

flags.DEFINE_string("name", None, "Run name; overrides config.name.")
flags.DEFINE_string("experiment", None, "JSON file merged onto the config.")
flags.DEFINE_string("out_dir", None, "Output root; defaults to config.save_dir.")
flags.DEFINE_bool("debug", False, "Debug run (no wandb logging, plots on)")

config_dir = os.path.join(os.path.dirname(__file__), "configs")
config_flags.DEFINE_config_file(
    "config",
    os.path.join(config_dir, "config.py:height"),
    "File path to the experiment configuration.",
    lock_config=False,
)


def main(_):
    config = FLAGS.config
    if FLAGS.name is not None:
        config.name = FLAGS.name
    if FLAGS.debug:
        config.wandb.mode = "disabled"
        config.plots = True
    assert config.seed >= 0, "seed must be non-negative"

    artifacts = cli_run(config, FLAGS.experiment, FLAGS.out_dir)
    logging.info("artifacts:\n" + json.dumps(artifacts, indent=2, sort_keys=True))


if __name__ == "__main__":
    app.run(main)
