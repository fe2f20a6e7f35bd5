from copy import deepcopy
import importlib.util
import os

from ml_collections import ConfigDict

from tactire.sim.experiments import height_scenes, obstacle_scenes, terrain_scenes
from tactire.utils.spec import ModuleSpec

_spec = importlib.util.spec_from_file_location(
    "config", os.path.join(os.path.dirname(__file__), "../scripts/configs/config.py")
)
_config_module = importlib.util.module_from_spec(_spec)
_spec.loader.exec_module(_config_module)
get_base_config = _config_module.get_config


def update_config(config: ConfigDict, **kwargs):
    assert isinstance(config, ConfigDict)
    updates = ConfigDict(kwargs)
    new_config = deepcopy(config)
    new_config.update(updates)
    return new_config


def get_config(experiment="height"):
    base_config = get_base_config(experiment)
    if experiment == "terrain":
        scenes = ModuleSpec.create(
            terrain_scenes, n_trials=3, trial_length=0.5, material_start=0.2
        )
    elif experiment == "obstacle":
        scenes = ModuleSpec.create(
            obstacle_scenes, block1_trials=3, block2_trials=1, post_roll=0.2
        )
    else:
        scenes = ModuleSpec.create(height_scenes, n_short=3, n_tall=2, post_roll=0.2)
    config = update_config(
        base_config,
        progress=False,
        protocol=dict(max_iters=50),
    )
    del config["scenes"]
    config.scenes = scenes
    return config
