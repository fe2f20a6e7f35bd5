from ml_collections import ConfigDict
from ml_collections.config_dict import placeholder

from tactire.classify.tasks import Protocol
from tactire.data.cycles import SensorGeometry
from tactire.data.peaks import PeakParams
from tactire.data.windowing import PipelineConfig
from tactire.localize.height import EPSILON_MS
from tactire.sim.acoustics import AcousticParams
from tactire.sim.experiments import height_scenes, obstacle_scenes, terrain_scenes
from tactire.utils.spec import ModuleSpec

EXPERIMENTS = ("terrain", "obstacle", "height")


def get_config(experiment="height"):
    """
    experiment is one of ["terrain", "obstacle", "height"]

    terrain: 10 trials on each of 5 surfaces, 5-trace windows, random split by trial.
    obstacle: block 1 (134 trials per shape at 25 mm) trains,
        block 2 (all heights) tests.
    height: 43 short (2.5 cm) and 12 tall (7 cm) rectangular steps.
    """
    assert experiment in EXPERIMENTS, f"unknown experiment {experiment}"
    geometry = SensorGeometry()
    return ConfigDict(
        dict(
            experiment=experiment,
            seed=0,
            name="{experiment}_seed{seed}",
            save_dir=placeholder(str),
            trial_format="awts",
            write_trials=True,
            plots=False,
            progress=True,
            geometry=dict(
                wheel_radius=geometry.wheel_radius,
                inner_length=geometry.inner_length,
                speed_of_sound=geometry.speed_of_sound,
                pulse_frequency=geometry.pulse_frequency,
                pulse_cycles=geometry.pulse_cycles,
                rpm=6.0,
            ),
            acoustics=AcousticParams().to_dict(),
            pipeline=PipelineConfig().to_dict(),
            peaks=PeakParams().to_dict(),
            scenes=get_scene_config(experiment),
            height=dict(
                epsilon=EPSILON_MS,
                compensate_rotation=True,
            ),
            protocol=get_protocol_config(experiment),
            wandb=dict(
                project="tactire",
                group=placeholder(str),
                entity=placeholder(str),
                mode="disabled",
            ),
        )
    )


def get_scene_config(experiment):
    if experiment == "terrain":
        return ModuleSpec.create(
            terrain_scenes, n_trials=10, trial_length=1.0, material_start=0.5
        )
    if experiment == "obstacle":
        return ModuleSpec.create(obstacle_scenes, block1_trials=134, block2_trials=15)
    return ModuleSpec.create(height_scenes, n_short=43, n_tall=12)


def get_protocol_config(experiment):
    if experiment == "terrain":
        protocol = Protocol.for_task("terrain")
    else:
        protocol = Protocol()
    protocol = protocol.to_dict()
    # ConfigDict fields cannot change type, so "no override" is spelled 0
    protocol["feature_scale"] = protocol["feature_scale"] or 0.0
    protocol["train_heights"] = protocol["train_heights"] or ()
    return protocol
