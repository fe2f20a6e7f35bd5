"""
Scene generators for the three experiment protocols.

Every generator is deterministic in `seed`: trial k draws its initial wheel
angle from a 30 degree grid with +-20 degrees of jitter and its own acoustic
seed from one seeded generator.
"""
import math
from typing import List, Optional, Sequence

import numpy as np

from tactire.data.cycles import SensorGeometry, Terrain
from tactire.sim.scene import ObstacleKind, ObstacleSpec, ScenePlan
from tactire.sim.terrain import terrain_spec

GRID_STEP_DEG = 30.0
GRID_JITTER_DEG = 20.0
POSITION_RANGE = (0.2, 1.0)  # m rolled before the first contact
# trial lengths are sized for the prototype wheel
WHEEL_RADIUS = SensorGeometry().wheel_radius
OBSTACLE_HEIGHTS = (0.010, 0.015, 0.020, 0.025)
TRAIN_HEIGHT = 0.025
SHORT_HEIGHT = 0.025
TALL_HEIGHT = 0.07
# roll past the obstacle long enough for a full window after the contact
POST_CONTACT_ROLL = 0.5


def theta0(k: int, rng: np.random.Generator) -> float:
    """Initial wheel angle of trial k, in [0, 2pi)."""
    deg = GRID_STEP_DEG * (k % 12) + rng.uniform(-GRID_JITTER_DEG, GRID_JITTER_DEG)
    return math.radians(deg) % (2 * math.pi)


def _trial_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**31 - 1))


def terrain_scenes(
    n_trials: int = 10,
    terrains: Optional[Sequence[str]] = None,
    trial_length: float = 1.0,
    material_start: float = 0.5,
    seed: int = 0,
) -> List[ScenePlan]:
    """`n_trials` per surface; non-wood surfaces start `material_start` ahead."""
    terrains = [t.value for t in Terrain] if terrains is None else list(terrains)
    rng = np.random.default_rng(seed)
    scenes = []
    k = 0
    for name in terrains:
        spec = terrain_spec(name)
        start = 0.0 if spec.name == Terrain.WOOD else material_start
        for i in range(n_trials):
            scenes.append(
                ScenePlan(
                    terrain=spec,
                    trial_length=trial_length,
                    initial_wheel_angle=theta0(k, rng),
                    material_start=start,
                    name=f"terrain-{spec.name.value}-{i:03d}",
                    seed=_trial_seed(rng),
                )
            )
            k += 1
    return scenes


def _obstacle_scene(rng, k, shape, height, name, block, post_roll) -> ScenePlan:
    position = rng.uniform(*POSITION_RANGE)
    obstacle = ObstacleSpec(shape=shape, height=height, position=position)
    return ScenePlan(
        obstacles=(obstacle,),
        trial_length=obstacle.extent(WHEEL_RADIUS)[1] + post_roll,
        initial_wheel_angle=theta0(k, rng),
        name=name,
        seed=_trial_seed(rng),
        block=block,
    )


def obstacle_scenes(
    block1_trials: int = 134,
    block2_trials: int = 15,
    shapes: Sequence[str] = (
        ObstacleKind.SEMICIRCLE.value,
        ObstacleKind.TRIANGLE.value,
    ),
    heights: Sequence[float] = OBSTACLE_HEIGHTS,
    train_height: float = TRAIN_HEIGHT,
    post_roll: float = POST_CONTACT_ROLL,
    seed: int = 0,
) -> List[ScenePlan]:
    """Block 1: `block1_trials` per shape at `train_height`.
    Block 2: `block2_trials` per shape and height, new measurements throughout."""
    if not 0 <= block2_trials <= 42:
        raise ValueError(f"block2_trials must be in [0, 42], got {block2_trials}")
    rng = np.random.default_rng(seed)
    scenes = []
    k = 0
    for shape in shapes:
        for i in range(block1_trials):
            name = f"obstacle-b1-{shape}-{i:03d}"
            scene = _obstacle_scene(rng, k, shape, train_height, name, 1, post_roll)
            scenes.append(scene)
            k += 1
    for shape in shapes:
        for h in heights:
            for i in range(block2_trials):
                name = f"obstacle-b2-{shape}-{round(h * 1000)}mm-{i:03d}"
                scenes.append(_obstacle_scene(rng, k, shape, h, name, 2, post_roll))
                k += 1
    return scenes


def height_scenes(
    n_short: int = 43,
    n_tall: int = 12,
    short_height: float = SHORT_HEIGHT,
    tall_height: float = TALL_HEIGHT,
    post_roll: float = 0.3,
    seed: int = 0,
) -> List[ScenePlan]:
    """Rectangular steps; the tall one stops the wheel."""
    rng = np.random.default_rng(seed)
    scenes = []
    k = 0
    groups = (("short", n_short, short_height), ("tall", n_tall, tall_height))
    for group, n, h in groups:
        for i in range(n):
            name = f"height-{group}-{i:03d}"
            scenes.append(
                _obstacle_scene(rng, k, ObstacleKind.RECTANGLE, h, name, 1, post_roll)
            )
            k += 1
    return scenes
