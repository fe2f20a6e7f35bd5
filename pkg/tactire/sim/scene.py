"""
Planar rolling-without-slip kinematics of the sensorized wheel.

The wheel is a rigid circle rolling towards +x over flat ground that may
carry obstacles. Contact angles are measured clockwise from the rangefinder,
which is fixed in the wheel frame: a contact in world direction `beta` sits at
`theta = (theta0 - pi/2 - phi - beta) mod 2pi`, `phi` being the accumulated
wheel rotation. With this convention the ground contact starts at `theta0`
and decreases by `omega * dt` while rolling.
"""
import dataclasses
from dataclasses import dataclass, field
from enum import Enum
import json
import logging
import math
from typing import Any, Dict, List, Optional, Tuple

from scipy import optimize

from tactire.data.cycles import (
    Flag,
    FlagKind,
    ObstacleShape,
    SensorGeometry,
    Terrain,
    TRIGGER_PERIOD_MS,
)
from tactire.sim.terrain import TerrainSpec, terrain_spec
from tactire.utils.typing import Point

PREAMBLE_MS = 10_000.0
CLIMB_LIMIT = 0.05  # m
GROUND_RELEASE = 0.006  # m of centre rise after which the ground contact is lost
GROUND_DEPTH = 0.004  # m, static tube indentation under the wheel's own load
RECTANGLE_WIDTH = 0.15  # m
SUBSTEP = 5e-4  # m of centre travel per integration substep near obstacles
CONTACT_TOL = 1e-9  # m
MAX_CONTACTS = 2
TWO_PI = 2 * math.pi


class InvalidSceneError(ValueError):
    pass


class ObstacleKind(str, Enum):
    SEMICIRCLE = "SemiCircle"
    TRIANGLE = "Triangle"
    RECTANGLE = "Rectangle"


class ContactKind(str, Enum):
    GROUND = "Ground"
    OBSTACLE = "Obstacle"


# edges and apexes concentrate the load into deeper indentations than the ground
OBSTACLE_DEPTH = {
    ObstacleKind.SEMICIRCLE: 0.005,
    ObstacleKind.RECTANGLE: 0.006,
    ObstacleKind.TRIANGLE: 0.007,
}

OBSTACLE_LABELS = {
    ObstacleKind.SEMICIRCLE: ObstacleShape.SEMICIRCLE,
    ObstacleKind.TRIANGLE: ObstacleShape.TRIANGLE,
}


def wrap_angle(theta: float) -> float:
    theta = theta % TWO_PI
    return 0.0 if theta >= TWO_PI else theta


def contact_angle_to_perimeter_distance(theta: float, geom: SensorGeometry) -> float:
    """Perimeter distance from the rangefinder to a contact, x = theta*d/2."""
    return wrap_angle(theta) * geom.wheel_diameter / 2


def _segment_nearest(px, py, ax, ay, bx, by) -> Point:
    vx, vy = bx - ax, by - ay
    t = ((px - ax) * vx + (py - ay) * vy) / (vx * vx + vy * vy)
    t = min(max(t, 0.0), 1.0)
    return ax + t * vx, ay + t * vy


@dataclass(frozen=True)
class ObstacleSpec:
    """An obstacle lying on the ground.

    `position` is the ground distance, in m, the wheel rolls on flat ground
    before it first touches the obstacle, so the first contact comes
    `position / (omega * r)` after the wheel starts rolling. The leading edge
    lies `approach(r)` further on. Semicircles have radius `height`; triangles
    are isosceles with 45 degree faces, so their base is `2 * height`;
    rectangles are `width` long.
    """

    shape: ObstacleKind
    height: float
    position: float
    width: Optional[float] = None
    surmountable: Optional[bool] = None

    def __post_init__(self):
        object.__setattr__(self, "shape", ObstacleKind(self.shape))
        if self.height <= 0:
            raise InvalidSceneError(f"obstacle height must be > 0, got {self.height}")
        if self.shape == ObstacleKind.RECTANGLE:
            width = RECTANGLE_WIDTH if self.width is None else self.width
            if width <= 0:
                raise InvalidSceneError(f"rectangle width must be > 0, got {width}")
        else:
            width = 2 * self.height
        object.__setattr__(self, "width", float(width))
        climbable = self.shape != ObstacleKind.RECTANGLE or self.height < CLIMB_LIMIT
        if self.surmountable is None:
            object.__setattr__(self, "surmountable", climbable)
        elif self.surmountable and not climbable:
            raise InvalidSceneError(
                f"rectangle of height {self.height} m is above the climb limit "
                f"{CLIMB_LIMIT} m and cannot be surmountable"
            )

    def approach(self, r: float) -> float:
        """Horizontal distance from the centre of a wheel resting on flat
        ground to the leading edge, at the instant the wheel first touches."""
        h = self.height
        if self.shape == ObstacleKind.RECTANGLE:
            return r if h >= r else math.sqrt(r * r - (r - h) ** 2)
        if self.shape == ObstacleKind.SEMICIRCLE:
            return math.sqrt((r + h) ** 2 - r * r) - h
        # the 45 degree face is tangent to the wheel unless the apex is lower
        if h >= r * (1 - 1 / math.sqrt(2)):
            return r * (math.sqrt(2) - 1)
        return math.sqrt(r * r - (r - h) ** 2) - h

    def extent(self, r: float) -> Tuple[float, float]:
        """Leading and trailing edge on the ground for a wheel of radius r."""
        a = self.position + self.approach(r)
        return a, a + self.width

    @property
    def label(self) -> Optional[ObstacleShape]:
        return OBSTACLE_LABELS.get(self.shape)

    def nearest_point(self, cx: float, cy: float, r: float) -> Point:
        a, b = self.extent(r)
        h = self.height
        if self.shape == ObstacleKind.RECTANGLE:
            return min(max(cx, a), b), min(max(cy, 0.0), h)
        if self.shape == ObstacleKind.SEMICIRCLE:
            ox = a + h
            n = math.hypot(cx - ox, cy)
            if n == 0.0:
                return ox, h
            return ox + h * (cx - ox) / n, h * cy / n
        apex = (a + h, h)
        candidates = [
            _segment_nearest(cx, cy, a, 0.0, *apex),
            _segment_nearest(cx, cy, *apex, b, 0.0),
            _segment_nearest(cx, cy, a, 0.0, b, 0.0),
        ]
        return min(candidates, key=lambda p: math.hypot(cx - p[0], cy - p[1]))

    def gap(self, cx: float, cy: float, r: float) -> float:
        px, py = self.nearest_point(cx, cy, r)
        return math.hypot(cx - px, cy - py) - r

    def support(self, cx: float, r: float) -> float:
        """Lowest wheel-centre height at `cx` clearing the obstacle, or -inf."""
        a, b = self.extent(r)
        h = self.height
        if self.shape == ObstacleKind.RECTANGLE:
            if a <= cx <= b:
                return h + r
            dx = a - cx if cx < a else cx - b
            return h + math.sqrt(r * r - dx * dx) if dx < r else -math.inf
        if self.shape == ObstacleKind.SEMICIRCLE:
            reach = r + h
            dx = abs(cx - (a + h))
            return math.sqrt(reach * reach - dx * dx) if dx < reach else -math.inf
        s = r / math.sqrt(2)
        apex_x = a + h
        best = -math.inf
        u = cx - a + s
        if 0.0 <= u <= h:
            best = max(best, u + s)
        u = cx - apex_x - s
        if 0.0 <= u <= h:
            best = max(best, h - u + s)
        dx = abs(cx - apex_x)
        if dx < r:
            best = max(best, h + math.sqrt(r * r - dx * dx))
        return best

    def to_dict(self) -> Dict[str, Any]:
        d = dataclasses.asdict(self)
        d["shape"] = self.shape.value
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ObstacleSpec":
        return cls(**d)


@dataclass(frozen=True)
class ScenePlan:
    terrain: TerrainSpec = field(default_factory=lambda: terrain_spec(Terrain.WOOD))
    obstacles: Tuple[ObstacleSpec, ...] = ()
    trial_length: float = 1.0
    initial_wheel_angle: float = 0.0
    # ground before this point is plain wood
    material_start: float = 0.0
    name: str = "trial"
    seed: int = 0
    block: int = 1

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if self.trial_length <= 0:
            raise InvalidSceneError(
                f"trial_length must be > 0, got {self.trial_length}"
            )
        if not 0.0 <= self.initial_wheel_angle < TWO_PI:
            raise InvalidSceneError(
                "initial_wheel_angle must be in [0, 2pi), "
                f"got {self.initial_wheel_angle}"
            )
        if self.material_start < 0:
            raise InvalidSceneError(
                f"material_start must be >= 0, got {self.material_start}"
            )

    def validate(self, geom: SensorGeometry):
        r = geom.wheel_radius
        ordered = sorted(self.obstacles, key=lambda ob: ob.extent(r)[0])
        for prev, nxt in zip(ordered, ordered[1:]):
            if nxt.extent(r)[0] < prev.extent(r)[1]:
                raise InvalidSceneError(
                    f"obstacles overlap: {prev.shape.value} at {prev.extent(r)} "
                    f"and {nxt.shape.value} at {nxt.extent(r)}"
                )
        for ob in self.obstacles:
            if ob.gap(0.0, r, r) <= 0:
                raise InvalidSceneError(
                    f"{ob.shape.value} at {ob.position} m touches the wheel at start"
                )
            if ob.surmountable and ob.height >= r:
                raise InvalidSceneError(
                    f"surmountable obstacles must be lower than the wheel radius {r} m"
                )

    @property
    def obstacle_label(self) -> Optional[ObstacleShape]:
        return self.obstacles[0].label if self.obstacles else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "terrain": self.terrain.to_dict(),
            "material_start": self.material_start,
            "obstacles": [ob.to_dict() for ob in self.obstacles],
            "trial_length": self.trial_length,
            "initial_wheel_angle": self.initial_wheel_angle,
            "seed": self.seed,
            "block": self.block,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ScenePlan":
        d = dict(d)
        terrain = d.pop("terrain", {"name": Terrain.WOOD.value})
        if isinstance(terrain, str):
            terrain = terrain_spec(terrain)
        elif set(terrain) == {"name"}:
            terrain = terrain_spec(terrain["name"])
        else:
            terrain = TerrainSpec.from_dict(terrain)
        obstacles = tuple(ObstacleSpec.from_dict(o) for o in d.pop("obstacles", ()))
        return cls(terrain=terrain, obstacles=obstacles, **d)


def save_scene(scene: ScenePlan, path: str):
    with open(path, "w") as f:
        json.dump(scene.to_dict(), f, indent=2, sort_keys=True)


def load_scene(path: str) -> ScenePlan:
    with open(path, "r") as f:
        return ScenePlan.from_dict(json.load(f))


@dataclass(frozen=True)
class Contact:
    theta: float
    kind: ContactKind
    indentation_depth: float
    obstacle_index: Optional[int] = None
    obstacle_shape: Optional[ObstacleKind] = None
    absorption: float = 0.0
    # echo modulation from the terrain, ADC counts
    texture: float = 0.0


@dataclass(frozen=True)
class ContactEvent:
    """Exact instant an obstacle contact begins or ends."""

    t_ex: float
    kind: FlagKind
    obstacle_index: int
    theta_ground: float
    theta_obstacle: float
    wheel_center: Point

    @property
    def delta_theta(self) -> float:
        return wrap_angle(self.theta_ground - self.theta_obstacle)


@dataclass(frozen=True)
class ContactState:
    contacts: Tuple[Contact, ...]
    wheel_center: Point
    t_ex: float
    wheel_angle: float = 0.0
    stalled: bool = False
    events: Tuple[ContactEvent, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "contacts", tuple(self.contacts))
        if len(self.contacts) > MAX_CONTACTS:
            raise ValueError(
                f"at most {MAX_CONTACTS} contacts, got {len(self.contacts)}"
            )

    def same_pose(self, other: "ContactState") -> bool:
        return (
            self.contacts == other.contacts
            and self.wheel_center == other.wheel_center
            and self.wheel_angle == other.wheel_angle
        )

    def contacts_of(self, kind: ContactKind) -> List[Contact]:
        return [c for c in self.contacts if c.kind == kind]


@dataclass(frozen=True)
class TrialResult:
    states: Tuple[ContactState, ...]
    flags: Tuple[Flag, ...]

    @property
    def events(self) -> List[ContactEvent]:
        return [e for s in self.states for e in s.events]


class _Track:
    """Scene geometry bound to a wheel; computes supports, contacts and steps."""

    def __init__(self, scene: ScenePlan, geom: SensorGeometry):
        self.scene = scene
        self.geom = geom
        self.r = geom.wheel_radius
        self.obstacles = scene.obstacles

    def theta(self, phi: float, beta: float) -> float:
        return wrap_angle(self.scene.initial_wheel_angle - math.pi / 2 - phi - beta)

    def support(self, cx: float, exclude: Optional[int] = None) -> float:
        y = self.r
        for i, ob in enumerate(self.obstacles):
            if i != exclude and ob.surmountable:
                y = max(y, ob.support(cx, self.r))
        return y

    def near(self, x0: float, x1: float) -> bool:
        margin = self.r + SUBSTEP
        return any(
            ob.extent(self.r)[0] - margin < x1 and ob.extent(self.r)[1] + margin > x0
            for ob in self.obstacles
        )

    def touching(self, cx: float, cy: float) -> set:
        return {
            i
            for i, ob in enumerate(self.obstacles)
            if ob.gap(cx, cy, self.r) <= CONTACT_TOL
        }

    def contacts(self, cx: float, cy: float, phi: float) -> Tuple[Contact, ...]:
        out = []
        rise = cy - self.r
        if rise <= GROUND_RELEASE + CONTACT_TOL:
            terrain = self.scene.terrain
            into_material = cx - self.scene.material_start
            on_material = into_material >= 0
            depth = GROUND_DEPTH * max(1.0 - rise / GROUND_RELEASE, 0.0)
            out.append(
                Contact(
                    theta=self.theta(phi, -math.pi / 2),
                    kind=ContactKind.GROUND,
                    indentation_depth=depth,
                    absorption=terrain.absorption if on_material else 0.0,
                    texture=terrain.texture(into_material) if on_material else 0.0,
                )
            )
        for i in sorted(self.touching(cx, cy)):
            ob = self.obstacles[i]
            px, py = ob.nearest_point(cx, cy, self.r)
            out.append(
                Contact(
                    theta=self.theta(phi, math.atan2(py - cy, px - cx)),
                    kind=ContactKind.OBSTACLE,
                    indentation_depth=OBSTACLE_DEPTH[ob.shape],
                    obstacle_index=i,
                    obstacle_shape=ob.shape,
                )
            )
        return tuple(out[:MAX_CONTACTS])

    def initial_state(self) -> ContactState:
        cx, cy = 0.0, self.support(0.0)
        return ContactState(self.contacts(cx, cy, 0.0), (cx, cy), 0.0, 0.0)

    def advance(self, cx: float, cy: float, ds: float) -> Point:
        """Moves the centre by path length `ds` along the support curve."""
        dx = ds
        for _ in range(4):
            chord = math.hypot(dx, self.support(cx + dx) - cy)
            if chord == 0.0:
                break
            dx *= ds / chord
        return cx + dx, self.support(cx + dx)

    def touch(self, i: int, x0: float, x1: float) -> Tuple[float, float, float]:
        """Fraction of the substep [x0, x1] at which obstacle i is first touched."""
        ob = self.obstacles[i]

        def gap(x):
            return ob.gap(x, self.support(x, exclude=i), self.r)

        if gap(x0) <= 0.0 or x1 == x0:
            x = x0
        elif gap(x1) >= 0.0:
            x = x1
        else:
            x = optimize.brentq(gap, x0, x1, xtol=1e-14)
        s = 0.0 if x1 == x0 else (x - x0) / (x1 - x0)
        return s, x, self.support(x, exclude=i)

    def event(self, kind, i, t_ex, phi, cx, cy) -> ContactEvent:
        px, py = self.obstacles[i].nearest_point(cx, cy, self.r)
        return ContactEvent(
            t_ex=t_ex,
            kind=kind,
            obstacle_index=i,
            theta_ground=self.theta(phi, -math.pi / 2),
            theta_obstacle=self.theta(phi, math.atan2(py - cy, px - cx)),
            wheel_center=(cx, cy),
        )

    def step(self, state: ContactState, dt: float) -> ContactState:
        dphi = self.geom.angular_speed * dt / 1e3
        cx, cy = state.wheel_center
        phi_end = state.wheel_angle + dphi
        stalled = state.stalled
        events = []
        arc = self.r * dphi
        if not stalled and not self.near(cx, cx + arc):
            cx, cy = cx + arc, self.support(cx + arc)
        elif not stalled:
            n = max(1, math.ceil(arc / SUBSTEP))
            ds, sub_phi, sub_t = arc / n, dphi / n, dt / n
            phi = state.wheel_angle
            in_contact = self.touching(cx, cy)
            for k in range(n):
                nx, ny = self.advance(cx, cy, ds)
                blocked = [
                    self.touch(i, cx, nx) + (i,)
                    for i, ob in enumerate(self.obstacles)
                    if not ob.surmountable and ob.gap(nx, ny, self.r) < 0
                ]
                if blocked:
                    s, tx, ty, i = min(blocked)
                    events.append(
                        self.event(
                            FlagKind.CONTACT_START,
                            i,
                            state.t_ex + (k + s) * sub_t,
                            phi + s * sub_phi,
                            tx,
                            ty,
                        )
                    )
                    cx, cy, stalled = tx, ty, True
                    logging.debug(f"wheel stalled against obstacle {i} at x={tx:.4f}")
                    break
                now = self.touching(nx, ny)
                for i in sorted(now - in_contact):
                    s, tx, ty = self.touch(i, cx, nx)
                    events.append(
                        self.event(
                            FlagKind.CONTACT_START,
                            i,
                            state.t_ex + (k + s) * sub_t,
                            phi + s * sub_phi,
                            tx,
                            ty,
                        )
                    )
                for i in sorted(in_contact - now):
                    events.append(
                        self.event(
                            FlagKind.CONTACT_END,
                            i,
                            state.t_ex + (k + 1) * sub_t,
                            phi + sub_phi,
                            nx,
                            ny,
                        )
                    )
                in_contact = now
                cx, cy = nx, ny
                phi += sub_phi
        return ContactState(
            contacts=self.contacts(cx, cy, phi_end),
            wheel_center=(cx, cy),
            t_ex=state.t_ex + dt,
            wheel_angle=phi_end,
            stalled=stalled,
            events=tuple(events),
        )


def initial_state(scene: ScenePlan, geom: SensorGeometry) -> ContactState:
    return _Track(scene, geom).initial_state()


def roll_step(
    state: ContactState, scene: ScenePlan, geom: SensorGeometry, dt: float
) -> ContactState:
    """Advances the wheel by `dt` ms of commanded rotation.

    A stalled wheel (pinned against an insurmountable obstacle) keeps turning
    in place, so its contacts slide along the tube.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return _Track(scene, geom).step(state, dt)


def default_duration(
    scene: ScenePlan, geom: SensorGeometry, preamble: float = PREAMBLE_MS
) -> float:
    """Preamble plus the time needed to roll `trial_length`, ms."""
    speed = geom.angular_speed * geom.wheel_radius
    return preamble + scene.trial_length / speed * 1e3


def run_trial(
    scene: ScenePlan,
    geom: SensorGeometry,
    duration: Optional[float] = None,
    *,
    preamble: float = PREAMBLE_MS,
    trigger_period: float = TRIGGER_PERIOD_MS,
) -> TrialResult:
    """Samples the wheel at every trigger of a trial.

    The wheel rests for `preamble` ms, then rolls at the commanded speed.
    Flags mark the exact instants obstacle contacts begin and end. Scenes
    without obstacles on a non-wood terrain get a single ContactStart flag
    when the wheel reaches the material.
    """
    scene.validate(geom)
    if duration is None:
        duration = default_duration(scene, geom, preamble)
    if duration < preamble:
        raise ValueError(
            f"duration {duration} ms does not cover the {preamble} ms preamble"
        )
    track = _Track(scene, geom)
    n_states = int(math.floor(duration / trigger_period + 1e-9))
    state = track.initial_state()
    states = [state]
    for k in range(1, n_states):
        t = k * trigger_period
        if t <= preamble:
            state = dataclasses.replace(state, t_ex=t, events=())
        else:
            if state.t_ex < preamble:
                state = dataclasses.replace(state, t_ex=preamble)
            state = track.step(state, t - state.t_ex)
        states.append(state)

    flags = [Flag(e.t_ex, e.kind) for s in states for e in s.events]
    if not scene.obstacles and scene.terrain.name != Terrain.WOOD:
        reach = preamble + scene.material_start / (
            geom.angular_speed * geom.wheel_radius
        ) * 1e3
        if reach < n_states * trigger_period:
            flags.append(Flag(reach, FlagKind.CONTACT_START))
    logging.info(
        f"simulated {scene.name}: {len(states)} states, {len(flags)} flags, "
        f"stalled={states[-1].stalled}"
    )
    return TrialResult(tuple(states), tuple(flags))


def collision_events(result: TrialResult) -> List[ContactEvent]:
    return [e for e in result.events if e.kind == FlagKind.CONTACT_START]


