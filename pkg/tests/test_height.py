import csv
import dataclasses
import math

from debug_config import get_base_config
import numpy as np
import pytest

from tactire.data.cycles import SensorGeometry
from tactire.data.peaks import PeakParams
from tactire.localize.height import (
    cycle_peaks,
    dead_zone_time,
    DeadZoneError,
    delta_theta_from_delta_t,
    DeltaThetaRangeError,
    EPSILON_MS,
    estimate_height,
    height_from_delta_theta,
    InsufficientPeaksError,
    peak_table,
    peak_time_to_theta,
    write_peak_table,
)
from tactire.localize.summary import box_stats, group_box_stats, write_boxplot_csv
from tactire.sim.acoustics import AcousticParams, simulate_log, synthesize_trial
from tactire.sim.experiments import height_scenes
from tactire.sim.scene import (
    collision_events,
    ObstacleKind,
    ObstacleSpec,
    PREAMBLE_MS,
    run_trial,
    ScenePlan,
)

GEOM = SensorGeometry()
CREEP = SensorGeometry(angular_speed=0.001)
# height error of a one-sample ranging-time error, worst case over the chord law
QUANTUM = GEOM.speed_of_sound * 5e-6 / 2


def step_scene(height, theta0, geom, position=0.0005, seed=0):
    obstacle = ObstacleSpec(ObstacleKind.RECTANGLE, height, position)
    return ScenePlan(
        obstacles=(obstacle,),
        trial_length=position + 0.05,
        initial_wheel_angle=theta0,
        name=f"step-{height:.3f}-{theta0:.2f}",
        seed=seed,
    )


def collision_log(scene, geom, params, epsilon=EPSILON_MS, extra_ms=1000.0):
    """Raw log of the cycles within `epsilon` of the first collision, plus its time."""
    speed = geom.angular_speed * geom.wheel_radius
    roll = scene.obstacles[0].position / speed * 1e3
    duration = PREAMBLE_MS + roll + epsilon + extra_ms
    result = run_trial(scene, geom, duration=min(duration, 60_000.0))
    t = collision_events(result)[0].t_ex
    params = dataclasses.replace(params, rng_seed=scene.seed)
    log = synthesize_trial(
        result.states, params, geom, result.flags, scene, (t - epsilon, t + epsilon)
    )
    return log, t


def test_conversions():
    assert dead_zone_time(GEOM) == pytest.approx(2 * 0.15 / 343 * 1e3)
    t_r = 2 * (0.15 + math.pi * 0.135) / 343 * 1e3
    assert peak_time_to_theta(t_r, GEOM) == pytest.approx(math.pi)
    with pytest.raises(DeadZoneError):
        peak_time_to_theta(0.5, GEOM)
    assert delta_theta_from_delta_t(0.487, GEOM) == pytest.approx(0.6187, abs=1e-3)
    with pytest.raises(DeltaThetaRangeError):
        delta_theta_from_delta_t(0.0, GEOM)
    with pytest.raises(DeltaThetaRangeError):
        delta_theta_from_delta_t(5.0, GEOM)
    assert height_from_delta_theta(0.6186, GEOM) == pytest.approx(0.025, abs=1e-5)
    assert height_from_delta_theta(1.0682, GEOM) == pytest.approx(0.07, abs=1e-5)
    assert height_from_delta_theta(math.pi, GEOM) == pytest.approx(0.27)
    with pytest.raises(DeltaThetaRangeError):
        height_from_delta_theta(0.0, GEOM)


@pytest.mark.parametrize("height_cm", range(1, 11))
@pytest.mark.parametrize("theta0", [2.0, 2.8, 3.6, 4.4, 5.2])
def test_exact_recovery_at_creep_speed(height_cm, theta0):
    h = height_cm / 100
    scene = step_scene(h, theta0, CREEP)
    log, t = collision_log(scene, CREEP, AcousticParams.clean())
    estimate = estimate_height(log, t, PeakParams(), CREEP)
    assert estimate.height_h == pytest.approx(h, abs=1e-3)
    assert estimate.n_cycles == len(log.cycles)
    assert estimate.window_t_ex == (t - EPSILON_MS, t + EPSILON_MS)


def test_rotation_compensation_on_a_stalled_wheel():
    scene = step_scene(0.07, 3.6, GEOM, position=0.05)
    log, t = collision_log(scene, GEOM, AcousticParams.clean())
    estimate = estimate_height(log, t, PeakParams(), GEOM, compensate_rotation=True)
    assert estimate.compensated
    assert estimate.height_h == pytest.approx(0.07, abs=2 * QUANTUM + 1e-3)


def test_no_peaks_in_window():
    log = simulate_log(ScenePlan(trial_length=0.05), GEOM)
    with pytest.raises(InsufficientPeaksError):
        estimate_height(log, -5000.0)
    assert cycle_peaks(log, (-10.0, -5.0)) == []


def test_peak_table_csv(tmp_path):
    scene = step_scene(0.03, 3.0, CREEP)
    log, t = collision_log(scene, CREEP, AcousticParams.clean())
    peaks = cycle_peaks(log, (t - EPSILON_MS, t + EPSILON_MS), PeakParams(), CREEP)
    rows = peak_table(log, peaks)
    assert len(rows) == sum(len(p) for p in peaks)
    assert all(r["t_r"] > dead_zone_time(CREEP) for r in rows)
    path = tmp_path / "peaks.csv"
    write_peak_table(str(path), rows)
    with open(path) as f:
        read = list(csv.DictReader(f))
    assert list(read[0]) == ["cycle_index", "t_ex", "t_r", "amplitude", "prominence"]
    assert len(read) == len(rows)


def test_box_stats():
    stats = box_stats("short", [1.0, 2.0, 3.0, 4.0, 100.0])
    assert stats.n == 5
    assert stats.median == 3.0
    assert stats.q1 == 2.0 and stats.q3 == 4.0
    assert stats.whisker_high == 4.0
    assert stats.outliers == 1
    assert stats.maximum == 100.0
    with pytest.raises(ValueError):
        box_stats("empty", [])


def test_group_box_stats_csv(tmp_path):
    stats = group_box_stats({"tall": [0.07, 0.06], "short": [0.02], "none": []})
    assert [s.group for s in stats] == ["short", "tall"]
    path = tmp_path / "boxplot.csv"
    write_boxplot_csv(str(path), stats)
    with open(path) as f:
        rows = list(csv.DictReader(f))
    assert [r["group"] for r in rows] == ["short", "tall"]
    assert float(rows[1]["median"]) == pytest.approx(0.065)


def median_heights(seed, compensate_rotation):
    groups = {"short": [], "tall": []}
    for scene in height_scenes(seed=seed):
        log, t = collision_log(scene, GEOM, AcousticParams())
        try:
            h = estimate_height(
                log, t, PeakParams(), GEOM, compensate_rotation=compensate_rotation
            )
        except (InsufficientPeaksError, DeltaThetaRangeError):
            continue
        groups["tall" if "tall" in scene.name else "short"].append(h.height_h)
    return np.median(groups["short"]), np.median(groups["tall"])


@pytest.mark.slow
def test_noisy_height_trend():
    config = get_base_config("height")
    ordered = 0
    for seed in range(20):
        short, tall = median_heights(seed, config.height.compensate_rotation)
        ordered += tall > short
        assert abs(short - 0.025) < 0.03
        assert abs(tall - 0.07) < 0.03
    assert ordered >= 19
