import numpy as np
import pytest

from tactire.data.cycles import ObstacleShape, SensorGeometry, Stage, Task, Terrain
from tactire.data.windowing import (
    flat_window_bounds,
    load_windows,
    make_windows,
    obstacle_window_bounds,
    PipelineConfig,
    save_windows,
    WindowReport,
)
from tactire.sim.acoustics import AcousticParams, simulate_log
from tactire.sim.scene import ObstacleKind, ObstacleSpec, ScenePlan
from tactire.sim.terrain import terrain_spec

GEOM = SensorGeometry()
CFG = PipelineConfig()


@pytest.fixture(scope="module")
def soft_log():
    scene = ScenePlan(
        terrain=terrain_spec(Terrain.SOFT),
        trial_length=0.45,
        material_start=0.2,
        name="soft-0",
        seed=1,
    )
    return simulate_log(scene, GEOM)


@pytest.fixture(scope="module")
def semicircle_log():
    scene = ScenePlan(
        obstacles=(ObstacleSpec(ObstacleKind.SEMICIRCLE, 0.02, 0.35),),
        trial_length=0.75,
        initial_wheel_angle=1.0,
        name="semi-0",
        seed=2,
    )
    return simulate_log(scene, GEOM, AcousticParams())


def test_config_validation():
    assert CFG.obstacle_shifted_length == 2100
    with pytest.raises(ValueError):
        PipelineConfig(drop_prefix=400)
    with pytest.raises(ValueError):
        PipelineConfig(terrain_window=0)


def test_window_bounds():
    assert obstacle_window_bounds(100, 300, CFG) == (85, 175)
    assert obstacle_window_bounds(5, 300, CFG) == (0, 90)
    assert obstacle_window_bounds(250, 300, CFG) is None
    assert flat_window_bounds(200, CFG) == (95, 185)
    assert flat_window_bounds(100, CFG) is None


def test_terrain_windows_start_at_material(soft_log):
    report = WindowReport()
    windows = make_windows(soft_log, Task.TERRAIN, CFG, report)
    start = soft_log.first_flag_index()
    assert len(windows) == (len(soft_log.cycles) - start) // 5
    assert report.extracted == len(windows)
    for w in windows:
        assert w.traces.shape == (5, 2000)
        assert w.stage == Stage.SHIFTED
        assert w.label.value == "Soft"
        assert w.trial_id == "soft-0"
    assert windows[0].t_ex_span[0] == soft_log.cycles[start].t_ex
    spans = [w.t_ex_span for w in windows]
    assert all(a[1] < b[0] for a, b in zip(spans, spans[1:]))


def test_wood_windows_cover_whole_trial():
    log = simulate_log(ScenePlan(trial_length=0.1, name="wood-0"), GEOM)
    windows = make_windows(log, Task.TERRAIN)
    assert len(windows) == len(log.cycles) // 5
    assert windows[0].t_ex_span[0] == 0.0


def test_terrain_without_flag_is_skipped():
    scene = ScenePlan(
        terrain=terrain_spec(Terrain.RIBBED), trial_length=0.1, material_start=0.5
    )
    log = simulate_log(scene, GEOM)
    report = WindowReport()
    assert make_windows(log, Task.TERRAIN, CFG, report) == []
    assert report.skipped == {"missing-flag": 1}


def test_obstacle_windows(semicircle_log):
    report = WindowReport()
    windows = make_windows(semicircle_log, Task.OBSTACLE_SHAPE, CFG, report)
    assert [w.label.value for w in windows] == ["SemiCircle", "Flat"]
    assert report.to_dict() == {"extracted": 2, "skipped": {}}
    obstacle, flat = windows
    flag = semicircle_log.first_flag_index()
    assert obstacle.t_ex_span[0] == semicircle_log.cycles[flag - 15].t_ex
    assert flat.t_ex_span[1] == semicircle_log.cycles[flag - 16].t_ex
    assert obstacle.obstacle_height == 0.02
    assert flat.obstacle_height is None
    for w in windows:
        assert w.traces.shape == (90, 1750)
        assert w.stage == Stage.BASELINED
        np.testing.assert_array_equal(w.traces.max(axis=1), 1.0)


def test_obstacle_task_without_contact_skips_both_windows():
    log = simulate_log(ScenePlan(trial_length=0.05), GEOM)
    report = WindowReport()
    assert make_windows(log, Task.OBSTACLE_SHAPE, CFG, report) == []
    assert report.skipped == {"missing-flag": 2}


def test_unlabelled_obstacle_still_gives_flat_window():
    scene = ScenePlan(
        obstacles=(ObstacleSpec(ObstacleKind.RECTANGLE, 0.02, 0.5),),
        trial_length=0.9,
        name="rect-0",
    )
    log = simulate_log(scene, GEOM)
    report = WindowReport()
    windows = make_windows(log, Task.OBSTACLE_SHAPE, CFG, report)
    assert [w.label.value for w in windows] == [ObstacleShape.FLAT.value]
    assert report.skipped == {"unlabelled-obstacle": 1}


def test_report_merge():
    a, b = WindowReport(extracted=3), WindowReport(extracted=1)
    a.skip("missing-flag", "x")
    b.skip("missing-flag", "y", 2)
    a.merge(b)
    assert a.to_dict() == {"extracted": 4, "skipped": {"missing-flag": 3}}


def test_save_and_load_windows(tmp_path, semicircle_log):
    windows = make_windows(semicircle_log, Task.OBSTACLE_SHAPE)
    path = str(tmp_path / "windows.npz")
    save_windows(path, windows, [2, 2])
    loaded, blocks = load_windows(path, with_blocks=True)
    assert blocks == [2, 2]
    assert [w.label for w in loaded] == [w.label for w in windows]
    assert [w.obstacle_height for w in loaded] == [0.02, None]
    assert loaded[0].trial_id == "semi-0"
    np.testing.assert_allclose(loaded[0].traces, windows[0].traces, rtol=1e-6)
    with pytest.raises(ValueError):
        save_windows(path, [])
