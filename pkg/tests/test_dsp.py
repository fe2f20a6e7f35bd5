from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
import numpy as np
import pytest

from tactire.data.cycles import (
    BASELINED_LENGTH,
    RangingCycle,
    RAW_LENGTH,
    SensorGeometry,
    SHIFTED_LENGTH,
    Stage,
)
from tactire.data.trace_transforms import (
    align_and_trim,
    baseline_rectify_normalize,
    baseline_rectify_normalize_batch,
    DegenerateTraceError,
    ema_filter,
    find_send_onset,
    lowpass_alpha,
    NoSendPulseError,
    peak_trace,
    remove_baseline,
    StageMismatchError,
)
from tactire.sim.acoustics import AcousticParams, cycle_rng, synthesize_cycle
from tactire.sim.scene import Contact, ContactKind, ContactState

GEOM = SensorGeometry()
GROUND = ContactState(
    contacts=(Contact(theta=2.5, kind=ContactKind.GROUND, indentation_depth=0.004),),
    wheel_center=(0.0, 0.135),
    t_ex=0.0,
)


def shifted(samples):
    return RangingCycle(0.0, np.asarray(samples, dtype=np.float64), stage=Stage.SHIFTED)


def ema_reference(x, alpha):
    y = np.empty(len(x))
    y[0] = x[0]
    for i in range(1, len(x)):
        y[i] = alpha * x[i] + (1 - alpha) * y[i - 1]
    return y


def test_ema_examples():
    np.testing.assert_allclose(ema_filter(np.full(10, 3.0), 0.75), 3.0)
    impulse = np.zeros(4)
    impulse[0] = 1.0
    np.testing.assert_allclose(ema_filter(impulse, 0.75), [1.0, 0.25, 0.0625, 0.015625])
    x = np.random.default_rng(0).normal(size=50)
    np.testing.assert_allclose(ema_filter(x, 1.0), x)
    with pytest.raises(ValueError):
        ema_filter(x, 0.0)


@given(
    arrays(np.float64, st.integers(1, 300), elements=st.floats(-1e3, 1e3)),
    st.floats(0.01, 1.0),
)
def test_ema_matches_recurrence(x, alpha):
    np.testing.assert_allclose(ema_filter(x, alpha), ema_reference(x, alpha), atol=1e-9)


def test_lowpass_alpha():
    assert lowpass_alpha(100.0, 200_000.0) == pytest.approx(1 - np.exp(-np.pi / 1000))


def test_remove_baseline_kills_dc():
    np.testing.assert_allclose(remove_baseline(np.full(500, 812.0)), 0.0, atol=1e-9)


def test_onset_detection_with_known_jitter():
    params = AcousticParams.clean(trigger_latency=2.0, trigger_jitter_max=0.0)
    raw = synthesize_cycle(GROUND, params, GEOM)
    assert raw.trigger_delay == pytest.approx(2.0)
    out = align_and_trim(raw, 512.0)
    onset = find_send_onset(raw.samples)
    assert abs(onset - 400) <= 2
    assert out.stage == Stage.SHIFTED
    assert len(out.samples) == SHIFTED_LENGTH
    np.testing.assert_array_equal(out.samples, raw.samples[onset : onset + 2000])


def test_fixed_latency_keeps_record_from_send_pulse():
    params = AcousticParams.clean(trigger_latency=0.3, trigger_jitter_max=0.0)
    raw = synthesize_cycle(GROUND, params, GEOM)
    onset = find_send_onset(raw.samples)
    assert 0 <= onset - 60 <= 2
    out = align_and_trim(raw, 512.0)
    np.testing.assert_array_equal(out.samples, raw.samples[onset : onset + 2000])


def test_jitter_is_removed_on_clean_cycles():
    params = AcousticParams.clean(rng_seed=3)
    for i in range(1000):
        raw = synthesize_cycle(GROUND, params, GEOM, cycle_rng(params, i))
        start = round(raw.trigger_delay * 200)
        assert 0 <= find_send_onset(raw.samples) - start <= 2


def test_short_record_is_padded_with_trial_mean():
    samples = np.zeros(RAW_LENGTH)
    samples[2300:2310] = 1000
    out = align_and_trim(RangingCycle(0.0, samples), trial_mean_amplitude=321.0)
    np.testing.assert_array_equal(out.samples[-300:], 321.0)
    assert out.samples[0] == 1000


def test_align_errors():
    with pytest.raises(NoSendPulseError):
        align_and_trim(RangingCycle(0.0, np.full(RAW_LENGTH, 512)), 512.0)
    with pytest.raises(StageMismatchError):
        align_and_trim(shifted(np.zeros(SHIFTED_LENGTH)), 0.0)


def test_constant_trace_is_degenerate():
    with pytest.raises(DegenerateTraceError):
        baseline_rectify_normalize(shifted(np.full(SHIFTED_LENGTH, 700.0)))


def test_impulse_lands_after_prefix():
    x = np.zeros(SHIFTED_LENGTH)
    x[1000] = 2500.0
    out = baseline_rectify_normalize(shifted(x))
    assert out.stage == Stage.BASELINED
    assert len(out.samples) == BASELINED_LENGTH
    assert out.samples.max() == 1.0
    assert int(np.argmax(out.samples)) == 650


def test_processed_batch_invariants():
    params = AcousticParams(rng_seed=9)
    raws = [
        synthesize_cycle(GROUND, params, GEOM, cycle_rng(params, i)) for i in range(20)
    ]
    mean = float(np.mean([r.samples.mean() for r in raws]))
    batch = baseline_rectify_normalize_batch([align_and_trim(r, mean) for r in raws])
    for cycle in batch:
        assert len(cycle.samples) == BASELINED_LENGTH
        assert cycle.samples.max() == 1.0
        assert cycle.samples.min() >= 0.0


def test_batch_rejects_raw_cycles():
    with pytest.raises(StageMismatchError):
        baseline_rectify_normalize_batch([RangingCycle(0.0, np.zeros(RAW_LENGTH))])


def test_peak_trace_blanks_dead_zone():
    params = AcousticParams.clean(trigger_latency=0.3, trigger_jitter_max=0.0)
    raw = synthesize_cycle(GROUND, params, GEOM)
    trace = peak_trace(align_and_trim(raw, 512.0), dead_zone=175)
    assert np.all(trace[:175] == 0.0)
    assert trace.max() <= 1.0
    expected = (2 * (0.15 + 2.5 * 0.135) / 343 * 1e3) * 200
    assert abs(int(np.argmax(trace)) - expected) <= 25


@given(
    arrays(np.float64, st.integers(1, 300), elements=st.floats(-1.0, 1.0)),
    st.floats(-2.0, 2.0),
    st.floats(-2.0, 2.0),
    st.floats(0.01, 1.0),
)
def test_ema_is_linear(x, a, b, alpha):
    y = np.random.default_rng(len(x)).uniform(-1.0, 1.0, size=len(x))
    np.testing.assert_allclose(
        ema_filter(a * x + b * y, alpha),
        a * ema_filter(x, alpha) + b * ema_filter(y, alpha),
        rtol=0,
        atol=1e-12,
    )
