import numpy as np
import pytest

from tactire.data.peaks import find_peaks, PeakParams


def local_maxima(x):
    """Index of every strict local maximum; plateaus give their midpoint."""
    n = len(x)
    out = []
    left = 1
    while left < n - 1:
        right = left
        while right + 1 < n and x[right + 1] == x[left]:
            right += 1
        if x[left - 1] < x[left] and right <= n - 2 and x[right + 1] < x[right]:
            out.append((left + right) // 2)
        left = right + 1
    return np.array(out, dtype=np.int64)


def prominence(x, peak):
    def side_min(indices):
        lowest = x[peak]
        for i in indices:
            if x[i] > x[peak]:
                break
            lowest = min(lowest, x[i])
        return lowest

    left = side_min(range(peak, -1, -1))
    right = side_min(range(peak, len(x)))
    return x[peak] - max(left, right)


def oracle(x, params):
    peaks = local_maxima(x)
    peaks = peaks[x[peaks] >= params.min_height]
    if len(peaks):
        step = np.minimum(x[peaks] - x[peaks - 1], x[peaks] - x[peaks + 1])
        peaks = peaks[step >= params.min_threshold]
    keep = np.ones(len(peaks), dtype=bool)
    # same tie order as the library
    for j in np.argsort(x[peaks])[::-1]:
        if not keep[j]:
            continue
        for k in range(len(peaks)):
            if k != j and abs(peaks[k] - peaks[j]) < params.min_distance:
                keep[k] = False
    peaks = peaks[keep]
    return np.array(
        [p for p in peaks if prominence(x, p) >= params.min_prominence], dtype=np.int64
    )


def random_params(rng):
    return PeakParams(
        ema_alpha=0.75,
        min_height=float(rng.uniform(0.01, 1.0)),
        min_distance=int(rng.integers(1, 30)),
        min_prominence=float(rng.uniform(0.01, 1.0)),
        min_threshold=float(rng.choice([0.0001, rng.uniform(0.0001, 0.2)])),
    )


def random_signal(rng):
    n = int(rng.integers(3, 201))
    kind = rng.integers(3)
    if kind == 0:
        return rng.uniform(0, 1, n)
    if kind == 1:
        # coarse levels give plateaus and equal-height ties
        return rng.integers(0, 6, n) / 5.0
    bumps = np.zeros(n)
    for _ in range(rng.integers(1, 6)):
        center, width = rng.uniform(0, n), rng.uniform(1, 15)
        z = (np.arange(n) - center) / width
        bumps += rng.uniform(0.2, 1.0) * np.exp(-0.5 * z**2)
    return bumps / bumps.max()


def test_matches_brute_force_oracle():
    rng = np.random.default_rng(2024)
    for trial in range(10_000):
        x = random_signal(rng)
        params = random_params(rng)
        got = find_peaks(x, params).indices
        np.testing.assert_array_equal(
            got, oracle(x, params), err_msg=f"signal {trial}: {x.tolist()} {params}"
        )


def test_single_triangular_bump():
    ramp = np.linspace(0, 1, 11)
    x = np.concatenate([np.zeros(10), ramp, ramp[::-1][1:], np.zeros(10)])
    peaks = find_peaks(x, PeakParams())
    np.testing.assert_array_equal(peaks.indices, [20])
    assert peaks.prominences[0] == pytest.approx(1.0)
    assert peaks.amplitudes[0] == 1.0


def test_distance_keeps_the_higher_bump():
    x = np.zeros(60)
    x[20], x[30] = 1.0, 0.8
    peaks = find_peaks(x, PeakParams(min_distance=20, min_prominence=0.5))
    np.testing.assert_array_equal(peaks.indices, [20])


def test_plateaus_fail_the_vertical_threshold():
    x = np.array([0.0, 0.2, 1.0, 1.0, 1.0, 0.2, 0.0])
    assert len(find_peaks(x, PeakParams())) == 0
    assert local_maxima(x).tolist() == [3]


def test_peak_times_and_iteration():
    x = np.zeros(400)
    x[200] = 1.0
    peaks = find_peaks(x, PeakParams(), source_cycle=4)
    assert peaks.source_cycle == 4
    assert peaks.t_r.tolist() == [1.0]
    assert list(peaks) == [(1.0, 1.0)]


def test_params_validation():
    with pytest.raises(ValueError):
        PeakParams(min_height=0.0)
    with pytest.raises(ValueError):
        PeakParams(min_distance=0)
    assert PeakParams().to_dict()["min_prominence"] == 0.6
