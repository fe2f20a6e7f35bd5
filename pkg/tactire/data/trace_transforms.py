"""
Per-trace preprocessing: send-pulse alignment, baseline removal, rectification,
normalization and exponential smoothing.
"""
from typing import List, Optional, Sequence

import numpy as np
from scipy import signal

from tactire.data.cycles import (
    BASELINED_LENGTH,
    RangingCycle,
    RAW_LENGTH,
    SAMPLE_RATE,
    SHIFTED_LENGTH,
    Stage,
)

ONSET_BASELINE_SAMPLES = 50
ONSET_SIGMAS = 6.0
BASELINE_CUTOFF_HZ = 100.0
DROP_PREFIX = 350
# rounding residue of the baseline filter on constant input stays far below this
DEGENERATE_LEVEL = 1e-9


class NoSendPulseError(ValueError):
    pass


class DegenerateTraceError(ValueError):
    pass


class StageMismatchError(ValueError):
    pass


def _require_stage(cycle: RangingCycle, stage: Stage):
    if cycle.stage != stage:
        raise StageMismatchError(
            f"expected a {stage.value} cycle, got {cycle.stage.value}"
        )


def first_order_iir(x: np.ndarray, alpha: float) -> np.ndarray:
    """y[0] = x[0]; y[i] = alpha*x[i] + (1 - alpha)*y[i-1]."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) == 0:
        return x.copy()
    y, _ = signal.lfilter([alpha], [1.0, alpha - 1.0], x, zi=[(1.0 - alpha) * x[0]])
    return y


def ema_filter(trace: np.ndarray, alpha: float = 0.75) -> np.ndarray:
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    return first_order_iir(trace, alpha)


def lowpass_alpha(cutoff: float, sample_rate: float = SAMPLE_RATE) -> float:
    """Smoothing factor of a single-pole low-pass with the given -3 dB cutoff."""
    return 1.0 - np.exp(-2.0 * np.pi * cutoff / sample_rate)


def remove_baseline(
    x: np.ndarray, cutoff: float = BASELINE_CUTOFF_HZ, sample_rate: float = SAMPLE_RATE
) -> np.ndarray:
    """Subtracts a forward single-pole low-pass copy, initialised at x[0]."""
    x = np.asarray(x, dtype=np.float64)
    return x - first_order_iir(x, lowpass_alpha(cutoff, sample_rate))


def find_send_onset(samples: np.ndarray) -> int:
    """First sample exceeding mean + 6 sigma of the leading 50 samples."""
    samples = np.asarray(samples, dtype=np.float64)
    head = samples[:ONSET_BASELINE_SAMPLES]
    threshold = head.mean() + ONSET_SIGMAS * head.std()
    above = np.flatnonzero(samples > threshold)
    if len(above) == 0:
        raise NoSendPulseError(f"no sample exceeds the onset threshold {threshold:.1f}")
    return int(above[0])


def align_and_trim(
    raw: RangingCycle, trial_mean_amplitude: float, length: int = SHIFTED_LENGTH
) -> RangingCycle:
    """Re-indexes a raw cycle so the send-pulse onset is sample 0.

    The result holds `length` samples; a record that runs out after the shift
    is padded with the trial's mean amplitude.
    """
    _require_stage(raw, Stage.RAW)
    if len(raw.samples) != RAW_LENGTH:
        raise StageMismatchError(
            f"raw cycle must hold {RAW_LENGTH} samples, got {len(raw.samples)}"
        )
    onset = find_send_onset(raw.samples)
    shifted = np.full(length, float(trial_mean_amplitude))
    kept = raw.samples[onset : onset + length].astype(np.float64)
    shifted[: len(kept)] = kept
    return raw.replace(samples=shifted, stage=Stage.SHIFTED)


def rectified(trace: np.ndarray, cutoff: float, sample_rate: float) -> np.ndarray:
    return np.abs(remove_baseline(trace, cutoff, sample_rate))


def pulse_onset(trace: np.ndarray, search: int = DROP_PREFIX) -> Optional[int]:
    """First sample above half the send-pulse peak of a rectified trace."""
    head = trace[:search]
    if len(head) == 0 or head.max() <= 0:
        return None
    return int(np.argmax(head > 0.5 * head.max()))


def realign(
    traces: Sequence[np.ndarray], search: int = DROP_PREFIX
) -> List[np.ndarray]:
    """Shifts every rectified trace left so its onset matches the batch minimum."""
    onsets = [pulse_onset(t, search) for t in traces]
    known = [o for o in onsets if o is not None]
    if not known:
        return [np.asarray(t) for t in traces]
    first = min(known)
    out = []
    for trace, onset in zip(traces, onsets):
        shift = 0 if onset is None else onset - first
        moved = np.zeros_like(trace)
        moved[: len(trace) - shift] = trace[shift:]
        out.append(moved)
    return out


def normalize_kept(
    trace: np.ndarray,
    drop_prefix: int = DROP_PREFIX,
    keep_length: int = BASELINED_LENGTH,
) -> np.ndarray:
    """Keeps samples [drop_prefix, drop_prefix + keep_length) divided by their max.

    Traces that run short are zero-padded.
    """
    kept = np.zeros(keep_length)
    tail = trace[drop_prefix : drop_prefix + keep_length]
    kept[: len(tail)] = tail
    peak = kept.max()
    if not peak > DEGENERATE_LEVEL:
        raise DegenerateTraceError("trace is identically zero after baselining")
    return kept / peak


def baseline_rectify_normalize_batch(
    shifted: Sequence[RangingCycle],
    cutoff: float = BASELINE_CUTOFF_HZ,
    drop_prefix: int = DROP_PREFIX,
    keep_length: int = BASELINED_LENGTH,
) -> List[RangingCycle]:
    """Baseline removal, rectification, batch re-alignment and normalization."""
    for cycle in shifted:
        _require_stage(cycle, Stage.SHIFTED)
    traces = [rectified(c.samples, cutoff, c.sample_rate) for c in shifted]
    traces = realign(traces, drop_prefix)
    return [
        c.replace(
            samples=normalize_kept(t, drop_prefix, keep_length), stage=Stage.BASELINED
        )
        for c, t in zip(shifted, traces)
    ]


def baseline_rectify_normalize(shifted: RangingCycle, cfg=None) -> RangingCycle:
    if cfg is None:
        return baseline_rectify_normalize_batch([shifted])[0]
    return baseline_rectify_normalize_batch(
        [shifted], cfg.baseline_cutoff, cfg.drop_prefix, cfg.keep_length
    )[0]


def peak_trace(
    shifted: RangingCycle,
    dead_zone: int,
    alpha: float = 0.75,
    cutoff: float = BASELINE_CUTOFF_HZ,
) -> np.ndarray:
    """Trace fed to the peak finder for contact localization.

    Baseline-removed and rectified; samples inside the dead zone (the send
    burst and the hub section of the tube) are blanked before normalizing
    by the maximum and smoothing with the EMA.
    """
    _require_stage(shifted, Stage.SHIFTED)
    trace = rectified(shifted.samples, cutoff, shifted.sample_rate)
    trace[: max(dead_zone, 0)] = 0.0
    peak = trace.max()
    if not peak > DEGENERATE_LEVEL:
        raise DegenerateTraceError("nothing beyond the dead zone")
    return ema_filter(trace / peak, alpha)
