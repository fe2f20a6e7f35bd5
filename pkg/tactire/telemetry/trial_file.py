"""
Trial files.

`.awts` files hold the frames of one trial verbatim. `.jsonl` files hold the
same records, one JSON object per line: the Hello header, then cycles and
flags in stream order, then an end record. Both convert losslessly.
"""
import json
import logging
from typing import Any, Dict, Iterator, List, Optional, Tuple

import numpy as np

from tactire.data.cycles import ExperimentLog, Flag, FlagKind, RangingCycle
from tactire.telemetry.frames import (
    cycle_frame,
    encode_frame,
    END_FRAME,
    flag_frame,
    Frame,
    FrameError,
    FrameType,
    hello_frame,
    iter_frames,
    log_to_frames,
    LogAssembler,
    parse_cycle,
    parse_flag,
    parse_hello,
    TrialHeader,
)

BINARY_SUFFIX = ".awts"
JSONL_SUFFIX = ".jsonl"


def _is_jsonl(path: str) -> bool:
    return str(path).endswith(JSONL_SUFFIX)


def frames_to_bytes(frames: List[Frame]) -> bytes:
    return b"".join(encode_frame(f) for f in frames)


def frame_to_record(frame: Frame) -> Dict[str, Any]:
    if frame.frame_type == FrameType.HELLO:
        return {"type": "hello", **parse_hello(frame).to_dict()}
    if frame.frame_type == FrameType.RANGING_CYCLE:
        cycle = parse_cycle(frame)
        return {
            "type": "cycle",
            "t_ex": cycle.t_ex,
            "wheel_angle": cycle.wheel_angle,
            "samples": cycle.samples.tolist(),
        }
    if frame.frame_type == FrameType.FLAG:
        flag = parse_flag(frame)
        return {"type": "flag", "t_ex": flag.t_ex, "kind": int(flag.kind)}
    return {"type": "end"}


def record_to_frame(record: Dict[str, Any]) -> Frame:
    record = dict(record)
    kind = record.pop("type", None)
    if kind == "hello":
        return hello_frame(TrialHeader.from_dict(record))
    if kind == "cycle":
        return cycle_frame(
            RangingCycle(
                t_ex=record["t_ex"],
                samples=np.asarray(record["samples"], dtype=np.uint16),
                wheel_angle=record["wheel_angle"],
            )
        )
    if kind == "flag":
        return flag_frame(Flag(record["t_ex"], FlagKind(record["kind"])))
    if kind == "end":
        return END_FRAME
    raise FrameError(f"unknown record type {kind!r}")


def frames_to_jsonl(frames: List[Frame]) -> str:
    lines = [json.dumps(frame_to_record(f), sort_keys=True) for f in frames]
    return "\n".join(lines) + "\n"


def jsonl_to_frames(text: str) -> Iterator[Frame]:
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise FrameError(f"line {lineno}: {e}") from e
        yield record_to_frame(record)


def read_frames(path: str) -> List[Frame]:
    if _is_jsonl(path):
        with open(path, "r") as f:
            return list(jsonl_to_frames(f.read()))
    with open(path, "rb") as f:
        return list(iter_frames(f.read()))


def write_frames(path: str, frames: List[Frame]):
    if _is_jsonl(path):
        with open(path, "w") as f:
            f.write(frames_to_jsonl(frames))
    else:
        with open(path, "wb") as f:
            f.write(frames_to_bytes(frames))


def write_trial(
    path: str,
    log: ExperimentLog,
    seed: Optional[int] = None,
    params: Optional[Dict[str, Any]] = None,
):
    """Writes a trial file; the encoding follows the suffix (.jsonl or binary)."""
    frames = log_to_frames(log, seed, params)
    write_frames(path, frames)
    logging.info(f"wrote {path}: {len(log.cycles)} cycles, {len(log.flags)} flags")


def read_trial(path: str) -> Tuple[ExperimentLog, TrialHeader]:
    assembler = LogAssembler()
    for frame in read_frames(path):
        assembler.add(frame)
    return assembler.log(), assembler.header


def convert_trial(src: str, dst: str):
    """Re-encodes a trial file; the encodings come from the suffixes."""
    write_frames(dst, read_frames(src))
