"""
Framed telemetry stream between the sensor node and the host.

    magic[4s] "AWTS" | version[u16] | frame_type[u8] | payload_len[u32] | payload
        | crc32[u32]

All integers are little-endian; the CRC (zlib, IEEE polynomial) covers the
header and the payload. A trial is streamed as Hello, RangingCycle and Flag
frames ordered by experiment time, then EndOfTrial.
"""
from dataclasses import dataclass, field
from enum import IntEnum
import json
from struct import Struct
from typing import Any, Dict, Iterable, Iterator, List, Optional, Tuple
import zlib

import numpy as np

from tactire.data.cycles import (
    ExperimentLog,
    Flag,
    FlagKind,
    RangingCycle,
    SAMPLE_RATE,
    SensorGeometry,
    Stage,
)
from tactire.sim.scene import ScenePlan

MAGIC = b"AWTS"
VERSION = 1
HEADER = Struct("<4sHBI")
CRC = Struct("<I")
CYCLE_HEAD = Struct("<ddI")
FLAG_PAYLOAD = Struct("<dB")
MAX_PAYLOAD = 1 << 24


class FrameType(IntEnum):
    HELLO = 0
    RANGING_CYCLE = 1
    FLAG = 2
    END_OF_TRIAL = 3


class FrameError(ValueError):
    pass


class BadMagicError(FrameError):
    pass


class VersionMismatchError(FrameError):
    pass


class CrcMismatchError(FrameError):
    pass


class TruncatedFrameError(FrameError):
    pass


class UnknownFrameTypeError(FrameError):
    pass


class StreamOrderError(FrameError):
    pass


@dataclass(frozen=True)
class Frame:
    frame_type: FrameType
    payload: bytes = b""

    @property
    def size(self) -> int:
        return HEADER.size + len(self.payload) + CRC.size


def encode_frame(frame: Frame) -> bytes:
    head = HEADER.pack(MAGIC, VERSION, int(frame.frame_type), len(frame.payload))
    body = head + frame.payload
    return body + CRC.pack(zlib.crc32(body))


def parse_header(head) -> Tuple[int, int]:
    """Checks magic and version; returns the raw frame type and payload length."""
    magic, version, frame_type, payload_len = HEADER.unpack_from(head)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {bytes(magic)!r}")
    if version != VERSION:
        raise VersionMismatchError(f"frame version {version}, expected {VERSION}")
    if payload_len > MAX_PAYLOAD:
        raise FrameError(f"payload length {payload_len} exceeds {MAX_PAYLOAD}")
    return frame_type, payload_len


def read_frame(buffer: bytes, offset: int = 0) -> Tuple[Frame, int]:
    """Decodes the frame starting at `offset`; returns it and the next offset."""
    view = memoryview(buffer)[offset:]
    if len(view) < HEADER.size:
        raise TruncatedFrameError(
            f"{len(view)} bytes left, a frame header needs {HEADER.size}"
        )
    frame_type, payload_len = parse_header(view)
    end = HEADER.size + payload_len
    if len(view) < end + CRC.size:
        raise TruncatedFrameError(
            f"frame needs {end + CRC.size} bytes, only {len(view)} available"
        )
    (crc,) = CRC.unpack_from(view, end)
    if crc != zlib.crc32(view[:end]):
        raise CrcMismatchError(f"crc {crc:#010x} does not match frame contents")
    try:
        frame_type = FrameType(frame_type)
    except ValueError as e:
        raise UnknownFrameTypeError(f"unknown frame type {frame_type}") from e
    return Frame(frame_type, bytes(view[HEADER.size : end])), offset + end + CRC.size


def decode_frame(data: bytes) -> Frame:
    frame, end = read_frame(data)
    if end != len(data):
        raise FrameError(f"{len(data) - end} trailing bytes after the frame")
    return frame


def iter_frames(buffer: bytes) -> Iterator[Frame]:
    offset = 0
    while offset < len(buffer):
        frame, offset = read_frame(buffer, offset)
        yield frame


# payloads


@dataclass(frozen=True)
class TrialHeader:
    """Contents of the Hello frame."""

    geometry: SensorGeometry = SensorGeometry()
    scene: Optional[ScenePlan] = None
    seed: Optional[int] = None
    params: Optional[Dict[str, Any]] = None
    sample_rate: float = SAMPLE_RATE
    trigger_delays: Tuple[Optional[float], ...] = field(default=())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "geometry": self.geometry.to_dict(),
            "scene": None if self.scene is None else self.scene.to_dict(),
            "seed": self.seed,
            "params": self.params,
            "sample_rate": self.sample_rate,
            "trigger_delays": list(self.trigger_delays),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "TrialHeader":
        return cls(
            geometry=SensorGeometry.from_dict(d["geometry"]),
            scene=None if d.get("scene") is None else ScenePlan.from_dict(d["scene"]),
            seed=d.get("seed"),
            params=d.get("params"),
            sample_rate=d.get("sample_rate", SAMPLE_RATE),
            trigger_delays=tuple(d.get("trigger_delays", ())),
        )

    @classmethod
    def from_log(
        cls,
        log: ExperimentLog,
        seed: Optional[int] = None,
        params: Optional[Dict[str, Any]] = None,
    ) -> "TrialHeader":
        rates = {c.sample_rate for c in log.cycles}
        if len(rates) > 1:
            raise ValueError(f"cycles mix sample rates {sorted(rates)}")
        if seed is None and log.scene is not None:
            seed = log.scene.seed
        return cls(
            geometry=log.geometry,
            scene=log.scene,
            seed=seed,
            params=params,
            sample_rate=rates.pop() if rates else SAMPLE_RATE,
            trigger_delays=tuple(c.trigger_delay for c in log.cycles),
        )


def hello_frame(header: TrialHeader) -> Frame:
    payload = json.dumps(header.to_dict(), sort_keys=True, separators=(",", ":"))
    return Frame(FrameType.HELLO, payload.encode("utf-8"))


def parse_hello(frame: Frame) -> TrialHeader:
    if not frame.payload:
        return TrialHeader()
    try:
        return TrialHeader.from_dict(json.loads(frame.payload.decode("utf-8")))
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError) as e:
        raise FrameError(f"malformed Hello payload: {e}") from e


def cycle_frame(cycle: RangingCycle) -> Frame:
    if cycle.stage != Stage.RAW:
        raise ValueError(f"only raw cycles are streamed, got {cycle.stage.value}")
    samples = np.asarray(cycle.samples, dtype="<u2")
    head = CYCLE_HEAD.pack(cycle.t_ex, cycle.wheel_angle, len(samples))
    return Frame(FrameType.RANGING_CYCLE, head + samples.tobytes())


def parse_cycle(
    frame: Frame, sample_rate: float = SAMPLE_RATE, trigger_delay=None
) -> RangingCycle:
    payload = frame.payload
    if len(payload) < CYCLE_HEAD.size:
        raise TruncatedFrameError("cycle payload shorter than its fixed fields")
    t_ex, wheel_angle, n = CYCLE_HEAD.unpack_from(payload)
    if len(payload) != CYCLE_HEAD.size + 2 * n:
        raise TruncatedFrameError(
            f"cycle payload holds {len(payload)} bytes for {n} samples"
        )
    samples = np.frombuffer(payload, dtype="<u2", offset=CYCLE_HEAD.size)
    return RangingCycle(
        t_ex=t_ex,
        samples=samples.astype(np.uint16),
        wheel_angle=wheel_angle,
        sample_rate=sample_rate,
        trigger_delay=trigger_delay,
    )


def flag_frame(flag: Flag) -> Frame:
    return Frame(FrameType.FLAG, FLAG_PAYLOAD.pack(flag.t_ex, int(flag.kind)))


def parse_flag(frame: Frame) -> Flag:
    if len(frame.payload) != FLAG_PAYLOAD.size:
        raise TruncatedFrameError(f"flag payload is {len(frame.payload)} bytes")
    t_ex, kind = FLAG_PAYLOAD.unpack(frame.payload)
    try:
        return Flag(t_ex, FlagKind(kind))
    except ValueError as e:
        raise FrameError(f"unknown flag kind {kind}") from e


END_FRAME = Frame(FrameType.END_OF_TRIAL)


def log_to_frames(
    log: ExperimentLog,
    seed: Optional[int] = None,
    params: Optional[Dict[str, Any]] = None,
) -> List[Frame]:
    """Hello, cycles with each flag before the first cycle at or after it, End."""
    frames = [hello_frame(TrialHeader.from_log(log, seed, params))]
    flags = list(log.flags)
    f = 0
    for cycle in log.cycles:
        while f < len(flags) and flags[f].t_ex <= cycle.t_ex:
            frames.append(flag_frame(flags[f]))
            f += 1
        frames.append(cycle_frame(cycle))
    frames.extend(flag_frame(flag) for flag in flags[f:])
    frames.append(END_FRAME)
    return frames


class LogAssembler:
    """Rebuilds a log from frames arriving in stream order."""

    def __init__(self):
        self.header: Optional[TrialHeader] = None
        self.cycles: List[RangingCycle] = []
        self.flags: List[Flag] = []
        self.finished = False

    def add(self, frame: Frame):
        if self.finished:
            raise StreamOrderError(f"{frame.frame_type.name} frame after EndOfTrial")
        if frame.frame_type == FrameType.HELLO:
            if self.header is not None:
                raise StreamOrderError("second Hello frame in one trial")
            self.header = parse_hello(frame)
            return
        if self.header is None:
            raise StreamOrderError(f"{frame.frame_type.name} frame before Hello")
        if frame.frame_type == FrameType.RANGING_CYCLE:
            i = len(self.cycles)
            delays = self.header.trigger_delays
            delay = delays[i] if i < len(delays) else None
            self.cycles.append(parse_cycle(frame, self.header.sample_rate, delay))
        elif frame.frame_type == FrameType.FLAG:
            self.flags.append(parse_flag(frame))
        else:
            self.finished = True

    def log(self) -> ExperimentLog:
        if not self.finished:
            raise StreamOrderError("stream ended without EndOfTrial")
        return ExperimentLog(
            cycles=tuple(self.cycles),
            flags=tuple(self.flags),
            geometry=self.header.geometry,
            scene=self.header.scene,
        )


def frames_to_log(frames: Iterable[Frame]) -> ExperimentLog:
    assembler = LogAssembler()
    for frame in frames:
        assembler.add(frame)
    return assembler.log()
