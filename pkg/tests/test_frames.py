import os
import zlib

import numpy as np
import pytest

from tactire.data.cycles import (
    ExperimentLog,
    Flag,
    FlagKind,
    RangingCycle,
    RAW_LENGTH,
    SensorGeometry,
    Stage,
)
from tactire.sim.scene import ScenePlan
from tactire.telemetry.frames import (
    BadMagicError,
    CrcMismatchError,
    cycle_frame,
    decode_frame,
    encode_frame,
    END_FRAME,
    flag_frame,
    Frame,
    FrameError,
    frames_to_log,
    FrameType,
    hello_frame,
    iter_frames,
    log_to_frames,
    LogAssembler,
    parse_cycle,
    parse_hello,
    StreamOrderError,
    TrialHeader,
    TruncatedFrameError,
    UnknownFrameTypeError,
    VersionMismatchError,
)

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def golden(name):
    with open(os.path.join(FIXTURES, name), "rb") as f:
        return f.read()


def test_golden_frames():
    assert encode_frame(END_FRAME) == golden("end_of_trial.bin")
    flag = Flag(15895.0, FlagKind.CONTACT_START)
    assert encode_frame(flag_frame(flag)) == golden("flag_contact_start.bin")
    cycle = RangingCycle(10050.0, np.array([512, 513, 514, 515]), wheel_angle=0.25)
    assert encode_frame(cycle_frame(cycle)) == golden("cycle_4_samples.bin")
    assert parse_cycle(decode_frame(golden("cycle_4_samples.bin"))) == cycle


def test_frame_sizes():
    assert len(encode_frame(Frame(FrameType.HELLO))) == 15
    cycle = RangingCycle(0.0, np.zeros(RAW_LENGTH))
    frame = cycle_frame(cycle)
    assert len(frame.payload) == 20 + 2 * RAW_LENGTH
    assert len(encode_frame(frame)) == frame.size


def test_only_raw_cycles_are_streamed():
    cycle = RangingCycle(0.0, np.zeros(10), stage=Stage.SHIFTED)
    with pytest.raises(ValueError):
        cycle_frame(cycle)


def test_corrupted_frames():
    data = golden("flag_contact_start.bin")
    flipped = bytearray(data)
    flipped[12] ^= 0x01
    with pytest.raises(CrcMismatchError):
        decode_frame(bytes(flipped))
    with pytest.raises(BadMagicError):
        decode_frame(b"AWTX" + data[4:])
    with pytest.raises(VersionMismatchError):
        decode_frame(data[:4] + b"\x02\x00" + data[6:])
    for cut in (3, 11, len(data) - 1):
        with pytest.raises(TruncatedFrameError):
            decode_frame(data[:cut])
    with pytest.raises(FrameError):
        decode_frame(data + b"\x00")


def test_unknown_frame_type():
    data = bytearray(encode_frame(Frame(FrameType.END_OF_TRIAL)))
    data[6] = 9
    # re-seal so only the type is wrong
    data[-4:] = zlib.crc32(bytes(data[:-4])).to_bytes(4, "little")
    with pytest.raises(UnknownFrameTypeError):
        decode_frame(bytes(data))


def test_every_error_is_a_value_error():
    for error in (BadMagicError, CrcMismatchError, TruncatedFrameError):
        assert issubclass(error, FrameError)
        assert issubclass(error, ValueError)


def test_hello_carries_scene_and_delays():
    scene = ScenePlan(trial_length=0.3, name="wood-7", seed=7)
    header = TrialHeader(
        SensorGeometry.from_rpm(8.0),
        scene,
        seed=7,
        params={"noise_std": 6.0},
        trigger_delays=(0.5, None),
    )
    parsed = parse_hello(hello_frame(header))
    assert parsed == header
    assert parse_hello(Frame(FrameType.HELLO)) == TrialHeader()
    with pytest.raises(FrameError):
        parse_hello(Frame(FrameType.HELLO, b"{not json"))


def test_frames_round_trip(random_log):
    rng = np.random.default_rng(0)
    for _ in range(100):
        log = random_log(rng)
        frames = log_to_frames(log)
        assert frames[0].frame_type == FrameType.HELLO
        assert frames[-1] == END_FRAME
        data = b"".join(encode_frame(f) for f in frames)
        back = frames_to_log(iter_frames(data))
        assert back == log
        assert [c.trigger_delay for c in back.cycles] == [
            c.trigger_delay for c in log.cycles
        ]


def test_flags_precede_their_cycle():
    cycles = [RangingCycle(50.0 * i, np.zeros(8)) for i in range(3)]
    flags = [Flag(50.0, FlagKind.CONTACT_START), Flag(120.0, FlagKind.CONTACT_END)]
    frames = log_to_frames(ExperimentLog(cycles, flags, SensorGeometry()))
    kinds = [f.frame_type for f in frames]
    assert kinds == [
        FrameType.HELLO,
        FrameType.RANGING_CYCLE,
        FrameType.FLAG,
        FrameType.RANGING_CYCLE,
        FrameType.RANGING_CYCLE,
        FrameType.FLAG,
        FrameType.END_OF_TRIAL,
    ]


def test_stream_order_errors():
    assembler = LogAssembler()
    with pytest.raises(StreamOrderError):
        assembler.add(END_FRAME)
    assembler.add(hello_frame(TrialHeader()))
    with pytest.raises(StreamOrderError):
        assembler.add(hello_frame(TrialHeader()))
    with pytest.raises(StreamOrderError):
        assembler.log()
    assembler.add(END_FRAME)
    with pytest.raises(StreamOrderError):
        assembler.add(END_FRAME)
    assert len(assembler.log()) == 0
