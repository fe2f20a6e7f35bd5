import socket
import threading
import time

import numpy as np
import pytest

from tactire.data.cycles import ExperimentLog, RangingCycle, SensorGeometry
from tactire.telemetry.frames import FrameType, TruncatedFrameError
from tactire.telemetry.server import (
    connect_and_receive,
    FrameReader,
    iter_trial_frames,
    Pace,
    receive_trial,
    serve_trial,
    TrialServer,
)


def serve_in_thread(conn, log, pace=Pace.UNPACED):
    def run():
        with conn:
            serve_trial(conn, log, pace)

    thread = threading.Thread(target=run, daemon=True)
    thread.start()
    return thread


def test_socket_round_trip(random_log):
    rng = np.random.default_rng(7)
    for _ in range(100):
        log = random_log(rng)
        server_end, client_end = socket.socketpair()
        thread = serve_in_thread(server_end, log)
        with client_end:
            received = receive_trial(client_end)
        thread.join(timeout=5)
        assert received == log


def test_realtime_pacing():
    cycles = [RangingCycle(10_000.0 + 50.0 * i, np.zeros(16)) for i in range(6)]
    log = ExperimentLog(cycles, (), SensorGeometry())
    server_end, client_end = socket.socketpair()
    thread = serve_in_thread(server_end, log, Pace.REALTIME)
    arrivals = []
    with client_end:
        for frame in FrameReader(client_end):
            if frame.frame_type == FrameType.RANGING_CYCLE:
                arrivals.append(time.monotonic())
            if frame.frame_type == FrameType.END_OF_TRIAL:
                break
    thread.join(timeout=5)
    assert len(arrivals) == 6
    assert np.median(np.diff(arrivals)) * 1e3 >= 45.0


def test_pacing_uses_experiment_time():
    cycles = [RangingCycle(50.0 * i, np.zeros(4)) for i in range(3)]
    log = ExperimentLog(cycles, (), SensorGeometry())
    now = [0.0]
    sleeps = []

    def sleep(seconds):
        sleeps.append(seconds)
        now[0] += seconds

    frames = list(
        iter_trial_frames(log, Pace.REALTIME, clock=lambda: now[0], sleep=sleep)
    )
    assert len(frames) == 5
    assert sleeps == pytest.approx([0.05, 0.05])


def test_truncated_stream():
    server_end, client_end = socket.socketpair()
    with server_end:
        server_end.sendall(b"AWTS\x01\x00")
    with client_end:
        with pytest.raises(TruncatedFrameError):
            FrameReader(client_end).read()


def test_tcp_server(random_log):
    log = random_log(np.random.default_rng(3))
    with TrialServer(log, port=0, pace=Pace.UNPACED) as server:
        host, port = server.address
        thread = threading.Thread(target=server.serve_one, daemon=True)
        thread.start()
        received = connect_and_receive(host, port, timeout=5)
        thread.join(timeout=5)
    assert received == log
