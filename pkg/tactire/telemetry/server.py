"""
Socket transport for trial streams: the sensor node serves one trial to one
client, the host reassembles it.
"""
from enum import Enum
import logging
import socket
import time
from typing import Any, Callable, Dict, Iterator, Optional, Tuple

from tactire.data.cycles import ExperimentLog
from tactire.telemetry.frames import (
    CRC,
    CYCLE_HEAD,
    encode_frame,
    Frame,
    FrameType,
    HEADER,
    LogAssembler,
    log_to_frames,
    parse_header,
    read_frame,
    TruncatedFrameError,
)


class Pace(str, Enum):
    REALTIME = "realtime"
    UNPACED = "unpaced"


def iter_trial_frames(
    log: ExperimentLog,
    pace: Pace = Pace.UNPACED,
    seed: Optional[int] = None,
    params: Optional[Dict[str, Any]] = None,
    clock: Callable[[], float] = time.monotonic,
    sleep: Callable[[float], None] = time.sleep,
) -> Iterator[bytes]:
    """Encoded frames of a trial.

    With realtime pacing each cycle frame is released at its experiment time
    relative to the first cycle, so cycles leave 50 ms apart.
    """
    pace = Pace(pace)
    start = None
    t0 = log.cycles[0].t_ex if log.cycles else 0.0
    for frame in log_to_frames(log, seed, params):
        if pace == Pace.REALTIME and frame.frame_type == FrameType.RANGING_CYCLE:
            (t_ex, _, _) = CYCLE_HEAD.unpack_from(frame.payload)
            if start is None:
                start = clock()
            delay = start + (t_ex - t0) / 1e3 - clock()
            if delay > 0:
                sleep(delay)
        yield encode_frame(frame)


def serve_trial(
    conn: socket.socket,
    log: ExperimentLog,
    pace: Pace = Pace.UNPACED,
    seed: Optional[int] = None,
    params: Optional[Dict[str, Any]] = None,
) -> int:
    """Streams one trial over a connected socket; returns the frames sent.

    A client that goes away ends the trial early without raising.
    """
    sent = 0
    try:
        for data in iter_trial_frames(log, pace, seed, params):
            conn.sendall(data)
            sent += 1
    except (BrokenPipeError, ConnectionResetError, ConnectionAbortedError) as e:
        logging.warning(f"client disconnected after {sent} frames: {e}")
    else:
        logging.info(f"served {sent} frames")
    return sent


class TrialServer:
    """Listens on (host, port) and serves `log` to one client at a time.

    Usage:

        >>> with TrialServer(log, port=0) as server:
        ...     host, port = server.address
        ...     server.serve_one()
    """

    def __init__(
        self,
        log: ExperimentLog,
        host: str = "127.0.0.1",
        port: int = 5005,
        pace: Pace = Pace.REALTIME,
        seed: Optional[int] = None,
        params: Optional[Dict[str, Any]] = None,
    ):
        self.log = log
        self.pace = Pace(pace)
        self.seed = seed
        self.params = params
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self.sock.bind((host, port))
        self.sock.listen(1)

    @property
    def address(self) -> Tuple[str, int]:
        return self.sock.getsockname()[:2]

    def serve_one(self) -> int:
        conn, peer = self.sock.accept()
        logging.info(f"client {peer} connected")
        with conn:
            return serve_trial(conn, self.log, self.pace, self.seed, self.params)

    def close(self):
        self.sock.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self.close()


class FrameReader:
    """Reads whole frames from a stream socket."""

    def __init__(self, sock: socket.socket):
        self.sock = sock

    def recv_exact(self, n: int) -> bytes:
        chunks = []
        remaining = n
        while remaining:
            chunk = self.sock.recv(remaining)
            if not chunk:
                break
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def read(self) -> Optional[Frame]:
        """Next frame, or None on a clean end of stream."""
        head = self.recv_exact(HEADER.size)
        if not head:
            return None
        if len(head) < HEADER.size:
            raise TruncatedFrameError("stream ended inside a frame header")
        _, payload_len = parse_header(head)
        rest = self.recv_exact(payload_len + CRC.size)
        frame, _ = read_frame(head + rest)
        return frame

    def __iter__(self) -> Iterator[Frame]:
        while True:
            frame = self.read()
            if frame is None:
                return
            yield frame


def receive_trial(sock: socket.socket) -> ExperimentLog:
    """Reassembles the trial streamed over `sock`, stopping at EndOfTrial."""
    assembler = LogAssembler()
    for frame in FrameReader(sock):
        assembler.add(frame)
        if assembler.finished:
            break
    log = assembler.log()
    logging.info(f"received {len(log.cycles)} cycles and {len(log.flags)} flags")
    return log


def connect_and_receive(host: str, port: int, timeout: Optional[float] = None):
    with socket.create_connection((host, port), timeout=timeout) as sock:
        return receive_trial(sock)
