"""TCP transport: the same coordinator/worker protocol over real sockets.

Star topology: one listening coordinator, one connection per worker.  The
rare worker-to-worker send is wrapped in a Relay frame and forwarded by the
coordinator's transport layer without touching protocol state.  Worker
self-messages (queue chaining) never reach the network.

Simulated-tick scheduling does not apply here: messages are sent the moment
a handler emits them, and run statistics use wall-clock time.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading
import time

from .distrib import (COORDINATOR_ID, Coordinator, NextUnit, RunConfig,
                      WorkerNode)
from .errors import ProtocolError
from .messages import Hello, Relay, decode_message, encode_message

_HEAD = struct.Struct("<IB")


def zero_cost(delta) -> float:
    """Cost model for wall-clock runs: compute time is real, not simulated."""
    return 0.0


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        try:
            part = sock.recv(n - len(buf))
        except OSError:
            return None
        if not part:
            return None
        buf += part
    return buf


def recv_frame(sock: socket.socket) -> bytes | None:
    head = _recv_exact(sock, _HEAD.size)
    if head is None:
        return None
    length, _tag = _HEAD.unpack(head)
    payload = _recv_exact(sock, length)
    if payload is None:
        return None
    return head + payload


def send_message(sock: socket.socket, msg) -> None:
    sock.sendall(encode_message(msg))


class _WorkerThread(threading.Thread):
    def __init__(self, node: WorkerNode, host: str, port: int):
        super().__init__(daemon=True)
        self.node = node
        self.host = host
        self.port = port
        self.error: Exception | None = None

    def run(self):
        try:
            self._run()
        except Exception as exc:           # surfaced by run_tcp
            self.error = exc

    def _run(self):
        sock = socket.create_connection((self.host, self.port), timeout=60)
        start = time.monotonic()
        try:
            send_message(sock, Hello(self.node.id))
            while not self.node.done:
                frame = recv_frame(sock)
                if frame is None:
                    raise ProtocolError("coordinator connection closed early")
                self._dispatch(sock, decode_message(frame), start)
        finally:
            sock.close()

    def _dispatch(self, sock, msg, start):
        local = [(COORDINATOR_ID, msg)]
        while local:
            src, m = local.pop(0)
            now = time.monotonic() - start
            for dst, out, _t in self.node.handle(src, m, now):
                if dst == self.node.id:
                    local.append((dst, out))
                elif dst == COORDINATOR_ID:
                    send_message(sock, out)
                else:
                    send_message(sock, Relay(dst, encode_message(out)))


class TcpCoordinator:
    """Accepts worker connections and runs the coordinator message loop."""

    def __init__(self, config: RunConfig, workers: int,
                 host: str = "127.0.0.1", port: int = 0):
        self.config = config
        self.n = workers
        self.server = socket.create_server((host, port))
        self.host, self.port = self.server.getsockname()
        self.coord = Coordinator(config, list(range(1, workers + 1)))
        self.conns: dict[int, socket.socket] = {}
        self._inbox: queue.Queue = queue.Queue()

    def _reader(self, worker_id: int, sock: socket.socket):
        while True:
            frame = recv_frame(sock)
            if frame is None:
                self._inbox.put((worker_id, None))
                return
            self._inbox.put((worker_id, decode_message(frame)))

    def serve(self) -> float:
        start = time.monotonic()
        readers = []
        with self.server:
            self.server.settimeout(60)
            for _ in range(self.n):
                sock, _addr = self.server.accept()
                frame = recv_frame(sock)
                if frame is None:
                    raise ProtocolError("worker closed before Hello")
                hello = decode_message(frame)
                if not isinstance(hello, Hello):
                    raise ProtocolError("first worker message must be Hello")
                self.conns[hello.worker_id] = sock
                t = threading.Thread(target=self._reader, daemon=True,
                                     args=(hello.worker_id, sock))
                t.start()
                readers.append(t)
                self._handle(hello.worker_id, hello, start)
        while not self.coord.finished:
            src, msg = self._inbox.get(timeout=120)
            if msg is None:
                raise ProtocolError(f"worker {src} disconnected mid-run")
            if isinstance(msg, Relay):
                self.conns[msg.dst].sendall(msg.frame_bytes)
                continue
            self._handle(src, msg, start)
        for sock in self.conns.values():
            sock.close()
        return time.monotonic() - start

    def _handle(self, src, msg, start):
        now = time.monotonic() - start
        for dst, out, _t in self.coord.handle(src, msg, now):
            send_message(self.conns[dst], out)


def run_tcp(octree, config: RunConfig, workers: int,
            host: str = "127.0.0.1", port: int = 0):
    """Run one render over TCP with in-process worker threads.
    Returns (coordinator, per-worker nodes, wall seconds)."""
    config.cost_model = zero_cost
    server = TcpCoordinator(config, workers, host, port)
    nodes = {w: WorkerNode(w, octree, config, peers=workers)
             for w in range(1, workers + 1)}
    threads = [_WorkerThread(nodes[w], server.host, server.port)
               for w in nodes]
    for t in threads:
        t.start()
    wall = server.serve()
    for t in threads:
        t.join(timeout=60)
        if t.error is not None:
            raise t.error
    return server.coord, nodes, wall
