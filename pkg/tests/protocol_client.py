"""Blocking line-protocol client used as a test fixture for the service."""

from __future__ import annotations

import json
import socket


class ProtocolClient:
    def __init__(self, host: str, port: int, timeout: float = 10.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.reader = self.sock.makefile("r", encoding="utf-8")

    def send(self, obj: dict):
        self.sock.sendall((json.dumps(obj) + "\n").encode())

    def recv(self) -> dict | None:
        line = self.reader.readline()
        return json.loads(line) if line else None

    def hello(self, style: str = "bars"):
        """Open a session; returns the initial (state, instruction) pair."""
        self.send({"type": "hello", "style": style})
        return self.recv(), self.recv()

    def drive(self, axes, seq: int):
        """One lock-step tick: send input, collect messages through the
        instruction; returns (state, events, instruction)."""
        self.send({"type": "input", "seq": seq, "axes": list(axes)})
        state = None
        events = []
        while True:
            msg = self.recv()
            if msg is None:
                raise ConnectionError("server closed mid-tick")
            if msg["type"] == "state":
                state = msg
            elif msg["type"] == "event":
                events.append(msg)
            elif msg["type"] == "instruction":
                return state, events, msg
            elif msg["type"] == "error":
                raise RuntimeError(msg["msg"])

    def end(self) -> dict | None:
        """Close the session; returns the metrics message."""
        self.send({"type": "end"})
        while True:
            msg = self.recv()
            if msg is None:
                return None
            if msg["type"] in ("metrics", "error"):
                return msg

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass
