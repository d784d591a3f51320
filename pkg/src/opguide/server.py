"""Newline-delimited JSON session service over TCP.

One connection is one session. The client opens with a hello naming its
interface style, then streams input messages; the server advances the
simulator one 25 Hz tick per input (lock-step), emitting state, event, and
instruction messages, and closes with a metrics message. With pacing enabled
the loop additionally sleeps to hold 25 Hz wall time; simulated time always
advances by exactly 1/25 s per tick either way.

Protocol violations get an error message and close that session only.
"""

from __future__ import annotations

import asyncio
import json

import numpy as np

from .engine import Session, compute_metrics, on_state_update, start_session
from .kinematics import DEMO_RATE_HZ, JointState, LinkParams, TaskConfig, step_sim
from .policy import InstructionPolicyModel
from .segmentation import VelocityClusterModel

_STYLES = ("bars", "circles", "none")


class ProtocolError(Exception):
    pass


def _state_message(session: Session, joint: JointState | None = None) -> dict:
    sim = session.sim
    joint = joint or sim.joint
    rec = session.log.records[-1]
    return {
        "type": "state",
        "seq": session.seq - 1,
        "t": joint.t,
        "q": np.asarray(joint.q).tolist(),
        "v": np.asarray(joint.v).tolist(),
        "ee": rec.pose.vec.tolist(),
        "bucket_load": sim.bucket_load,
        "truck_fill": sim.truck_fill,
    }


def _parse_input(msg: dict, expected_seq: int) -> np.ndarray:
    if not isinstance(msg.get("seq"), int):
        raise ProtocolError("input message needs an integer seq")
    if msg["seq"] != expected_seq:
        raise ProtocolError(
            f"input seq must be monotone: expected {expected_seq}, got {msg['seq']}"
        )
    axes = msg.get("axes")
    if not isinstance(axes, list) or len(axes) != 4:
        raise ProtocolError("axes must be a list of 4 numbers")
    try:
        arr = np.array([float(a) for a in axes])
    except (TypeError, ValueError) as exc:
        raise ProtocolError(f"non-numeric axis value: {exc}") from exc
    if (np.abs(arr) > 1.0 + 1e-9).any():
        raise ProtocolError("axis values must lie in [-1, 1]")
    return arr


class InstructionServer:
    """Serves the learned model to protocol clients."""

    def __init__(self, model: InstructionPolicyModel,
                 clusters: VelocityClusterModel, task: TaskConfig,
                 links: LinkParams, seed: int = 0, realtime: bool = False):
        self.model = model
        self.clusters = clusters
        self.task = task
        self.links = links
        self.seed = seed
        self.realtime = realtime
        self._session_counter = 0
        self._server: asyncio.base_events.Server | None = None

    async def start(self, host: str = "127.0.0.1", port: int = 0):
        self._server = await asyncio.start_server(self._handle, host, port)
        return self._server.sockets[0].getsockname()[:2]

    async def stop(self):
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()

    async def serve_forever(self):
        assert self._server is not None, "call start() first"
        async with self._server:
            await self._server.serve_forever()

    async def _handle(self, reader: asyncio.StreamReader,
                      writer: asyncio.StreamWriter):
        async def send(obj: dict):
            writer.write((json.dumps(obj) + "\n").encode())
            await writer.drain()

        try:
            try:
                hello = await self._read_message(reader)
                if hello is None or hello.get("type") != "hello":
                    raise ProtocolError("first message must be hello")
                style = hello.get("style", "bars")
                if style not in _STYLES:
                    raise ProtocolError(f"unknown style {style!r}")

                self._session_counter += 1
                session = start_session(
                    self.model, self.clusters, self.task, self.links,
                    seed=self.seed + self._session_counter, style=style,
                )
                await send(_state_message(session))
                await send(session.log.records[-1].instruction.to_dict())
                await self._run_session(session, reader, send)
                await send({"type": "metrics",
                            **compute_metrics(session.log, self.model.subgoals).to_dict()})
            except ProtocolError as exc:
                await send({"type": "error", "msg": str(exc)})
        except (ConnectionResetError, BrokenPipeError):
            pass
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionResetError, BrokenPipeError):
                pass

    async def _read_message(self, reader: asyncio.StreamReader) -> dict | None:
        line = await reader.readline()
        if not line:
            return None
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"bad JSON: {exc}") from exc
        if not isinstance(msg, dict):
            raise ProtocolError("messages must be JSON objects")
        return msg

    async def _run_session(self, session: Session, reader, send):
        dt = 1.0 / DEMO_RATE_HZ
        loop = asyncio.get_running_loop()
        next_tick = loop.time()
        expected_seq = 0
        while True:
            msg = await self._read_message(reader)
            if msg is None or msg.get("type") == "end":
                return
            if msg.get("type") != "input":
                raise ProtocolError(f"unexpected message type {msg.get('type')!r}")
            axes = _parse_input(msg, expected_seq)
            expected_seq += 1

            # report the state the command acts on (velocity = this tick's
            # command, position still pre-step), matching how demonstrations
            # are recorded; then integrate for the next tick
            sim = session.sim
            joint = JointState(
                t=sim.joint.t + dt,
                q=sim.joint.q,
                v=axes * session.max_speeds,
            )
            instruction = on_state_update(session, joint, sim.pose)
            session.log.records[-1].axes = axes

            before_events = len(sim.events)
            session.sim = step_sim(sim, axes, dt, self.task, self.links,
                                   max_speeds=session.max_speeds)

            await send(_state_message(session, joint))
            for t_ev, kind in session.sim.events[before_events:]:
                if kind == "collision":
                    await send({"type": "event", "kind": kind, "t": t_ev})
            for kind in session.log.records[-1].events:
                await send({"type": "event", "kind": kind, "t": joint.t})
            await send(instruction.to_dict())

            if self.realtime:
                next_tick += dt
                delay = next_tick - loop.time()
                if delay > 0:
                    await asyncio.sleep(delay)


def serve(model: InstructionPolicyModel, clusters: VelocityClusterModel,
          task: TaskConfig, links: LinkParams, bind: str = "127.0.0.1:7373",
          seed: int = 0, realtime: bool = False):
    """Blocking entry point used by the CLI."""
    host, _, port = bind.partition(":")
    server = InstructionServer(model, clusters, task, links, seed=seed,
                               realtime=realtime)

    async def main():
        addr = await server.start(host or "127.0.0.1", int(port or 0))
        print(f"serving on {addr[0]}:{addr[1]}", flush=True)
        await server.serve_forever()

    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        pass
