"""Traditional token-based access flow, used only as a comparison fixture.

The client logs in to a central auth server (challenge and password proof),
receives a bearer token and presents it to the device, which introspects the
token with the same server before deciding. Eight messages per successful
request, and nothing works while the server is out of reach.
"""
from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass

from ..netsim import Message, Network, SimClock


@dataclass
class BaselineResult:
    flow: str
    started: float
    outcome: str = "Pending"
    finished: float | None = None

    def to_dict(self, net: Network) -> dict:
        return {"flow": self.flow, "started_ms": self.started, "outcome": self.outcome,
                "finished_ms": self.finished, "messages_sent": net.sent[self.flow],
                "messages_delivered": net.delivered[self.flow]}


class TraditionalIAM:
    def __init__(self, net: Network, server: str, client: str, device: str,
                 password: bytes = b"correct horse", timeout: float = 10_000.0) -> None:
        self.net = net
        self.clock: SimClock = net.clock
        self.server, self.client, self.device = server, client, device
        self.password = password
        self.timeout = timeout
        self.results: dict[str, BaselineResult] = {}
        self._nonces: dict[str, bytes] = {}
        self._tokens: set[bytes] = set()
        self._ids = itertools.count()
        for name, handler in ((server, self._at_server), (client, self._at_client),
                              (device, self._at_device)):
            if name in net.handlers:
                net.set_handler(name, handler)
            else:
                net.add_node(name, handler)

    def request(self) -> BaselineResult:
        flow = f"legacy#{next(self._ids)}"
        result = self.results[flow] = BaselineResult(flow, self.clock.now)
        self.net.send(self.client, self.server, "hello", None, flow)
        self.clock.schedule(self.timeout, lambda: self._expire(result), "timeout", flow)
        return result

    def _expire(self, result: BaselineResult) -> None:
        if result.outcome == "Pending":
            result.outcome, result.finished = "TimedOut", self.clock.now

    def _proof(self, nonce: bytes) -> bytes:
        return hashlib.sha256(nonce + self.password).digest()

    def _at_server(self, msg: Message) -> None:
        send = lambda kind, body: self.net.send(self.server, msg.src, kind, body, msg.flow)
        if msg.kind == "hello":
            nonce = hashlib.sha256(f"{msg.flow}:{msg.seq}".encode()).digest()[:16]
            self._nonces[msg.flow] = nonce
            send("challenge", nonce)
        elif msg.kind == "login":
            nonce = self._nonces.pop(msg.flow, None)
            if nonce is not None and msg.body == self._proof(nonce):
                token = hashlib.sha256(b"token" + nonce).digest()
                self._tokens.add(token)
                send("token", token)
        elif msg.kind == "introspect":
            send("introspect-ok" if msg.body in self._tokens else "introspect-denied", msg.body)

    def _at_client(self, msg: Message) -> None:
        if msg.kind == "challenge":
            self.net.send(self.client, self.server, "login", self._proof(msg.body), msg.flow)
        elif msg.kind == "token":
            self.net.send(self.client, self.device, "request", msg.body, msg.flow)
        elif msg.kind == "decision":
            result = self.results.get(msg.flow)
            if result is not None and result.outcome == "Pending":
                result.outcome, result.finished = msg.body, self.clock.now

    def _at_device(self, msg: Message) -> None:
        if msg.kind == "request":
            self.net.send(self.device, self.server, "introspect", msg.body, msg.flow)
        elif msg.kind in ("introspect-ok", "introspect-denied"):
            verdict = "Granted" if msg.kind == "introspect-ok" else "Denied"
            self.net.send(self.device, self.client, "decision", verdict, msg.flow)
