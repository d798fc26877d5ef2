"""Deterministic discrete-event network simulator.

Time is in simulated milliseconds. Events run in (time, sequence) order, so a
fixed seed, topology and partition schedule always yield the same trace.

Messages crossing a partition at send time are dropped (or held until the
cut heals when ``queue_on_partition`` is set); messages already in flight when
a cut starts are dropped.
"""
from __future__ import annotations

import hashlib
import heapq
import itertools
import math
import random
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable


class ScheduleConflict(ValueError):
    pass


class UnknownNode(KeyError):
    pass


@dataclass
class SimEvent:
    time: float
    seq: int
    kind: str
    label: str
    action: Callable[[], Any] | None = field(default=None, repr=False)
    cancelled: bool = False

    def __lt__(self, other: "SimEvent") -> bool:
        return (self.time, self.seq) < (other.time, other.seq)


class SimClock:
    def __init__(self, start: float = 0.0) -> None:
        self.now = float(start)
        self._queue: list[SimEvent] = []
        self._seq = itertools.count()
        self.trace: list[tuple[float, int, str, str]] = []
        self._hash = hashlib.sha256()

    def schedule(self, delay: float, action: Callable[[], Any] | None, kind: str = "call",
                 label: str = "") -> SimEvent:
        if delay < 0 or math.isnan(delay):
            raise ValueError(f"cannot schedule into the past (delay={delay})")
        return self.schedule_at(self.now + delay, action, kind, label)

    def schedule_at(self, time: float, action: Callable[[], Any] | None, kind: str = "call",
                    label: str = "") -> SimEvent:
        if time < self.now:
            raise ValueError(f"cannot schedule at {time} before now={self.now}")
        ev = SimEvent(float(time), next(self._seq), kind, label, action)
        heapq.heappush(self._queue, ev)
        return ev

    @staticmethod
    def cancel(event: SimEvent | None) -> None:
        if event is not None:
            event.cancelled = True

    def record(self, kind: str, label: str) -> None:
        """Append a trace entry at the current instant without scheduling."""
        self._log(self.now, -1, kind, label)

    def _log(self, time: float, seq: int, kind: str, label: str) -> None:
        self.trace.append((time, seq, kind, label))
        self._hash.update(f"{time!r}|{seq}|{kind}|{label}\n".encode())

    def peek(self) -> float | None:
        while self._queue and self._queue[0].cancelled:
            heapq.heappop(self._queue)
        return self._queue[0].time if self._queue else None

    def run_until(self, t_end: float) -> int:
        """Execute every event with time <= ``t_end``; returns how many ran."""
        if t_end < self.now:
            raise ValueError(f"t_end={t_end} is before now={self.now}")
        executed = 0
        while self._queue and self._queue[0].time <= t_end:
            ev = heapq.heappop(self._queue)
            if ev.cancelled:
                continue
            self.now = ev.time
            self._log(ev.time, ev.seq, ev.kind, ev.label)
            if ev.action is not None:
                ev.action()
            executed += 1
        self.now = float(t_end)
        return executed

    def run(self, max_events: int = 10_000_000) -> int:
        """Drain the queue entirely."""
        executed = 0
        while self.peek() is not None and executed < max_events:
            executed += self.run_until(self.peek())
        return executed

    def trace_digest(self) -> str:
        return self._hash.hexdigest()


@dataclass(frozen=True)
class Latency:
    """Latency distribution in milliseconds."""

    dist: str = "constant"
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self) -> None:
        if self.dist not in ("constant", "uniform", "exponential"):
            raise ValueError(f"unknown latency distribution {self.dist!r}")
        if self.a < 0 or self.b < 0 or (self.dist == "uniform" and self.b < self.a):
            raise ValueError("invalid latency parameters")

    @classmethod
    def constant(cls, ms: float) -> "Latency":
        return cls("constant", ms)

    @classmethod
    def uniform(cls, low: float, high: float) -> "Latency":
        return cls("uniform", low, high)

    @classmethod
    def exponential(cls, mean: float) -> "Latency":
        return cls("exponential", mean)

    def sample(self, rng: random.Random) -> float:
        if self.dist == "constant":
            return self.a
        if self.dist == "uniform":
            return rng.uniform(self.a, self.b)
        return rng.expovariate(1.0 / self.a) if self.a > 0 else 0.0

    @property
    def mean(self) -> float:
        return (self.a + self.b) / 2 if self.dist == "uniform" else self.a

    def to_dict(self) -> dict:
        if self.dist == "constant":
            return {"dist": "constant", "ms": self.a}
        if self.dist == "uniform":
            return {"dist": "uniform", "low": self.a, "high": self.b}
        return {"dist": "exponential", "mean": self.a}

    @classmethod
    def from_dict(cls, d: dict | float | int) -> "Latency":
        if isinstance(d, (int, float)):
            return cls.constant(float(d))
        dist = d.get("dist", "constant")
        if dist == "constant":
            return cls.constant(float(d["ms"]))
        if dist == "uniform":
            return cls.uniform(float(d["low"]), float(d["high"]))
        return cls.exponential(float(d["mean"]))


@dataclass(frozen=True)
class LinkModel:
    latency: Latency = Latency.constant(10.0)
    up: bool = True


@dataclass(frozen=True)
class Cut:
    """Partition separating node sets ``a`` and ``b`` over [start, end)."""

    a: frozenset
    b: frozenset
    start: float
    end: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", frozenset(self.a))
        object.__setattr__(self, "b", frozenset(self.b))

    def separates(self, x: str, y: str) -> bool:
        return (x in self.a and y in self.b) or (x in self.b and y in self.a)

    def covers(self, t: float) -> bool:
        return self.start <= t and (self.end is None or t < self.end)

    def to_dict(self) -> dict:
        return {"a": sorted(self.a), "b": sorted(self.b), "start": self.start, "end": self.end}

    @classmethod
    def from_dict(cls, d: dict) -> "Cut":
        return cls(frozenset(d["a"]), frozenset(d["b"]), float(d["start"]),
                   None if d.get("end") is None else float(d["end"]))


def check_schedule(cuts: Iterable[Cut]) -> list[Cut]:
    """Reject empty, self-overlapping or contradictory cut entries.

    Two entries contradict each other when their windows overlap and they both
    separate some common pair of nodes, leaving the heal time ambiguous.
    """
    cuts = list(cuts)
    for c in cuts:
        if not c.a or not c.b:
            raise ScheduleConflict("cut sides must be non-empty")
        if c.a & c.b:
            raise ScheduleConflict(f"node(s) {sorted(c.a & c.b)} on both sides of a cut")
        if c.end is not None and c.end <= c.start:
            raise ScheduleConflict(f"cut ends at {c.end} before it starts at {c.start}")
    for c1, c2 in itertools.combinations(cuts, 2):
        end1 = math.inf if c1.end is None else c1.end
        end2 = math.inf if c2.end is None else c2.end
        if c1.start < end2 and c2.start < end1:
            shared = ((c1.a & c2.a) and (c1.b & c2.b)) or ((c1.a & c2.b) and (c1.b & c2.a))
            if shared:
                raise ScheduleConflict(f"overlapping cuts {c1.to_dict()} and {c2.to_dict()}")
    return cuts


@dataclass
class Message:
    src: str
    dst: str
    kind: str
    body: Any
    flow: str | None
    sent_at: float
    seq: int


@dataclass
class Channel:
    id: int
    sender: str
    receiver: str
    requested_at: float
    state: str = "queued"
    opened_at: float | None = None
    on_open: Callable[["Channel"], Any] | None = field(default=None, repr=False)


class Network:
    """Nodes, links, pub/sub topics, capped channels and scheduled partitions."""

    def __init__(self, clock: SimClock, seed: int = 0, default_link: LinkModel | None = None,
                 default_cap: int = 1_000_000, queue_on_partition: bool = False) -> None:
        self.clock = clock
        self.rng = random.Random(seed)
        self.default_link = default_link or LinkModel()
        self.default_cap = default_cap
        self.queue_on_partition = queue_on_partition
        self.handlers: dict[str, Callable[[Message], Any] | None] = {}
        self.caps: dict[str, int] = {}
        self.links: dict[frozenset, LinkModel] = {}
        self.topics: dict[str, list[str]] = defaultdict(list)
        self.cuts: list[Cut] = []
        self.active: list[Cut] = []
        self._activations: list[tuple[float, Cut]] = []
        self._held: deque[Message] = deque()
        self._msg_seq = itertools.count()
        self._chan_seq = itertools.count()
        self.open_count: Counter[str] = Counter()
        self.peak_open: Counter[str] = Counter()
        self._waiting: list[Channel] = []
        self.sent: Counter = Counter()
        self.delivered: Counter = Counter()
        self.dropped: Counter = Counter()

    # topology
    def add_node(self, name: str, handler: Callable[[Message], Any] | None = None,
                 cap: int | None = None) -> None:
        cap = self.default_cap if cap is None else cap
        if cap < 1:
            raise ValueError("concurrent channel cap must be >= 1")
        self.handlers[name] = handler
        self.caps[name] = cap

    def set_handler(self, name: str, handler: Callable[[Message], Any]) -> None:
        self._require(name)
        self.handlers[name] = handler

    def set_link(self, a: str, b: str, link: LinkModel) -> None:
        self.links[frozenset((a, b))] = link

    def link(self, a: str, b: str) -> LinkModel:
        return self.links.get(frozenset((a, b)), self.default_link)

    def _require(self, name: str) -> None:
        if name not in self.handlers:
            raise UnknownNode(name)

    # partitions
    def load_schedule(self, cuts: Iterable[Cut]) -> None:
        cuts = check_schedule([*self.cuts, *cuts])[len(self.cuts):]
        for c in cuts:
            for n in c.a | c.b:
                self._require(n)
            self.cuts.append(c)
            self.clock.schedule_at(max(c.start, self.clock.now), lambda c=c: self.cut(c),
                                   "cut", self._cut_label(c))
            if c.end is not None:
                self.clock.schedule_at(c.end, lambda c=c: self.heal(c), "heal", self._cut_label(c))

    @staticmethod
    def _cut_label(c: Cut) -> str:
        return f"{','.join(sorted(c.a))}|{','.join(sorted(c.b))}"

    def cut(self, c: Cut) -> None:
        if c not in self.active:
            self.active.append(c)
            self._activations.append((self.clock.now, c))

    def heal(self, c: Cut) -> None:
        if c in self.active:
            self.active.remove(c)
        self._release_held()

    def separated(self, a: str, b: str) -> bool:
        return any(c.separates(a, b) for c in self.active)

    def reachable(self, a: str, b: str) -> bool:
        return a == b or (self.link(a, b).up and not self.separated(a, b))

    def reachability(self, names: Iterable[str] | None = None) -> dict[tuple[str, str], bool]:
        names = sorted(self.handlers if names is None else names)
        return {(a, b): self.reachable(a, b) for a in names for b in names}

    # messaging
    def send(self, src: str, dst: str, kind: str, body: Any = None, flow: str | None = None,
             extra_delay: float = 0.0) -> Message | None:
        """Send one message; returns it if a delivery was scheduled."""
        self._require(src)
        self._require(dst)
        msg = Message(src, dst, kind, body, flow, self.clock.now, next(self._msg_seq))
        self.sent[flow] += 1
        if not self.reachable(src, dst):
            if self.queue_on_partition:
                self._held.append(msg)
                self.clock.record("hold", self._msg_label(msg))
                return None
            self.dropped[flow] += 1
            self.clock.record("drop", self._msg_label(msg))
            return None
        self._schedule_delivery(msg, extra_delay)
        return msg

    def _schedule_delivery(self, msg: Message, extra_delay: float = 0.0) -> None:
        delay = extra_delay + self.link(msg.src, msg.dst).latency.sample(self.rng)
        self.clock.schedule(delay, lambda: self._deliver(msg), "deliver", self._msg_label(msg))

    @staticmethod
    def _msg_label(msg: Message) -> str:
        return f"{msg.src}->{msg.dst} {msg.kind} #{msg.seq}"

    def _cut_since(self, msg: Message) -> bool:
        return any(msg.sent_at < t <= self.clock.now and c.separates(msg.src, msg.dst)
                   for t, c in self._activations)

    def _deliver(self, msg: Message) -> None:
        if not self.reachable(msg.src, msg.dst) or self._cut_since(msg):
            self.dropped[msg.flow] += 1
            self.clock.record("drop", self._msg_label(msg))
            return
        self.delivered[msg.flow] += 1
        handler = self.handlers[msg.dst]
        if handler is not None:
            handler(msg)

    def _release_held(self) -> None:
        keep: deque[Message] = deque()
        while self._held:
            msg = self._held.popleft()
            if self.reachable(msg.src, msg.dst):
                msg.sent_at = self.clock.now
                self._schedule_delivery(msg)
            else:
                keep.append(msg)
        self._held = keep

    def subscribe(self, topic: str, node: str) -> None:
        self._require(node)
        if node not in self.topics[topic]:
            self.topics[topic].append(node)

    def publish(self, topic: str, message: Any, sender: str, flow: str | None = None,
                extra_delay: float = 0.0) -> list[Message]:
        """Fan ``message`` out to every subscriber except the sender."""
        self._require(sender)
        out = []
        for node in self.topics.get(topic, []):
            if node == sender:
                continue
            m = self.send(sender, node, topic, message, flow, extra_delay)
            if m is not None:
                out.append(m)
        return out

    # channels
    def _has_slot(self, name: str) -> bool:
        return self.open_count[name] < self.caps[name]

    def open_channel(self, sender: str, receiver: str,
                     on_open: Callable[[Channel], Any] | None = None) -> Channel:
        """Open now if both endpoints are under their cap, else queue FIFO at the sender."""
        self._require(sender)
        self._require(receiver)
        ch = Channel(next(self._chan_seq), sender, receiver, self.clock.now, on_open=on_open)
        sender_waiting = any(w.sender == sender for w in self._waiting)
        if not sender_waiting and self._has_slot(sender) and self._has_slot(receiver):
            self._activate(ch)
        else:
            self._waiting.append(ch)
            self.clock.record("chan-queue", f"{sender}->{receiver} #{ch.id}")
        return ch

    def _activate(self, ch: Channel) -> None:
        ch.state = "open"
        ch.opened_at = self.clock.now
        for end in (ch.sender, ch.receiver):
            self.open_count[end] += 1
            self.peak_open[end] = max(self.peak_open[end], self.open_count[end])
        self.clock.record("chan-open", f"{ch.sender}->{ch.receiver} #{ch.id}")
        if ch.on_open is not None:
            self.clock.schedule(0.0, lambda: ch.on_open(ch), "chan-ready", f"#{ch.id}")

    def close_channel(self, ch: Channel) -> None:
        if ch.state == "queued":
            self._waiting.remove(ch)
            ch.state = "closed"
            return
        if ch.state != "open":
            return
        ch.state = "closed"
        for end in (ch.sender, ch.receiver):
            self.open_count[end] -= 1
        self.clock.record("chan-close", f"{ch.sender}->{ch.receiver} #{ch.id}")
        self._admit_waiting()

    def _admit_waiting(self) -> None:
        blocked: set[str] = set()
        still: list[Channel] = []
        for ch in self._waiting:
            if ch.sender not in blocked and self._has_slot(ch.sender) and self._has_slot(ch.receiver):
                self._activate(ch)
            else:
                blocked.add(ch.sender)
                still.append(ch)
        self._waiting = still

    def queued(self, sender: str | None = None) -> list[Channel]:
        return [c for c in self._waiting if sender is None or c.sender == sender]
