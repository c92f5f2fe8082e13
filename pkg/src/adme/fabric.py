"""Deterministic discrete-event simulation of a fabric of hosts.

Each host runs one machine (process) per installed component instance and a
management process (AMP) that heartbeats to the manager and polls the
machines on its host.  Time is an integer number of milliseconds.

Schedule, with heartbeat period ``P``, poll period ``Q`` and miss threshold
``K`` (defaults 1000, 500, 3):

* every ``P`` ms each live AMP heartbeats; then any host whose last
  heartbeat is more than ``K * P`` ms old is reported with ``HostFailed``;
* every ``Q`` ms each AMP reports machines that died since its last poll;
* scripted directives run after the ticks that share their timestamp.

So a host killed at 5000 is reported at 9000, and a process killed at 5000
is reported at 5500.
"""
from __future__ import annotations

import heapq
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .deladas import HostDecl
from .model import Endpoint, InstallStartAction, TerminateAction, UnwireAction, Wire, WireAction

__all__ = [
    "FabricError", "HostUnreachable", "UnknownInstance", "UnknownHost", "UnknownChannel",
    "EndpointBusy", "ConfigError", "ScenarioError",
    "FabricParams", "Directive", "parse_scenario",
    "FabricEvent", "ProcessFailed", "AmpHeartbeat", "HostFailed", "BundleFired",
    "ChannelBroken", "HostAdded", "Injected",
    "SimHost", "Fabric", "create_fabric",
]


class FabricError(Exception):
    pass


class HostUnreachable(FabricError):
    pass


class UnknownInstance(FabricError):
    pass


class UnknownHost(FabricError):
    pass


class UnknownChannel(FabricError):
    pass


class EndpointBusy(FabricError):
    pass


class ConfigError(FabricError):
    pass


class ScenarioError(ValueError):
    def __init__(self, message, line=0):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


@dataclass(frozen=True)
class FabricParams:
    heartbeat_ms: int = 1000
    poll_ms: int = 500
    miss_threshold: int = 3

    def __post_init__(self):
        for name in ("heartbeat_ms", "poll_ms", "miss_threshold"):
            v = getattr(self, name)
            if not isinstance(v, int) or v <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")


# -- scenarios

@dataclass(frozen=True)
class Directive:
    time: int
    kind: str  # kill-process | kill-host | add-host | stop
    args: tuple[str, ...] = ()
    attributes: tuple[tuple[str, str], ...] = ()

    def __str__(self):
        parts = [self.kind, *self.args, *(f"{k}={v}" for k, v in self.attributes)]
        return " ".join(parts)


_ARITY = {"kill-process": 2, "kill-host": 1, "add-host": 1, "stop": 0}
_ATTR_ALIASES = {"ip": "ipaddress"}


def parse_scenario(text: str) -> list[Directive]:
    out = []
    last = 0
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        words = line.split()
        if len(words) < 3 or words[0] != "at":
            raise ScenarioError(f"expected 'at <time> <directive>', got {raw.strip()!r}", n)
        if not re.fullmatch(r"\d+", words[1]):
            raise ScenarioError(f"bad time {words[1]!r}", n)
        t = int(words[1])
        if t < last:
            raise ScenarioError(f"time {t} goes backwards (previous {last})", n)
        last = t
        kind, rest = words[2], words[3:]
        if kind not in _ARITY:
            raise ScenarioError(f"unknown directive {kind!r}", n)
        args = [w for w in rest if "=" not in w]
        attrs = []
        for w in rest:
            if "=" in w:
                k, v = w.split("=", 1)
                attrs.append((_ATTR_ALIASES.get(k, k), v))
        if len(args) != _ARITY[kind]:
            raise ScenarioError(f"{kind} takes {_ARITY[kind]} argument(s)", n)
        if attrs and kind != "add-host":
            raise ScenarioError(f"{kind} takes no attributes", n)
        out.append(Directive(t, kind, tuple(args), tuple(attrs)))
    return out


# -- events

@dataclass(frozen=True)
class FabricEvent:
    time: int

    name = "EVENT"

    def fields(self) -> list[str]:
        return []

    def format(self) -> str:
        return " ".join([f"t={self.time}", self.name, *self.fields()])


@dataclass(frozen=True)
class ProcessFailed(FabricEvent):
    host: str
    instance_id: str
    reported_by: str = "AMP"

    name = "PROCESS_FAILED"

    def fields(self):
        return [self.host, self.instance_id, f"reportedBy={self.reported_by}"]


@dataclass(frozen=True)
class AmpHeartbeat(FabricEvent):
    host: str

    name = "AMP_HEARTBEAT"

    def fields(self):
        return [self.host]


@dataclass(frozen=True)
class HostFailed(FabricEvent):
    host: str
    last_heartbeat: int

    name = "HOST_FAILED"

    def fields(self):
        return [self.host, f"lastHeartbeat={self.last_heartbeat}"]


@dataclass(frozen=True)
class BundleFired(FabricEvent):
    host: str
    action: object

    name = "BUNDLE_FIRED"

    def fields(self):
        return [self.host, self.action.kind, self.action.describe()]


@dataclass(frozen=True)
class ChannelBroken(FabricEvent):
    src: Endpoint
    dst: Endpoint

    name = "CHANNEL_BROKEN"

    def fields(self):
        return [str(self.src), str(self.dst)]


@dataclass(frozen=True)
class HostAdded(FabricEvent):
    host: str
    attributes: tuple[tuple[str, str], ...] = ()

    name = "HOST_ADDED"

    def fields(self):
        return [self.host, *(f"{k}={v}" for k, v in self.attributes)]


@dataclass(frozen=True)
class Injected(FabricEvent):
    directive: Directive

    name = "INJECT"

    def fields(self):
        return [str(self.directive)]


# -- hosts

@dataclass
class SimHost:
    name: str
    attributes: tuple[tuple[str, str], ...] = ()
    status: str = "UP"
    machines: dict[str, str] = field(default_factory=dict)  # instance id -> type
    amp_running: bool = True
    dead: list[str] = field(default_factory=list)  # killed since the last poll

    def check(self):
        if self.status == "DOWN":
            assert not self.machines and not self.amp_running
        if self.machines:
            assert self.amp_running


_HEARTBEAT, _POLL, _DIRECTIVE = 0, 1, 2


class Fabric:
    """Single-threaded simulator; every mutation happens on its timeline."""

    def __init__(self, hosts: Iterable[HostDecl] = (), params: FabricParams | None = None, seed: int = 0):
        self.params = params or FabricParams()
        self.seed = seed  # recorded for reproducibility; the model has no random choices
        self.now = 0
        self.hosts: dict[str, SimHost] = {}
        for h in hosts:
            if h.name in self.hosts:
                raise ConfigError(f"duplicate host {h.name}")
            self.hosts[h.name] = SimHost(h.name, tuple(h.attributes))
        self.channels: dict[Endpoint, Wire] = {}
        self.last_heartbeat = {name: 0 for name in self.hosts}
        self.reported_down: set[str] = set()
        self.log: list[str] = []
        self.fire_count = 0
        self.stopped = False
        self._queue: list = []
        self._seq = 0
        self._outbox: list[FabricEvent] = []
        self._window: list[FabricEvent] = []
        self._delivering = False
        self._subscribers: list[Callable[[FabricEvent], None]] = []
        self._push(self.params.heartbeat_ms, _HEARTBEAT, None)
        self._push(self.params.poll_ms, _POLL, None)

    # -- plumbing

    def _push(self, t, phase, payload):
        heapq.heappush(self._queue, (t, phase, self._seq, payload))
        self._seq += 1

    def subscribe(self, callback: Callable[[FabricEvent], None]):
        self._subscribers.append(callback)

    def note(self, text: str):
        """Append a manager line to the event log at the current time."""
        self.log.append(f"t={self.now} {text}")

    def _emit(self, event: FabricEvent):
        self.log.append(event.format())
        self._window.append(event)
        self._outbox.append(event)
        self._deliver()

    def _deliver(self):
        # handlers may fire bundles, which emit more events; those are queued
        # behind the current one instead of being delivered re-entrantly
        if self._delivering:
            return
        self._delivering = True
        try:
            while self._outbox:
                event = self._outbox.pop(0)
                for cb in self._subscribers:
                    cb(event)
        finally:
            self._delivering = False

    def host(self, name: str) -> SimHost:
        try:
            return self.hosts[name]
        except KeyError:
            raise UnknownHost(name) from None

    def running(self, instance_id: str) -> bool:
        return any(instance_id in h.machines for h in self.hosts.values())

    def snapshot(self) -> dict:
        return {
            "now": self.now,
            "hosts": {n: (h.status, sorted(h.machines), h.amp_running) for n, h in sorted(self.hosts.items())},
            "channels": sorted(str(w) for w in set(self.channels.values())),
        }

    # -- bundles

    def fire(self, host: str, action) -> str:
        h = self.host(host)
        if h.status != "UP":
            raise HostUnreachable(f"host {host} is down")
        if isinstance(action, InstallStartAction):
            if action.instance_id in h.machines:
                raise EndpointBusy(f"{action.instance_id} is already running on {host}")
            h.machines[action.instance_id] = action.type_name
            h.amp_running = True
        elif isinstance(action, TerminateAction):
            if action.instance_id not in h.machines:
                raise UnknownInstance(f"{action.instance_id} is not running on {host}")
            del h.machines[action.instance_id]
            self._break_channels(action.instance_id, emit=True)
        elif isinstance(action, WireAction):
            w = action.wire
            for ep in (w.src, w.dst):
                if not self.running(ep.instance):
                    raise UnknownInstance(f"{ep.instance} is not running")
                if ep in self.channels:
                    raise EndpointBusy(f"endpoint {ep} already carries {self.channels[ep]}")
            self.channels[w.src] = w
            self.channels[w.dst] = w
        elif isinstance(action, UnwireAction):
            w = action.wire
            if self.channels.get(w.src) != w:
                raise UnknownChannel(f"no channel {w}")
            del self.channels[w.src]
            del self.channels[w.dst]
        else:
            raise TypeError(f"unknown action {action!r}")
        self.fire_count += 1
        self._emit(BundleFired(self.now, host, action))
        return "ok"

    def _break_channels(self, instance_id: str, emit: bool):
        broken = sorted({w for w in self.channels.values() if w.touches(instance_id)})
        for w in broken:
            del self.channels[w.src]
            del self.channels[w.dst]
            if emit:
                self._emit(ChannelBroken(self.now, w.src, w.dst))

    # -- scripted failures

    def inject(self, directive: Directive):
        if directive.time < self.now:
            raise ScenarioError(f"directive at {directive.time} is in the past (now {self.now})")
        self._push(directive.time, _DIRECTIVE, directive)

    def _execute(self, d: Directive):
        if d.kind == "kill-process":
            host, iid = d.args
            h = self.host(host)
            if iid not in h.machines:
                raise UnknownInstance(f"{iid} is not running on {host}")
            self._emit(Injected(self.now, d))
            del h.machines[iid]
            h.dead.append(iid)
            self._break_channels(iid, emit=True)
        elif d.kind == "kill-host":
            h = self.host(d.args[0])
            if h.status != "UP":
                raise UnknownHost(f"host {h.name} is already down")
            self._emit(Injected(self.now, d))
            h.status = "DOWN"
            h.amp_running = False
            victims = sorted(h.machines)
            h.machines.clear()
            h.dead.clear()
            for iid in victims:
                self._break_channels(iid, emit=True)
        elif d.kind == "add-host":
            name = d.args[0]
            self._emit(Injected(self.now, d))
            h = self.hosts.get(name)
            if h is None:
                h = self.hosts[name] = SimHost(name, d.attributes)
            else:
                h.attributes = d.attributes or h.attributes
            h.status = "UP"
            h.amp_running = True
            self.last_heartbeat[name] = self.now
            self.reported_down.discard(name)
            self._emit(HostAdded(self.now, name, h.attributes))
        elif d.kind == "stop":
            self._emit(Injected(self.now, d))
            self.stopped = True

    # -- ticks

    def _heartbeat_tick(self):
        p = self.params
        for name in sorted(self.hosts):
            h = self.hosts[name]
            if h.status == "UP" and h.amp_running:
                self.last_heartbeat[name] = self.now
                self._emit(AmpHeartbeat(self.now, name))
        for name in sorted(self.hosts):
            if name in self.reported_down:
                continue
            if self.now - self.last_heartbeat[name] > p.miss_threshold * p.heartbeat_ms:
                self.reported_down.add(name)
                self._emit(HostFailed(self.now, name, self.last_heartbeat[name]))
        self._push(self.now + p.heartbeat_ms, _HEARTBEAT, None)

    def _poll_tick(self):
        for name in sorted(self.hosts):
            h = self.hosts[name]
            if h.status == "UP" and h.amp_running and h.dead:
                dead, h.dead = h.dead, []
                for iid in dead:
                    self._emit(ProcessFailed(self.now, name, iid, f"AMP@{name}"))
        self._push(self.now + self.params.poll_ms, _POLL, None)

    def run_until(self, t: int) -> list[FabricEvent]:
        """Process every queued item with timestamp <= *t*; return the events."""
        if t < self.now:
            raise ValueError(f"cannot run backwards to {t} (now {self.now})")
        self._window = []
        while self._queue and self._queue[0][0] <= t and not self.stopped:
            when, phase, _, payload = heapq.heappop(self._queue)
            self.now = when
            if phase == _HEARTBEAT:
                self._heartbeat_tick()
            elif phase == _POLL:
                self._poll_tick()
            else:
                self._execute(payload)
        if not self.stopped:
            self.now = t
        events, self._window = self._window, []
        return events


def create_fabric(hosts: Iterable[HostDecl], params: FabricParams | None = None, seed: int = 0) -> Fabric:
    return Fabric(hosts, params, seed)
