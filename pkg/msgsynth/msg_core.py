"""
Formal model of basic message sequence charts (bMSCs) and message sequence
graphs (MSGs).

A chart is a finite set of send/receive events, totally ordered on every
process, with each send paired to exactly one receive. Graphs label their
nodes with charts; a path denotes the weak sequential composition of the
charts along it. This module provides validation, the visual order,
composition, projections and linearization enumeration.

Event and message ids are ``(position, name)`` pairs. ``position`` is the
index of the chart inside a composition, so events of composed charts can be
addressed individually (control events of predictions rely on this).
"""

import logging
import re
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import (
    Dict,
    FrozenSet,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
)

import networkx as nx

from msgsynth.errors import (
    CompositionError,
    GraphError,
    InvalidBmscError,
    PathError,
    SizeLimitError,
    Violation,
)

logger = logging.getLogger(__name__)

EventId = Tuple[int, str]
MessageId = Tuple[int, str]
Path = Tuple[str, ...]
Word = Tuple["Action", ...]

DEFAULT_LINEARIZATION_CAP = 12
EMPTY_BMSC_NAME = "empty"

_ACTION_PATTERN = re.compile(
    r"^(?P<owner>[^!?()\s]+)(?P<sym>[!?])(?P<peer>[^!?()\s]+)\((?P<label>[^()\s]+)\)$"
)


class EventKind(str, Enum):
    SEND = "send"
    RECEIVE = "receive"


@dataclass(frozen=True, order=True)
class Action:
    """A letter of the alphabet: ``p!q(m)`` or ``p?q(m)``."""

    owner: str
    kind: EventKind
    peer: str
    label: str

    @property
    def is_send(self) -> bool:
        return self.kind is EventKind.SEND

    @property
    def channel(self) -> Tuple[str, str]:
        """Ordered (sender, receiver) pair the action uses."""
        if self.is_send:
            return (self.owner, self.peer)
        return (self.peer, self.owner)

    def __str__(self) -> str:
        symbol = "!" if self.is_send else "?"
        return f"{self.owner}{symbol}{self.peer}({self.label})"

    @classmethod
    def parse(cls, text: str) -> "Action":
        match = _ACTION_PATTERN.match(text.strip())
        if match is None:
            raise ValueError(f"Not an action: {text!r}")
        kind = EventKind.SEND if match["sym"] == "!" else EventKind.RECEIVE
        return cls(match["owner"], kind, match["peer"], match["label"])


def parse_word(text: str) -> Word:
    """Parse a whitespace separated sequence of actions."""
    return tuple(Action.parse(token) for token in text.split())


def format_word(word: Sequence[Action]) -> str:
    return " ".join(str(action) for action in word) if word else "ε"


@dataclass(frozen=True)
class Message:
    id: MessageId
    sender: str
    receiver: str
    label: str

    @property
    def send_id(self) -> EventId:
        return (self.id[0], "!" + self.id[1])

    @property
    def receive_id(self) -> EventId:
        return (self.id[0], "?" + self.id[1])


@dataclass(frozen=True)
class Event:
    id: EventId
    process: str
    kind: EventKind
    message: Message

    @property
    def is_send(self) -> bool:
        return self.kind is EventKind.SEND

    @property
    def action(self) -> Action:
        peer = self.message.receiver if self.is_send else self.message.sender
        return Action(self.process, self.kind, peer, self.message.label)


@dataclass(frozen=True)
class Bmsc:
    """A basic message sequence chart.

    ``orders`` holds one ``(process, event ids)`` entry per process with
    events, sorted by process name. ``span`` is the number of charts composed
    into this one.
    """

    name: str
    processes: FrozenSet[str]
    messages: Tuple[Message, ...]
    orders: Tuple[Tuple[str, Tuple[EventId, ...]], ...]
    span: int = 1

    @classmethod
    def empty(cls, name: str = EMPTY_BMSC_NAME) -> "Bmsc":
        return cls(name=name, processes=frozenset(), messages=(), orders=())

    @classmethod
    def from_messages(
        cls,
        name: str,
        processes: Sequence[str],
        messages: Sequence[Tuple[str, str, str, str]],
        orders: Optional[Mapping[str, Sequence[str]]] = None,
        position: int = 0,
    ) -> "Bmsc":
        """Build a chart from ``(msg, sender, receiver, label)`` declarations.

        ``orders`` maps a process to tokens such as ``"!a"`` or ``"?b"``.
        Processes without an explicit order get their events in declaration
        order.
        """
        orders = dict(orders or {})
        built = tuple(
            Message((position, msg), sender, receiver, label)
            for msg, sender, receiver, label in messages
        )
        per_process: Dict[str, List[EventId]] = {}
        for process in processes:
            if process in orders:
                per_process[process] = [(position, token) for token in orders[process]]
                continue
            sequence = []
            for message in built:
                if message.sender == process:
                    sequence.append(message.send_id)
                if message.receiver == process:
                    sequence.append(message.receive_id)
            per_process[process] = sequence
        # Orders for undeclared processes are kept so validation can report them
        for process, tokens in orders.items():
            if process not in per_process:
                per_process[process] = [(position, token) for token in tokens]
        return cls(
            name=name,
            processes=frozenset(processes),
            messages=built,
            orders=tuple(
                (process, tuple(ids))
                for process, ids in sorted(per_process.items())
                if ids
            ),
        )

    @property
    def is_empty(self) -> bool:
        return not self.messages

    @cached_property
    def events(self) -> Dict[EventId, Event]:
        table: Dict[EventId, Event] = {}
        for message in self.messages:
            table[message.send_id] = Event(
                message.send_id, message.sender, EventKind.SEND, message
            )
            table[message.receive_id] = Event(
                message.receive_id, message.receiver, EventKind.RECEIVE, message
            )
        return table

    @cached_property
    def order_map(self) -> Dict[str, Tuple[EventId, ...]]:
        return dict(self.orders)

    def order_of(self, process: str) -> Tuple[EventId, ...]:
        return self.order_map.get(process, ())

    @cached_property
    def active_processes(self) -> FrozenSet[str]:
        return frozenset(process for process, ids in self.orders if ids)

    @cached_property
    def event_graph(self) -> nx.DiGraph:
        """Hasse-style generator of the visual order (process order + pairing)."""
        graph = nx.DiGraph()
        graph.add_nodes_from(self.events)
        for _, ids in self.orders:
            for before, after in zip(ids, ids[1:]):
                graph.add_edge(before, after)
        for message in self.messages:
            graph.add_edge(message.send_id, message.receive_id)
        return graph

    @cached_property
    def closure(self) -> nx.DiGraph:
        if not nx.is_directed_acyclic_graph(self.event_graph):
            raise InvalidBmscError(f"Visual order of {self.name} has a cycle")
        return nx.transitive_closure_dag(self.event_graph)

    def precedes(self, before: EventId, after: EventId) -> bool:
        return self.closure.has_edge(before, after)

    def later_processes(self, event_id: EventId) -> FrozenSet[str]:
        """Processes owning an event strictly after ``event_id``."""
        return frozenset(
            self.events[other].process for other in self.closure.successors(event_id)
        )

    def __str__(self) -> str:
        return f"bMSC {self.name} ({len(self.events)} events)"


def empty_bmsc(name: str = EMPTY_BMSC_NAME) -> Bmsc:
    return Bmsc.empty(name)


def _fifo_violations(b: Bmsc) -> List[Violation]:
    violations = []
    channels = {(m.sender, m.receiver) for m in b.messages}
    for sender, receiver in sorted(channels):
        sends = [
            b.events[e].message.id
            for e in b.order_of(sender)
            if b.events[e].is_send and b.events[e].message.receiver == receiver
        ]
        receives = [
            b.events[e].message.id
            for e in b.order_of(receiver)
            if not b.events[e].is_send and b.events[e].message.sender == sender
        ]
        for sent, received in zip(sends, receives):
            if sent != received:
                violations.append(
                    Violation(
                        "fifo",
                        f"messages {sent[1]} and {received[1]} overtake on "
                        f"channel {sender}->{receiver}",
                        location=b.name,
                    )
                )
                break
    return violations


def validate_bmsc(b: Bmsc) -> List[Violation]:
    """Return every invariant violation of ``b``; empty iff ``b`` is valid."""
    violations: List[Violation] = []
    for message in b.messages:
        if message.sender == message.receiver:
            violations.append(
                Violation(
                    "self-message",
                    f"message {message.id[1]} is sent by {message.sender} to itself",
                    location=b.name,
                )
            )
        for process in (message.sender, message.receiver):
            if process not in b.processes:
                violations.append(
                    Violation(
                        "unknown-process",
                        f"message {message.id[1]} uses undeclared process {process}",
                        location=b.name,
                    )
                )

    # Pairing: every event placed exactly once, on its own process
    placed: Dict[EventId, int] = {}
    for process, ids in b.orders:
        if process not in b.processes:
            violations.append(
                Violation(
                    "unknown-process",
                    f"order given for undeclared process {process}",
                    location=b.name,
                )
            )
        for event_id in ids:
            event = b.events.get(event_id)
            if event is None:
                violations.append(
                    Violation(
                        "pairing",
                        f"order of {process} references unknown event {event_id[1]}",
                        location=b.name,
                    )
                )
                continue
            if event.process != process:
                violations.append(
                    Violation(
                        "pairing",
                        f"event {event_id[1]} belongs to {event.process}, "
                        f"not {process}",
                        location=b.name,
                    )
                )
            placed[event_id] = placed.get(event_id, 0) + 1
    for event_id in b.events:
        count = placed.get(event_id, 0)
        if count != 1:
            violations.append(
                Violation(
                    "pairing",
                    f"event {event_id[1]} is placed {count} times",
                    location=b.name,
                )
            )
    if violations:
        return violations

    if not nx.is_directed_acyclic_graph(b.event_graph):
        cycle = nx.find_cycle(b.event_graph)
        violations.append(
            Violation(
                "cycle",
                "visual order is cyclic: "
                + " < ".join(edge[0][1] for edge in cycle),
                location=b.name,
            )
        )
    violations.extend(_fifo_violations(b))
    return violations


def _require_valid(b: Bmsc) -> None:
    violations = validate_bmsc(b)
    if violations:
        raise InvalidBmscError(
            f"{b.name} is not a valid bMSC: {violations[0]}", violations
        )


def visual_order(b: Bmsc) -> FrozenSet[Tuple[EventId, EventId]]:
    """Strict visual order of ``b`` as a set of ``(before, after)`` pairs."""
    if not nx.is_directed_acyclic_graph(b.event_graph):
        raise InvalidBmscError(f"Visual order of {b.name} has a cycle")
    return frozenset(b.closure.edges())


def projection_events(b: Bmsc, process: str) -> Tuple[Event, ...]:
    return tuple(b.events[event_id] for event_id in b.order_of(process))


def projection(b: Bmsc, process: str) -> Tuple[Action, ...]:
    """Actions of ``process`` in its order; unknown processes project to ()."""
    return tuple(event.action for event in projection_events(b, process))


def _shift(b: Bmsc, offset: int) -> Bmsc:
    if offset == 0:
        return b

    def moved(event_id: EventId) -> EventId:
        return (event_id[0] + offset, event_id[1])

    return Bmsc(
        name=b.name,
        processes=b.processes,
        messages=tuple(
            Message(moved(m.id), m.sender, m.receiver, m.label) for m in b.messages
        ),
        orders=tuple((p, tuple(moved(e) for e in ids)) for p, ids in b.orders),
        span=b.span,
    )


def compose(b1: Bmsc, b2: Bmsc) -> Bmsc:
    """Weak sequential composition ``b1 · b2``.

    Events of ``b2`` are renamed by shifting their position past ``b1``;
    per-process orders are concatenated.
    """
    _require_valid(b1)
    _require_valid(b2)
    shifted = _shift(b2, b1.span)
    orders: Dict[str, Tuple[EventId, ...]] = dict(b1.orders)
    for process, ids in shifted.orders:
        orders[process] = orders.get(process, ()) + ids
    result = Bmsc(
        name=f"{b1.name}.{b2.name}",
        processes=b1.processes | b2.processes,
        messages=b1.messages + shifted.messages,
        orders=tuple(sorted(orders.items())),
        span=b1.span + b2.span,
    )
    fifo = _fifo_violations(result)
    if fifo:
        raise CompositionError(
            f"composition {result.name} violates FIFO: {fifo[0].message}",
            witness=tuple(v.message for v in fifo),
        )
    return result


def canonical_form(b: Bmsc) -> Tuple[Tuple[str, Tuple[Action, ...]], ...]:
    """Isomorphism invariant of FIFO charts: the non-empty projections."""
    return tuple(
        (process, projection(b, process))
        for process in sorted(b.active_processes)
    )


def linearizations(b: Bmsc, cap: int = DEFAULT_LINEARIZATION_CAP) -> FrozenSet[Word]:
    """All linear extensions of the visual order, rendered as words."""
    size = len(b.events)
    if size > cap:
        raise SizeLimitError(
            f"{b.name} has {size} events, linearization cap is {cap}", size, cap
        )
    if size == 0:
        return frozenset({()})
    if not nx.is_directed_acyclic_graph(b.event_graph):
        raise InvalidBmscError(f"Visual order of {b.name} has a cycle")
    words = frozenset(
        tuple(b.events[event_id].action for event_id in ordering)
        for ordering in nx.all_topological_sorts(b.event_graph)
    )
    logger.debug(f"{b.name}: {len(words)} linearizations")
    return words


@dataclass(frozen=True)
class MsgGraph:
    """A message sequence graph with initial and terminal node."""

    name: str
    nodes: Tuple[str, ...]
    edges: FrozenSet[Tuple[str, str]]
    initial: str
    terminal: str
    labels: Tuple[Tuple[str, Bmsc], ...]

    @classmethod
    def build(
        cls,
        name: str,
        nodes: Sequence[str],
        edges: Sequence[Tuple[str, str]],
        initial: str,
        terminal: str,
        labels: Mapping[str, Bmsc],
    ) -> "MsgGraph":
        return cls(
            name=name,
            nodes=tuple(nodes),
            edges=frozenset(edges),
            initial=initial,
            terminal=terminal,
            labels=tuple(sorted(labels.items())),
        )

    @cached_property
    def label_map(self) -> Dict[str, Bmsc]:
        return dict(self.labels)

    def label(self, node: str) -> Bmsc:
        self.require_node(node)
        return self.label_map.get(node, Bmsc.empty())

    @cached_property
    def digraph(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(self.nodes)
        graph.add_edges_from(self.edges)
        return graph

    @cached_property
    def _successors(self) -> Dict[str, Tuple[str, ...]]:
        table: Dict[str, List[str]] = {node: [] for node in self.nodes}
        for source, target in self.edges:
            table.setdefault(source, []).append(target)
        return {node: tuple(sorted(targets)) for node, targets in table.items()}

    def successors(self, node: str) -> Tuple[str, ...]:
        self.require_node(node)
        return self._successors.get(node, ())

    @cached_property
    def processes(self) -> FrozenSet[str]:
        found = set()
        for _, chart in self.labels:
            found |= chart.processes
        return frozenset(found)

    def require_node(self, node: str) -> None:
        if node not in self.digraph:
            raise GraphError(f"Unknown node {node!r} in graph {self.name}")

    def is_choice(self, node: str) -> bool:
        return len(self.successors(node)) >= 2


def validate_graph(g: MsgGraph) -> List[Violation]:
    """Return every violation of the MSG invariants (including node labels)."""
    violations: List[Violation] = []
    known = set(g.nodes)
    for node in (g.initial, g.terminal):
        if node not in known:
            violations.append(
                Violation("unknown-node", f"{node} is not declared", location=node)
            )
    for source, target in sorted(g.edges):
        for node in (source, target):
            if node not in known:
                violations.append(
                    Violation(
                        "unknown-node",
                        f"edge {source}->{target} uses undeclared node {node}",
                        location=node,
                    )
                )
        if target == g.initial:
            violations.append(
                Violation(
                    "initial-incoming",
                    f"edge {source}->{target} enters the initial node",
                    location=target,
                )
            )
        if source == g.terminal:
            violations.append(
                Violation(
                    "terminal-outgoing",
                    f"edge {source}->{target} leaves the terminal node",
                    location=source,
                )
            )
    for node in g.nodes:
        if node not in g.label_map:
            violations.append(
                Violation("unlabeled", f"node {node} has no bMSC", location=node)
            )
    if violations:
        return violations

    reachable = nx.descendants(g.digraph, g.initial) | {g.initial}
    co_reachable = nx.ancestors(g.digraph, g.terminal) | {g.terminal}
    for node in g.nodes:
        if node not in reachable:
            violations.append(
                Violation(
                    "unreachable",
                    f"node {node} is not reachable from {g.initial}",
                    location=node,
                )
            )
        if node not in co_reachable:
            violations.append(
                Violation(
                    "dead-end",
                    f"terminal node {g.terminal} is not reachable from {node}",
                    location=node,
                )
            )
    seen = set()
    for node, chart in g.labels:
        if chart.name in seen:
            continue
        seen.add(chart.name)
        for violation in validate_bmsc(chart):
            violations.append(
                Violation(violation.code, violation.message, location=node)
            )
    return violations


def require_path(g: MsgGraph, path: Sequence[str]) -> Path:
    """Check that ``path`` is a non-empty path of ``g`` and return it as a tuple."""
    path = tuple(path)
    if not path:
        raise PathError("A path needs at least one node")
    for node in path:
        if node not in g.digraph:
            raise PathError(f"Unknown node {node!r} in path {'.'.join(path)}")
    for source, target in zip(path, path[1:]):
        if (source, target) not in g.edges:
            raise PathError(f"No edge {source}->{target} in graph {g.name}")
    return path


def require_run(g: MsgGraph, run: Sequence[str]) -> Path:
    path = require_path(g, run)
    if path[0] != g.initial or path[-1] != g.terminal:
        raise PathError(
            f"A run must lead from {g.initial} to {g.terminal}, got {'.'.join(path)}"
        )
    return path


def compose_path(g: MsgGraph, path: Sequence[str]) -> Bmsc:
    """``L(σ)``: left fold of ``compose`` over the node labels of ``path``."""
    path = require_path(g, path)
    result = g.label(path[0])
    for node in path[1:]:
        result = compose(result, g.label(node))
    return result


def enumerate_runs(g: MsgGraph, max_visits: int) -> Iterator[Path]:
    """Runs of ``g`` visiting every node at most ``max_visits`` times."""
    counts: Dict[str, int] = {node: 0 for node in g.nodes}
    stack: List[str] = []

    def extend(node: str) -> Iterator[Path]:
        if counts[node] >= max_visits:
            return
        counts[node] += 1
        stack.append(node)
        if node == g.terminal:
            yield tuple(stack)
        for successor in g.successors(node):
            yield from extend(successor)
        stack.pop()
        counts[node] -= 1

    yield from extend(g.initial)
