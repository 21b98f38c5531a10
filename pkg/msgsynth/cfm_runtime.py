"""
Operational semantics of communicating finite-state machines (CFMs).

A configuration holds one local state per machine and the contents of every
FIFO channel between ordered process pairs. Steps interleave single actions:
a send appends its payload to the tail of the channel, a receive consumes the
head. The module offers exhaustive bounded exploration with deadlock
detection, bounded enumeration of accepted words and seeded simulation.
"""

import logging
import random
from collections import deque
from dataclasses import dataclass, replace
from functools import cached_property
from typing import (
    TYPE_CHECKING,
    Dict,
    FrozenSet,
    Hashable,
    Iterable,
    List,
    Optional,
    Set,
    Tuple,
)

import networkx as nx

from msgsynth.errors import StepError
from msgsynth.msg_core import Action, Word

if TYPE_CHECKING:
    from msgsynth.choice_analysis import Prediction

logger = logging.getLogger(__name__)

Channel = Tuple[str, str]

DEFAULT_CHANNEL_BOUND = 4
DEFAULT_MAX_CONFIGS = 100_000


@dataclass(frozen=True)
class AnnotatedMessage:
    """Channel payload: a label plus the sender's current and next prediction."""

    label: str
    current: Optional["Prediction"] = None
    next: Optional["Prediction"] = None

    @property
    def is_annotated(self) -> bool:
        return self.current is not None or self.next is not None

    def stripped(self) -> "AnnotatedMessage":
        return AnnotatedMessage(self.label)

    def __str__(self) -> str:
        if not self.is_annotated:
            return self.label
        current = str(self.current) if self.current else "⊥"
        upcoming = str(self.next) if self.next else "⊥"
        return f"{self.label}<{current}; {upcoming}>"


@dataclass(frozen=True)
class Handoff:
    """Decision taken by a process when it finished the queue of a prediction."""

    process: str
    node: str
    branch: str  # promote | lead | poll | blocked


@dataclass(frozen=True)
class Transition:
    source: Hashable
    action: Action
    payload: AnnotatedMessage
    target: Hashable
    handoffs: Tuple[Handoff, ...] = ()
    # leading hand-offs taken before the action (settling an initial state)
    handoffs_before: int = 0


@dataclass(frozen=True)
class ProcessMachine:
    """Finite-state machine of one process."""

    process: str
    initial: Hashable
    states: Tuple[Hashable, ...]
    transitions: Tuple[Transition, ...]
    accepting: FrozenSet[Hashable]
    blocked: FrozenSet[Hashable] = frozenset()
    # hand-offs already taken by the settled initial state
    start_handoffs: Tuple[Handoff, ...] = ()

    @cached_property
    def outgoing(self) -> Dict[Hashable, Tuple[Transition, ...]]:
        table: Dict[Hashable, List[Transition]] = {}
        for transition in self.transitions:
            table.setdefault(transition.source, []).append(transition)
        return {state: tuple(found) for state, found in table.items()}

    def transitions_from(self, state: Hashable) -> Tuple[Transition, ...]:
        return self.outgoing.get(state, ())

    def without_accepting(self) -> "ProcessMachine":
        return replace(self, accepting=frozenset())


@dataclass(frozen=True)
class Cfm:
    machines: Tuple[ProcessMachine, ...]

    @cached_property
    def processes(self) -> Tuple[str, ...]:
        return tuple(machine.process for machine in self.machines)

    @cached_property
    def index(self) -> Dict[str, int]:
        return {process: position for position, process in enumerate(self.processes)}

    @cached_property
    def channels(self) -> Tuple[Channel, ...]:
        return tuple(
            (sender, receiver)
            for sender in self.processes
            for receiver in self.processes
            if sender != receiver
        )

    @cached_property
    def channel_index(self) -> Dict[Channel, int]:
        return {channel: position for position, channel in enumerate(self.channels)}

    def machine(self, process: str) -> ProcessMachine:
        return self.machines[self.index[process]]

    @property
    def state_count(self) -> int:
        return sum(len(machine.states) for machine in self.machines)


@dataclass(frozen=True)
class Configuration:
    locals: Tuple[Hashable, ...]
    channels: Tuple[Tuple[AnnotatedMessage, ...], ...]

    @property
    def depth(self) -> int:
        return max((len(contents) for contents in self.channels), default=0)

    @property
    def channels_empty(self) -> bool:
        return not any(self.channels)


@dataclass(frozen=True)
class Move:
    process: str
    transition: Transition

    @property
    def action(self) -> Action:
        return self.transition.action


def initial_configuration(cfm: Cfm) -> Configuration:
    return Configuration(
        locals=tuple(machine.initial for machine in cfm.machines),
        channels=tuple(() for _ in cfm.channels),
    )


def is_accepting(cfm: Cfm, c: Configuration) -> bool:
    return c.channels_empty and all(
        state in machine.accepting for machine, state in zip(cfm.machines, c.locals)
    )


def enabled(cfm: Cfm, c: Configuration) -> Tuple[Move, ...]:
    moves = []
    for machine, state in zip(cfm.machines, c.locals):
        for transition in machine.transitions_from(state):
            if transition.action.is_send:
                moves.append(Move(machine.process, transition))
                continue
            contents = c.channels[cfm.channel_index[transition.action.channel]]
            if contents and contents[0] == transition.payload:
                moves.append(Move(machine.process, transition))
    return tuple(moves)


def _apply(cfm: Cfm, c: Configuration, move: Move) -> Configuration:
    position = cfm.index[move.process]
    transition = move.transition
    locals_ = list(c.locals)
    locals_[position] = transition.target
    channels = list(c.channels)
    slot = cfm.channel_index[transition.action.channel]
    if transition.action.is_send:
        channels[slot] = channels[slot] + (transition.payload,)
    else:
        channels[slot] = channels[slot][1:]
    return Configuration(tuple(locals_), tuple(channels))


def step(cfm: Cfm, c: Configuration, move: Move) -> Configuration:
    """Execute ``move``; raises ``StepError`` if it is not enabled in ``c``."""
    if move not in enabled(cfm, c):
        raise StepError(
            f"{move.action} with payload {move.transition.payload} is not enabled"
        )
    return _apply(cfm, c, move)


@dataclass(frozen=True)
class ExplorationResult:
    cfm: Cfm
    initial: Configuration
    graph: nx.MultiDiGraph
    accepting: FrozenSet[Configuration]
    boundary: FrozenSet[Configuration]
    deadlocks: FrozenSet[Configuration]
    definite_deadlocks: FrozenSet[Configuration]
    partial: bool
    channel_bound: int
    max_configs: int

    @property
    def configurations(self) -> Tuple[Configuration, ...]:
        return tuple(self.graph.nodes)

    @property
    def boundary_hit(self) -> bool:
        return bool(self.boundary)

    @property
    def exact(self) -> bool:
        return not self.boundary

    def moves(self) -> Iterable[Tuple[Configuration, Move, Configuration]]:
        for source, target, data in self.graph.edges(data=True):
            yield source, data["move"], target

    def summary(self) -> Dict[str, object]:
        return {
            "configurations": self.graph.number_of_nodes(),
            "transitions": self.graph.number_of_edges(),
            "accepting": len(self.accepting),
            "deadlocks": len(self.deadlocks),
            "definite_deadlocks": len(self.definite_deadlocks),
            "boundary": len(self.boundary),
            "boundary_hit": self.boundary_hit,
            "partial": self.partial,
            "channel_bound": self.channel_bound,
            "max_configs": self.max_configs,
        }


def _backward_closure(graph: nx.MultiDiGraph, targets: Iterable[Configuration]) -> Set:
    alive = set(targets)
    queue = deque(alive)
    while queue:
        current = queue.popleft()
        for predecessor in graph.predecessors(current):
            if predecessor not in alive:
                alive.add(predecessor)
                queue.append(predecessor)
    return alive


def explore(
    cfm: Cfm,
    channel_bound: int = DEFAULT_CHANNEL_BOUND,
    max_configs: int = DEFAULT_MAX_CONFIGS,
) -> ExplorationResult:
    """Breadth-first closure of ``step`` from the initial configuration.

    Configurations where a bound prunes a move are recorded as boundary.
    Deadlocks are the explored configurations with no path to an accepting
    configuration inside the explored graph; the set is exact only when the
    boundary is empty. Definite deadlocks can reach no boundary configuration
    either, so they stay deadlocks in the unbounded system.
    """
    if channel_bound < 1 or max_configs < 1:
        raise ValueError("Exploration bounds must be positive")
    start = initial_configuration(cfm)
    graph = nx.MultiDiGraph()
    graph.add_node(start)
    boundary = set()
    partial = False
    queue = deque([start])
    while queue:
        current = queue.popleft()
        for move in enabled(cfm, current):
            slot = cfm.channel_index[move.action.channel]
            if move.action.is_send and len(current.channels[slot]) >= channel_bound:
                boundary.add(current)
                continue
            target = _apply(cfm, current, move)
            if target not in graph:
                if graph.number_of_nodes() >= max_configs:
                    boundary.add(current)
                    partial = True
                    continue
                graph.add_node(target)
                queue.append(target)
            graph.add_edge(current, target, move=move)

    accepting = frozenset(c for c in graph.nodes if is_accepting(cfm, c))
    coreachable = _backward_closure(graph, accepting)
    deadlocks = frozenset(c for c in graph.nodes if c not in coreachable)
    alive = _backward_closure(graph, accepting | boundary)
    definite = frozenset(c for c in deadlocks if c not in alive)
    result = ExplorationResult(
        cfm=cfm,
        initial=start,
        graph=graph,
        accepting=accepting,
        boundary=frozenset(boundary),
        deadlocks=deadlocks,
        definite_deadlocks=definite,
        partial=partial,
        channel_bound=channel_bound,
        max_configs=max_configs,
    )
    logger.info(f"Exploration finished: {result.summary()}")
    return result


@dataclass(frozen=True)
class AcceptedWords:
    words: FrozenSet[Word]
    max_length: int
    partial: bool = False


def accepted_words(
    cfm: Cfm, max_length: int, max_configs: int = DEFAULT_MAX_CONFIGS
) -> AcceptedWords:
    """Accepted words of length at most ``max_length``."""
    found: Set[Word] = set()
    frontier: Dict[Configuration, Set[Word]] = {initial_configuration(cfm): {()}}
    partial = False
    for length in range(max_length + 1):
        next_frontier: Dict[Configuration, Set[Word]] = {}
        for config, words in frontier.items():
            if is_accepting(cfm, config):
                found |= words
            if length == max_length:
                continue
            for move in enabled(cfm, config):
                target = _apply(cfm, config, move)
                if target not in next_frontier:
                    if len(next_frontier) >= max_configs:
                        partial = True
                        continue
                    next_frontier[target] = set()
                next_frontier[target].update(word + (move.action,) for word in words)
        frontier = next_frontier
        if not frontier:
            break
    if partial:
        logger.warning(f"Word enumeration truncated at {max_configs} configurations")
    return AcceptedWords(frozenset(found), max_length, partial)


@dataclass(frozen=True)
class Trace:
    steps: Tuple[Tuple[Move, Configuration], ...]
    initial: Configuration
    accepting: bool
    truncated: bool
    seed: int

    @property
    def word(self) -> Word:
        return tuple(move.action for move, _ in self.steps)

    @property
    def final(self) -> Configuration:
        return self.steps[-1][1] if self.steps else self.initial


def simulate(
    cfm: Cfm, seed: int = 0, max_steps: int = 200, policy: str = "random"
) -> Trace:
    """Run one resolution of the nondeterminism, reproducible per ``seed``."""
    if policy not in ("random", "first"):
        raise ValueError(f"Unknown scheduling policy {policy!r}")
    rng = random.Random(seed)
    start = initial_configuration(cfm)
    current = start
    steps = []
    truncated = False
    while True:
        moves = enabled(cfm, current)
        if not moves:
            break
        if len(steps) >= max_steps:
            truncated = True
            break
        move = moves[0] if policy == "first" else rng.choice(moves)
        current = _apply(cfm, current, move)
        steps.append((move, current))
    trace = Trace(tuple(steps), start, is_accepting(cfm, current), truncated, seed)
    logger.debug(
        f"Simulation seed={seed}: {len(steps)} steps, accepting={trace.accepting}"
    )
    return trace


def render_channels(cfm: Cfm, c: Configuration) -> str:
    busy = [
        f"{sender}->{receiver}: " + " ".join(str(payload) for payload in contents)
        for (sender, receiver), contents in zip(cfm.channels, c.channels)
        if contents
    ]
    return "; ".join(busy) if busy else "(channels empty)"


def render_trace(cfm: Cfm, trace: Trace, channels: bool = False) -> str:
    lines = []
    for move, config in trace.steps:
        line = str(move.action)
        if channels:
            line += "    " + render_channels(cfm, config)
        lines.append(line)
    status = "accepting" if trace.accepting else "not accepting"
    if trace.truncated:
        status += ", truncated"
    lines.append(f"# {len(trace.steps)} steps, {status}")
    return "\n".join(lines)
