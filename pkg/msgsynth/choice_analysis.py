"""
Structural analysis of message sequence graphs.

Computes which processes can start the behaviour after a choice node
(triggers), the send events able to spread a decision to a set of processes
(resolving events), and from these the classification of every choice node as
local-choice, controllable-choice or uncontrollable. For controllable-choice
graphs it also enumerates the prediction paths the realization piggybacks on
messages, and partitions runs into them.

Controllability is decided on the product of the graph with a coverage
automaton. Its state is an antichain of ``(owner, covered)`` pairs: for every
candidate send seen so far on the current path, the processes that already
have an event causally after it. A path is resolved once some pair covers the
whole triggers set, and coverage only grows along a path, so resolved states
are never expanded.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from msgsynth.errors import PathError, StructuralError
from msgsynth.msg_core import (
    Bmsc,
    EventId,
    MsgGraph,
    Path,
    require_run,
)

logger = logging.getLogger(__name__)

Coverage = FrozenSet[Tuple[str, FrozenSet[str]]]
_NO_COVERAGE: Coverage = frozenset()


class ChoiceKind(str, Enum):
    LOCAL = "local-choice"
    CONTROLLABLE = "controllable-choice"
    UNCONTROLLABLE = "uncontrollable"


class GraphClass(str, Enum):
    LOCAL_CHOICE = "local-choice MSG"
    CONTROLLABLE_CHOICE = "controllable-choice MSG"
    NEITHER = "neither"


class PathKind(str, Enum):
    INITIAL = "initial"
    LOCAL_TERMINATED = "local-terminated"
    CONTROLLABLE_REVISIT = "controllable-revisit"
    TERMINAL_TERMINATED = "terminal-terminated"


@dataclass(frozen=True)
class ControllabilityVerdict:
    """Outcome of the controllability check for one choice node."""

    node: str
    controllable: bool
    counterexample: Optional[Path] = None
    # "initial" for an unresolved path from the initial node, "cycle" otherwise
    condition: Optional[str] = None


@dataclass(frozen=True)
class Classification:
    nodes: Tuple[Tuple[str, ChoiceKind], ...]
    overall: GraphClass
    counterexamples: Tuple[Tuple[str, Path], ...] = ()

    @property
    def node_map(self) -> Dict[str, ChoiceKind]:
        return dict(self.nodes)

    @property
    def is_controllable(self) -> bool:
        """True for local-choice and controllable-choice graphs alike."""
        return self.overall is not GraphClass.NEITHER

    def nodes_of(self, kind: ChoiceKind) -> FrozenSet[str]:
        return frozenset(node for node, found in self.nodes if found is kind)


@dataclass(frozen=True, order=True)
class PredictionPath:
    nodes: Path
    kind: PathKind = field(compare=False)

    @property
    def first(self) -> str:
        return self.nodes[0]

    @property
    def last(self) -> str:
        return self.nodes[-1]

    def __len__(self) -> int:
        return len(self.nodes)

    def __str__(self) -> str:
        return "[" + ",".join(self.nodes) + "]"


@dataclass(frozen=True)
class Prediction:
    """A prediction path plus its control event (``None`` stands for ⊥)."""

    path: PredictionPath
    control: Optional[EventId] = None

    @property
    def sort_key(self) -> Tuple[Path, EventId]:
        return (self.path.nodes, self.control if self.control else (-1, ""))

    def __str__(self) -> str:
        control = f"{self.control[0]}:{self.control[1]}" if self.control else "⊥"
        return f"({self.path}, {control})"


def initiating_processes(b: Bmsc) -> FrozenSet[str]:
    """Owners of the minimal events of the visual order of ``b``."""
    graph = b.event_graph
    return frozenset(
        b.events[event_id].process
        for event_id in graph.nodes
        if graph.in_degree(event_id) == 0
    )


def resolving_events(b: Bmsc, processes: Iterable[str]) -> FrozenSet[EventId]:
    """Sends of ``b`` followed by some event on every process in ``processes``."""
    wanted = frozenset(processes)
    return frozenset(
        event_id
        for event_id, event in b.events.items()
        if event.is_send and wanted <= b.later_processes(event_id)
    )


def _first_event_is_send(b: Bmsc, process: str) -> Optional[bool]:
    order = b.order_of(process)
    if not order:
        return None
    return b.events[order[0]].is_send


def _maximal(pairs: Iterable[Tuple[str, FrozenSet[str]]]) -> Coverage:
    by_owner: Dict[str, List[FrozenSet[str]]] = {}
    for owner, covered in pairs:
        by_owner.setdefault(owner, []).append(covered)
    kept = set()
    for owner, sets in by_owner.items():
        for covered in set(sets):
            if not any(covered < other for other in sets):
                kept.add((owner, covered))
    return frozenset(kept)


def advance_coverage(b: Bmsc, coverage: Coverage) -> Coverage:
    """Coverage after appending ``b`` to a path whose coverage is ``coverage``."""
    pairs = []
    for owner, covered in coverage:
        sources = covered | {owner}
        reached = set(covered)
        for event_id, event in b.events.items():
            if event.process in sources:
                reached.add(event.process)
                reached |= b.later_processes(event_id)
        pairs.append((owner, frozenset(reached)))
    for event_id, event in b.events.items():
        if event.is_send:
            pairs.append((event.process, b.later_processes(event_id)))
    return _maximal(pairs)


def _resolved(coverage: Coverage, wanted: FrozenSet[str]) -> bool:
    return any(wanted <= covered for _, covered in coverage)


class ChoiceAnalysis:
    """Per-graph analysis with cached intermediate results."""

    def __init__(self, graph: MsgGraph):
        self.graph = graph
        self._triggers: Dict[str, FrozenSet[str]] = {}
        self._verdicts: Dict[str, ControllabilityVerdict] = {}
        self._advance_cache: Dict[Tuple[str, Coverage], Coverage] = {}

    # -- triggers -----------------------------------------------------------

    def triggers(self, node: str) -> FrozenSet[str]:
        """Processes initiating some path that starts at a successor of ``node``."""
        self.graph.require_node(node)
        if node not in self._triggers:
            found = frozenset(
                process
                for process in sorted(self.graph.processes)
                if self._can_initiate(node, process)
            )
            logger.debug(f"triggers({node}) = {sorted(found)}")
            self._triggers[node] = found
        return self._triggers[node]

    def _can_initiate(self, node: str, process: str) -> bool:
        # Walk through nodes without events of ``process`` until one whose
        # first event of ``process`` is a send
        frontier = deque(self.graph.successors(node))
        seen = set(frontier)
        while frontier:
            current = frontier.popleft()
            first_is_send = _first_event_is_send(self.graph.label(current), process)
            if first_is_send:
                return True
            if first_is_send is None:
                for successor in self.graph.successors(current):
                    if successor not in seen:
                        seen.add(successor)
                        frontier.append(successor)
        return False

    # -- choice nodes -------------------------------------------------------

    @cached_property
    def choice_nodes(self) -> Tuple[str, ...]:
        return tuple(
            node for node in sorted(self.graph.nodes) if self.graph.is_choice(node)
        )

    def _require_choice(self, node: str) -> None:
        self.graph.require_node(node)
        if not self.graph.is_choice(node):
            raise StructuralError(f"{node} is not a choice node")

    def is_local_choice(self, node: str) -> bool:
        self._require_choice(node)
        return len(self.triggers(node)) == 1

    def leader(self, node: str) -> Optional[str]:
        found = self.triggers(node)
        return next(iter(found)) if len(found) == 1 else None

    def is_controllable_choice(self, node: str) -> ControllabilityVerdict:
        self._require_choice(node)
        if node not in self._verdicts:
            self._verdicts[node] = self._check_controllable(node)
        return self._verdicts[node]

    def _advance(self, node: str, coverage: Coverage) -> Coverage:
        key = (node, coverage)
        if key not in self._advance_cache:
            self._advance_cache[key] = advance_coverage(
                self.graph.label(node), coverage
            )
        return self._advance_cache[key]

    def _unresolved_path(
        self, target: str, starts: Sequence[str], wanted: FrozenSet[str]
    ) -> Optional[Path]:
        """Shortest path from a start node to ``target`` lacking a resolving event."""
        parents: Dict[Tuple[str, Coverage], Optional[Tuple[str, Coverage]]] = {}
        queue = deque()
        for start in starts:
            key = (start, self._advance(start, _NO_COVERAGE))
            if key not in parents:
                parents[key] = None
                queue.append(key)
        while queue:
            key = queue.popleft()
            node, coverage = key
            if _resolved(coverage, wanted):
                continue
            if node == target:
                path = []
                cursor: Optional[Tuple[str, Coverage]] = key
                while cursor is not None:
                    path.append(cursor[0])
                    cursor = parents[cursor]
                return tuple(reversed(path))
            for successor in self.graph.successors(node):
                next_key = (successor, self._advance(successor, coverage))
                if next_key not in parents:
                    parents[next_key] = key
                    queue.append(next_key)
        return None

    def _check_controllable(self, node: str) -> ControllabilityVerdict:
        wanted = self.triggers(node)
        witness = self._unresolved_path(node, [self.graph.initial], wanted)
        if witness is not None:
            return ControllabilityVerdict(node, False, witness, "initial")
        witness = self._unresolved_path(node, self.graph.successors(node), wanted)
        if witness is not None:
            return ControllabilityVerdict(node, False, witness, "cycle")
        return ControllabilityVerdict(node, True)

    @cached_property
    def classification(self) -> Classification:
        verdicts = []
        counterexamples = []
        for node in self.choice_nodes:
            if self.is_local_choice(node):
                verdicts.append((node, ChoiceKind.LOCAL))
                continue
            verdict = self.is_controllable_choice(node)
            if verdict.controllable:
                verdicts.append((node, ChoiceKind.CONTROLLABLE))
            else:
                verdicts.append((node, ChoiceKind.UNCONTROLLABLE))
                counterexamples.append((node, verdict.counterexample))
        kinds = {kind for _, kind in verdicts}
        if kinds <= {ChoiceKind.LOCAL}:
            overall = GraphClass.LOCAL_CHOICE
        elif ChoiceKind.UNCONTROLLABLE in kinds:
            overall = GraphClass.NEITHER
        else:
            overall = GraphClass.CONTROLLABLE_CHOICE
        logger.info(f"Graph {self.graph.name} classified as {overall.value}")
        return Classification(tuple(verdicts), overall, tuple(counterexamples))

    @property
    def local_nodes(self) -> FrozenSet[str]:
        return self.classification.nodes_of(ChoiceKind.LOCAL)

    @property
    def controllable_nodes(self) -> FrozenSet[str]:
        return self.classification.nodes_of(ChoiceKind.CONTROLLABLE)

    # -- prediction paths ---------------------------------------------------

    def require_controllable(self) -> None:
        if not self.classification.is_controllable:
            offending = sorted(node for node, _ in self.classification.counterexamples)
            raise StructuralError(
                f"{self.graph.name} is not a controllable-choice MSG "
                f"(uncontrollable: {', '.join(offending)})"
            )

    @cached_property
    def initial_path(self) -> PredictionPath:
        """Longest common prefix of all runs."""
        nodes = [self.graph.initial]
        current = self.graph.initial
        while current != self.graph.terminal and not self.graph.is_choice(current):
            successors = self.graph.successors(current)
            if not successors or len(nodes) > len(self.graph.nodes):
                raise StructuralError(
                    f"Initial path of {self.graph.name} does not reach a choice "
                    f"node or {self.graph.terminal}"
                )
            current = successors[0]
            nodes.append(current)
        return PredictionPath(tuple(nodes), PathKind.INITIAL)

    def terminating_kind(self, nodes: Sequence[str]) -> Optional[PathKind]:
        """Terminating condition met by ``nodes`` (checked at its last node)."""
        last = nodes[-1]
        if last in self.local_nodes:
            return PathKind.LOCAL_TERMINATED
        if last in self.controllable_nodes and last in nodes[:-1]:
            return PathKind.CONTROLLABLE_REVISIT
        if last == self.graph.terminal:
            return PathKind.TERMINAL_TERMINATED
        return None

    def _paths_from(self, start: str) -> List[PredictionPath]:
        bound = 2 * len(self.graph.nodes)
        found: List[PredictionPath] = []
        stack: List[Tuple[str, ...]] = [(start,)]
        while stack:
            nodes = stack.pop()
            kind = self.terminating_kind(nodes)
            if kind is not None:
                found.append(PredictionPath(nodes, kind))
                continue
            if len(nodes) >= bound:
                raise StructuralError(
                    f"No prediction path from {start} within {bound} nodes "
                    f"(stuck at {'.'.join(nodes)})"
                )
            for successor in self.graph.successors(nodes[-1]):
                stack.append(nodes + (successor,))
        return found

    def _continues(self, path: PredictionPath) -> bool:
        return path.last in self.local_nodes or path.last in self.controllable_nodes

    @cached_property
    def prediction_paths(self) -> Tuple[PredictionPath, ...]:
        self.require_controllable()
        paths = {self.initial_path}
        pending = deque([self.initial_path])
        started = set()
        while pending:
            path = pending.popleft()
            if not self._continues(path):
                continue
            for start in self.graph.successors(path.last):
                if start in started:
                    continue
                started.add(start)
                for found in self._paths_from(start):
                    if found not in paths:
                        paths.add(found)
                        pending.append(found)
        logger.info(f"{self.graph.name}: {len(paths)} prediction paths")
        return tuple(sorted(paths))

    def partition_run(self, run: Sequence[str]) -> Tuple[PredictionPath, ...]:
        """Split a run into the initial path followed by prediction paths."""
        run = require_run(self.graph, run)
        self.require_controllable()
        initial = self.initial_path.nodes
        if run[: len(initial)] != initial:
            raise PathError(
                f"Run {'.'.join(run)} does not start with the initial path "
                f"{'.'.join(initial)}"
            )
        parts = [self.initial_path]
        rest = run[len(initial) :]
        while rest:
            for size in range(1, len(rest) + 1):
                kind = self.terminating_kind(rest[:size])
                if kind is not None:
                    parts.append(PredictionPath(rest[:size], kind))
                    rest = rest[size:]
                    break
            else:
                raise PathError(
                    f"Run suffix {'.'.join(rest)} is not a sequence of prediction paths"
                )
        return tuple(parts)


def choice_nodes(g: MsgGraph) -> Tuple[str, ...]:
    return ChoiceAnalysis(g).choice_nodes


def triggers(g: MsgGraph, s: str) -> FrozenSet[str]:
    return ChoiceAnalysis(g).triggers(s)


def is_local_choice(g: MsgGraph, u: str) -> bool:
    return ChoiceAnalysis(g).is_local_choice(u)


def is_controllable_choice(g: MsgGraph, u: str) -> ControllabilityVerdict:
    return ChoiceAnalysis(g).is_controllable_choice(u)


def classify(g: MsgGraph) -> Classification:
    return ChoiceAnalysis(g).classification


def initial_path(g: MsgGraph) -> PredictionPath:
    return ChoiceAnalysis(g).initial_path


def prediction_paths(g: MsgGraph) -> Tuple[PredictionPath, ...]:
    return ChoiceAnalysis(g).prediction_paths


def partition_run(g: MsgGraph, run: Sequence[str]) -> Tuple[PredictionPath, ...]:
    return ChoiceAnalysis(g).partition_run(run)

