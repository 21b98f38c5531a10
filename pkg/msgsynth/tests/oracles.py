"""
Brute-force reference implementations used to cross-check the analysis.

They enumerate paths explicitly and are only usable on small graphs.
"""

from typing import Dict, FrozenSet, List, Sequence, Set, Tuple

import networkx as nx

from msgsynth.choice_analysis import initiating_processes, resolving_events
from msgsynth.msg_core import MsgGraph, compose, compose_path


def initiators_from(g: MsgGraph, start: str, max_length: int) -> FrozenSet[str]:
    """Processes initiating a path from ``start`` of at most ``max_length`` nodes."""
    found: Set[str] = set()
    stack = [((start,), g.label(start))]
    while stack:
        path, chart = stack.pop()
        found |= initiating_processes(chart)
        if len(path) < max_length:
            for successor in g.successors(path[-1]):
                extended = compose(chart, g.label(successor))
                stack.append((path + (successor,), extended))
    return frozenset(found)


def brute_triggers(g: MsgGraph) -> Dict[str, FrozenSet[str]]:
    """Triggers of every node by explicit path enumeration."""
    reach = {node: initiators_from(g, node, len(g.nodes)) for node in g.nodes}
    return {
        node: frozenset().union(*(reach[s] for s in g.successors(node)))
        for node in g.nodes
    }


def brute_controllable(g: MsgGraph, node: str, wanted: FrozenSet[str]) -> bool:
    """Controllability of ``node`` in an acyclic graph: every path from the
    initial node to ``node`` composes to a chart with a resolving event."""
    if node == g.initial:
        paths: List[List[str]] = [[g.initial]]
    else:
        paths = list(nx.all_simple_paths(g.digraph, g.initial, node))
    return all(resolving_events(compose_path(g, path), wanted) for path in paths)


def all_partitions(
    run: Sequence[str], initial: Sequence[str], pieces: Set[Tuple[str, ...]]
) -> List[List[Tuple[str, ...]]]:
    """Every split of ``run`` into ``initial`` followed by members of ``pieces``."""
    run = tuple(run)
    initial = tuple(initial)
    if run[: len(initial)] != initial:
        return []

    def split(rest: Tuple[str, ...]) -> List[List[Tuple[str, ...]]]:
        if not rest:
            return [[]]
        found = []
        for size in range(1, len(rest) + 1):
            if rest[:size] in pieces:
                found.extend([rest[:size]] + tail for tail in split(rest[size:]))
        return found

    return [[initial] + tail for tail in split(run[len(initial) :])]
