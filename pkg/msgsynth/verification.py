"""
Bounded verification of synthesized machines against their MSG.

Provides the word predicates used to rebuild charts from executions
(well-formed, complete, word-to-bMSC), the bounded language of an MSG, the
bounded language-equivalence check between an MSG and a CFM, and monitors
that check the protocol properties over an exploration:

* agreement: processes executing the same occurrence of a prediction never
  hold different next predictions, and a receive never brings a payload that
  contradicts the receiver's predictions;
* polling: a process finishing a prediction polls iff it is not in the
  triggers set of the prediction's last node;
* promotion: no reachable configuration holds a blocked process.
"""

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import combinations
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Set, Tuple

import networkx as nx

from msgsynth.cfm_runtime import (
    DEFAULT_CHANNEL_BOUND,
    DEFAULT_MAX_CONFIGS,
    Cfm,
    Configuration,
    ExplorationResult,
    Handoff,
    Move,
    Transition,
    accepted_words,
    explore,
)
from msgsynth.choice_analysis import ChoiceAnalysis
from msgsynth.errors import InvalidBmscError, Violation
from msgsynth.msg_core import (
    DEFAULT_LINEARIZATION_CAP,
    Action,
    Bmsc,
    MsgGraph,
    Path,
    Word,
    compose_path,
    enumerate_runs,
    linearizations,
)
from msgsynth.realization import LocalState, Mode, projection_cfm

logger = logging.getLogger(__name__)

Occurrences = Tuple[Optional[int], ...]
Tags = Tuple[Tuple[Optional[int], ...], ...]


def _first_malformed(w: Sequence[Action]) -> Optional[int]:
    pending: Dict[Tuple[str, str], List[str]] = {}
    for position, action in enumerate(w):
        queue = pending.setdefault(action.channel, [])
        if action.is_send:
            queue.append(action.label)
        elif not queue or queue.pop(0) != action.label:
            return position
    return None


def well_formed(w: Sequence[Action]) -> bool:
    """Every receive is matched by an earlier send in FIFO order."""
    return _first_malformed(w) is None


def _unmatched_send(w: Sequence[Action]) -> Optional[int]:
    pending: Dict[Tuple[str, str], List[int]] = {}
    for position, action in enumerate(w):
        queue = pending.setdefault(action.channel, [])
        if action.is_send:
            queue.append(position)
        elif queue:
            queue.pop(0)
    leftovers = [queue[0] for queue in pending.values() if queue]
    return min(leftovers) if leftovers else None


def complete(w: Sequence[Action]) -> bool:
    """Per channel, the sent labels and the received labels coincide."""
    sent: Dict[Tuple[str, str], List[str]] = {}
    received: Dict[Tuple[str, str], List[str]] = {}
    for action in w:
        target = sent if action.is_send else received
        target.setdefault(action.channel, []).append(action.label)
    channels = set(sent) | set(received)
    return all(sent.get(c, []) == received.get(c, []) for c in channels)


def word_to_bmsc(w: Sequence[Action], name: str = "word") -> Bmsc:
    """Chart pairing the k-th send with the k-th receive of every channel."""
    position = _first_malformed(w)
    if position is not None:
        raise InvalidBmscError(
            f"Word is not well-formed: {w[position]} at position {position} "
            f"has no matching send"
        )
    position = _unmatched_send(w)
    if position is not None:
        raise InvalidBmscError(
            f"Word is not complete: {w[position]} at position {position} "
            f"is never received"
        )
    messages = []
    orders: Dict[str, List[str]] = {}
    waiting: Dict[Tuple[str, str], List[str]] = {}
    processes = set()
    for action in w:
        processes.update(action.channel)
        if action.is_send:
            msg = f"m{len(messages) + 1}"
            messages.append((msg, action.owner, action.peer, action.label))
            waiting.setdefault(action.channel, []).append(msg)
            orders.setdefault(action.owner, []).append("!" + msg)
        else:
            msg = waiting[action.channel].pop(0)
            orders.setdefault(action.owner, []).append("?" + msg)
    return Bmsc.from_messages(name, sorted(processes), messages, orders)


@dataclass(frozen=True)
class BoundedLanguage:
    words: FrozenSet[Word]
    runs: int
    skipped: Tuple[Tuple[Path, int], ...]
    # Fewest events of any run pruned by the visit bound; None if none exists
    pruned_floor: Optional[int]
    visit_bound: int
    event_cap: int

    @property
    def min_skipped(self) -> Optional[int]:
        return min((size for _, size in self.skipped), default=None)


def _event_count(g: MsgGraph, node: str) -> int:
    return len(g.label(node).events)


def pruned_event_floor(g: MsgGraph, visit_bound: int) -> Optional[int]:
    """Fewest events of a run visiting some node more than ``visit_bound`` times."""

    def weight(source: str, target: str, data: Dict) -> int:
        return _event_count(g, target)

    distances = dict(nx.all_pairs_dijkstra_path_length(g.digraph, weight=weight))
    floor = None
    for node in g.nodes:
        cycles = [
            _event_count(g, successor) + distances[successor].get(node, 0)
            for successor in g.successors(node)
            if successor == node or node in distances[successor]
        ]
        if not cycles or node not in distances[g.initial]:
            continue
        if g.terminal not in distances[node]:
            continue
        reach = _event_count(g, g.initial) + distances[g.initial][node]
        candidate = reach + visit_bound * min(cycles) + distances[node][g.terminal]
        floor = candidate if floor is None else min(floor, candidate)
    return floor


def bounded_msg_language(
    g: MsgGraph, visit_bound: int, event_cap: int = DEFAULT_LINEARIZATION_CAP
) -> BoundedLanguage:
    """Linearizations of every run visiting each node at most ``visit_bound`` times."""
    if visit_bound < 1 or event_cap < 0:
        raise ValueError("Language bounds must be positive")
    words: Set[Word] = set()
    skipped = []
    runs = 0
    for run in enumerate_runs(g, visit_bound):
        runs += 1
        chart = compose_path(g, run)
        size = len(chart.events)
        if size > event_cap:
            skipped.append((run, size))
            continue
        words |= linearizations(chart, cap=event_cap)
    if skipped:
        logger.warning(f"{len(skipped)} runs skipped for exceeding {event_cap} events")
    return BoundedLanguage(
        words=frozenset(words),
        runs=runs,
        skipped=tuple(skipped),
        pruned_floor=pruned_event_floor(g, visit_bound),
        visit_bound=visit_bound,
        event_cap=event_cap,
    )


class Verdict(str, Enum):
    EQUAL = "equal-at-bound"
    MISMATCH = "mismatch"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class EquivalenceReport:
    visit_bound: int
    event_cap: int
    word_bound: int
    channel_bound: int
    max_configs: int
    msg_words: int
    cfm_words: int
    missing_in_cfm: Tuple[Word, ...]
    extra_in_cfm: Tuple[Word, ...]
    deadlocks: int
    boundary_hit: bool
    partial: bool
    verdict: Verdict
    skipped_runs: int = 0
    notes: Tuple[str, ...] = field(default=())


def check_equivalence(
    g: MsgGraph,
    cfm: Cfm,
    visit_bound: int = 3,
    event_cap: int = DEFAULT_LINEARIZATION_CAP,
    channel_bound: int = DEFAULT_CHANNEL_BOUND,
    max_configs: int = DEFAULT_MAX_CONFIGS,
) -> EquivalenceReport:
    """Compare the bounded languages of ``g`` and ``cfm`` and look for deadlocks."""
    language = bounded_msg_language(g, visit_bound, event_cap)
    limits = [event_cap]
    notes = []
    if language.pruned_floor is not None:
        limits.append(language.pruned_floor - 1)
    if language.min_skipped is not None:
        limits.append(language.min_skipped - 1)
        notes.append(f"{len(language.skipped)} runs above the event cap")
    word_bound = max(min(limits), 0)
    if word_bound < event_cap:
        notes.append(f"word length bound lowered to {word_bound}")

    msg_words = {w for w in language.words if len(w) <= word_bound}
    found = accepted_words(cfm, word_bound, max_configs)
    missing = tuple(sorted(msg_words - found.words))
    extra = tuple(sorted(found.words - msg_words))
    exploration = explore(cfm, channel_bound, max_configs)

    if found.partial:
        verdict = Verdict.INCONCLUSIVE
        notes.append("word enumeration hit the configuration budget")
    elif missing or extra:
        verdict = Verdict.MISMATCH
    elif exploration.definite_deadlocks:
        verdict = Verdict.MISMATCH
        notes.append(
            f"{len(exploration.definite_deadlocks)} definite deadlock configurations"
        )
    elif exploration.boundary_hit:
        verdict = Verdict.INCONCLUSIVE
        notes.append("exploration hit a channel or configuration bound")
    else:
        verdict = Verdict.EQUAL

    report = EquivalenceReport(
        visit_bound=visit_bound,
        event_cap=event_cap,
        word_bound=word_bound,
        channel_bound=channel_bound,
        max_configs=max_configs,
        msg_words=len(msg_words),
        cfm_words=len(found.words),
        missing_in_cfm=missing,
        extra_in_cfm=extra,
        deadlocks=len(exploration.definite_deadlocks),
        boundary_hit=exploration.boundary_hit,
        partial=found.partial or exploration.partial,
        verdict=verdict,
        skipped_runs=len(language.skipped),
        notes=tuple(notes),
    )
    logger.info(f"Equivalence of {g.name}: {verdict.value} at {word_bound} actions")
    return report


def _executing(state: object) -> bool:
    return isinstance(state, LocalState) and state.mode is Mode.EXECUTING


def _tracked(state: object) -> bool:
    return isinstance(state, LocalState) and state.mode in (
        Mode.INITIAL,
        Mode.EXECUTING,
    )


def _advances(handoffs: Sequence[Handoff]) -> int:
    return sum(1 for handoff in handoffs if handoff.branch in ("promote", "lead"))


def _normalized(occurrences: Occurrences, tags: Tags) -> Tuple[Occurrences, Tags]:
    values = [n for n in occurrences if n is not None]
    values.extend(n for channel in tags for n in channel if n is not None)
    low = min(values, default=0)

    def shift(n: Optional[int]) -> Optional[int]:
        return None if n is None else n - low

    return (
        tuple(shift(n) for n in occurrences),
        tuple(tuple(shift(n) for n in channel) for channel in tags),
    )


def _occurrence_step(
    cfm: Cfm, occurrences: Occurrences, tags: Tags, move: Move
) -> Tuple[Occurrences, Tags]:
    position = cfm.index[move.process]
    transition = move.transition
    slot = cfm.channel_index[transition.action.channel]
    before = transition.handoffs[: transition.handoffs_before]
    after = transition.handoffs[transition.handoffs_before :]
    occurrence = occurrences[position]
    polling = not _tracked(transition.source) or (
        bool(before) and before[-1].branch == "poll"
    )
    if occurrence is not None:
        occurrence += _advances(before)
    channels = list(tags)
    if transition.action.is_send:
        channels[slot] = channels[slot] + (occurrence,)
    else:
        tag = channels[slot][0]
        channels[slot] = channels[slot][1:]
        if polling:
            # a polling process joins the occurrence of the message's sender
            occurrence = tag
    updated = list(occurrences)
    if occurrence is not None and _tracked(transition.target):
        updated[position] = occurrence + _advances(after)
    else:
        updated[position] = None
    return _normalized(tuple(updated), tuple(channels))


def _occurrence_walk(
    exploration: ExplorationResult,
) -> Iterator[Tuple[Configuration, Occurrences]]:
    """Explored configurations paired with the occurrence each process executes.

    Occurrences count the predictions a process has finished; every message
    is tagged with the occurrence of its sender. Counts are kept relative to
    the smallest one.
    """
    cfm = exploration.cfm
    occurrences = tuple(
        _advances(machine.start_handoffs) if _tracked(state) else None
        for machine, state in zip(cfm.machines, exploration.initial.locals)
    )
    start = (exploration.initial,) + _normalized(
        occurrences, tuple(() for _ in cfm.channels)
    )
    seen = {start}
    queue = deque([start])
    while queue:
        config, occurrences, tags = queue.popleft()
        yield config, occurrences
        for _, target, data in exploration.graph.out_edges(config, data=True):
            following = (target,) + _occurrence_step(
                cfm, occurrences, tags, data["move"]
            )
            if following in seen:
                continue
            if len(seen) >= exploration.max_configs:
                logger.warning(
                    f"Agreement walk stopped after {len(seen)} tracked configurations"
                )
                return
            seen.add(following)
            queue.append(following)


def _configuration_disagreements(
    cfm: Cfm, config: Configuration, occurrences: Occurrences
) -> Iterator[Violation]:
    expecting = [
        (process, state, occurrence)
        for process, state, occurrence in zip(cfm.processes, config.locals, occurrences)
        if occurrence is not None and state.next is not None
    ]
    for (p, p_state, p_at), (q, q_state, q_at) in combinations(expecting, 2):
        if p_at != q_at or p_state.current != q_state.current:
            continue
        if p_state.next != q_state.next:
            yield Violation(
                "agreement",
                f"{p} and {q} execute {p_state.current} but expect "
                f"{p_state.next} and {q_state.next} next",
                location=f"{p},{q}",
            )


def _receive_disagreements(exploration: ExplorationResult) -> Iterator[Violation]:
    seen = set()
    for _, move, _ in exploration.moves():
        transition = move.transition
        if transition.action.is_send or not _executing(transition.source):
            continue
        key = (move.process, transition.source, transition.payload)
        if key in seen:
            continue
        seen.add(key)
        state = transition.source
        payload = transition.payload
        if payload.current is not None and payload.current != state.current:
            yield Violation(
                "agreement",
                f"{transition.action} carries current prediction "
                f"{payload.current}, receiver executes {state.current}",
                location=move.process,
            )
        elif (
            payload.next is not None
            and state.next is not None
            and payload.next != state.next
        ):
            yield Violation(
                "agreement",
                f"{transition.action} carries next prediction {payload.next}, "
                f"receiver holds {state.next}",
                location=move.process,
            )


def monitor_agreement(exploration: ExplorationResult) -> List[Violation]:
    """Processes that disagree on the next prediction.

    Every explored configuration is checked: two processes executing the same
    occurrence of a prediction, both with a next prediction, must hold the
    same one. Receives are also checked against the payload they consume.
    """
    violations: List[Violation] = []
    for config, occurrences in _occurrence_walk(exploration):
        violations.extend(
            _configuration_disagreements(exploration.cfm, config, occurrences)
        )
    violations.extend(_receive_disagreements(exploration))
    return list(dict.fromkeys(violations))


def monitor_polling(
    exploration: ExplorationResult, analysis: ChoiceAnalysis
) -> List[Violation]:
    """Hand-offs that poll although triggered, or continue although not."""
    violations = []
    recorded = {
        handoff
        for _, move, _ in exploration.moves()
        for handoff in move.transition.handoffs
    }
    for handoff in sorted(recorded, key=lambda h: (h.process, h.node, h.branch)):
        triggered = handoff.process in analysis.triggers(handoff.node)
        polls = handoff.branch == "poll"
        if polls == triggered:
            violations.append(
                Violation(
                    "polling",
                    f"{handoff.process} takes branch {handoff.branch} after node "
                    f"{handoff.node} (triggered: {triggered})",
                    location=handoff.process,
                )
            )
    return violations


def monitor_promotion(exploration: ExplorationResult) -> List[Violation]:
    """Reachable configurations where a process cannot promote a next prediction."""
    violations = []
    for config in exploration.graph.nodes:
        for state in config.locals:
            if isinstance(state, LocalState) and state.mode is Mode.BLOCKED:
                violations.append(
                    Violation(
                        "promotion",
                        f"blocked after {state.current} without a next prediction",
                    )
                )
    return list(dict.fromkeys(violations))


def inject_guess_fault(cfm: Cfm, process: str) -> Cfm:
    """Corrupt the next prediction announced by the control sends of ``process``.

    Each control send keeps its target state but carries the guess of a
    sibling branch, so the sender and its receivers disagree on the future.
    """
    machine = cfm.machine(process)
    siblings: Dict[Tuple, List[Transition]] = {}
    for transition in machine.transitions:
        source = transition.source
        if not transition.action.is_send or not isinstance(source, LocalState):
            continue
        if transition.payload.next == source.next:
            continue
        siblings.setdefault((source, transition.action), []).append(transition)

    replaced: Dict[Transition, Transition] = {}
    for group in siblings.values():
        guesses = sorted(
            {t.payload.next for t in group}, key=lambda prediction: prediction.sort_key
        )
        if len(guesses) < 2:
            continue
        for transition in group:
            position = guesses.index(transition.payload.next)
            shifted = guesses[(position + 1) % len(guesses)]
            replaced[transition] = replace(
                transition, payload=replace(transition.payload, next=shifted)
            )
    if not replaced:
        logger.warning(f"No control send of {process} has alternative guesses")
    faulty = replace(
        machine, transitions=tuple(replaced.get(t, t) for t in machine.transitions)
    )
    return Cfm(
        tuple(faulty if m.process == process else m for m in cfm.machines)
    )


def check_projection_realization(b: Bmsc, cap: int = DEFAULT_LINEARIZATION_CAP) -> bool:
    """The projection machines of ``b`` accept exactly its linearizations."""
    expected = linearizations(b, cap=cap)
    found = accepted_words(projection_cfm(b), len(b.events))
    return not found.partial and found.words == expected
