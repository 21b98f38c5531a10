"""
Synthesis of a CFM realizing a controllable-choice MSG.

Every process runs the same prediction protocol. It executes the projection
of the bMSC of its current prediction, piggybacks its current and next
prediction on each message it sends, and adopts predictions carried by the
messages it receives. When its queue runs empty it either promotes the next
prediction (controllable-choice node it triggers), guesses a branch (local
choice it leads) or forgets everything and polls its input channels.

``PredictionRealizer`` implements one process step of that protocol over
explicit local states; ``synthesize_cfm`` closes the step relation into one
finite-state machine per process. Machines only receive payloads that some
machine can send, so the receive alphabet is grown to a fixpoint.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Set, Tuple

from msgsynth.choice_analysis import (
    ChoiceAnalysis,
    Prediction,
    PredictionPath,
    resolving_events,
)
from msgsynth.cfm_runtime import (
    AnnotatedMessage,
    Cfm,
    Channel,
    Handoff,
    ProcessMachine,
    Transition,
)
from msgsynth.errors import (
    NotControllableError,
    StructuralError,
    SynthesisError,
)
from msgsynth.msg_core import (
    Action,
    Bmsc,
    EventId,
    EventKind,
    MsgGraph,
    compose_path,
    projection_events,
)

logger = logging.getLogger(__name__)

MAX_ALPHABET_ROUNDS = 50


class Mode(str, Enum):
    INITIAL = "initial"
    EXECUTING = "executing"
    POLLING = "polling"
    BLOCKED = "blocked"


@dataclass(frozen=True)
class QueuedEvent:
    ref: EventId
    action: Action

    def __str__(self) -> str:
        return str(self.action)


@dataclass(frozen=True)
class LocalState:
    mode: Mode
    current: Optional[Prediction] = None
    next: Optional[Prediction] = None
    queue: Tuple[QueuedEvent, ...] = ()

    @property
    def head(self) -> Optional[QueuedEvent]:
        return self.queue[0] if self.queue else None

    def __str__(self) -> str:
        if self.mode is Mode.POLLING:
            return "polling"
        current = str(self.current) if self.current else "⊥"
        upcoming = str(self.next) if self.next else "⊥"
        queue = " ".join(str(event) for event in self.queue) or "ε"
        return f"{self.mode.value} {current} next={upcoming} queue=[{queue}]"


POLLING = LocalState(Mode.POLLING)


@dataclass(frozen=True)
class Delivery:
    """A payload arriving from ``sender``; the stimulus of a receive step."""

    sender: str
    payload: AnnotatedMessage


@dataclass(frozen=True)
class Settlement:
    state: LocalState
    handoffs: Tuple[Handoff, ...] = ()


class PredictionRealizer:
    """Prediction protocol of a controllable-choice MSG."""

    def __init__(self, graph: MsgGraph, initial_control: Optional[EventId] = None):
        self.graph = graph
        self.analysis = ChoiceAnalysis(graph)
        classification = self.analysis.classification
        if not classification.is_controllable:
            nodes = [node for node, _ in classification.counterexamples]
            raise NotControllableError(
                f"{graph.name} is not a controllable-choice MSG; "
                f"uncontrollable nodes: {', '.join(nodes)}",
                nodes,
            )
        self._compositions: Dict[Tuple[str, ...], Bmsc] = {}
        self._queues: Dict[Tuple[Tuple[str, ...], str], Tuple[QueuedEvent, ...]] = {}
        self.predictions = self.enumerate_predictions()
        self.initial_prediction = self._pick_initial(initial_control)

    # -- predictions --------------------------------------------------------

    def composition(self, path: PredictionPath) -> Bmsc:
        if path.nodes not in self._compositions:
            self._compositions[path.nodes] = compose_path(self.graph, path.nodes)
        return self._compositions[path.nodes]

    def enumerate_predictions(self) -> Tuple[Prediction, ...]:
        found = []
        for path in self.analysis.prediction_paths:
            if path.last not in self.analysis.controllable_nodes:
                found.append(Prediction(path, None))
                continue
            wanted = self.analysis.triggers(path.last)
            idle = sorted(
                process
                for process in wanted
                if not self.queue_for(Prediction(path, None), process)
            )
            if idle:
                raise SynthesisError(
                    f"Prediction path {path} ends in controllable node {path.last} "
                    f"but triggered processes {idle} have no event on it"
                )
            controls = resolving_events(self.composition(path), wanted)
            if not controls:
                raise SynthesisError(
                    f"Prediction path {path} ends in controllable node {path.last} "
                    f"but has no resolving event for {sorted(wanted)}"
                )
            found.extend(Prediction(path, control) for control in sorted(controls))
        return tuple(sorted(found, key=lambda prediction: prediction.sort_key))

    def initial_prediction_set(self) -> Tuple[Prediction, ...]:
        initial = self.analysis.initial_path
        return tuple(p for p in self.predictions if p.path == initial)

    def _pick_initial(self, control: Optional[EventId]) -> Prediction:
        choices = self.initial_prediction_set()
        if control is None:
            return choices[0]
        for prediction in choices:
            if prediction.control == control:
                return prediction
        raise SynthesisError(
            f"{control[0]}:{control[1]} is not an admissible initial control event"
        )

    def guess_predictions(self, node: str) -> Tuple[Prediction, ...]:
        """Predictions whose path starts at a successor of ``node``."""
        successors = set(self.graph.successors(node))
        found = tuple(p for p in self.predictions if p.path.first in successors)
        if not found:
            raise StructuralError(f"No prediction continues after node {node}")
        return found

    def queue_for(
        self, prediction: Prediction, process: str
    ) -> Tuple[QueuedEvent, ...]:
        key = (prediction.path.nodes, process)
        if key not in self._queues:
            chart = self.composition(prediction.path)
            self._queues[key] = tuple(
                QueuedEvent(event.id, event.action)
                for event in projection_events(chart, process)
            )
        return self._queues[key]

    def executing(
        self, process: str, current: Prediction, upcoming: Optional[Prediction]
    ) -> LocalState:
        return LocalState(
            Mode.EXECUTING, current, upcoming, self.queue_for(current, process)
        )

    def initial_state(self, process: str) -> LocalState:
        return self.executing(process, self.initial_prediction, None)

    # -- process steps ------------------------------------------------------

    def settle(self, process: str, state: LocalState) -> Tuple[Settlement, ...]:
        """Run the hand-off decision while the queue of ``state`` is empty."""
        if state.queue or state.mode not in (Mode.INITIAL, Mode.EXECUTING):
            return (Settlement(state),)
        results: List[Settlement] = []
        pending = [(state.current, state.next, ())]
        seen = set()
        while pending:
            current, upcoming, trail = pending.pop()
            if (current, upcoming) in seen:
                continue
            seen.add((current, upcoming))
            node = current.path.last
            triggered = process in self.analysis.triggers(node)
            if node in self.analysis.controllable_nodes and triggered:
                if upcoming is None:
                    handoff = Handoff(process, node, "blocked")
                    blocked = LocalState(Mode.BLOCKED, current)
                    results.append(Settlement(blocked, trail + (handoff,)))
                    continue
                candidates = [(upcoming, Handoff(process, node, "promote"))]
            elif node in self.analysis.local_nodes and triggered:
                candidates = [
                    (guess, Handoff(process, node, "lead"))
                    for guess in self.guess_predictions(node)
                ]
            else:
                handoff = Handoff(process, node, "poll")
                results.append(Settlement(POLLING, trail + (handoff,)))
                continue
            for chosen, handoff in candidates:
                if self.queue_for(chosen, process):
                    results.append(
                        Settlement(
                            self.executing(process, chosen, None), trail + (handoff,)
                        )
                    )
                else:
                    pending.append((chosen, None, trail + (handoff,)))
        return tuple(dict.fromkeys(results))

    def _advance(
        self,
        process: str,
        source: LocalState,
        action: Action,
        payload: AnnotatedMessage,
        current: Prediction,
        upcoming: Optional[Prediction],
        rest: Tuple[QueuedEvent, ...],
    ) -> List[Transition]:
        target = LocalState(Mode.EXECUTING, current, upcoming, rest)
        return [
            Transition(source, action, payload, settled.state, settled.handoffs)
            for settled in self.settle(process, target)
        ]

    def local_step(
        self, process: str, state: LocalState, stimulus: Optional[Delivery]
    ) -> List[Transition]:
        """Transitions of ``process`` from ``state``.

        ``stimulus`` is ``None`` for sends and the arriving payload for receives.
        """
        if state.mode is Mode.INITIAL:
            found = []
            for settled in self.settle(process, state):
                for transition in self.local_step(process, settled.state, stimulus):
                    found.append(
                        Transition(
                            state,
                            transition.action,
                            transition.payload,
                            transition.target,
                            settled.handoffs + transition.handoffs,
                            len(settled.handoffs),
                        )
                    )
            return found
        if state.mode is Mode.BLOCKED:
            return []
        if state.mode is Mode.POLLING:
            return self._polling_step(process, state, stimulus)

        head = state.head
        if head is None:
            raise SynthesisError(f"Executing state of {process} with an empty queue")
        action = head.action
        rest = state.queue[1:]
        if action.is_send:
            if stimulus is not None:
                return []
            if head.ref == state.current.control:
                guesses = self.guess_predictions(state.current.path.last)
            else:
                guesses = (state.next,)
            found = []
            for upcoming in guesses:
                payload = AnnotatedMessage(action.label, state.current, upcoming)
                found.extend(
                    self._advance(
                        process, state, action, payload, state.current, upcoming, rest
                    )
                )
            return found

        if stimulus is None:
            return []
        payload = stimulus.payload
        if stimulus.sender != action.peer or payload.label != action.label:
            return []
        upcoming = state.next if state.next is not None else payload.next
        return self._advance(
            process, state, action, payload, state.current, upcoming, rest
        )

    def _polling_step(
        self, process: str, state: LocalState, stimulus: Optional[Delivery]
    ) -> List[Transition]:
        if stimulus is None or stimulus.payload.current is None:
            return []
        payload = stimulus.payload
        queue = self.queue_for(payload.current, process)
        action = Action(process, EventKind.RECEIVE, stimulus.sender, payload.label)
        if not queue or queue[0].action != action:
            return []
        return self._advance(
            process, state, action, payload, payload.current, payload.next, queue[1:]
        )

    # -- machines -----------------------------------------------------------

    def _start_state(self, process: str) -> Tuple[Settlement, bool]:
        raw = self.initial_state(process)
        if raw.queue:
            return Settlement(raw), False
        settlements = self.settle(process, raw)
        if len(settlements) == 1:
            only = settlements[0]
            return only, only.state.mode is Mode.POLLING
        accepting = any(s.state.mode is Mode.POLLING for s in settlements)
        return Settlement(LocalState(Mode.INITIAL, self.initial_prediction)), accepting

    def build_machine(
        self, process: str, alphabet: Dict[Channel, Set[AnnotatedMessage]]
    ) -> ProcessMachine:
        deliveries = [
            Delivery(sender, payload)
            for (sender, receiver), payloads in sorted(alphabet.items())
            if receiver == process
            for payload in sorted(payloads, key=_payload_key)
        ]
        settled, start_accepting = self._start_state(process)
        start = settled.state
        states = {start: None}
        transitions: List[Transition] = []
        frontier = [start]
        while frontier:
            state = frontier.pop()
            found = list(self.local_step(process, state, None))
            if state.mode is not Mode.EXECUTING or not state.head.action.is_send:
                for delivery in deliveries:
                    found.extend(self.local_step(process, state, delivery))
            for transition in found:
                transitions.append(transition)
                if transition.target not in states:
                    states[transition.target] = None
                    frontier.append(transition.target)
        accepting = {s for s in states if s.mode is Mode.POLLING}
        if start_accepting:
            accepting.add(start)
        blocked = frozenset(s for s in states if s.mode is Mode.BLOCKED)
        logger.debug(
            f"Machine {process}: {len(states)} states, {len(transitions)} transitions"
        )
        return ProcessMachine(
            process=process,
            initial=start,
            states=tuple(states),
            transitions=tuple(dict.fromkeys(transitions)),
            accepting=frozenset(accepting),
            blocked=blocked,
            start_handoffs=settled.handoffs,
        )

    def synthesize(self) -> Cfm:
        processes = sorted(self.graph.processes)
        alphabet: Dict[Channel, Set[AnnotatedMessage]] = {}
        for round_number in range(1, MAX_ALPHABET_ROUNDS + 1):
            machines = [self.build_machine(process, alphabet) for process in processes]
            emitted: Dict[Channel, Set[AnnotatedMessage]] = {}
            for machine in machines:
                for transition in machine.transitions:
                    if transition.action.is_send:
                        channel = transition.action.channel
                        emitted.setdefault(channel, set()).add(transition.payload)
            logger.info(
                f"Synthesis round {round_number}: "
                f"{sum(len(p) for p in emitted.values())} payloads"
            )
            if emitted == alphabet:
                return Cfm(tuple(machines))
            alphabet = emitted
        raise SynthesisError(
            f"Receive alphabet did not stabilize within {MAX_ALPHABET_ROUNDS} rounds"
        )


def _payload_key(payload: AnnotatedMessage) -> Tuple:
    current = payload.current.sort_key if payload.current else ((), (-1, ""))
    upcoming = payload.next.sort_key if payload.next else ((), (-1, ""))
    return (payload.label, current, upcoming)


def enumerate_predictions(g: MsgGraph) -> Tuple[Prediction, ...]:
    return PredictionRealizer(g).predictions


def initial_prediction_set(g: MsgGraph) -> Tuple[Prediction, ...]:
    return PredictionRealizer(g).initial_prediction_set()


def guess_predictions(g: MsgGraph, u: str) -> Tuple[Prediction, ...]:
    return PredictionRealizer(g).guess_predictions(u)


def local_step(
    g: MsgGraph, process: str, state: LocalState, stimulus: Optional[Delivery]
) -> List[Transition]:
    return PredictionRealizer(g).local_step(process, state, stimulus)


def synthesize_cfm(g: MsgGraph, initial_control: Optional[EventId] = None) -> Cfm:
    """Build one machine per process realizing ``g``."""
    cfm = PredictionRealizer(g, initial_control).synthesize()
    logger.info(
        f"Synthesized CFM for {g.name}: {len(cfm.machines)} machines, "
        f"{cfm.state_count} states"
    )
    return cfm


def projection_cfm(b: Bmsc) -> Cfm:
    """One single-word machine per process, accepting exactly its projection."""
    machines = []
    for process in sorted(b.processes):
        events = projection_events(b, process)
        transitions = tuple(
            Transition(
                position,
                event.action,
                AnnotatedMessage(event.message.label),
                position + 1,
            )
            for position, event in enumerate(events)
        )
        machines.append(
            ProcessMachine(
                process=process,
                initial=0,
                states=tuple(range(len(events) + 1)),
                transitions=transitions,
                accepting=frozenset({len(events)}),
            )
        )
    return Cfm(tuple(machines))


def strip_annotations(cfm: Cfm) -> Cfm:
    """Same machines with label-only payloads."""
    machines = []
    for machine in cfm.machines:
        transitions = tuple(
            dict.fromkeys(
                replace(t, payload=t.payload.stripped()) for t in machine.transitions
            )
        )
        machines.append(replace(machine, transitions=transitions))
    return Cfm(tuple(machines))

