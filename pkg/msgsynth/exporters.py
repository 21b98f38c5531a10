"""
Graphviz and JSON renderings of graphs, machines and reports.

Every exporter sorts what it emits, so identical inputs give byte-identical
output. Machines exported as JSON can be imported back with
``cfm_from_structured``.
"""

import json
import logging
from dataclasses import asdict, is_dataclass
from enum import Enum
from typing import Any, Dict, Hashable, Iterator, Optional

from msgsynth.cfm_runtime import (
    AnnotatedMessage,
    Cfm,
    ExplorationResult,
    Handoff,
    ProcessMachine,
    Trace,
    Transition,
)
from msgsynth.choice_analysis import (
    ChoiceKind,
    Classification,
    PathKind,
    Prediction,
    PredictionPath,
)
from msgsynth.errors import ExportError, Violation
from msgsynth.msg_core import Action, Bmsc, MsgGraph, format_word
from msgsynth.realization import LocalState, Mode, QueuedEvent
from msgsynth.verification import EquivalenceReport

logger = logging.getLogger(__name__)

_KIND_COLOURS = {
    ChoiceKind.LOCAL: "palegreen",
    ChoiceKind.CONTROLLABLE: "lightblue",
    ChoiceKind.UNCONTROLLABLE: "salmon",
}


def _quote(text: str) -> str:
    return '"{}"'.format(str(text).replace("\\", "\\\\").replace('"', r"\""))


def _graph_lines(
    g: MsgGraph, classification: Optional[Classification]
) -> Iterator[str]:
    kinds = classification.node_map if classification else {}
    yield f"digraph {_quote(g.name)} {{"
    yield "  rankdir=TB;"
    for node in sorted(g.nodes):
        chart = g.label(node)
        attributes = [f"label={_quote(node + chr(10) + chart.name)}", "shape=box"]
        styles = ["bold"] if node == g.initial else []
        if node == g.terminal:
            attributes.append("peripheries=2")
        if node in kinds:
            styles.append("filled")
            attributes.append(f"fillcolor={_KIND_COLOURS[kinds[node]]}")
        if styles:
            attributes.append(f"style={_quote(','.join(styles))}")
        yield f"  {_quote(node)} [{' '.join(attributes)}];"
    for source, target in sorted(g.edges):
        yield f"  {_quote(source)} -> {_quote(target)};"
    yield "}"


def export_dot_graph(
    g: MsgGraph, classification: Optional[Classification] = None
) -> str:
    return "\n".join(_graph_lines(g, classification)) + "\n"


def _state_label(state: Hashable) -> str:
    if isinstance(state, LocalState):
        if state.mode is Mode.POLLING:
            return "polling"
        queue = " ".join(str(event) for event in state.queue) or "ε"
        current = str(state.current) if state.current else "⊥"
        return f"{state.mode.value}\n{current}\n[{queue}]"
    return str(state)


def _transition_label(transition: Transition) -> str:
    label = str(transition.action)
    if transition.action.is_send and transition.payload.next is not None:
        label += f"\nnext {transition.payload.next}"
    return label


def _machine_lines(machine: ProcessMachine) -> Iterator[str]:
    ids = {state: f"{machine.process}_{n}" for n, state in enumerate(machine.states)}
    yield f"  subgraph {_quote('cluster_' + machine.process)} {{"
    yield f"    label={_quote(machine.process)};"
    for state in machine.states:
        attributes = [f"label={_quote(_state_label(state))}"]
        attributes.append(
            "shape=doublecircle" if state in machine.accepting else "shape=circle"
        )
        if state == machine.initial:
            attributes.append("style=bold")
        if state in machine.blocked:
            attributes.append("color=red")
        yield f"    {_quote(ids[state])} [{' '.join(attributes)}];"
    edges = sorted(
        (ids[t.source], ids[t.target], _transition_label(t))
        for t in machine.transitions
    )
    for source, target, label in dict.fromkeys(edges):
        yield f"    {_quote(source)} -> {_quote(target)} [label={_quote(label)}];"
    yield "  }"


def export_dot_machines(cfm: Cfm, name: str = "cfm") -> str:
    lines = [f"digraph {_quote(name)} {{", "  rankdir=LR;"]
    for machine in cfm.machines:
        lines.extend(_machine_lines(machine))
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- structured data ------------------------------------------------------------


def _prediction_data(prediction: Optional[Prediction]) -> Optional[Dict[str, Any]]:
    if prediction is None:
        return None
    control = list(prediction.control) if prediction.control else None
    return {
        "path": list(prediction.path.nodes),
        "kind": prediction.path.kind.value,
        "control": control,
    }


def _prediction_from(data: Optional[Dict[str, Any]]) -> Optional[Prediction]:
    if data is None:
        return None
    control = tuple(data["control"]) if data["control"] is not None else None
    path = PredictionPath(tuple(data["path"]), PathKind(data["kind"]))
    return Prediction(path, control)


def _state_data(state: Hashable) -> Dict[str, Any]:
    if isinstance(state, LocalState):
        return {
            "mode": state.mode.value,
            "current": _prediction_data(state.current),
            "next": _prediction_data(state.next),
            "queue": [
                {"ref": list(event.ref), "action": str(event.action)}
                for event in state.queue
            ],
        }
    if isinstance(state, int):
        return {"index": state}
    raise ExportError(f"Cannot export machine state {state!r}")


def _state_from(data: Dict[str, Any]) -> Hashable:
    if "index" in data:
        return data["index"]
    return LocalState(
        Mode(data["mode"]),
        _prediction_from(data["current"]),
        _prediction_from(data["next"]),
        tuple(
            QueuedEvent(tuple(item["ref"]), Action.parse(item["action"]))
            for item in data["queue"]
        ),
    )


def _payload_data(payload: AnnotatedMessage) -> Dict[str, Any]:
    return {
        "label": payload.label,
        "current": _prediction_data(payload.current),
        "next": _prediction_data(payload.next),
    }


def _handoff_data(handoff: Handoff) -> Dict[str, str]:
    return {"process": handoff.process, "node": handoff.node, "branch": handoff.branch}


def machine_data(machine: ProcessMachine) -> Dict[str, Any]:
    ids = {state: n for n, state in enumerate(machine.states)}
    return {
        "process": machine.process,
        "initial": ids[machine.initial],
        "states": [_state_data(state) for state in machine.states],
        "accepting": sorted(ids[s] for s in machine.accepting),
        "blocked": sorted(ids[s] for s in machine.blocked),
        "start_handoffs": [_handoff_data(h) for h in machine.start_handoffs],
        "transitions": [
            {
                "source": ids[t.source],
                "action": str(t.action),
                "payload": _payload_data(t.payload),
                "target": ids[t.target],
                "handoffs": [_handoff_data(h) for h in t.handoffs],
                "handoffs_before": t.handoffs_before,
            }
            for t in machine.transitions
        ],
    }


def cfm_data(cfm: Cfm) -> Dict[str, Any]:
    return {"machines": [machine_data(machine) for machine in cfm.machines]}


def machine_from_data(data: Dict[str, Any]) -> ProcessMachine:
    states = [_state_from(item) for item in data["states"]]
    transitions = tuple(
        Transition(
            states[item["source"]],
            Action.parse(item["action"]),
            AnnotatedMessage(
                item["payload"]["label"],
                _prediction_from(item["payload"]["current"]),
                _prediction_from(item["payload"]["next"]),
            ),
            states[item["target"]],
            tuple(Handoff(**handoff) for handoff in item["handoffs"]),
            item.get("handoffs_before", 0),
        )
        for item in data["transitions"]
    )
    return ProcessMachine(
        process=data["process"],
        initial=states[data["initial"]],
        states=tuple(states),
        transitions=transitions,
        accepting=frozenset(states[n] for n in data["accepting"]),
        blocked=frozenset(states[n] for n in data.get("blocked", [])),
        start_handoffs=tuple(
            Handoff(**handoff) for handoff in data.get("start_handoffs", [])
        ),
    )


def cfm_from_structured(text: str) -> Cfm:
    """Inverse of ``export_structured`` for CFMs."""
    try:
        data = json.loads(text)
        return Cfm(tuple(machine_from_data(item) for item in data["machines"]))
    except (KeyError, IndexError, TypeError, ValueError) as e:
        raise ExportError(f"Not an exported CFM: {e}") from e


def _word_data(word) -> str:
    return format_word(word)


def to_data(value: Any) -> Any:
    """Plain JSON-compatible data for the toolkit's results."""
    if isinstance(value, Cfm):
        return cfm_data(value)
    if isinstance(value, Classification):
        return {
            "overall": value.overall.value,
            "nodes": {node: kind.value for node, kind in value.nodes},
            "counterexamples": {
                node: list(path) for node, path in value.counterexamples
            },
        }
    if isinstance(value, EquivalenceReport):
        data = {k: v for k, v in asdict(value).items()}
        data["verdict"] = value.verdict.value
        data["missing_in_cfm"] = [_word_data(w) for w in value.missing_in_cfm]
        data["extra_in_cfm"] = [_word_data(w) for w in value.extra_in_cfm]
        data["notes"] = list(value.notes)
        return data
    if isinstance(value, ExplorationResult):
        return value.summary()
    if isinstance(value, Trace):
        return {
            "seed": value.seed,
            "accepting": value.accepting,
            "truncated": value.truncated,
            "actions": [str(action) for action in value.word],
        }
    if isinstance(value, PredictionPath):
        return {"path": list(value.nodes), "kind": value.kind.value}
    if isinstance(value, Prediction):
        return _prediction_data(value)
    if isinstance(value, Violation):
        return {
            "code": value.code,
            "message": value.message,
            "location": value.location,
        }
    if isinstance(value, Bmsc):
        return {
            "name": value.name,
            "processes": sorted(value.processes),
            "orders": {p: [name for _, name in ids] for p, ids in value.orders},
        }
    if isinstance(value, MsgGraph):
        return {
            "name": value.name,
            "initial": value.initial,
            "terminal": value.terminal,
            "nodes": {node: value.label(node).name for node in sorted(value.nodes)},
            "edges": [list(edge) for edge in sorted(value.edges)],
        }
    if isinstance(value, Action):
        return str(value)
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): to_data(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        items = [to_data(item) for item in value]
        if isinstance(value, (set, frozenset)):
            return sorted(items, key=json.dumps)
        return items
    if is_dataclass(value):
        return to_data(asdict(value))
    return value


def export_structured(value: Any) -> str:
    return json.dumps(to_data(value), indent=2, sort_keys=True, ensure_ascii=False)
