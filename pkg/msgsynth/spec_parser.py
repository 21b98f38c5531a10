"""
Parser and printer for ``.msg`` specification files.

A specification declares named bMSCs followed by one graph::

    bmsc cross {
      processes p q;
      msg a : p -> q label m;
      msg b : q -> p label m';
      order p : !a ?b;
      order q : !b ?a;
    }

    graph crossing {
      init s0;
      final sf;
      node s0 : empty;
      node s : cross;
      node sf : empty;
      s0 -> s;
      s -> s;
      s -> sf;
    }

Processes without an ``order`` clause get their events in ``msg``
declaration order. ``empty`` names the empty chart unless a chart of that
name is declared. ``#`` and ``//`` start comments.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

from lark import Lark, Token, Transformer
from lark.exceptions import UnexpectedInput

from msgsynth.errors import SpecSemanticError, SpecSyntaxError
from msgsynth.msg_core import (
    EMPTY_BMSC_NAME,
    Bmsc,
    MsgGraph,
    validate_bmsc,
    validate_graph,
)

logger = logging.getLogger(__name__)

GRAMMAR = r"""
    start: bmsc* graph

    bmsc: "bmsc" NAME "{" "processes" NAME+ ";" msgdecl* order* "}"
    msgdecl: "msg" NAME ":" NAME "->" NAME "label" NAME ";"
    order: "order" NAME ":" order_item+ ";"
    order_item: "!" NAME -> send_ref
              | "?" NAME -> receive_ref

    graph: "graph" NAME "{" "init" NAME ";" "final" NAME ";" nodedecl* edge* "}"
    nodedecl: "node" NAME ":" NAME ";"
    edge: NAME "->" NAME ";"

    NAME: /[A-Za-z_][A-Za-z0-9_']*/
    COMMENT: /(#|\/\/)[^\n]*/

    %import common.WS
    %ignore WS
    %ignore COMMENT
"""

_PARSER = Lark(GRAMMAR, parser="lalr", propagate_positions=True)


@dataclass
class _MsgDecl:
    name: Token
    sender: Token
    receiver: Token
    label: Token


@dataclass
class _OrderDecl:
    process: Token
    items: List[Tuple[str, Token]]


@dataclass
class _BmscDecl:
    name: Token
    processes: List[Token]
    messages: List[_MsgDecl]
    orders: List[_OrderDecl]


@dataclass
class _GraphDecl:
    name: Token
    initial: Token
    terminal: Token
    nodes: List[Tuple[Token, Token]]
    edges: List[Tuple[Token, Token]]


class _SpecTransformer(Transformer):
    """Turns the parse tree into declaration records that keep their tokens."""

    def start(self, children):
        return children[:-1], children[-1]

    def bmsc(self, children):
        name, *rest = children
        processes = [c for c in rest if isinstance(c, Token)]
        messages = [c for c in rest if isinstance(c, _MsgDecl)]
        orders = [c for c in rest if isinstance(c, _OrderDecl)]
        return _BmscDecl(name, processes, messages, orders)

    def msgdecl(self, children):
        return _MsgDecl(*children)

    def order(self, children):
        return _OrderDecl(children[0], list(children[1:]))

    def send_ref(self, children):
        return ("!", children[0])

    def receive_ref(self, children):
        return ("?", children[0])

    def graph(self, children):
        name, initial, terminal, *rest = children
        nodes = [c[1] for c in rest if c[0] == "node"]
        edges = [c[1] for c in rest if c[0] == "edge"]
        return _GraphDecl(name, initial, terminal, nodes, edges)

    def nodedecl(self, children):
        return ("node", (children[0], children[1]))

    def edge(self, children):
        return ("edge", (children[0], children[1]))


@dataclass(frozen=True)
class MsgSpec:
    """A parsed specification: its named charts and its graph."""

    bmscs: Dict[str, Bmsc]
    graph: MsgGraph
    source: str = "<spec>"


class _Builder:
    def __init__(self, source: str):
        self.source = source

    def fail(self, message: str, token: Optional[Token]) -> SpecSemanticError:
        line = getattr(token, "line", None)
        column = getattr(token, "column", None)
        return SpecSemanticError(message, line, column, self.source)

    def build_bmsc(self, decl: _BmscDecl) -> Bmsc:
        processes: List[str] = []
        for token in decl.processes:
            if str(token) in processes:
                raise self.fail(f"process {token} declared twice", token)
            processes.append(str(token))

        senders: Dict[str, str] = {}
        receivers: Dict[str, str] = {}
        messages = []
        for msg in decl.messages:
            if str(msg.name) in senders:
                raise self.fail(f"message {msg.name} declared twice", msg.name)
            for token in (msg.sender, msg.receiver):
                if str(token) not in processes:
                    raise self.fail(
                        f"message {msg.name} uses undeclared process {token}", token
                    )
            if str(msg.sender) == str(msg.receiver):
                raise self.fail(
                    f"message {msg.name} is sent by {msg.sender} to itself", msg.name
                )
            senders[str(msg.name)] = str(msg.sender)
            receivers[str(msg.name)] = str(msg.receiver)
            messages.append(
                (str(msg.name), str(msg.sender), str(msg.receiver), str(msg.label))
            )

        orders: Dict[str, List[str]] = {}
        for order in decl.orders:
            process = str(order.process)
            if process not in processes:
                raise self.fail(
                    f"order for undeclared process {process}", order.process
                )
            if process in orders:
                raise self.fail(f"second order clause for {process}", order.process)
            tokens = []
            for symbol, ref in order.items:
                owners = senders if symbol == "!" else receivers
                if str(ref) not in owners:
                    raise self.fail(f"order references unknown message {ref}", ref)
                if owners[str(ref)] != process:
                    raise self.fail(
                        f"{symbol}{ref} is not an event of process {process}", ref
                    )
                tokens.append(symbol + str(ref))
            orders[process] = tokens

        chart = Bmsc.from_messages(str(decl.name), processes, messages, orders)
        violations = validate_bmsc(chart)
        if violations:
            raise self.fail(f"bMSC {decl.name}: {violations[0]}", decl.name)
        return chart

    def build_graph(self, decl: _GraphDecl, bmscs: Mapping[str, Bmsc]) -> MsgGraph:
        labels: Dict[str, Bmsc] = {}
        nodes: List[str] = []
        for node, label in decl.nodes:
            if str(node) in labels:
                raise self.fail(f"node {node} declared twice", node)
            if str(label) in bmscs:
                chart = bmscs[str(label)]
            elif str(label) == EMPTY_BMSC_NAME:
                chart = Bmsc.empty()
            else:
                raise self.fail(f"node {node} uses unknown bMSC {label}", label)
            nodes.append(str(node))
            labels[str(node)] = chart
        for token in (decl.initial, decl.terminal):
            if str(token) not in labels:
                raise self.fail(f"undeclared node {token}", token)
        edges = []
        for source, target in decl.edges:
            for token in (source, target):
                if str(token) not in labels:
                    raise self.fail(f"edge uses undeclared node {token}", token)
            if (str(source), str(target)) in edges:
                raise self.fail(f"edge {source}->{target} declared twice", source)
            edges.append((str(source), str(target)))

        graph = MsgGraph.build(
            str(decl.name), nodes, edges, str(decl.initial), str(decl.terminal), labels
        )
        violations = validate_graph(graph)
        if violations:
            raise self.fail(f"graph {decl.name}: {violations[0]}", decl.name)
        return graph


def parse_spec(text: str, source: str = "<spec>") -> MsgSpec:
    """Parse ``.msg`` source text; raises ``SpecError`` subclasses with locations."""
    try:
        tree = _PARSER.parse(text)
    except UnexpectedInput as e:
        line = e.line if e.line and e.line > 0 else None
        column = e.column if e.column and e.column > 0 else None
        raise SpecSyntaxError(
            f"unexpected input: {str(e).splitlines()[0]}", line, column, source
        ) from e

    bmsc_decls, graph_decl = _SpecTransformer().transform(tree)
    builder = _Builder(source)
    bmscs: Dict[str, Bmsc] = {}
    for decl in bmsc_decls:
        if str(decl.name) in bmscs:
            raise builder.fail(f"bMSC {decl.name} declared twice", decl.name)
        bmscs[str(decl.name)] = builder.build_bmsc(decl)
    graph = builder.build_graph(graph_decl, bmscs)
    logger.debug(f"Parsed {source}: {len(bmscs)} bMSCs, {len(graph.nodes)} nodes")
    return MsgSpec(bmscs, graph, source)


def load_spec(path: str) -> MsgSpec:
    text = Path(path).read_text(encoding="utf-8")
    return parse_spec(text, source=str(path))


def _print_bmsc(chart: Bmsc) -> List[str]:
    lines = [f"bmsc {chart.name} {{"]
    lines.append(f"  processes {' '.join(sorted(chart.processes))};")
    for message in chart.messages:
        lines.append(
            f"  msg {message.id[1]} : {message.sender} -> {message.receiver} "
            f"label {message.label};"
        )
    for process, ids in chart.orders:
        lines.append(f"  order {process} : {' '.join(name for _, name in ids)};")
    lines.append("}")
    return lines


def print_spec(bmscs: Mapping[str, Bmsc], graph: MsgGraph) -> str:
    """Canonical source text: charts by name, explicit orders, sorted graph."""
    lines: List[str] = []
    for name in sorted(bmscs):
        lines.extend(_print_bmsc(bmscs[name]))
        lines.append("")
    lines.append(f"graph {graph.name} {{")
    lines.append(f"  init {graph.initial};")
    lines.append(f"  final {graph.terminal};")
    for node in sorted(graph.nodes):
        lines.append(f"  node {node} : {graph.label(node).name};")
    for source, target in sorted(graph.edges):
        lines.append(f"  {source} -> {target};")
    lines.append("}")
    return "\n".join(lines) + "\n"
