"""
Unit tests for charts, composition and graphs.
"""

import pytest
from hypothesis import given, settings

from msgsynth.errors import (
    GraphError,
    InvalidBmscError,
    PathError,
    SizeLimitError,
)
from msgsynth.msg_core import (
    Action,
    Bmsc,
    EventKind,
    MsgGraph,
    canonical_form,
    compose,
    compose_path,
    empty_bmsc,
    enumerate_runs,
    format_word,
    linearizations,
    parse_word,
    projection,
    require_run,
    validate_bmsc,
    validate_graph,
    visual_order,
)
from msgsynth.tests.helpers import CROSS_WORDS, crossing_bmsc, load_fixture, words
from msgsynth.tests.strategies import bmscs


@pytest.mark.unit
class TestActions:
    def test_parse_and_render(self):
        action = Action.parse("p!q(m')")
        assert action == Action("p", EventKind.SEND, "q", "m'")
        assert str(action) == "p!q(m')"
        assert action.channel == ("p", "q")

    def test_receive_channel_points_from_sender(self):
        action = Action.parse("q?p(m)")
        assert not action.is_send
        assert action.channel == ("p", "q")

    def test_word_formatting(self):
        word = parse_word("p!q(m) q?p(m)")
        assert len(word) == 2
        assert format_word(word) == "p!q(m) q?p(m)"
        assert format_word(()) == "ε"


@pytest.mark.unit
class TestValidation:
    def test_crossing_chart_is_valid(self):
        assert validate_bmsc(crossing_bmsc()) == []

    def test_overtaking_messages_violate_fifo(self):
        chart = Bmsc.from_messages(
            "overtake",
            ["p", "q"],
            [("a", "p", "q", "m"), ("b", "p", "q", "m")],
            {"p": ["!a", "!b"], "q": ["?b", "?a"]},
        )
        codes = [v.code for v in validate_bmsc(chart)]
        assert codes == ["fifo"]

    def test_cyclic_order_is_reported(self):
        chart = Bmsc.from_messages(
            "knot",
            ["p", "q"],
            [("a", "p", "q", "m"), ("b", "q", "p", "n")],
            {"p": ["?b", "!a"], "q": ["?a", "!b"]},
        )
        assert "cycle" in [v.code for v in validate_bmsc(chart)]

    def test_self_message_and_unknown_process(self):
        chart = Bmsc.from_messages(
            "bad", ["p"], [("a", "p", "p", "m"), ("b", "p", "r", "m")]
        )
        codes = {v.code for v in validate_bmsc(chart)}
        assert {"self-message", "unknown-process"} <= codes

    def test_unplaced_event_is_a_pairing_error(self):
        chart = Bmsc.from_messages(
            "half", ["p", "q"], [("a", "p", "q", "m")], {"p": ["!a"], "q": []}
        )
        assert [v.code for v in validate_bmsc(chart)] == ["pairing"]


@pytest.mark.unit
class TestCharts:
    def setup_method(self):
        self.cross = crossing_bmsc()

    def test_visual_order_of_crossing(self):
        order = visual_order(self.cross)
        assert order == {
            ((0, "!a"), (0, "?b")),
            ((0, "!b"), (0, "?a")),
            ((0, "!a"), (0, "?a")),
            ((0, "!b"), (0, "?b")),
        }

    def test_projection(self):
        assert projection(self.cross, "p") == parse_word("p!q(m) p?q(m')")
        assert projection(self.cross, "r") == ()

    def test_linearizations_of_crossing(self):
        assert linearizations(self.cross) == words(*CROSS_WORDS)

    def test_empty_chart_has_one_empty_linearization(self):
        assert linearizations(empty_bmsc()) == frozenset({()})

    def test_linearization_cap(self):
        double = compose(self.cross, self.cross)
        with pytest.raises(SizeLimitError) as info:
            linearizations(double, cap=6)
        assert info.value.size == 8

    def test_compose_shifts_second_chart(self):
        double = compose(self.cross, self.cross)
        assert double.span == 2
        assert double.order_of("p") == ((0, "!a"), (0, "?b"), (1, "!a"), (1, "?b"))
        assert double.name == "cross.cross"

    def test_weak_composition_keeps_cross_process_freedom(self):
        double = compose(self.cross, self.cross)
        # q may start the second copy before p has received the first b
        assert not double.precedes((0, "?b"), (1, "!b"))
        assert double.precedes((0, "?a"), (1, "!b"))

    def test_compose_rejects_invalid_operand(self):
        broken = Bmsc.from_messages("bad", ["p"], [("a", "p", "p", "m")])
        with pytest.raises(InvalidBmscError):
            compose(self.cross, broken)

    def test_compose_with_empty_chart(self):
        left = compose(empty_bmsc(), self.cross)
        assert left.span == 2
        assert canonical_form(left) == canonical_form(self.cross)
        right = compose(self.cross, empty_bmsc())
        assert right.events.keys() == self.cross.events.keys()

    def test_later_processes(self):
        assert self.cross.later_processes((0, "!a")) == frozenset({"p", "q"})
        single = Bmsc.from_messages("one", ["p", "q"], [("x", "p", "q", "m")])
        assert single.later_processes((0, "!x")) == frozenset({"q"})

    @given(bmscs(max_messages=3), bmscs(max_messages=3), bmscs(max_messages=3))
    @settings(max_examples=25, deadline=None)
    def test_composition_is_associative(self, a, b, c):
        assert compose(compose(a, b), c) == compose(a, compose(b, c))

    @given(bmscs(max_messages=3), bmscs(max_messages=3))
    @settings(max_examples=25, deadline=None)
    def test_projection_of_composition(self, a, b):
        both = compose(a, b)
        for process in both.processes:
            assert projection(both, process) == projection(a, process) + projection(
                b, process
            )

    @given(bmscs())
    @settings(max_examples=30, deadline=None)
    def test_generated_charts_are_valid(self, chart):
        assert validate_bmsc(chart) == []
        assert canonical_form(chart) == canonical_form(compose(empty_bmsc(), chart))


@pytest.mark.unit
class TestGraphs:
    def setup_method(self):
        self.graph = load_fixture("ex_cross").graph

    def test_successors_and_choice(self):
        assert self.graph.successors("s") == ("s", "sf")
        assert self.graph.is_choice("s")
        assert not self.graph.is_choice("s0")

    def test_unknown_node(self):
        with pytest.raises(GraphError):
            self.graph.label("nowhere")

    def test_compose_path_of_one_loop_matches_node_chart(self):
        chart = compose_path(self.graph, ["s0", "s"])
        assert canonical_form(chart) == canonical_form(crossing_bmsc())
        assert (1, "!a") in chart.events

    def test_compose_path_requires_edges(self):
        with pytest.raises(PathError):
            compose_path(self.graph, ["s0", "sf"])

    def test_require_run(self):
        assert require_run(self.graph, ["s0", "s", "sf"]) == ("s0", "s", "sf")
        with pytest.raises(PathError):
            require_run(self.graph, ["s0", "s"])

    def test_enumerate_runs_respects_visit_bound(self):
        runs = set(enumerate_runs(self.graph, 3))
        assert runs == {
            ("s0", "s", "sf"),
            ("s0", "s", "s", "sf"),
            ("s0", "s", "s", "s", "sf"),
        }

    def test_fixture_graphs_are_valid(self):
        for name in ("ex_cross", "ex_empty", "ex_local", "ex_uncontrollable"):
            assert validate_graph(load_fixture(name).graph) == []

    def test_graph_violations(self):
        chart = empty_bmsc()
        graph = MsgGraph.build(
            "broken",
            ["s0", "a", "b", "sf"],
            [("s0", "sf"), ("a", "s0"), ("sf", "b")],
            "s0",
            "sf",
            {node: chart for node in ("s0", "a", "b", "sf")},
        )
        codes = {v.code for v in validate_graph(graph)}
        assert {"initial-incoming", "terminal-outgoing"} <= codes

    def test_unreachable_and_dead_end_nodes(self):
        chart = empty_bmsc()
        graph = MsgGraph.build(
            "loose",
            ["s0", "a", "b", "sf"],
            [("s0", "sf"), ("s0", "a"), ("b", "sf")],
            "s0",
            "sf",
            {node: chart for node in ("s0", "a", "b", "sf")},
        )
        violations = {(v.code, v.location) for v in validate_graph(graph)}
        assert ("dead-end", "a") in violations
        assert ("unreachable", "b") in violations
