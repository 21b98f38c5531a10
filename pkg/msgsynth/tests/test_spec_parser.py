"""
Tests for the ``.msg`` specification language.
"""

import pytest

from msgsynth.errors import SpecSemanticError, SpecSyntaxError
from msgsynth.msg_core import canonical_form
from msgsynth.spec_parser import load_spec, parse_spec, print_spec
from msgsynth.tests.helpers import FIXTURES, crossing_bmsc, load_fixture, spec_path

SMALL = """
bmsc hello {
  processes p q;
  msg x : p -> q label hi;  // default order
}

graph g {
  init s0;
  final sf;
  node s0 : hello;
  node sf : empty;
  s0 -> sf;
}
"""


@pytest.mark.unit
class TestParsing:
    def test_crossing_fixture(self):
        spec = load_spec(spec_path("ex_cross"))
        assert set(spec.bmscs) == {"cross"}
        assert spec.bmscs["cross"] == crossing_bmsc()
        graph = spec.graph
        assert graph.name == "crossing"
        assert graph.nodes == ("s0", "s", "sf")
        assert graph.edges == {("s0", "s"), ("s", "s"), ("s", "sf")}
        assert graph.label("s0").is_empty

    def test_default_order_and_comments(self):
        spec = parse_spec(SMALL)
        chart = spec.bmscs["hello"]
        assert chart.order_of("p") == ((0, "!x"),)
        assert chart.order_of("q") == ((0, "?x"),)

    def test_syntax_error_has_a_location(self):
        with pytest.raises(SpecSyntaxError) as info:
            parse_spec("graph g {\n  init s0\n}", source="broken.msg")
        assert info.value.line == 3
        assert str(info.value).startswith("broken.msg:3:")

    def test_undeclared_process(self):
        text = SMALL.replace("p -> q", "p -> r")
        with pytest.raises(SpecSemanticError) as info:
            parse_spec(text)
        assert info.value.line == 4
        assert "undeclared process r" in info.value.detail

    def test_order_with_foreign_event(self):
        text = SMALL.replace("// default order", "order p : ?x;")
        with pytest.raises(SpecSemanticError) as info:
            parse_spec(text)
        assert "not an event of process p" in info.value.detail

    def test_unknown_chart_for_node(self):
        with pytest.raises(SpecSemanticError):
            parse_spec(SMALL.replace("node s0 : hello", "node s0 : goodbye"))

    def test_invalid_graph_is_reported(self):
        text = SMALL.replace("  s0 -> sf;", "  sf -> s0;")
        with pytest.raises(SpecSemanticError) as info:
            parse_spec(text)
        assert "graph g" in info.value.detail

    def test_overtaking_chart_is_rejected(self):
        text = """
        bmsc bad {
          processes p q;
          msg a : p -> q label m;
          msg b : p -> q label m;
          order p : !a !b;
          order q : ?b ?a;
        }
        graph g { init s0; final sf; node s0 : bad; node sf : empty; s0 -> sf; }
        """
        with pytest.raises(SpecSemanticError) as info:
            parse_spec(text)
        assert "fifo" in info.value.detail


@pytest.mark.unit
class TestPrinting:
    @pytest.mark.parametrize("name", FIXTURES)
    def test_print_is_a_fixpoint(self, name):
        spec = load_fixture(name)
        printed = print_spec(spec.bmscs, spec.graph)
        again = parse_spec(printed)
        assert print_spec(again.bmscs, again.graph) == printed
        assert again.bmscs == spec.bmscs
        assert again.graph.edges == spec.graph.edges

    def test_printed_charts_keep_their_shape(self):
        spec = parse_spec(SMALL)
        again = parse_spec(print_spec(spec.bmscs, spec.graph))
        assert canonical_form(again.bmscs["hello"]) == canonical_form(
            spec.bmscs["hello"]
        )
