"""
Unit and property tests for triggers, controllability and prediction paths.
"""

import pytest
from hypothesis import given, settings

from msgsynth.choice_analysis import (
    ChoiceAnalysis,
    ChoiceKind,
    GraphClass,
    PathKind,
    advance_coverage,
    classify,
    initial_path,
    initiating_processes,
    is_controllable_choice,
    is_local_choice,
    partition_run,
    prediction_paths,
    resolving_events,
    triggers,
)
from msgsynth.errors import PathError, StructuralError
from msgsynth.msg_core import Bmsc, compose_path, enumerate_runs
from msgsynth.tests.helpers import crossing_bmsc, load_fixture, single_message
from msgsynth.tests.oracles import all_partitions, brute_controllable, brute_triggers
from msgsynth.tests.strategies import acyclic_msgs, controllable_corpus, cyclic_msgs


@pytest.mark.unit
class TestChartLevel:
    def test_initiating_processes(self):
        assert initiating_processes(crossing_bmsc()) == frozenset({"p", "q"})
        assert initiating_processes(single_message()) == frozenset({"p"})
        assert initiating_processes(Bmsc.empty()) == frozenset()

    def test_resolving_events(self):
        assert resolving_events(crossing_bmsc(), {"p", "q"}) == {(0, "!a"), (0, "!b")}
        assert resolving_events(single_message(), {"p"}) == frozenset()
        assert resolving_events(single_message(), {"q"}) == {(0, "!x")}

    def test_every_send_resolves_the_empty_set(self):
        assert resolving_events(single_message(), set()) == {(0, "!x")}

    def test_coverage_keeps_maximal_pairs(self):
        coverage = advance_coverage(crossing_bmsc(), frozenset())
        assert coverage == {("p", frozenset({"p", "q"})), ("q", frozenset({"p", "q"}))}

    def test_coverage_grows_across_charts(self):
        # p's send in the first chart reaches q; the second chart carries it back to p
        first = advance_coverage(single_message(), frozenset())
        assert first == {("p", frozenset({"q"}))}
        back = Bmsc.from_messages("back", ["p", "q"], [("y", "q", "p", "n")])
        second = advance_coverage(back, first)
        assert ("p", frozenset({"p", "q"})) in second


@pytest.mark.unit
class TestCrossingGraph:
    def setup_method(self):
        self.graph = load_fixture("ex_cross").graph
        self.analysis = ChoiceAnalysis(self.graph)

    def test_triggers(self):
        assert triggers(self.graph, "s") == {"p", "q"}
        assert triggers(self.graph, "s0") == {"p", "q"}
        assert triggers(self.graph, "sf") == frozenset()

    def test_choice_nodes(self):
        assert self.analysis.choice_nodes == ("s",)

    def test_s_is_controllable_not_local(self):
        assert not is_local_choice(self.graph, "s")
        verdict = is_controllable_choice(self.graph, "s")
        assert verdict.controllable
        assert verdict.counterexample is None

    def test_non_choice_node_is_rejected(self):
        with pytest.raises(StructuralError):
            self.analysis.is_local_choice("s0")

    def test_classification(self):
        classification = classify(self.graph)
        assert classification.node_map == {"s": ChoiceKind.CONTROLLABLE}
        assert classification.overall is GraphClass.CONTROLLABLE_CHOICE
        assert classification.is_controllable

    def test_initial_path(self):
        path = initial_path(self.graph)
        assert path.nodes == ("s0", "s")
        assert path.kind is PathKind.INITIAL

    def test_prediction_paths(self):
        paths = prediction_paths(self.graph)
        assert [p.nodes for p in paths] == [
            ("s", "s"),
            ("s", "sf"),
            ("s0", "s"),
            ("sf",),
        ]
        kinds = {p.nodes: p.kind for p in paths}
        assert kinds[("s", "s")] is PathKind.CONTROLLABLE_REVISIT
        assert kinds[("s", "sf")] is PathKind.TERMINAL_TERMINATED
        assert kinds[("sf",)] is PathKind.TERMINAL_TERMINATED

    def test_partition_single_loop(self):
        parts = partition_run(self.graph, ["s0", "s", "sf"])
        assert "".join(str(p) for p in parts) == "[s0,s][sf]"

    def test_partition_two_loops(self):
        parts = partition_run(self.graph, ["s0", "s", "s", "sf"])
        assert "".join(str(p) for p in parts) == "[s0,s][s,sf]"

    def test_partition_three_loops(self):
        parts = partition_run(self.graph, ["s0", "s", "s", "s", "sf"])
        assert "".join(str(p) for p in parts) == "[s0,s][s,s][sf]"

    def test_partition_rejects_non_runs(self):
        with pytest.raises(PathError):
            self.analysis.partition_run(["s0", "s"])
        with pytest.raises(PathError):
            self.analysis.partition_run(["s0", "sf"])


@pytest.mark.unit
class TestOtherFixtures:
    def test_local_choice_graph(self):
        graph = load_fixture("ex_local").graph
        analysis = ChoiceAnalysis(graph)
        assert analysis.triggers("c") == {"p"}
        assert analysis.is_local_choice("c")
        assert analysis.leader("c") == "p"
        assert analysis.classification.overall is GraphClass.LOCAL_CHOICE
        assert [p.nodes for p in analysis.prediction_paths] == [
            ("A", "sf"),
            ("B", "sf"),
            ("s0", "c"),
        ]

    def test_empty_graph(self):
        graph = load_fixture("ex_empty").graph
        analysis = ChoiceAnalysis(graph)
        assert analysis.choice_nodes == ()
        assert analysis.classification.overall is GraphClass.LOCAL_CHOICE
        assert [p.nodes for p in analysis.prediction_paths] == [("s0", "sf")]
        assert analysis.partition_run(["s0", "sf"])[0].nodes == ("s0", "sf")

    def test_uncontrollable_graph(self):
        graph = load_fixture("ex_uncontrollable").graph
        analysis = ChoiceAnalysis(graph)
        assert analysis.triggers("s") == {"p", "q"}
        verdict = analysis.is_controllable_choice("s")
        assert not verdict.controllable
        assert verdict.counterexample == ("s",)
        assert verdict.condition == "cycle"
        classification = analysis.classification
        assert classification.overall is GraphClass.NEITHER
        assert classification.counterexamples == (("s", ("s",)),)

    def test_prediction_paths_need_a_controllable_graph(self):
        graph = load_fixture("ex_uncontrollable").graph
        with pytest.raises(StructuralError):
            prediction_paths(graph)


@pytest.mark.unit
class TestPartitionUniqueness:
    @pytest.mark.parametrize("name", ["ex_cross", "ex_local", "ex_empty"])
    def test_runs_split_uniquely(self, name):
        graph = load_fixture(name).graph
        analysis = ChoiceAnalysis(graph)
        pieces = {p.nodes for p in analysis.prediction_paths}
        for run in enumerate_runs(graph, 5):
            parts = analysis.partition_run(run)
            assert tuple(n for part in parts for n in part.nodes) == run
            splits = all_partitions(run, analysis.initial_path.nodes, pieces)
            assert splits == [[part.nodes for part in parts]]


@pytest.mark.slow
class TestAgainstBruteForce:
    @given(cyclic_msgs())
    @settings(max_examples=25, deadline=None)
    def test_triggers_match_path_enumeration(self, graph):
        analysis = ChoiceAnalysis(graph)
        expected = brute_triggers(graph)
        for node in graph.nodes:
            assert analysis.triggers(node) == expected[node]

    @given(acyclic_msgs())
    @settings(max_examples=100, deadline=None)
    def test_controllability_matches_path_enumeration(self, graph):
        analysis = ChoiceAnalysis(graph)
        for node in analysis.choice_nodes:
            expected = brute_controllable(graph, node, analysis.triggers(node))
            assert analysis.is_controllable_choice(node).controllable == expected


@pytest.mark.slow
class TestPredictionPathBounds:
    def check(self, graph):
        analysis = ChoiceAnalysis(graph)
        for path in analysis.prediction_paths:
            assert len(path) <= 2 * len(graph.nodes)
            if path.last in analysis.controllable_nodes:
                chart = compose_path(graph, path.nodes)
                assert resolving_events(chart, analysis.triggers(path.last))

    @pytest.mark.parametrize("name", ["ex_cross", "ex_local", "ex_empty"])
    def test_fixtures(self, name):
        self.check(load_fixture(name).graph)

    def test_random_controllable_graphs(self):
        corpus = controllable_corpus()
        assert len(corpus) == 50
        for graph in corpus:
            self.check(graph)
