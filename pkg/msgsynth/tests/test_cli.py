"""
Tests for the command-line interface: outputs and exit codes.
"""

import json
import logging
from unittest.mock import patch

import pytest

from msgsynth.cli import (
    EXIT_INCONCLUSIVE,
    EXIT_NEGATIVE,
    EXIT_OK,
    EXIT_USAGE,
    main,
)
from msgsynth.tests.helpers import spec_path


@pytest.mark.integration
class TestCommands:
    def test_validate(self, capsys):
        assert main(["validate", spec_path("ex_cross")]) == EXIT_OK
        assert "graph crossing with 3 nodes" in capsys.readouterr().out

    def test_classify(self, capsys):
        assert main(["classify", spec_path("ex_cross")]) == EXIT_OK
        out = capsys.readouterr().out.splitlines()
        assert out == [
            "s: controllable-choice (triggers {p,q})",
            "controllable-choice MSG",
        ]

    def test_classify_uncontrollable(self, capsys):
        assert main(["classify", spec_path("ex_uncontrollable")]) == EXIT_NEGATIVE
        out = capsys.readouterr().out
        assert "s: unresolved path s" in out
        assert out.rstrip().endswith("neither")

    def test_classify_json(self, capsys):
        assert main(["--format", "json", "classify", spec_path("ex_local")]) == EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert data["overall"] == "local-choice MSG"

    def test_triggers(self, capsys):
        assert main(["triggers", spec_path("ex_cross"), "s"]) == EXIT_OK
        assert capsys.readouterr().out.strip() == "p q"

    def test_linearize(self, capsys):
        assert main(["linearize", spec_path("ex_cross"), "cross"]) == EXIT_OK
        assert len(capsys.readouterr().out.splitlines()) == 4

    def test_linearize_over_the_cap(self, capsys):
        code = main(["linearize", spec_path("ex_cross"), "cross", "--cap", "2"])
        assert code == EXIT_INCONCLUSIVE

    def test_partition(self, capsys):
        code = main(["partition", spec_path("ex_cross"), "s0", "s", "s", "sf"])
        assert code == EXIT_OK
        assert capsys.readouterr().out.strip() == "[s0,s][s,sf]"

    def test_partition_with_dotted_run(self, capsys):
        assert main(["partition", spec_path("ex_cross"), "s0.s.s.s.sf"]) == EXIT_OK
        assert capsys.readouterr().out.strip() == "[s0,s][s,s][sf]"

    def test_synthesize_text(self, capsys):
        assert main(["synthesize", spec_path("ex_local")]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.startswith("p: 2 states")
        assert "q: 1 states, 2 transitions, 1 accepting" in out

    def test_synthesize_dot(self, capsys):
        assert main(["synthesize", spec_path("ex_local"), "--out", "dot"]) == EXIT_OK
        assert capsys.readouterr().out.startswith('digraph "branching"')

    def test_synthesize_uncontrollable_names_the_node(self, caplog):
        with caplog.at_level(logging.ERROR):
            code = main(["synthesize", spec_path("ex_uncontrollable")])
        assert code == EXIT_NEGATIVE
        assert "nodes: s" in caplog.text

    def test_bad_initial_control(self):
        code = main(["synthesize", spec_path("ex_cross"), "--initial-control", "!a"])
        assert code == EXIT_USAGE

    def test_explore(self, capsys):
        assert main(["explore", spec_path("ex_cross")]) == EXIT_OK
        assert "deadlocks: 0" in capsys.readouterr().out

    def test_simulate(self, capsys):
        code = main(["simulate", spec_path("ex_local"), "--seed", "1"])
        assert code == EXIT_OK
        assert capsys.readouterr().out.strip().endswith("2 steps, accepting")

    def test_equiv(self, capsys):
        assert main(["equiv", spec_path("ex_cross")]) == EXIT_OK
        assert "verdict: equal-at-bound" in capsys.readouterr().out

    def test_equiv_without_annotations(self, capsys):
        code = main(["equiv", spec_path("ex_cross"), "--strip-annotations"])
        assert code == EXIT_NEGATIVE
        assert "verdict: mismatch" in capsys.readouterr().out

    def test_graph(self, capsys):
        assert main(["graph", spec_path("ex_local")]) == EXIT_OK
        assert "palegreen" in capsys.readouterr().out


@pytest.mark.integration
class TestErrors:
    def test_missing_file(self, tmp_path):
        assert main(["validate", str(tmp_path / "none.msg")]) == EXIT_USAGE

    def test_parse_error(self, tmp_path, caplog):
        path = tmp_path / "bad.msg"
        path.write_text("graph g {\n  init s0\n}\n")
        assert main(["validate", str(path)]) == EXIT_USAGE
        assert "bad.msg:3:" in caplog.text

    def test_unknown_node(self):
        assert main(["triggers", spec_path("ex_cross"), "nowhere"]) == EXIT_USAGE

    def test_invalid_run(self):
        assert main(["partition", spec_path("ex_cross"), "s0", "sf"]) == EXIT_USAGE

    def test_unknown_command(self):
        assert main(["frobnicate"]) == EXIT_USAGE


@pytest.mark.integration
class TestLineageAudit:
    @patch("msgsynth.audit.RunAuditEmitter")
    def test_runs_are_reported(self, emitter_class):
        emitter = emitter_class.return_value
        emitter.new_run_id.return_value = "run-1"
        code = main(
            [
                "--lineage-url",
                "http://localhost:5000",
                "classify",
                spec_path("ex_cross"),
            ]
        )
        assert code == EXIT_OK
        emitter_class.assert_called_once_with("http://localhost:5000", "msg-synthesis")
        emitter.emit_start.assert_called_once()
        emitter.emit_complete.assert_called_once()
        emitter.emit_fail.assert_not_called()

    @patch("msgsynth.audit.RunAuditEmitter")
    def test_failures_are_reported(self, emitter_class):
        emitter = emitter_class.return_value
        code = main(
            [
                "--lineage-url",
                "http://localhost:5000",
                "synthesize",
                spec_path("ex_uncontrollable"),
            ]
        )
        assert code == EXIT_NEGATIVE
        emitter.emit_fail.assert_called_once()
        emitter.emit_complete.assert_not_called()
