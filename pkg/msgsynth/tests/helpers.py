"""
Shared test helpers: fixture specifications and small chart builders.
"""

from pathlib import Path
from typing import Sequence

from msgsynth.msg_core import Bmsc, parse_word
from msgsynth.spec_parser import MsgSpec, load_spec

SPEC_DIR = Path(__file__).resolve().parents[2] / "specs"

FIXTURES = ("ex_cross", "ex_empty", "ex_local", "ex_uncontrollable")
CONTROLLABLE_FIXTURES = ("ex_cross", "ex_empty", "ex_local")


def spec_path(name: str) -> str:
    return str(SPEC_DIR / f"{name}.msg")


def load_fixture(name: str) -> MsgSpec:
    return load_spec(spec_path(name))


def crossing_bmsc() -> Bmsc:
    """The node-s chart of the crossing fixture."""
    return Bmsc.from_messages(
        "cross",
        ["p", "q"],
        [("a", "p", "q", "m"), ("b", "q", "p", "m'")],
        {"p": ["!a", "?b"], "q": ["!b", "?a"]},
    )


def single_message(label: str = "m", name: str = "single") -> Bmsc:
    return Bmsc.from_messages(name, ["p", "q"], [("x", "p", "q", label)])


def words(*texts: str) -> Sequence:
    return frozenset(parse_word(text) for text in texts)


CROSS_WORDS = (
    "p!q(m) q!p(m') p?q(m') q?p(m)",
    "p!q(m) q!p(m') q?p(m) p?q(m')",
    "q!p(m') p!q(m) p?q(m') q?p(m)",
    "q!p(m') p!q(m) q?p(m) p?q(m')",
)
