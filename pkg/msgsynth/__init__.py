"""
Analysis, realization and verification of message sequence graphs.

Decides whether an MSG belongs to the controllable-choice class, synthesizes
communicating finite-state machines that realize it by passing predictions
along with messages, and checks the result on bounded state spaces.
"""

from msgsynth.choice_analysis import ChoiceAnalysis, classify
from msgsynth.msg_core import Bmsc, MsgGraph
from msgsynth.realization import synthesize_cfm
from msgsynth.spec_parser import load_spec, parse_spec

__version__ = "0.1.0"

__all__ = [
    "Bmsc",
    "ChoiceAnalysis",
    "MsgGraph",
    "classify",
    "load_spec",
    "parse_spec",
    "synthesize_cfm",
]
