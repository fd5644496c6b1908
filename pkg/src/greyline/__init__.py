"""Greybox fuzzer with input learning for contract-style integer programs.

The fuzzer executes sequences of function calls against a small
deterministic VM, records branch-distance and storage-write costs at
every instrumented site, and fits a straight line through two (input,
cost) samples to propose the zero-crossing as the next input.
"""

from greyline.ir import parse_program, ParseError, TargetProgram
from greyline.interp import ExecConfig, Interpreter, InputVector, Call
from greyline.engine import CampaignConfig, campaign

__all__ = [
    "parse_program",
    "ParseError",
    "TargetProgram",
    "ExecConfig",
    "Interpreter",
    "InputVector",
    "Call",
    "CampaignConfig",
    "campaign",
]

__version__ = "0.1.0"
