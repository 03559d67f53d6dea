"""Operating-envelope demand response: load flow, envelopes, ADMM dispatch."""

import json as _json

from . import _core
from ._core import (
    ConfigError,
    ConvergenceError,
    DoedrError,
    EnvelopeError,
    Feeder,
    InputError,
    IoError,
    admm_track,
    comfort_interval,
    convex_hull,
    halfspace,
    injection_limits,
    load_feeder,
    solve_power_flow,
)


def run_study(config, out=None, seed=None, scenarios=None):
    """Run a study file and return its summary as a dict."""
    return _json.loads(_core._run_study_json(str(config), None if out is None else str(out), seed, scenarios))


__all__ = [
    "ConfigError",
    "ConvergenceError",
    "DoedrError",
    "EnvelopeError",
    "Feeder",
    "InputError",
    "IoError",
    "admm_track",
    "comfort_interval",
    "convex_hull",
    "halfspace",
    "injection_limits",
    "load_feeder",
    "run_study",
    "solve_power_flow",
]
