"""Python access to the skewlab C++ core."""

import json

from ._core import (
    ConfigError,
    FiberMap,
    coupled_p,
    coupled_q,
    critical_length,
    froeschle,
    identity_fiber,
    preset_names,
    sha256_hex,
    standard_map,
)
from ._core import run as _run

__all__ = [
    "ConfigError",
    "FiberMap",
    "coupled_p",
    "coupled_q",
    "critical_length",
    "froeschle",
    "identity_fiber",
    "preset_names",
    "sha256_hex",
    "standard_map",
    "run",
    "run_preset",
]


def _flatten(config):
    return {str(k): str(v) for k, v in (config or {}).items()}


def run(kind, config=None):
    """Run one experiment; config maps dotted keys such as "system.r" to values.

    Returns a dict with the parsed JSON summary, CSV texts by file name, the
    verdict, failed checks and the completed config (defaults filled in).
    """
    out = _run(kind, _flatten(config))
    out["summary"] = json.loads(out["summary"])
    return out


def run_preset(name, config=None):
    return run("preset:" + name, config)
