"""Calibrated constants shared by the planners and the statistical checks.

Defaults ship in ``data/constants.json``; a user file with the same layout
overrides individual entries.  ``scripts/calibrate.py`` documents how each
default was obtained.
"""

from __future__ import annotations

import copy
import json
from functools import lru_cache
from importlib import resources
from pathlib import Path


@lru_cache(maxsize=1)
def _defaults() -> dict:
    text = resources.files("ripkit").joinpath("data/constants.json").read_text()
    return json.loads(text)


_user: dict = {}


def use_constants(path=None) -> None:
    """Install (or with ``None`` clear) process-wide overrides read from ``path``."""
    _user.clear()
    if path is not None:
        _user.update(json.loads(Path(path).read_text()))


def active() -> dict:
    out = copy.deepcopy(_defaults())
    _merge(out, _user)
    return out


def load_constants(path=None) -> dict:
    """Default constants, deep-merged with the JSON file at ``path`` if given."""
    out = copy.deepcopy(_defaults())
    if path is not None:
        _merge(out, json.loads(Path(path).read_text()))
    return out


def section(name: str, overrides: dict | None = None) -> dict:
    out = dict(_defaults()[name])
    out.update(_user.get(name, {}))
    if overrides:
        unknown = set(overrides) - set(out)
        if unknown:
            raise KeyError(f"unknown {name} constants: {sorted(unknown)}")
        out.update({k: v for k, v in overrides.items() if v is not None})
    return out


def _merge(dst: dict, src: dict) -> None:
    for k, v in src.items():
        if isinstance(v, dict) and isinstance(dst.get(k), dict):
            _merge(dst[k], v)
        else:
            dst[k] = v
