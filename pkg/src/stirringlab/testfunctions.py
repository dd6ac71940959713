"""Declarative registry of test-function shapes.

A registry file holds lines `name = preset[:params][ ell=<width>]`; shapes are
interior profiles that make_test_function blends with boundary layers so the
profile-dependent Robin conditions hold at every grid time. The built-in
registry covers the presets used by the studies and the acceptance suite.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .macro import MacroSolution, make_test_function

__all__ = ["PRESETS", "parse_registry", "load_registry", "DEFAULT_REGISTRY"]

DEFAULT_REGISTRY = """
cos2 = cos2
cos2plus = cos2plus
ramp = linear:0.5,0.25
bump = gauss:0.0,0.45
"""


def _cos2():
    f = lambda u: np.cos(np.pi * (np.asarray(u, dtype=float) + 1) / 2) ** 2
    fp = lambda u: -np.pi * np.cos(np.pi * (np.asarray(u, dtype=float) + 1) / 2) * np.sin(np.pi * (np.asarray(u, dtype=float) + 1) / 2)
    return f, fp


def _cos2plus():
    f, fp = _cos2()
    return (lambda u: f(u) + 0.5), fp


def _linear(a, b):
    return (lambda u: a + b * np.asarray(u, dtype=float)), (lambda u: b * np.ones_like(np.asarray(u, dtype=float)))


def _gauss(c, w):
    f = lambda u: np.exp(-((np.asarray(u, dtype=float) - c) ** 2) / (2 * w * w))
    fp = lambda u: -(np.asarray(u, dtype=float) - c) / (w * w) * f(u)
    return f, fp


PRESETS = {"cos2": _cos2, "cos2plus": _cos2plus, "linear": _linear, "gauss": _gauss}


def parse_registry(text: str):
    """-> dict name -> (preset, params tuple, ell)."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"registry line {lineno}: expected 'name = preset'")
        name, _, spec = line.partition("=")
        name = name.strip()
        ell = 0.15
        parts = spec.strip().split()
        shape_spec = parts[0]
        for extra in parts[1:]:
            if extra.startswith("ell="):
                ell = float(extra[4:])
            else:
                raise ValueError(f"registry line {lineno}: unknown option {extra!r}")
        preset, _, ptext = shape_spec.partition(":")
        if preset not in PRESETS:
            raise ValueError(f"registry line {lineno}: unknown preset {preset!r}")
        params = tuple(float(p) for p in ptext.split(",")) if ptext else ()
        out[name] = (preset, params, ell)
    return out


def load_registry(names, macro: MacroSolution, path=None):
    """Instantiate blended test functions for the named registry entries."""
    text = Path(path).read_text() if path else DEFAULT_REGISTRY
    table = parse_registry(text)
    out = {}
    for name in names:
        if name not in table:
            raise ValueError(f"test function {name!r} not in registry")
        preset, params, ell = table[name]
        shape, shape_prime = PRESETS[preset](*params)
        out[name] = make_test_function(shape, shape_prime, macro, ell=ell)
    return out
