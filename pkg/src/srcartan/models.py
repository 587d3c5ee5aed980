"""Bundled example structures as spec-file documents."""

from __future__ import annotations

import copy
import json
from fractions import Fraction
from pathlib import Path

from .specfile import SpecFile, parse_spec

_HEIS_FRAME = [["1", "0", "0"], ["0", "1", "-x"]]
_R5_FRAME = [["1", "0", "0", "0", "0"], ["0", "1", "0", "0", "-x1"],
             ["0", "0", "1", "0", "0"], ["0", "0", "0", "1", "-x2"]]
_R5_POINTS = [[0, 0, 0, 0, 0], [0.5, -0.25, 0.75, 0.1, -0.5], [-1, 1, 0.5, -0.5, 1],
              [0.3, 0.6, -0.9, 0.2, 0.4]]


def _heisenberg(name: str, gram) -> dict:
    return {"name": name, "chart": ["x", "y", "z"], "eta": "dz + x*dy",
            "metric": {"frame": _HEIS_FRAME, "gram": gram},
            "points": {"lattice": {"lo": -1, "hi": 1, "count": 3}}}


def r5_document(p, q, r, s) -> dict:
    vals = [str(Fraction(x)) for x in (p, q, r, s)]
    gram = [[vals[i] if i == j else "0" for j in range(4)] for i in range(4)]
    return {"name": "r5 " + " ".join(vals), "chart": ["x1", "y1", "x2", "y2", "z"],
            "eta": "dz + x1*dy1 + x2*dy2", "metric": {"frame": _R5_FRAME, "gram": gram},
            "points": {"explicit": _R5_POINTS}}


MODELS: dict[str, dict] = {
    "heisenberg": _heisenberg("heisenberg", [["1", "0"], ["0", "1"]]),
    "heisenberg_scaled": _heisenberg("heisenberg, metric scaled by 4", [["4", "0"], ["0", "4"]]),
    "heisenberg_nonflat": _heisenberg("heisenberg, metric dx^2 + (1 + x^2) dy^2",
                                      [["1", "0"], ["0", "1 + x^2"]]),
    "r5_unit": r5_document(1, 1, 1, 1),
    "r5_1114": r5_document(1, 1, 1, 4),
    "noncontact": {"name": "dz on R^3 (not contact)", "chart": ["x", "y", "z"], "eta": "dz",
                   "metric": {"frame": [["1", "0", "0"], ["0", "1", "0"]],
                              "gram": [["1", "0"], ["0", "1"]]},
                   "points": {"explicit": [[0, 0, 0]]}},
}

MAPS: dict[str, dict] = {
    "identity": {"map": ["x", "y", "z"]},
    "translate": {"map": ["x + 1", "y", "z - y"]},
}

# Heisenberg-type models whose reduction and connection are checked in the acceptance run
BUNDLED_CONTACT = ("heisenberg", "heisenberg_scaled", "heisenberg_nonflat", "r5_unit", "r5_1114")


def document(name: str) -> dict:
    if name not in MODELS:
        raise KeyError(f"unknown model {name!r}; choose from {sorted(MODELS)}")
    return copy.deepcopy(MODELS[name])


def load(name: str) -> SpecFile:
    return parse_spec(document(name), f"builtin:{name}")


def write_bundled(directory) -> list[Path]:
    """Write every model and map as JSON files (used to refresh the ``specs`` folder)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    out = []
    for name, doc in MODELS.items():
        path = d / f"{name}.json"
        path.write_text(json.dumps(doc, indent=2) + "\n")
        out.append(path)
    for name, doc in MAPS.items():
        path = d / f"map_{name}.json"
        path.write_text(json.dumps(doc, indent=2) + "\n")
        out.append(path)
    return out
