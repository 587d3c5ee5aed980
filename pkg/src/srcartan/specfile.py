"""JSON structure-specification files.

Example::

    {
      "name": "heisenberg",
      "chart": ["x", "y", "z"],
      "eta": "dz + x*dy",
      "metric": {"frame": [["1", "0", "0"], ["0", "1", "-x"]],
                 "gram": [["1", "0"], ["0", "1"]]},
      "points": {"explicit": [[0, 0, 0]], "lattice": {"lo": -1, "hi": 1, "count": 3}},
      "options": {"tol": 1e-9, "fd_step": 1e-4}
    }

``eta`` may also be a list of coefficient expressions; ``metric`` may be
``{"coframe": [...]}`` with 2n one-forms in either notation.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import symexpr as sx
from .errors import ParseError, SpecError
from .linalg import EPS
from .reduction import DEFAULT_FD_STEP, SubRiemannianSpec, lattice
from .symexpr import Chart, OneForm

TOL_ENV = "SRCARTAN_TOL"


@dataclass(frozen=True)
class Options:
    tol: float = EPS
    fd_step: float = DEFAULT_FD_STEP
    gram: tuple | None = None


@dataclass(frozen=True)
class SpecFile:
    spec: SubRiemannianSpec
    points: tuple[tuple[float, ...], ...]
    options: Options
    source: str = ""


def _expr(src, chart: Chart, where: str):
    if isinstance(src, (int, float)) and not isinstance(src, bool):
        return sx.Const(Fraction(src))
    if not isinstance(src, str):
        raise SpecError(f"{where}: expected an expression string")
    try:
        return sx.parse(src, chart)
    except ParseError as exc:
        raise SpecError(f"{where}: {exc}") from None


def _one_form(src, chart: Chart, where: str) -> OneForm:
    if isinstance(src, str):
        try:
            return sx.parse_one_form(src, chart)
        except ParseError as exc:
            raise SpecError(f"{where}: {exc}") from None
    if isinstance(src, list) and len(src) == chart.dimension:
        return OneForm(tuple(_expr(c, chart, f"{where}[{i}]") for i, c in enumerate(src)))
    raise SpecError(f"{where}: expected a one-form string or {chart.dimension} coefficients")


def _chart(doc) -> Chart:
    raw = doc.get("chart")
    if isinstance(raw, dict):
        names = raw.get("names")
        if "dimension" in raw and names is not None and raw["dimension"] != len(names):
            raise SpecError("chart: dimension does not match the variable names")
    else:
        names = raw
    if not isinstance(names, list) or not all(isinstance(x, str) for x in names):
        raise SpecError("chart: expected a list of variable names")
    try:
        return Chart(tuple(names))
    except ValueError as exc:
        raise SpecError(f"chart: {exc}") from None


def _points(block, dim: int, where: str = "points") -> list[tuple[float, ...]]:
    if block is None:
        return lattice(dim)
    if isinstance(block, list):
        block = {"explicit": block}
    if not isinstance(block, dict):
        raise SpecError(f"{where}: expected a list or an object")
    out = []
    for p in block.get("explicit", []):
        if not isinstance(p, list) or len(p) != dim:
            raise SpecError(f"{where}: point {p!r} must have {dim} coordinates")
        try:
            out.append(tuple(float(x) for x in p))
        except (TypeError, ValueError):
            raise SpecError(f"{where}: non-numeric coordinate in {p!r}") from None
    lat = block.get("lattice")
    if lat is not None:
        try:
            out.extend(lattice(dim, float(lat.get("lo", -1)), float(lat.get("hi", 1)),
                               int(lat.get("count", 3))))
        except (TypeError, ValueError, AttributeError):
            raise SpecError(f"{where}: malformed lattice block") from None
    if not out:
        raise SpecError(f"{where}: no sample points")
    return out


def default_tol() -> float:
    raw = os.environ.get(TOL_ENV)
    if raw is None:
        return EPS
    try:
        return float(raw)
    except ValueError:
        raise SpecError(f"{TOL_ENV} is not a number: {raw!r}") from None


def _options(block) -> Options:
    block = block or {}
    if not isinstance(block, dict):
        raise SpecError("options: expected an object")
    gram = block.get("gram")
    if gram in (None, "standard"):
        gram = None
    else:
        try:
            gram = tuple(tuple(Fraction(x) for x in row) for row in gram)
        except (TypeError, ValueError):
            raise SpecError("options.gram: expected 'standard' or a matrix of rationals") from None
    try:
        return Options(float(block.get("tol", default_tol())),
                       float(block.get("fd_step", DEFAULT_FD_STEP)), gram)
    except (TypeError, ValueError):
        raise SpecError("options: tol and fd_step must be numbers") from None


def parse_spec(doc: dict, source: str = "") -> SpecFile:
    if not isinstance(doc, dict):
        raise SpecError("spec file must be a JSON object")
    chart = _chart(doc)
    dim = chart.dimension
    if "eta" not in doc:
        raise SpecError("missing eta block")
    eta = _one_form(doc["eta"], chart, "eta")
    metric = doc.get("metric")
    if not isinstance(metric, dict):
        raise SpecError("missing metric block")
    if "coframe" in metric:
        forms = metric["coframe"]
        if not isinstance(forms, list):
            raise SpecError("metric.coframe: expected a list")
        coframe = tuple(_one_form(w, chart, f"metric.coframe[{i}]") for i, w in enumerate(forms))
        spec = SubRiemannianSpec(chart, eta, coframe=coframe, name=doc.get("name", ""))
    elif "frame" in metric and "gram" in metric:
        frame, gram = metric["frame"], metric["gram"]
        if not isinstance(frame, list) or not all(isinstance(v, list) and len(v) == dim for v in frame):
            raise SpecError(f"metric.frame: expected vectors with {dim} components")
        if not isinstance(gram, list) or not all(isinstance(r, list) for r in gram):
            raise SpecError("metric.gram: expected a matrix")
        fr = tuple(tuple(_expr(c, chart, f"metric.frame[{a}][{i}]") for i, c in enumerate(v))
                   for a, v in enumerate(frame))
        gr = tuple(tuple(_expr(c, chart, f"metric.gram[{a}][{b}]") for b, c in enumerate(r))
                   for a, r in enumerate(gram))
        spec = SubRiemannianSpec(chart, eta, frame=fr, gram=gr, name=doc.get("name", ""))
    else:
        raise SpecError("metric: give either frame+gram or coframe")
    return SpecFile(spec, tuple(_points(doc.get("points"), dim)), _options(doc.get("options")),
                    source)


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc.msg}, offset {exc.pos})") from None


def load_spec(path) -> SpecFile:
    return parse_spec(load_json(path), str(path))


def load_points(path, dim: int) -> list[tuple[float, ...]]:
    return _points(load_json(path), dim, str(path))


def load_map(path_or_doc, chart: Chart) -> tuple[sx.Expr, ...]:
    doc = load_json(path_or_doc) if not isinstance(path_or_doc, dict) else path_or_doc
    exprs = doc.get("map") if isinstance(doc, dict) else doc
    if not isinstance(exprs, list) or len(exprs) != chart.dimension:
        raise SpecError(f"map: expected {chart.dimension} coordinate expressions")
    return tuple(_expr(e, chart, f"map[{i}]") for i, e in enumerate(exprs))
