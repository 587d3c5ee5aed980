"""Per-point invariant reports: pipeline driver, JSON-lines and table rendering."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .connection import ConnectionField, curvature_pairs, invariant_complement
from .errors import ContactDegeneracy, SpecError, StencilError
from .gstruct import build_lie_algebra
from .reduction import Stencil, adapted_coframe, usable_points, validate_spec_at
from .specfile import SpecFile

REPORT_TOL = 1e-6


@dataclass
class InvariantReport:
    meta: dict
    rows: list[dict] = field(default_factory=list)

    def __eq__(self, other):
        return isinstance(other, InvariantReport) and self.meta == other.meta and self.rows == other.rows


class StageError(Exception):
    """Wraps a geometric failure with the point and pipeline stage."""

    def __init__(self, stage: str, point, cause: Exception):
        self.stage, self.point, self.cause = stage, tuple(point), cause
        super().__init__(f"{stage} failed at point {self.point}: {cause}")


def _clean(x: float) -> float:
    x = float(x)
    return 0.0 if x == 0.0 else x


def _vec(a) -> list[float]:
    return [_clean(x) for x in np.ravel(a)]


def curvature_labels(n: int) -> list[str]:
    alg = build_lie_algebra(n, "g2")
    pairs = list(itertools.combinations(range(2 * n + 1), 2))
    return [f"R[{lab}]_{i + 1}{j + 1}" for lab in alg.labels for i, j in pairs]


def _spread(rows: list[dict], key: str) -> float:
    if not rows:
        return 0.0
    arr = np.array([r[key] for r in rows], dtype=float)
    return float(np.abs(arr - arr[0]).max()) if arr.size else 0.0


def strata_changes(rows: list[dict]) -> list[dict]:
    out = []
    for prev, cur in zip(rows, rows[1:]):
        if prev["stabilizer_dim"] != cur["stabilizer_dim"]:
            out.append({"from_point": prev["point"], "to_point": cur["point"],
                        "from_dim": prev["stabilizer_dim"], "to_dim": cur["stabilizer_dim"]})
    return out


def run_invariants(sf: SpecFile, points=None, tol: float | None = None,
                   fd_step: float | None = None, report_tol: float = REPORT_TOL) -> InvariantReport:
    spec = sf.spec
    tol = sf.options.tol if tol is None else tol
    h = sf.options.fd_step if fd_step is None else fd_step
    pts = list(points) if points is not None else list(sf.points)
    cf = adapted_coframe(spec, pts[0] if pts else None)
    pts = usable_points(spec, pts, cf)
    if not pts:
        raise SpecError("no sample point evaluates; nothing to report")
    try:
        cm = invariant_complement(spec.n, sf.options.gram)
    except ValueError as exc:
        raise SpecError(f"options.gram: {exc}") from None
    if sf.options.gram is not None and not cm.is_invariant():
        raise SpecError("options.gram: complement is not G2-invariant")
    rows = []
    for p in pts:
        stage = "validation"
        try:
            validate_spec_at(spec, p, tol)
            stage = "reduction"
            st = Stencil(cf, p, h, tol)
            rec = st.record()
            stage = "connection"
            data = ConnectionField(st, cm).data(with_curvature=True)
        except (ContactDegeneracy, StencilError) as exc:
            raise StageError(stage, p, exc) from exc
        lam = rec.lambdas
        associated = bool(all(abs(m - 1.0) <= 1e-8 for m in rec.mu))
        rows.append({
            "point": _vec(p),
            "lambdas": _vec(lam),
            "mu": _vec(rec.mu),
            "b_shift": _vec(rec.b_shift),
            "torsion": _vec(data.torsion_coords),
            "curvature": _vec(curvature_pairs(data.curvature)),
            "stabilizer_dim": int(rec.stabilizer_dim),
            "associated": associated,
            "f": _clean(1.0 / lam[0]) if associated else None,
        })
    constant = all(_spread(rows, k) <= report_tol for k in ("mu", "torsion", "curvature"))
    meta = {
        "name": spec.name,
        "n": spec.n,
        "tol": tol,
        "fd_step": h,
        "report_tol": report_tol,
        "gram": "standard" if sf.options.gram is None else "custom",
        "complement_dim": cm.dim,
        "torsion_labels": cm.labels(),
        "curvature_labels": curvature_labels(spec.n),
        "points": len(rows),
        "constant_invariants": bool(constant),
        "stabilizer_strata": sorted({r["stabilizer_dim"] for r in rows}),
        "strata_changes": strata_changes(rows),
        "associated_everywhere": all(r["associated"] for r in rows),
    }
    return InvariantReport(meta, rows)


# --- serialisation ---

def to_json_lines(report: InvariantReport) -> str:
    lines = [json.dumps({"type": "meta", **report.meta})]
    lines += [json.dumps({"type": "row", **row}) for row in report.rows]
    return "\n".join(lines) + "\n"


def read_json_lines(text: str) -> InvariantReport:
    meta, rows = None, []
    for line in text.splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        kind = obj.pop("type")
        if kind == "meta":
            meta = obj
        elif kind == "row":
            rows.append(obj)
        else:
            raise ValueError(f"unknown record type {kind!r}")
    if meta is None:
        raise ValueError("report has no meta record")
    return InvariantReport(meta, rows)


def fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, bool):
        return "yes" if x else "no"
    if isinstance(x, (int, np.integer)):
        return str(x)
    return f"{x:.6g}"


def _fmt_list(xs) -> str:
    return "[" + ", ".join(fmt(x) for x in xs) + "]"


def table(header: list[str], body: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in body)) if body else len(h)
              for i, h in enumerate(header)]
    line = "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()
    rule = "  ".join("-" * w for w in widths)
    rows = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in body]
    return "\n".join([line, rule, *rows])


def _component_table(report: InvariantReport, key: str, labels: list[str], tol: float) -> str:
    used = [i for i in range(len(labels))
            if any(abs(r[key][i]) > tol for r in report.rows)]
    if not used:
        return f"{key}: all components below {fmt(tol)}"
    header = ["#"] + [labels[i] for i in used]
    body = [[str(k)] + [fmt(r[key][i]) for i in used] for k, r in enumerate(report.rows)]
    return f"{key} (nonzero components):\n" + table(header, body)


def to_table(report: InvariantReport) -> str:
    m = report.meta
    out = [f"structure: {m['name'] or '-'}   n = {m['n']}   points = {m['points']}",
           f"tol = {fmt(m['tol'])}   fd_step = {fmt(m['fd_step'])}   gram = {m['gram']}"
           f"   dim C = {m['complement_dim']}",
           f"constant invariants: {fmt(m['constant_invariants'])}   "
           f"stabilizer dims: {m['stabilizer_strata']}   "
           f"associated metric at every point: {fmt(m['associated_everywhere'])}"]
    for ch in m["strata_changes"]:
        out.append(f"stratum change: dim {ch['from_dim']} at {_fmt_list(ch['from_point'])}"
                   f" -> dim {ch['to_dim']} at {_fmt_list(ch['to_point'])}")
    out.append("")
    header = ["#", "point", "lambdas", "mu", "b_shift", "stab", "assoc", "f"]
    body = [[str(k), _fmt_list(r["point"]), _fmt_list(r["lambdas"]), _fmt_list(r["mu"]),
             _fmt_list(r["b_shift"]), str(r["stabilizer_dim"]), fmt(r["associated"]), fmt(r["f"])]
            for k, r in enumerate(report.rows)]
    out.append(table(header, body))
    out.append("")
    out.append(_component_table(report, "torsion", m["torsion_labels"], m["report_tol"]))
    out.append("")
    out.append(_component_table(report, "curvature", m["curvature_labels"], m["report_tol"]))
    return "\n".join(out) + "\n"
