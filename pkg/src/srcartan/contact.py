"""Associated contact metrics: Reeb field, g~, phi and the existence question."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from . import symexpr as sx
from .errors import ContactDegeneracy
from .linalg import EPS, skew_normal_form
from .reduction import (SubRiemannianSpec, adapted_coframe, reeb_field, structure_coefficients)
from .symexpr import Chart, Expr, OneForm


@dataclass(frozen=True)
class ContactMetricData:
    """eta, its Reeb field xi, the metric g~ (expressions) and phi (evaluated per point).

    g~ = sum_a (theta^a - theta^a(xi) eta)^2 + eta^2 restricts to g on D,
    makes xi a unit normal to D, and phi solves g~(X, phi Y) = d eta(X, Y).
    """

    spec: SubRiemannianSpec
    eta: OneForm
    xi: tuple[Expr, ...]
    gtilde: tuple[tuple[Expr, ...], ...] = field(repr=False)

    @cached_property
    def _compiled(self):
        dim = self.eta.dim
        d = sx.exterior_d(self.eta)
        flat = [c for row in self.gtilde for c in row]
        return (sx.compile_exprs(flat), sx.compile_exprs(self.xi),
                sx.compile_exprs(self.eta.coeffs),
                sx.compile_exprs([d.coeff(i, j) for i in range(dim) for j in range(dim)]))

    def at(self, point) -> dict[str, np.ndarray]:
        dim = self.eta.dim
        pt = tuple(map(float, point))
        fg, fx, fe, fw = self._compiled
        g = np.array(fg(pt)).reshape(dim, dim)
        w = np.array(fw(pt)).reshape(dim, dim)
        return {"gtilde": g, "xi": np.array(fx(pt)), "eta": np.array(fe(pt)), "deta": w,
                "phi": np.linalg.solve(g, w)}

    def phi_at(self, point) -> np.ndarray:
        return self.at(point)["phi"]


def _proportionality(eta_choice: OneForm, eta: OneForm, point) -> float:
    a = np.array(eta_choice.values(point))
    b = np.array(eta.values(point))
    f = float(a @ b / (b @ b))
    if np.abs(a - f * b).max() > 1e-9 * max(1.0, np.abs(a).max()):
        raise ValueError(f"chosen form is not a multiple of eta at {tuple(point)}")
    return f


def build_contact_metric(spec: SubRiemannianSpec, eta_choice: OneForm | None = None,
                         points: Sequence | None = None, tol: float = EPS) -> ContactMetricData:
    eta = eta_choice if eta_choice is not None else spec.eta
    ref = tuple(points[0]) if points else (0.0,) * spec.dim
    for p in points or [ref]:
        if abs(_proportionality(eta, spec.eta, p)) <= tol:
            raise ContactDegeneracy(f"conformal factor f vanishes at {tuple(p)}")
    xi = reeb_field(eta, ref)
    cf = adapted_coframe(spec, ref)
    dim = spec.dim
    hats = []
    for th in cf.forms[:-1]:
        val = th(xi)
        hats.append(th + eta.scale(sx.neg(val)))
    hats.append(eta)
    g = [[sx.ZERO] * dim for _ in range(dim)]
    for w in hats:
        for m in range(dim):
            if sx.is_const(w.coeffs[m], 0):
                continue
            for p in range(dim):
                g[m][p] = sx.add(g[m][p], sx.mul(w.coeffs[m], w.coeffs[p]))
    return ContactMetricData(spec, eta, xi, tuple(tuple(r) for r in g))


@dataclass(frozen=True)
class AssociatedVerdict:
    associated: bool
    rows: tuple[dict, ...]                    # per point: point and max violation per identity
    tolerance: float

    @property
    def max_violations(self) -> dict[str, float]:
        keys = ("reeb_dual", "compatible", "phi_squared", "phi_xi")
        return {k: max((r[k] for r in self.rows), default=0.0) for k in keys}


def identity_violations(data: ContactMetricData, point) -> dict[str, float]:
    v = data.at(point)
    g, xi, eta, w, phi = v["gtilde"], v["xi"], v["eta"], v["deta"], v["phi"]
    dim = len(xi)
    return {
        "reeb_dual": float(np.abs(g @ xi - eta).max()),
        "compatible": float(np.abs(g @ phi - w).max()),
        "phi_squared": float(np.abs(phi @ phi + np.eye(dim) - np.outer(xi, eta)).max()),
        "phi_xi": float(np.abs(phi @ xi).max()),
    }


def check_associated(data: ContactMetricData, points, tol: float = 1e-8) -> AssociatedVerdict:
    rows = []
    ok = True
    for p in points:
        row = {"point": tuple(map(float, p)), **identity_violations(data, p)}
        ok = ok and all(row[k] <= tol for k in ("reeb_dual", "compatible", "phi_squared"))
        rows.append(row)
    return AssociatedVerdict(ok, tuple(rows), tol)


# --- existence of an associated form f * eta ---

@dataclass(frozen=True)
class ExistenceResult:
    """f per point if every point admits a constant f, else the first obstruction."""

    exists: bool
    f_values: tuple[float, ...]
    points: tuple[tuple[float, ...], ...]
    certificate: tuple[float, ...] | None = None          # conflicting required f^2 values
    certificate_point: tuple[float, ...] | None = None


def required_f_squared(spec: SubRiemannianSpec, point, tol: float = EPS) -> list[float]:
    """phi^2 = -id on D for eta = f * spec.eta forces f^2 = 1 / lambda_i^2 for each i."""
    cf = adapted_coframe(spec, point)
    c = structure_coefficients(cf, point).c.coeffs
    m = spec.dim - 1
    _, lambdas = skew_normal_form(c[m, :m, :m], tol)
    return [1.0 / lam ** 2 for lam in lambdas]


def distinct_values(values: Sequence[float], rtol: float = 1e-8) -> list[float]:
    out: list[float] = []
    for v in sorted(values):
        if not out or abs(v - out[-1]) > rtol * max(1.0, abs(v)):
            out.append(v)
    return out


def search_associated_form(spec: SubRiemannianSpec, points, tol: float = EPS,
                           rtol: float = 1e-8) -> ExistenceResult:
    pts = tuple(tuple(map(float, p)) for p in points)
    fs = []
    for p in pts:
        req = distinct_values(required_f_squared(spec, p, tol), rtol)
        if len(req) > 1:
            return ExistenceResult(False, tuple(fs), pts, tuple(req), p)
        fs.append(float(np.sqrt(req[0])))
    return ExistenceResult(True, tuple(fs), pts)


def verify_existence(spec: SubRiemannianSpec, result: ExistenceResult, tol: float = 1e-8) -> AssociatedVerdict:
    """Build g~ for eta = f(p) * spec.eta at each point and check the identities there."""
    rows = []
    ok = True
    for p, f in zip(result.points, result.f_values):
        eta = spec.eta.scale(sx.Const(Fraction(f)))
        data = build_contact_metric(spec, eta, [p])
        v = check_associated(data, [p], tol)
        ok = ok and v.associated
        rows.extend(v.rows)
    return AssociatedVerdict(ok, tuple(rows), tol)


def phi_squared_defect(spec: SubRiemannianSpec, f: float, point) -> float:
    """min over D-directions is not needed: the max-norm of phi^2 + id - xi (x) eta."""
    eta = spec.eta.scale(sx.Const(Fraction(f)))
    data = build_contact_metric(spec, eta, [point])
    return identity_violations(data, point)["phi_squared"]


# --- the R^5 family ---

R5_CHART = ("x1", "y1", "x2", "y2", "z")


def r5_example(p, q, r, s) -> SubRiemannianSpec:
    """D = ker(dz + x1 dy1 + x2 dy2), g = p dx1^2 + q dy1^2 + r dx2^2 + s dy2^2."""
    chart = Chart(R5_CHART)
    vals = [Fraction(x) for x in (p, q, r, s)]
    if any(v <= 0 for v in vals):
        raise ValueError("metric coefficients must be positive")
    eta = sx.parse_one_form("dz + x1*dy1 + x2*dy2", chart)
    one, zero = sx.ONE, sx.ZERO
    x1, x2 = sx.Var(0), sx.Var(2)
    frame = ((one, zero, zero, zero, zero),
             (zero, one, zero, zero, sx.neg(x1)),
             (zero, zero, one, zero, zero),
             (zero, zero, zero, one, sx.neg(x2)))
    gram = tuple(tuple(sx.Const(vals[i]) if i == j else zero for j in range(4)) for i in range(4))
    name = "r5 " + " ".join(str(v) for v in vals)
    return SubRiemannianSpec(chart, eta, frame=frame, gram=gram, name=name)


def r5_frame_phi(p, q, r, s, f: float, point=(0.0,) * 5) -> np.ndarray:
    """phi in the frame e1 = d/dx1, e2 = d/dx2, e3 = x1 d/dz - d/dy1, e4 = x2 d/dz - d/dy2.

    Column j holds the frame coordinates of phi e_j.
    """
    spec = r5_example(p, q, r, s)
    eta = spec.eta.scale(sx.Const(Fraction(f)))
    phi = build_contact_metric(spec, eta, [point]).phi_at(point)
    x1, _, x2, _, _ = point
    frame = np.array([[1, 0, 0, 0, 0], [0, 0, 1, 0, 0],
                      [0, -1, 0, 0, x1], [0, 0, 0, -1, x2]], dtype=float).T
    images = phi @ frame
    coords, *_ = np.linalg.lstsq(frame, images, rcond=None)
    return coords


def r5_table(p, q, r, s, f: float) -> np.ndarray:
    """The printed table: phi e1 = f/r e3, phi e2 = f/s e4, phi e3 = -f/p e1, phi e4 = -f/q e2."""
    p, q, r, s = (float(x) for x in (p, q, r, s))
    t = np.zeros((4, 4))
    t[2, 0] = f / r
    t[3, 1] = f / s
    t[0, 2] = -f / p
    t[1, 3] = -f / q
    return t


def r5_table_crosscheck(p, q, r, s, f: float = 1.0) -> dict[str, float]:
    """Deviation of the derived phi from the printed table under both index pairings.

    "printed": metric coefficients as written (p, q, r, s on dx1, dy1, dx2, dy2).
    "frame_order": p, q, r, s read as g(e1), g(e2), g(e3), g(e4), i.e. q and r swapped.
    """
    derived = r5_frame_phi(p, q, r, s, f)
    return {"printed": float(np.abs(derived - r5_table(p, q, r, s, f)).max()),
            "frame_order": float(np.abs(derived - r5_table(p, r, q, s, f)).max())}
