"""Adapted coframes, structure coefficients and the two pointwise reductions.

Coframes are stored as coefficient matrices ``theta[k, p]`` (row k is the
one-form theta^k in the basis dx^p).  A change of coframe theta' = g theta
transforms structure coefficients by sigma(g)^-1; derivatives of a
point-dependent ``g`` are taken by central differences on an integer-offset
stencil around each sample point.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import symexpr as sx
from .errors import ContactDegeneracy, EvaluationError, SpecError, StencilError
from .gstruct import Hom2Tensor, stabilizer_dimension
from .linalg import EPS, block_form, skew_normal_form
from .symexpr import Chart, Expr, OneForm

DEFAULT_FD_STEP = 1e-4


@dataclass(frozen=True)
class SubRiemannianSpec:
    """Contact form plus a metric on its kernel.

    The metric is given either by ``frame`` (2n vector fields spanning the
    distribution, components in the chart basis) with the Gram matrix
    ``gram`` of g on that frame, or by ``coframe`` (2n one-forms that are
    g-orthonormal on the distribution).
    """

    chart: Chart
    eta: OneForm
    frame: tuple[tuple[Expr, ...], ...] | None = None
    gram: tuple[tuple[Expr, ...], ...] | None = None
    coframe: tuple[OneForm, ...] | None = None
    name: str = ""

    def __post_init__(self):
        dim = self.chart.dimension
        if dim % 2 == 0 or dim < 3:
            raise SpecError("chart dimension must be odd and at least 3")
        if self.eta.dim != dim:
            raise SpecError("eta has the wrong number of coefficients")
        if (self.coframe is None) == (self.frame is None):
            raise SpecError("give exactly one of frame+gram or coframe")
        if self.frame is not None:
            if self.gram is None or len(self.frame) != dim - 1 or len(self.gram) != dim - 1:
                raise SpecError("frame and gram must describe 2n vectors")
            if any(len(v) != dim for v in self.frame):
                raise SpecError("frame vector has the wrong length")
            if any(len(r) != dim - 1 for r in self.gram):
                raise SpecError("gram matrix must be square")
        else:
            if len(self.coframe) != dim - 1 or any(w.dim != dim for w in self.coframe):
                raise SpecError("coframe must consist of 2n one-forms on the chart")

    @property
    def n(self) -> int:
        return (self.chart.dimension - 1) // 2

    @property
    def dim(self) -> int:
        return self.chart.dimension


@dataclass(frozen=True)
class CoframeField:
    forms: tuple[OneForm, ...]
    provenance: str = "raw"

    @property
    def dim(self) -> int:
        return len(self.forms)

    @property
    def n(self) -> int:
        return (self.dim - 1) // 2

    @cached_property
    def _compiled(self):
        exprs = [c for w in self.forms for c in w.coeffs]
        dim = self.dim
        derivs = [sx.diff(c, m) for c in exprs for m in range(dim)]
        return sx.compile_exprs(exprs), sx.compile_exprs(derivs)

    def value(self, point) -> np.ndarray:
        f, _ = self._compiled
        return np.array(f(tuple(map(float, point)))).reshape(self.dim, self.dim)

    def jet(self, point) -> tuple[np.ndarray, np.ndarray]:
        """(theta, dtheta) with dtheta[k, p, m] = d theta[k, p] / dx^m."""
        f, df = self._compiled
        pt = tuple(map(float, point))
        n = self.dim
        return (np.array(f(pt)).reshape(n, n), np.array(df(pt)).reshape(n, n, n))


@dataclass(frozen=True)
class StructureCoefficients:
    point: tuple[float, ...]
    c: Hom2Tensor


def structure_from_jet(theta: np.ndarray, dtheta: np.ndarray) -> np.ndarray:
    """c[k, i, j] with d theta^k = sum_{i<j} c[k, i, j] theta^i ^ theta^j."""
    if abs(np.linalg.det(theta)) < 1e-14:
        raise ContactDegeneracy("coframe matrix is singular")
    x = np.linalg.inv(theta)                              # columns = dual frame
    d = np.transpose(dtheta, (0, 2, 1)) - dtheta          # d[k, m, p] = d_m th_kp - d_p th_km
    return np.einsum("mi,kmp,pj->kij", x, d, x)


def structure_coefficients(cf: CoframeField, point) -> StructureCoefficients:
    theta, dtheta = cf.jet(point)
    return StructureCoefficients(tuple(map(float, point)),
                                 Hom2Tensor(cf.n, structure_from_jet(theta, dtheta)))


# --- adapted coframes ---

def _transversal_axis(eta: OneForm, ref_point) -> int:
    for m, c in enumerate(eta.coeffs):
        if isinstance(c, sx.Const) and c.value != 0:
            return m
    vals = eta.values(ref_point)
    return int(np.argmax(np.abs(vals)))


def _cholesky(gram) -> list[list[Expr]]:
    m = len(gram)
    low = [[sx.ZERO] * m for _ in range(m)]
    for j in range(m):
        acc = sx.as_expr(gram[j][j])
        for k in range(j):
            acc = sx.sub(acc, sx.power(low[j][k], 2))
        low[j][j] = sx.sqrt(acc)
        for i in range(j + 1, m):
            acc = sx.as_expr(gram[i][j])
            for k in range(j):
                acc = sx.sub(acc, sx.mul(low[i][k], low[j][k]))
            low[i][j] = sx.div(acc, low[j][j])
    return low


def adapted_coframe(spec: SubRiemannianSpec, ref_point=None) -> CoframeField:
    """theta^N = eta and theta^1..theta^2n g-orthonormal on ker eta."""
    dim = spec.dim
    ref = tuple(ref_point) if ref_point is not None else (0.0,) * dim
    if spec.coframe is not None:
        return CoframeField(tuple(spec.coframe) + (spec.eta,), "raw")
    axis = _transversal_axis(spec.eta, ref)
    cols = list(spec.frame) + [tuple(sx.ONE if p == axis else sx.ZERO for p in range(dim))]
    mat = [[cols[c][r] for c in range(dim)] for r in range(dim)]
    dual = sx.inverse(mat, ref)                            # rows = dual coframe
    low = _cholesky(spec.gram)
    forms = []
    for a in range(dim - 1):
        coeffs = [sx.ZERO] * dim
        for b in range(dim - 1):
            if sx.is_const(low[b][a], 0):
                continue
            for p in range(dim):
                coeffs[p] = sx.add(coeffs[p], sx.mul(low[b][a], dual[b][p]))
        forms.append(OneForm(tuple(coeffs)))
    return CoframeField(tuple(forms) + (spec.eta,), "raw")


def validate_spec_at(spec: SubRiemannianSpec, point, tol: float = EPS) -> None:
    """Check frame-in-distribution, positive definiteness and the contact condition."""
    pt = tuple(map(float, point))
    eta = np.array(spec.eta.values(pt))
    if spec.frame is not None:
        for a, vec in enumerate(spec.frame):
            v = np.array(sx.compile_exprs(vec)(pt))
            if abs(eta @ v) > 1e3 * tol * max(1.0, np.abs(v).max()):
                raise SpecError(f"frame vector {a + 1} is not in ker eta at {pt}")
        g = np.array(sx.compile_exprs([c for r in spec.gram for c in r])(pt)).reshape(
            spec.dim - 1, spec.dim - 1)
        if np.abs(g - g.T).max() > tol or np.linalg.eigvalsh(0.5 * (g + g.T)).min() <= tol:
            raise SpecError(f"metric is not positive definite at {pt}")
    w = np.array(sx.exterior_d(spec.eta).matrix(pt))
    mat = np.vstack([eta, w])
    s = np.linalg.svd(mat, compute_uv=False)
    if s.size < spec.dim or s[spec.dim - 1] <= tol * max(1.0, s[0]):
        raise ContactDegeneracy(f"contact condition eta ^ (d eta)^n != 0 fails at {pt}")


# --- reductions at a point ---

@dataclass(frozen=True)
class FirstReduction:
    g: np.ndarray                 # theta_1 = g theta, g = blockdiag(P^T, 1/lambda_1)
    p: np.ndarray
    lambdas: tuple[float, ...]
    mu: tuple[float, ...]


def first_reduction_from_c(c: np.ndarray, tol: float = EPS) -> FirstReduction:
    dim = c.shape[0]
    m = dim - 1
    omega = c[m, :m, :m]
    p, lambdas = skew_normal_form(omega, tol)
    if lambdas[-1] <= tol:
        raise ContactDegeneracy("contact condition fails: skew form on D is degenerate")
    g = np.zeros((dim, dim))
    g[:m, :m] = p.T
    g[m, m] = 1.0 / lambdas[0]
    mu = tuple(lam / lambdas[0] for lam in lambdas)
    return FirstReduction(g, p, tuple(lambdas), mu)


def first_reduction(cf: CoframeField, point, tol: float = EPS):
    """Returns (rotated coframe value, lambdas, mu)."""
    sc = structure_coefficients(cf, point)
    fr = first_reduction_from_c(sc.c.coeffs, tol)
    return fr.g @ cf.value(point), list(fr.lambdas), list(fr.mu)


def b_shift_from_c(c: np.ndarray) -> np.ndarray:
    """Solve Omega b = m, m_a = c[N, a, N]; the shift theta^a += b_a theta^N kills m."""
    m = c.shape[0] - 1
    return np.linalg.solve(c[m, :m, :m], c[m, :m, m])


def shift_matrix(b: np.ndarray) -> np.ndarray:
    m = len(b)
    g = np.eye(m + 1)
    g[:m, m] = b
    return g


def second_reduction(cf: CoframeField, point, tol: float = 1e-8):
    """For an already first-reduced field: returns (shifted coframe value, b_shift)."""
    c = structure_coefficients(cf, point).c.coeffs
    m = cf.dim - 1
    omega = c[m, :m, :m]
    lam = [omega[2 * i, 2 * i + 1] for i in range(cf.n)]
    if np.abs(omega - block_form(lam)).max() > tol or abs(lam[0] - 1.0) > tol:
        raise ValueError("coframe is not first-reduced at this point")
    b = b_shift_from_c(c)
    return shift_matrix(b) @ cf.value(point), b


@dataclass(frozen=True)
class ReductionRecord:
    point: tuple[float, ...]
    lambdas: tuple[float, ...]
    mu: tuple[float, ...]
    b_shift: tuple[float, ...]
    coframe: np.ndarray = field(repr=False)        # fully reduced coframe at the point
    transform: np.ndarray = field(repr=False)      # g with reduced = g raw
    c: np.ndarray = field(repr=False)              # structure coefficients of the reduced field

    @property
    def stabilizer_dim(self) -> int:
        return stabilizer_dimension(self.mu)


class Stencil:
    """Reduction pipeline evaluated at base + h*k for integer offset vectors k."""

    def __init__(self, cf: CoframeField, base, h: float = DEFAULT_FD_STEP, tol: float = EPS):
        self.cf = cf
        self.base = tuple(map(float, base))
        self.h = h
        self.tol = tol
        self.dim = cf.dim
        self._cache: dict = {}
        self._units = [tuple(int(i == m) for i in range(self.dim)) for m in range(self.dim)]

    def point(self, k) -> tuple[float, ...]:
        return tuple(b + self.h * ki for b, ki in zip(self.base, k))

    def _memo(self, name, k, fn):
        key = (name, k)
        try:
            return self._cache[key]
        except KeyError:
            pass
        try:
            out = fn(k)
        except EvaluationError as exc:
            if any(k):
                raise StencilError(f"finite-difference stencil left the domain: {exc}") from None
            raise
        self._cache[key] = out
        return out

    def shift(self, k, m, s):
        return tuple(ki + s * (i == m) for i, ki in enumerate(k))

    def fd(self, name: str, getter, k) -> np.ndarray:
        """Central differences of getter over the stencil; last axis = coordinate."""
        out = []
        for m in range(self.dim):
            plus = getter(self.shift(k, m, 1))
            minus = getter(self.shift(k, m, -1))
            out.append((plus - minus) / (2 * self.h))
        return np.stack(out, axis=-1)

    def raw(self, k):
        return self._memo("raw", k, lambda k: self.cf.jet(self.point(k)))

    def c_raw(self, k):
        return self._memo("c_raw", k, lambda k: structure_from_jet(*self.raw(k)))

    def first(self, k) -> FirstReduction:
        return self._memo("first", k, lambda k: first_reduction_from_c(self.c_raw(k), self.tol))

    def _jet_after(self, k, g, dg):
        theta, dtheta = self.raw(k)
        return g @ theta, np.einsum("kam,ap->kpm", dg, theta) + np.einsum("ka,apm->kpm", g, dtheta)

    def c_first(self, k):
        def build(k):
            dg = self.fd("g1", lambda q: self.first(q).g, k)
            return structure_from_jet(*self._jet_after(k, self.first(k).g, dg))
        return self._memo("c1", k, build)

    def b_shift(self, k):
        return self._memo("b", k, lambda k: b_shift_from_c(self.c_first(k)))

    def transform(self, k):
        return self._memo("g", k, lambda k: shift_matrix(self.b_shift(k)) @ self.first(k).g)

    def c_second(self, k):
        def build(k):
            dg = self.fd("g", self.transform, k)
            return structure_from_jet(*self._jet_after(k, self.transform(k), dg))
        return self._memo("c2", k, build)

    def coframe(self, k):
        return self.transform(k) @ self.raw(k)[0]

    def record(self, k=None) -> ReductionRecord:
        k = k if k is not None else (0,) * self.dim
        fr = self.first(k)
        return ReductionRecord(self.point(k), fr.lambdas, fr.mu, tuple(self.b_shift(k)),
                               self.coframe(k), self.transform(k), self.c_second(k))


def reduce_point(cf: CoframeField, point, h: float = DEFAULT_FD_STEP, tol: float = EPS) -> ReductionRecord:
    return Stencil(cf, point, h, tol).record()


def slice_violation(c: np.ndarray, mu: Sequence[float]) -> dict[str, float]:
    """Deviation of reduced structure coefficients from the slice s1."""
    m = c.shape[0] - 1
    return {"top_block": float(np.abs(c[m, :m, :m] - block_form(mu)).max()),
            "mixed_block": float(np.abs(c[m, :m, m]).max())}


# --- sample grids ---

def lattice(dim: int, lo: float = -1.0, hi: float = 1.0, count: int = 3) -> list[tuple[float, ...]]:
    axis = [lo + (hi - lo) * i / (count - 1) for i in range(count)] if count > 1 else [0.5 * (lo + hi)]
    return [tuple(p) for p in itertools.product(axis, repeat=dim)]


def usable_points(spec: SubRiemannianSpec, points, cf: CoframeField | None = None) -> list[tuple[float, ...]]:
    """Drop points where any expression of the spec or its coframe fails to evaluate."""
    cf = cf or adapted_coframe(spec, points[0] if points else None)
    out = []
    for p in points:
        try:
            cf.jet(p)
            spec.eta.values(p)
            if spec.gram is not None:
                sx.compile_exprs([c for r in spec.gram for c in r])(tuple(p))
        except EvaluationError:
            continue
        out.append(tuple(map(float, p)))
    return out


# --- Reeb field ---

def reeb_field(eta: OneForm | SubRiemannianSpec, ref_point=None) -> tuple[Expr, ...]:
    """Symbolic xi with eta(xi) = 1 and i_xi d eta = 0."""
    if isinstance(eta, SubRiemannianSpec):
        eta = eta.eta
    dim = eta.dim
    ref = tuple(map(float, ref_point)) if ref_point is not None else (0.0,) * dim
    w = sx.exterior_d(eta)
    rows = [list(eta.coeffs)]
    numeric = [np.array(eta.values(ref))]
    wnum = np.array(w.matrix(ref))
    for j in range(dim):
        cand = wnum[:, j]
        if np.linalg.matrix_rank(np.vstack(numeric + [cand]), tol=1e-9) > len(numeric):
            numeric.append(cand)
            rows.append([w.coeff(i, j) for i in range(dim)])
        if len(rows) == dim:
            break
    if len(rows) < dim:
        raise ContactDegeneracy(f"no Reeb field: contact condition fails at {ref}")
    inv = sx.inverse(rows, ref)
    return tuple(inv[i][0] for i in range(dim))


def reeb_vector(eta: OneForm, point) -> np.ndarray:
    """Numeric Reeb vector at a point."""
    pt = tuple(map(float, point))
    e = np.array(eta.values(pt))
    w = np.array(sx.exterior_d(eta).matrix(pt))
    mat = np.vstack([e, w.T])
    rhs = np.zeros(len(e) + 1)
    rhs[0] = 1.0
    sol, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
    if np.abs(mat @ sol - rhs).max() > 1e-8:
        raise ContactDegeneracy(f"no Reeb field at {pt}")
    return sol


# --- n = 1 symbolic path ---

def _structure_symbolic(forms: Sequence[OneForm], ref) -> tuple[list[list[Expr]], list[sx.TwoForm]]:
    mat = [list(w.coeffs) for w in forms]
    inv = sx.inverse(mat, ref)                       # columns = dual frame
    return inv, [sx.exterior_d(w) for w in forms]


def _eval_two_form_on(d: sx.TwoForm, inv, i: int, j: int) -> Expr:
    dim = d.dim
    acc = sx.ZERO
    for m, p in sx.TwoForm.pairs(dim):
        coef = d.coeff(m, p)
        if sx.is_const(coef, 0):
            continue
        term = sx.sub(sx.mul(inv[m][i], inv[p][j]), sx.mul(inv[p][i], inv[m][j]))
        acc = sx.add(acc, sx.mul(coef, term))
    return acc


def symbolic_structure(cf: CoframeField, ref_point) -> np.ndarray:
    """Object array c[k, i, j] of expressions."""
    ref = tuple(map(float, ref_point))
    inv, ds = _structure_symbolic(cf.forms, ref)
    dim = cf.dim
    out = np.empty((dim, dim, dim), dtype=object)
    out.fill(sx.ZERO)
    for k in range(dim):
        for i, j in itertools.combinations(range(dim), 2):
            e = _eval_two_form_on(ds[k], inv, i, j)
            out[k, i, j] = e
            out[k, j, i] = sx.neg(e)
    return out


def symbolic_reduction_n1(cf: CoframeField, ref_point) -> CoframeField:
    """Closed-form reductions for n = 1: d theta^3 = theta^1 ^ theta^2, no mixed terms."""
    if cf.dim != 3:
        raise ValueError("symbolic reduction is only available for n = 1")
    ref = tuple(map(float, ref_point))
    th1, th2, th3 = cf.forms
    inv, ds = _structure_symbolic(cf.forms, ref)
    scale = _eval_two_form_on(ds[2], inv, 0, 1)
    if sx.evaluate(scale, ref) < 0:
        th1, th2 = th2, th1
        scale = sx.neg(scale)
    th3 = OneForm(tuple(sx.div(c, scale) for c in th3.coeffs))
    inv, ds = _structure_symbolic((th1, th2, th3), ref)
    m1 = _eval_two_form_on(ds[2], inv, 0, 2)
    m2 = _eval_two_form_on(ds[2], inv, 1, 2)
    # Omega = J2 exactly, so b = J2^-1 m = (-m2, m1)
    th1 = th1 + th3.scale(sx.neg(m2))
    th2 = th2 + th3.scale(m1)
    return CoframeField((th1, th2, th3), "second-reduced")


def pullback_spec(spec: SubRiemannianSpec, mapping: Sequence[Expr], chart: Chart | None = None,
                  ref_point=None, name: str = "") -> SubRiemannianSpec:
    """Structure on the source chart obtained by pulling ``spec`` back along ``mapping``."""
    chart = chart or spec.chart
    cf = adapted_coframe(spec, None)
    forms = tuple(sx.pullback(w, mapping, chart.dimension) for w in cf.forms[:-1])
    eta = sx.pullback(spec.eta, mapping, chart.dimension)
    return SubRiemannianSpec(chart, eta, coframe=forms, name=name or f"pullback of {spec.name}")
