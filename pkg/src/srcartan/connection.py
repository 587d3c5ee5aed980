"""Canonical G2-connection: invariant complement, torsion, curvature, comparison."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import symexpr as sx
from .errors import ConsistencyError, DegenerateMap
from .gstruct import (Hom2Tensor, ModelSpace, amap_matrix, amap_matrix_float,
                      build_lie_algebra, cayley, image_of_amap, lie_action, transform,
                      unitary_basis, _lin, _zero, embed)
from .linalg import (EPS, QuotientModel, Subspace, block_form, inverse_exact,
                     least_squares_solve, orthogonal_complement)
from .reduction import (DEFAULT_FD_STEP, CoframeField, ReductionRecord, Stencil,
                        SubRiemannianSpec, adapted_coframe, pullback_spec, symbolic_structure)


@dataclass(frozen=True)
class ComplementModel:
    n: int
    C: Subspace
    image: Subspace
    gram: tuple | None                      # None means the standard tensor basis is orthonormal
    quotient: QuotientModel = field(repr=False)

    @property
    def dim(self) -> int:
        return self.C.dim

    @property
    def projector(self) -> list[list[Fraction]]:
        """Exact projector onto C along Im A(Hom(V, g2))."""
        return self.quotient.projector

    def projector_float(self) -> np.ndarray:
        return _projector_float(self)

    def coords(self, flat) -> np.ndarray:
        """Coordinates in the echelon basis of C (read off at the pivots)."""
        flat = np.asarray(flat, dtype=float)
        return flat[self.C.pivots]

    def labels(self) -> list[str]:
        space = ModelSpace(self.n)
        out = []
        for p in self.C.pivots:
            k, pidx = divmod(p, len(space.pairs))
            i, j = space.pairs[pidx]
            out.append(f"T{k + 1}_{i + 1}{j + 1}")
        return out

    def is_invariant(self) -> bool:
        return not infinitesimal_violations(self) and not group_violations(self)


_PROJ_CACHE: dict = {}


def _projector_float(cm: ComplementModel) -> np.ndarray:
    key = (cm.n, cm.gram)
    if key not in _PROJ_CACHE:
        _PROJ_CACHE[key] = np.array([[float(x) for x in r] for r in cm.projector])
    return _PROJ_CACHE[key]


@lru_cache(maxsize=None)
def invariant_complement(n: int, gram: tuple | None = None) -> ComplementModel:
    """Gram-orthogonal complement of Im A(Hom(V, g2)) in Hom(V^V, V)."""
    image = image_of_amap(n, "g2")
    c = orthogonal_complement(image, [list(r) for r in gram] if gram is not None else None)
    if c.dim + image.dim != image.ambient_dim:
        raise ValueError("gram does not give a complement of Im A")
    quotient = QuotientModel.build(image, c.basis)
    return ComplementModel(n, c, image, gram, quotient)


def infinitesimal_violations(cm: ComplementModel) -> list[tuple[str, int]]:
    """Pairs (g2 generator, C basis index) whose Lie action leaves C."""
    alg = build_lie_algebra(cm.n, "g2")
    bad = []
    for label, x in zip(alg.labels, alg.basis):
        xm = np.array(x, dtype=object)
        for idx, vec in enumerate(cm.C.basis):
            t = Hom2Tensor.from_flat(cm.n, vec, exact=True)
            moved = Hom2Tensor(cm.n, lie_action(xm, t.coeffs))
            if not cm.C.contains(moved.flat()):
                bad.append((label, idx))
    return bad


def rational_rotations(n: int) -> list[np.ndarray]:
    """Exact G2 elements: Cayley transforms of the u(n) generators (and their doubles)."""
    blocks, _ = unitary_basis(n)
    out = []
    for blk in blocks:
        for scale in (Fraction(1, 2), Fraction(2)):
            k = _lin(_zero(2 * n), blk, 1, scale)
            out.append(np.array(embed(cayley(k), n), dtype=object))
    for i in range(len(out)):
        out[i][2 * n, 2 * n] = Fraction(1)
    return out


def group_violations(cm: ComplementModel) -> list[tuple[int, int]]:
    bad = []
    for gi, g in enumerate(rational_rotations(cm.n)):
        ginv = g.T.copy()                       # orthogonal
        for idx, vec in enumerate(cm.C.basis):
            t = Hom2Tensor.from_flat(cm.n, vec, exact=True)
            moved = Hom2Tensor(cm.n, transform(g, ginv, t.coeffs))
            if not cm.C.contains(moved.flat()):
                bad.append((gi, idx))
    return bad


# --- connection at a point ---

@dataclass(frozen=True)
class ConnectionData:
    point: tuple[float, ...]
    gamma: np.ndarray = field(repr=False)       # gamma[s] = S(e_s), a g2 matrix
    gamma_coords: np.ndarray = field(repr=False)
    torsion: Hom2Tensor = field(repr=False)
    torsion_coords: np.ndarray = field(repr=False)
    curvature: np.ndarray | None = field(default=None, repr=False)   # R[a, i, j] over the g2 basis
    curvature_tensor: np.ndarray | None = field(default=None, repr=False)  # R[k, l, i, j]


def _weighted(cm: ComplementModel):
    m = amap_matrix_float(cm.n, "g2")
    if cm.gram is None:
        return m, None
    g = np.array([[float(x) for x in r] for r in cm.gram])
    low = np.linalg.cholesky(g)
    return low.T @ m, low.T


def solve_connection(c: np.ndarray, cm: ComplementModel, tol: float = 1e-7):
    """Split c = A(Gamma) + T with T in C; returns (gamma coords, torsion flat)."""
    n = cm.n
    flat = Hom2Tensor(n, c).flat_array()
    m, lt = _weighted(cm)
    target = flat if lt is None else lt @ flat
    coords = least_squares_solve(m, target)
    torsion = flat - amap_matrix_float(n, "g2") @ coords
    miss = np.abs(cm.projector_float() @ torsion - torsion).max()
    if miss > tol * max(1.0, np.abs(flat).max()):
        raise ConsistencyError(f"torsion is not in C (violation {miss:.3e})")
    return coords, torsion


def gamma_matrices(n: int, coords: np.ndarray) -> np.ndarray:
    alg = build_lie_algebra(n, "g2")
    basis = alg.float_basis()
    dim = 2 * n + 1
    return np.einsum("sb,bkl->skl", np.asarray(coords).reshape(dim, alg.dim), basis)


def connection_from_c(point, c: np.ndarray, cm: ComplementModel) -> ConnectionData:
    coords, torsion = solve_connection(c, cm)
    t = Hom2Tensor.from_flat(cm.n, torsion, exact=False)
    return ConnectionData(tuple(point), gamma_matrices(cm.n, coords), coords, t,
                          cm.coords(torsion))


def canonical_connection(records: Sequence[ReductionRecord], cm: ComplementModel) -> list[ConnectionData]:
    return [connection_from_c(r.point, r.c, cm) for r in records]


def g2_coords(n: int, mats: np.ndarray) -> tuple[np.ndarray, float]:
    """Coordinates over the g2 basis of the matrices mats[..., k, l] and the max residual."""
    basis = build_lie_algebra(n, "g2").float_basis()
    b = basis.reshape(len(basis), -1).T
    flat = mats.reshape(-1, b.shape[0]).T
    coords, *_ = np.linalg.lstsq(b, flat, rcond=None)
    resid = float(np.abs(b @ coords - flat).max()) if flat.size else 0.0
    return coords.T.reshape(mats.shape[:-2] + (len(basis),)), resid


class ConnectionField:
    """Connection, torsion and curvature on the stencil of one sample point."""

    def __init__(self, stencil: Stencil, cm: ComplementModel):
        self.stencil = stencil
        self.cm = cm
        self._gamma: dict = {}

    def gamma(self, k) -> np.ndarray:
        if k not in self._gamma:
            coords, _ = solve_connection(self.stencil.c_second(k), self.cm)
            self._gamma[k] = gamma_matrices(self.cm.n, coords)
        return self._gamma[k]

    def omega_coeffs(self, k) -> np.ndarray:
        """W[k, l, m]: omega^k_l = sum_m W[k, l, m] dx^m, omega = -sum_s Gamma_s theta^s."""
        return -np.einsum("skl,sm->klm", self.gamma(k), self.stencil.coframe(k))

    def curvature_tensor(self, k=None) -> np.ndarray:
        """R[k, l, i, j] = (d omega + omega ^ omega)^k_l (X_i, X_j)."""
        st = self.stencil
        k = k if k is not None else (0,) * st.dim
        w = self.omega_coeffs(k)
        dw = st.fd("W", self.omega_coeffs, k)                 # dw[k, l, p, m] = d_m W[k, l, p]
        d_omega = np.transpose(dw, (0, 1, 3, 2)) - dw         # [k, l, m, p]
        ww = np.einsum("krm,rlp->klmp", w, w)
        ww = ww - np.transpose(ww, (0, 1, 3, 2))
        x = np.linalg.inv(st.coframe(k))
        return np.einsum("klmp,mi,pj->klij", d_omega + ww, x, x)

    def data(self, with_curvature: bool = True) -> ConnectionData:
        k = (0,) * self.stencil.dim
        base = connection_from_c(self.stencil.point(k), self.stencil.c_second(k), self.cm)
        if not with_curvature:
            return base
        rt = self.curvature_tensor(k)
        coords, _ = g2_coords(self.cm.n, np.transpose(rt, (2, 3, 0, 1)))
        return ConnectionData(base.point, base.gamma, base.gamma_coords, base.torsion,
                              base.torsion_coords, np.transpose(coords, (2, 0, 1)), rt)


def connection_at(cf: CoframeField, point, cm: ComplementModel | None = None,
                  h: float = DEFAULT_FD_STEP, tol: float = EPS,
                  with_curvature: bool = True) -> tuple[ReductionRecord, ConnectionData]:
    cm = cm or invariant_complement(cf.n)
    st = Stencil(cf, point, h, tol)
    rec = st.record()
    return rec, ConnectionField(st, cm).data(with_curvature)


def curvature(cf: CoframeField, point, cm: ComplementModel | None = None,
              h: float = DEFAULT_FD_STEP) -> np.ndarray:
    """g2 coordinates R[a, i, j] of the curvature at a point."""
    return connection_at(cf, point, cm, h)[1].curvature


def curvature_pairs(r: np.ndarray) -> np.ndarray:
    """Independent components R[a, i, j], i < j, flattened a-outer."""
    dim = r.shape[-1]
    pairs = list(itertools.combinations(range(dim), 2))
    return np.array([r[a, i, j] for a in range(r.shape[0]) for i, j in pairs])


# --- symbolic path (used for cross-validation of the n = 1 finite differences) ---

class SymbolicConnection:
    """Exact-expression connection and curvature for a symbolic reduced coframe."""

    def __init__(self, cf: CoframeField, ref_point, cm: ComplementModel | None = None):
        n = cf.n
        self.cf = cf
        self.cm = cm or invariant_complement(n)
        if self.cm.gram is not None:
            raise ValueError("symbolic path supports the standard gram only")
        dim = cf.dim
        c = symbolic_structure(cf, ref_point)
        flat = [c[k, i, j] for k in range(dim) for i, j in ModelSpace(n).pairs]
        m = [list(r) for r in amap_matrix(n, "g2")]
        mt = [list(r) for r in zip(*m)]
        normal = [[sum((a * b for a, b in zip(r1, r2)), Fraction(0)) for r2 in mt] for r1 in mt]
        solver = [[sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in zip(*mt)]
                  for row in inverse_exact(normal)]            # (M^T M)^-1 M^T
        coords = []
        for row in solver:
            acc = sx.ZERO
            for q, e in zip(row, flat):
                if q and not sx.is_const(e, 0):
                    acc = sx.add(acc, sx.mul(sx.Const(q), e))
            coords.append(acc)
        alg = build_lie_algebra(n, "g2")
        w = [[[sx.ZERO] * dim for _ in range(dim)] for _ in range(dim)]
        for s in range(dim):
            for b, mat in enumerate(alg.basis):
                coef = coords[s * alg.dim + b]
                if sx.is_const(coef, 0):
                    continue
                for kk in range(dim):
                    for ll in range(dim):
                        if mat[kk][ll]:
                            for mm in range(dim):
                                th = cf.forms[s].coeffs[mm]
                                if not sx.is_const(th, 0):
                                    term = sx.mul(sx.Const(-mat[kk][ll]), sx.mul(coef, th))
                                    w[kk][ll][mm] = sx.add(w[kk][ll][mm], term)
        self.gamma_exprs = coords
        self.w = w
        comps = []
        for kk in range(dim):
            for ll in range(dim):
                for mm, pp in itertools.combinations(range(dim), 2):
                    d = sx.sub(sx.diff(w[kk][ll][pp], mm), sx.diff(w[kk][ll][mm], pp))
                    for r in range(dim):
                        d = sx.add(d, sx.sub(sx.mul(w[kk][r][mm], w[r][ll][pp]),
                                             sx.mul(w[kk][r][pp], w[r][ll][mm])))
                    comps.append(d)
        self._curv = sx.compile_exprs(comps)
        self._gamma = sx.compile_exprs(coords)

    def gamma_coords(self, point) -> np.ndarray:
        return np.array(self._gamma(tuple(map(float, point))))

    def curvature_tensor(self, point) -> np.ndarray:
        dim = self.cf.dim
        vals = iter(self._curv(tuple(map(float, point))))
        coord = np.zeros((dim, dim, dim, dim))
        for kk in range(dim):
            for ll in range(dim):
                for mm, pp in itertools.combinations(range(dim), 2):
                    v = next(vals)
                    coord[kk, ll, mm, pp] = v
                    coord[kk, ll, pp, mm] = -v
        x = np.linalg.inv(self.cf.value(point))
        return np.einsum("klmp,mi,pj->klij", coord, x, x)

    def curvature(self, point) -> np.ndarray:
        coords, _ = g2_coords(self.cf.n, np.transpose(self.curvature_tensor(point), (2, 3, 0, 1)))
        return np.transpose(coords, (2, 0, 1))


# --- comparison of two structures ---

COMPONENTS = ("mu", "lambda_scale", "b_shift", "rotation", "torsion", "curvature")


@dataclass(frozen=True)
class EquivalenceVerdict:
    """Necessary-condition evidence for local equivalence under a candidate map."""

    verdict: str                                  # "consistent" | "inconsistent"
    rows: tuple[dict, ...]
    first_failure: tuple[str, tuple[float, ...], float] | None
    tolerance: float

    @property
    def consistent(self) -> bool:
        return self.verdict == "consistent"


def _jacobian(mapping: Sequence[sx.Expr], dim: int):
    return sx.compile_exprs([sx.diff(e, m) for e in mapping for m in range(dim)])


def check_immersive(mapping: Sequence[sx.Expr], points, dim: int, tol: float = EPS) -> None:
    jac = _jacobian(mapping, dim)
    for p in points:
        j = np.array(jac(tuple(map(float, p)))).reshape(len(mapping), dim)
        if j.shape[0] != dim or abs(np.linalg.det(j)) <= tol:
            raise DegenerateMap(f"map is not a local diffeomorphism at {tuple(p)}")


def transition_defects(g: np.ndarray, mu: Sequence[float]) -> dict[str, float]:
    """How far g (reduced_B = g reduced_A) is from the stabiliser of the slice point."""
    m = g.shape[0] - 1
    a = g[:m, :m]
    omega = block_form(mu)
    return {
        "lambda_scale": float(abs(g[m, m] - 1.0)),
        "b_shift": float(np.abs(g[:m, m]).max()),
        "rotation": float(max(np.abs(a.T @ a - np.eye(m)).max(),
                              np.abs(a @ omega @ a.T - omega).max(),
                              np.abs(g[m, :m]).max())),
    }


def compare_structures(spec_a: SubRiemannianSpec, spec_b: SubRiemannianSpec,
                       mapping: Sequence[sx.Expr], points, h: float = DEFAULT_FD_STEP,
                       tol: float = EPS, report_tol: float = 1e-6,
                       cm: ComplementModel | None = None) -> EquivalenceVerdict:
    """Reduce A and the pullback of B along ``mapping`` (chart A -> chart B) and compare."""
    dim = spec_a.dim
    if spec_b.dim != dim or len(mapping) != dim:
        raise DegenerateMap("charts and map have different dimensions")
    check_immersive(mapping, points, dim, tol)
    cm = cm or invariant_complement(spec_a.n)
    cf_a = adapted_coframe(spec_a, points[0])
    cf_b = adapted_coframe(pullback_spec(spec_b, mapping, spec_a.chart, points[0]), points[0])
    rows = []
    first = None
    for p in points:
        sta, stb = Stencil(cf_a, p, h, tol), Stencil(cf_b, p, h, tol)
        ra, rb = sta.record(), stb.record()
        row = {"point": tuple(map(float, p)),
               "mu": float(np.abs(np.subtract(ra.mu, rb.mu)).max())}
        g = rb.coframe @ np.linalg.inv(ra.coframe)
        row.update(transition_defects(g, ra.mu))
        ginv = np.linalg.inv(g)
        ca = connection_from_c(p, ra.c, cm)
        cb = connection_from_c(p, rb.c, cm)
        moved = transform(g, ginv, ca.torsion.coeffs)
        row["torsion"] = float(np.abs(moved - cb.torsion.coeffs).max())
        ka = ConnectionField(sta, cm).curvature_tensor()
        kb = ConnectionField(stb, cm).curvature_tensor()
        moved_r = np.einsum("ka,abcd,bl,ci,dj->klij", g, ka, ginv, ginv, ginv)
        row["curvature"] = float(np.abs(moved_r - kb).max())
        rows.append(row)
        if first is None:
            for name in COMPONENTS:
                val = row[name]
                if not (val <= report_tol):
                    first = (name, row["point"], val)
                    break
    verdict = "consistent" if first is None else "inconsistent"
    return EquivalenceVerdict(verdict, tuple(rows), first, report_tol)
