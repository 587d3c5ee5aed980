"""Exact-rational and floating-point linear algebra.

Exact routines take sequences of rows whose entries are anything accepted by
``Fraction`` and work on sparse row dictionaries internally.  Float routines
take numpy arrays and compare against an absolute tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ContactDegeneracy

EPS = 1e-9

Row = dict  # column index -> nonzero Fraction


def as_fraction_matrix(m) -> list[list[Fraction]]:
    return [[Fraction(x) for x in row] for row in m]


def _sparse_rows(m) -> list[Row]:
    rows = []
    for row in m:
        rows.append({j: Fraction(x) for j, x in enumerate(row) if x != 0})
    return rows


def _dense(rows: list[Row], cols: int) -> list[list[Fraction]]:
    return [[r.get(j, Fraction(0)) for j in range(cols)] for r in rows]


def _rref_sparse(rows: list[Row]) -> tuple[list[Row], list[int]]:
    """Gauss-Jordan on sparse rows; returns nonzero echelon rows and pivots."""
    rows = [dict(r) for r in rows if r]
    pivots: list[int] = []
    basis: list[Row] = []
    while rows:
        # smallest leading column wins; ties broken by row order
        lead = min(min(r) for r in rows)
        idx = next(i for i, r in enumerate(rows) if lead in r)
        prow = rows.pop(idx)
        inv = 1 / prow[lead]
        prow = {j: v * inv for j, v in prow.items()}
        remaining = []
        for r in rows:
            f = r.get(lead)
            if f is not None:
                for j, v in prow.items():
                    nv = r.get(j, 0) - f * v
                    if nv:
                        r[j] = nv
                    else:
                        r.pop(j, None)
            if r:
                remaining.append(r)
        rows = remaining
        for b in basis:
            f = b.get(lead)
            if f is not None:
                for j, v in prow.items():
                    nv = b.get(j, 0) - f * v
                    if nv:
                        b[j] = nv
                    else:
                        b.pop(j, None)
        basis.append(prow)
        pivots.append(lead)
    order = sorted(range(len(pivots)), key=pivots.__getitem__)
    return [basis[i] for i in order], [pivots[i] for i in order]


def rref(m) -> tuple[list[list[Fraction]], int]:
    """Reduced row-echelon form (same shape as ``m``, zero rows last) and rank."""
    m = list(m)
    if not m:
        return [], 0
    cols = len(m[0])
    basis, _ = _rref_sparse(_sparse_rows(m))
    out = _dense(basis, cols)
    out += [[Fraction(0)] * cols for _ in range(len(m) - len(basis))]
    return out, len(basis)


def rank(m) -> int:
    return len(_rref_sparse(_sparse_rows(m))[0])


@dataclass(frozen=True)
class Subspace:
    """Subspace of Q^ambient_dim, basis in reduced row-echelon form."""

    ambient_dim: int
    basis: tuple[tuple[Fraction, ...], ...]

    @classmethod
    def span(cls, ambient_dim: int, vectors) -> "Subspace":
        vectors = list(vectors)
        if not vectors:
            return cls(ambient_dim, ())
        rows, _ = _rref_sparse(_sparse_rows(vectors))
        return cls(ambient_dim, tuple(tuple(r) for r in _dense(rows, ambient_dim)))

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def pivots(self) -> list[int]:
        return [next(j for j, x in enumerate(v) if x) for v in self.basis]

    def reduce(self, x) -> list[Fraction]:
        """Canonical coset representative: ``x`` with pivot coordinates cleared."""
        x = [Fraction(t) for t in x]
        for v, p in zip(self.basis, self.pivots):
            f = x[p]
            if f:
                for j, vj in enumerate(v):
                    if vj:
                        x[j] -= f * vj
        return x

    def contains(self, x) -> bool:
        return not any(self.reduce(x))

    def contains_subspace(self, other: "Subspace") -> bool:
        return all(self.contains(v) for v in other.basis)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Subspace) and self.ambient_dim == other.ambient_dim
                and self.basis == other.basis)

    def __hash__(self) -> int:
        return hash((self.ambient_dim, self.basis))

    def as_array(self) -> np.ndarray:
        if not self.basis:
            return np.zeros((0, self.ambient_dim))
        return np.array([[float(x) for x in v] for v in self.basis])


def kernel(m) -> Subspace:
    """Null space of ``m`` (rows x cols) as a subspace of Q^cols."""
    m = list(m)
    cols = len(m[0])
    basis, pivots = _rref_sparse(_sparse_rows(m))
    free = [j for j in range(cols) if j not in set(pivots)]
    vecs = []
    for f in free:
        v = [Fraction(0)] * cols
        v[f] = Fraction(1)
        for row, p in zip(basis, pivots):
            c = row.get(f)
            if c:
                v[p] = -c
        vecs.append(v)
    return Subspace.span(cols, vecs)


def _matmul_exact(a, b):
    bt = list(zip(*b))
    return [[sum((x * y for x, y in zip(row, col) if x and y), Fraction(0)) for col in bt]
            for row in a]


def orthogonal_complement(s: Subspace, gram=None) -> Subspace:
    """Complement of ``s`` orthogonal with respect to ``gram`` (identity if None)."""
    n = s.ambient_dim
    if gram is not None:
        gram = as_fraction_matrix(gram)
        if any(gram[i][j] != gram[j][i] for i in range(n) for j in range(i)):
            raise ValueError("gram matrix is not symmetric")
        if rank(gram) < n:
            raise ValueError("degenerate gram matrix")
    if s.dim == 0:
        return Subspace.span(n, [[Fraction(int(i == j)) for j in range(n)] for i in range(n)])
    rows = [list(v) for v in s.basis]
    if gram is not None:
        rows = _matmul_exact(rows, gram)
    return kernel(rows)


@dataclass(frozen=True)
class QuotientModel:
    """Quotient Q^ambient / kernel with an explicit section.

    ``coords(x)`` gives coordinates of the class of ``x`` relative to the
    classes of the section vectors; ``projector`` maps onto span(section)
    along the kernel.
    """

    ambient_dim: int
    kernel: Subspace
    section: tuple[tuple[Fraction, ...], ...]
    _nonpivots: tuple[int, ...]
    _sec_inv: tuple[tuple[Fraction, ...], ...]

    @classmethod
    def build(cls, kernel_space: Subspace, candidates) -> "QuotientModel":
        """Select section vectors greedily from ``candidates`` (in order)."""
        n = kernel_space.ambient_dim
        pivset = set(kernel_space.pivots)
        nonpiv = tuple(j for j in range(n) if j not in pivset)
        chosen: list[tuple[Fraction, ...]] = []
        reduced_rows: list[list[Fraction]] = []
        current = 0
        for cand in candidates:
            if current == len(nonpiv):
                break
            r = kernel_space.reduce(cand)
            rr = [r[j] for j in nonpiv]
            if rank(reduced_rows + [rr]) > current:
                reduced_rows.append(rr)
                chosen.append(tuple(Fraction(x) for x in cand))
                current += 1
        if current < len(nonpiv):
            raise ValueError("candidates do not span the quotient")
        # columns of reduced_rows^T are the reduced section vectors
        q = len(nonpiv)
        mat = [[reduced_rows[c][r] for c in range(q)] for r in range(q)]
        inv = _inverse_exact(mat) if q else []
        return cls(n, kernel_space, tuple(chosen), nonpiv, tuple(tuple(r) for r in inv))

    @property
    def dim(self) -> int:
        return len(self.section)

    def coords(self, x) -> list[Fraction]:
        r = self.kernel.reduce(x)
        rr = [r[j] for j in self._nonpivots]
        return [sum((a * b for a, b in zip(row, rr) if a and b), Fraction(0))
                for row in self._sec_inv]

    def lift(self, coords) -> list[Fraction]:
        out = [Fraction(0)] * self.ambient_dim
        for c, s in zip(coords, self.section):
            if c:
                for j, sj in enumerate(s):
                    if sj:
                        out[j] += c * sj
        return out

    def project(self, x) -> list[Fraction]:
        return self.lift(self.coords(x))

    @property
    def projector(self) -> list[list[Fraction]]:
        n = self.ambient_dim
        cols = [self.project([Fraction(int(i == j)) for i in range(n)]) for j in range(n)]
        return [[cols[j][i] for j in range(n)] for i in range(n)]

    def float_coords_matrix(self) -> np.ndarray:
        """Matrix sending a float ambient vector to float quotient coordinates."""
        n = self.ambient_dim
        cols = [self.coords([int(i == j) for i in range(n)]) for j in range(n)]
        return np.array([[float(cols[j][i]) for j in range(n)] for i in range(self.dim)])


def _inverse_exact(m) -> list[list[Fraction]]:
    n = len(m)
    aug = [list(map(Fraction, row)) + [Fraction(int(i == j)) for j in range(n)]
           for i, row in enumerate(m)]
    red, r = rref(aug)
    if r < n or any(red[i][i] != 1 for i in range(n)):
        raise ZeroDivisionError("singular matrix")
    return [row[n:] for row in red[:n]]


def inverse_exact(m) -> list[list[Fraction]]:
    return _inverse_exact(m)


def least_squares_solve(m: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Minimiser of ||m x - target||_2 via the normal equations.

    Rank-deficient ``m`` falls back to the minimum-norm solution.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    target = np.asarray(target, dtype=float)
    normal = m.T @ m
    rhs = m.T @ target
    if normal.size and np.linalg.matrix_rank(normal) == normal.shape[0]:
        return np.linalg.solve(normal, rhs)
    return np.linalg.pinv(m) @ target


_J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def block_form(lambdas: Sequence[float]) -> np.ndarray:
    """block-diag(l1*J2, ..., ln*J2) with J2 = [[0, 1], [-1, 0]]."""
    n = len(lambdas)
    out = np.zeros((2 * n, 2 * n))
    for i, lam in enumerate(lambdas):
        out[2 * i:2 * i + 2, 2 * i:2 * i + 2] = lam * _J2
    return out


def skew_normal_form(omega: np.ndarray, tol: float = EPS,
                     cluster_rtol: float = 1e-8) -> tuple[np.ndarray, list[float]]:
    """Orthogonal P with P^T omega P = block-diag(l1 J2, ...), l1 >= ... > 0.

    The spectrum comes from the symmetric matrix omega^T omega (eigenvalues
    l_i^2, each doubled).  Inside every eigenspace the first vector of a
    2-plane is the normalised projection of the first coordinate vector whose
    residual is not negligible; its partner is -omega u / l.  This makes P a
    smooth function of omega wherever the multiplicities are locally constant.
    """
    omega = np.asarray(omega, dtype=float)
    dim = omega.shape[0]
    if dim % 2 or omega.shape != (dim, dim):
        raise ValueError("omega must be a square matrix of even size")
    sym = omega.T @ omega
    sym = 0.5 * (sym + sym.T)
    evals, evecs = np.linalg.eigh(sym)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    top = max(evals[0], 0.0)
    clusters: list[list[int]] = []
    for i, ev in enumerate(evals):
        if clusters and abs(ev - evals[clusters[-1][0]]) <= cluster_rtol * max(top, 1.0):
            clusters[-1].append(i)
        else:
            clusters.append([i])
    columns: list[np.ndarray] = []
    lambdas: list[float] = []
    for cl in clusters:
        if len(cl) % 2:
            raise ContactDegeneracy("odd multiplicity in skew spectrum; omega is not antisymmetric")
        q = evecs[:, cl]
        proj = q @ q.T
        chosen: list[np.ndarray] = []
        while len(chosen) < len(cl):
            for j in range(dim):
                v = proj[:, j].copy()
                for c in chosen:
                    v -= (c @ v) * c
                if np.linalg.norm(v) > 0.1:
                    break
            else:  # pragma: no cover - the residual norms cannot all be small
                raise ContactDegeneracy("failed to build a normal-form basis")
            u = v / np.linalg.norm(v)
            w = -(omega @ u)
            lam = float(np.linalg.norm(w))
            if lam <= tol:
                raise ContactDegeneracy(f"skew form is degenerate (eigenvalue {lam:.3e})")
            w = w / lam
            for c in chosen:  # re-orthogonalise against roundoff
                w -= (c @ w) * c
            w /= np.linalg.norm(w)
            chosen += [u, w]
            columns += [u, w]
            lambdas.append(float(u @ omega @ w))
    p = np.column_stack(columns)
    return p, lambdas
