"""Linear algebra of the structure groups G, G1, G2.

V has basis (e_1, ..., e_2n, v); index 2n (0-based) is v.  Tensors in
Hom(V^V, V) are stored as arrays ``T[k, i, j]`` antisymmetric in (i, j); the
flat coordinates are ``T[k, i, j]`` for i < j, with k outermost.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import linalg
from .errors import ContactDegeneracy
from .linalg import QuotientModel, Subspace

LEVELS = ("g", "g1", "g2")


def _zero(n):
    return [[Fraction(0)] * n for _ in range(n)]


@dataclass(frozen=True)
class ModelSpace:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    @property
    def v(self) -> int:
        return 2 * self.n

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(itertools.combinations(range(self.dim), 2))

    @property
    def hom2_dim(self) -> int:
        return self.dim * len(self.pairs)

    def j0(self) -> list[list[Fraction]]:
        """Standard complex structure on V': J0 e_{2k-1} = e_{2k}."""
        m = 2 * self.n
        j = _zero(m)
        for k in range(self.n):
            j[2 * k + 1][2 * k] = Fraction(1)
            j[2 * k][2 * k + 1] = Fraction(-1)
        return j

    def flat_index(self, k: int, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        return k * len(self.pairs) + self.pairs.index((i, j))

    def basis_tensor(self, i: int, j: int, k: int) -> list[Fraction]:
        """Flat vector of (e_i* ^ e_j*) (x) e_k."""
        out = [Fraction(0)] * self.hom2_dim
        if i == j:
            return out
        out[self.flat_index(k, i, j)] = Fraction(1 if i < j else -1)
        return out


def embed(a, n: int) -> list[list[Fraction]]:
    """Place a 2n x 2n block into the upper-left corner of a (2n+1)-square."""
    big = _zero(2 * n + 1)
    for i in range(2 * n):
        for j in range(2 * n):
            big[i][j] = Fraction(a[i][j])
    return big


def _mm(a, b):
    return [[sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in zip(*b)] for row in a]


def _lin(a, b, sa=1, sb=1):
    return [[sa * x + sb * y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


@dataclass(frozen=True)
class LieAlgebraModel:
    n: int
    level: str
    basis: tuple          # tuple of (2n+1)-square Fraction matrices (tuples of tuples)
    labels: tuple[str, ...]

    @property
    def dim(self) -> int:
        return len(self.basis)

    def float_basis(self) -> np.ndarray:
        return np.array([[[float(x) for x in row] for row in b] for b in self.basis])

    def element(self, coeffs) -> list[list[Fraction]]:
        dim = 2 * self.n + 1
        out = _zero(dim)
        for c, b in zip(coeffs, self.basis):
            if c:
                for i in range(dim):
                    for j in range(dim):
                        if b[i][j]:
                            out[i][j] += c * b[i][j]
        return out


def _i_pq(p: int, q: int, m: int):
    """I_pq = e_p* (x) e_q - e_q* (x) e_p as an m-square matrix."""
    a = _zero(m)
    a[q][p] += 1
    a[p][q] -= 1
    return a


def unitary_basis(n: int) -> tuple[list, list[str]]:
    """Maximal independent subset of A_pq = I_pq - J0 I_pq J0 (lexicographic greedy)."""
    m = 2 * n
    j0 = ModelSpace(n).j0()
    chosen, labels, flat = [], [], []
    for p in range(m):
        for q in range(m):
            if p == q:
                continue
            i = _i_pq(p, q, m)
            a = _lin(i, _mm(_mm(j0, i), j0), 1, -1)
            vec = [x for row in a for x in row]
            if linalg.rank(flat + [vec]) > len(flat):
                flat.append(vec)
                chosen.append(a)
                labels.append(f"A_{p + 1}{q + 1}")
    return chosen, labels


@lru_cache(maxsize=None)
def build_lie_algebra(n: int, level: str) -> LieAlgebraModel:
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    dim = 2 * n + 1
    m = 2 * n
    mats, labels = [], []
    if level == "g":
        for p, q in itertools.combinations(range(m), 2):
            mats.append(embed(_i_pq(p, q, m), n))
            labels.append(f"I_{p + 1}{q + 1}")
    else:
        blocks, ulabels = unitary_basis(n)
        mats += [embed(b, n) for b in blocks]
        labels += ulabels
    if level in ("g", "g1"):
        for k in range(m):
            x = _zero(dim)
            x[k][m] = Fraction(1)
            mats.append(x)
            labels.append(f"II_{k + 1}")
    if level == "g":
        x = _zero(dim)
        x[m][m] = Fraction(1)
        mats.append(x)
        labels.append("III")
    return LieAlgebraModel(n, level, tuple(tuple(map(tuple, x)) for x in mats), tuple(labels))


# --- Hom(V^V, V) ---

@dataclass(frozen=True)
class Hom2Tensor:
    n: int
    coeffs: np.ndarray  # shape (N, N, N), antisymmetric in the last two axes

    @classmethod
    def zeros(cls, n: int, exact: bool = False) -> "Hom2Tensor":
        dim = 2 * n + 1
        if exact:
            arr = np.empty((dim, dim, dim), dtype=object)
            arr.fill(Fraction(0))
        else:
            arr = np.zeros((dim, dim, dim))
        return cls(n, arr)

    @classmethod
    def from_flat(cls, n: int, flat, exact: bool | None = None) -> "Hom2Tensor":
        space = ModelSpace(n)
        flat = list(flat)
        exact = isinstance(flat[0], Fraction) if exact is None else exact
        t = cls.zeros(n, exact)
        for idx, val in enumerate(flat):
            k, pidx = divmod(idx, len(space.pairs))
            i, j = space.pairs[pidx]
            t.coeffs[k, i, j] = val
            t.coeffs[k, j, i] = -val
        return t

    def flat(self) -> list:
        space = ModelSpace(self.n)
        return [self.coeffs[k, i, j] for k in range(space.dim) for i, j in space.pairs]

    def flat_array(self) -> np.ndarray:
        return np.array([float(x) for x in self.flat()])

    def __sub__(self, other):
        return Hom2Tensor(self.n, self.coeffs - other.coeffs)

    def __add__(self, other):
        return Hom2Tensor(self.n, self.coeffs + other.coeffs)


def amap(S) -> Hom2Tensor:
    """A(S)(u^w) = S(u)w - S(w)u, for S given by the matrices S(e_0), ..., S(e_2n)."""
    mats = [np.asarray(x, dtype=object if isinstance(np.asarray(x).flat[0], Fraction) else float)
            for x in S]
    dim = len(mats)
    n = (dim - 1) // 2
    exact = mats[0].dtype == object
    t = Hom2Tensor.zeros(n, exact)
    for i in range(dim):
        for j in range(dim):
            if i != j:
                t.coeffs[:, i, j] = mats[i][:, j] - mats[j][:, i]
    return t


def hom_v_g_element(alg: LieAlgebraModel, coeffs) -> list:
    """Map coordinates (s outer, basis inner) to the matrices S(e_s)."""
    d = alg.dim
    dim = 2 * alg.n + 1
    return [alg.element(coeffs[s * d:(s + 1) * d]) for s in range(dim)]


@lru_cache(maxsize=None)
def amap_matrix(n: int, level: str) -> tuple[tuple[Fraction, ...], ...]:
    """Exact matrix of A on Hom(V, level algebra); columns indexed (s, basis)."""
    alg = build_lie_algebra(n, level)
    space = ModelSpace(n)
    dim = space.dim
    cols = []
    for s in range(dim):
        for b in alg.basis:
            S = [np.array(b, dtype=object) if t == s else np.array(_zero(dim), dtype=object)
                 for t in range(dim)]
            cols.append(amap(S).flat())
    return tuple(tuple(cols[c][r] for c in range(len(cols))) for r in range(space.hom2_dim))


@lru_cache(maxsize=None)
def amap_matrix_float(n: int, level: str) -> np.ndarray:
    return np.array([[float(x) for x in row] for row in amap_matrix(n, level)])


@lru_cache(maxsize=None)
def image_of_amap(n: int, level: str) -> Subspace:
    m = amap_matrix(n, level)
    cols = list(zip(*m))
    return Subspace.span(ModelSpace(n).hom2_dim, cols)


def kernel_of_amap(n: int, level: str) -> Subspace:
    return linalg.kernel(amap_matrix(n, level))


# --- orbit spaces ---

SUMMANDS = {
    "VpVp_v": "Hom(V'^V', V/V')",
    "Vpv_v": "Hom(V'^V/V', V/V')",
    "VpVp_Vp": "Hom(V'^V', V')",
    "Vpv_Vp": "Hom(V'^V/V', V')",
}


def _candidates(space: ModelSpace):
    m, v = 2 * space.n, space.v
    for i, j in itertools.combinations(range(m), 2):
        yield "VpVp_v", (i, j, v)
    for i in range(m):
        yield "Vpv_v", (i, v, v)
    for k in range(m):
        for i, j in itertools.combinations(range(m), 2):
            yield "VpVp_Vp", (i, j, k)
    for k in range(m):
        for i in range(m):
            yield "Vpv_Vp", (i, v, k)


@dataclass(frozen=True)
class OrbitSpaceModel:
    n: int
    level: str
    quotient: QuotientModel
    labels: tuple[tuple[str, tuple[int, int, int]], ...]  # (summand key, (i, j, k)) per coordinate

    @property
    def dim(self) -> int:
        return self.quotient.dim

    def summand_dims(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for key, _ in self.labels:
            out[key] = out.get(key, 0) + 1
        return out

    def coords(self, t: Hom2Tensor) -> list[Fraction]:
        return self.quotient.coords(t.flat())

    def tensor(self, coords) -> Hom2Tensor:
        return Hom2Tensor.from_flat(self.n, self.quotient.lift(coords), exact=True)


@lru_cache(maxsize=None)
def build_orbit_space(n: int, level: str = "g") -> OrbitSpaceModel:
    space = ModelSpace(n)
    image = image_of_amap(n, level)
    cands = list(_candidates(space))
    vectors = [space.basis_tensor(*idx) for _, idx in cands]
    q = QuotientModel.build(image, vectors)
    chosen = set(q.section)
    labels = []
    for (key, idx), vec in zip(cands, vectors):
        if tuple(vec) in chosen:
            labels.append((key, idx))
            chosen.discard(tuple(vec))
    return OrbitSpaceModel(n, level, q, tuple(labels))


# --- group elements and actions ---

@dataclass(frozen=True)
class GroupElement:
    A: np.ndarray
    b: np.ndarray
    c: object
    level: str = "g"

    @property
    def n(self) -> int:
        return len(self.b) // 2

    def matrix(self) -> np.ndarray:
        m = len(self.b)
        exact = self.A.dtype == object
        g = np.empty((m + 1, m + 1), dtype=object) if exact else np.zeros((m + 1, m + 1))
        if exact:
            g.fill(Fraction(0))
        g[:m, :m] = self.A
        g[:m, m] = self.b
        g[m, m] = self.c
        return g

    def inverse_matrix(self) -> np.ndarray:
        exact = self.A.dtype == object
        if exact:
            ainv = np.array(linalg.inverse_exact(self.A.tolist()), dtype=object)
        else:
            ainv = np.linalg.inv(self.A)
        m = len(self.b)
        g = np.empty((m + 1, m + 1), dtype=object) if exact else np.zeros((m + 1, m + 1))
        if exact:
            g.fill(Fraction(0))
        g[:m, :m] = ainv
        g[:m, m] = -(ainv.dot(self.b)) / self.c
        g[m, m] = 1 / self.c if not exact else Fraction(1) / self.c
        return g

    def violations(self) -> dict[str, float]:
        """Max deviation from each defining condition of ``level``."""
        a = np.array(self.A, dtype=float)
        m = len(self.b)
        out = {"orthogonal": float(np.abs(a.T @ a - np.eye(m)).max()),
               "c_nonzero": 0.0 if float(self.c) != 0 else 1.0}
        if self.level in ("g1", "g2"):
            j0 = np.array(ModelSpace(self.n).j0(), dtype=float)
            out["complex"] = float(np.abs(a @ j0 - j0 @ a).max())
            out["c_one"] = abs(float(self.c) - 1.0)
        if self.level == "g2":
            out["b_zero"] = float(np.abs(np.array(self.b, dtype=float)).max()) if m else 0.0
        return out

    @classmethod
    def from_matrix(cls, g, level: str = "g") -> "GroupElement":
        g = np.asarray(g)
        m = g.shape[0] - 1
        return cls(g[:m, :m], g[:m, m], g[m, m], level)


def cayley(k) -> list[list[Fraction]]:
    """(I - K)^-1 (I + K): exactly orthogonal for rational antisymmetric K."""
    m = len(k)
    eye = [[Fraction(int(i == j)) for j in range(m)] for i in range(m)]
    return _mm(linalg.inverse_exact(_lin(eye, k, 1, -1)), _lin(eye, k, 1, 1))


def random_group_element(n: int, level: str, rng, exact: bool = True,
                         reflect: bool | None = None) -> GroupElement:
    """Random element of G, G1 or G2 with rational entries (Cayley rotations)."""
    m = 2 * n

    def rat():
        return Fraction(int(rng.integers(-6, 7)), int(rng.integers(1, 5)))

    if level == "g":
        k = _zero(m)
        for i, j in itertools.combinations(range(m), 2):
            k[i][j] = rat()
            k[j][i] = -k[i][j]
        a = cayley(k)
        if reflect if reflect is not None else rng.integers(0, 2):
            a[0] = [-x for x in a[0]]
    else:
        blocks, _ = unitary_basis(n)
        k = _zero(m)
        for blk in blocks:
            c = rat()
            k = _lin(k, blk, 1, c)
        a = cayley(k)
    b = [rat() for _ in range(m)] if level in ("g", "g1") else [Fraction(0)] * m
    c = Fraction(1)
    if level == "g":
        c = rat()
        while c == 0:
            c = rat()
    a_arr = np.array(a, dtype=object)
    b_arr = np.array(b, dtype=object)
    if not exact:
        return GroupElement(a_arr.astype(float), b_arr.astype(float), float(c), level)
    return GroupElement(a_arr, b_arr, c, level)


def transform(g_mat, ginv_mat, t: np.ndarray) -> np.ndarray:
    """Components of T after the coframe change theta' = g theta:
    T'[k,i,j] = g[k,a] T[a,b,c] ginv[b,i] ginv[c,j]."""
    out = np.tensordot(g_mat, t, axes=(1, 0))
    out = np.tensordot(out, ginv_mat, axes=(1, 0))        # (k, c, i)
    out = np.tensordot(out, ginv_mat, axes=(1, 0))        # (k, i, j)
    return out


def sigma_action(g: GroupElement, t: Hom2Tensor) -> Hom2Tensor:
    """sigma(g)T(u^w) = g^-1 T(gu ^ gw)."""
    return Hom2Tensor(t.n, transform(g.inverse_matrix(), g.matrix(), t.coeffs))


def sigma_inverse_action(g: GroupElement, t: Hom2Tensor) -> Hom2Tensor:
    """sigma(g)^-1 T = sigma(g^-1) T."""
    return Hom2Tensor(t.n, transform(g.matrix(), g.inverse_matrix(), t.coeffs))


def e_action(g: GroupElement, coords, orbit: OrbitSpaceModel) -> list[Fraction]:
    """Action on classes in E, derived from c(p.g) = sigma(g)^-1 c(p)."""
    t = orbit.tensor(coords)
    return orbit.coords(sigma_inverse_action(g, t))


def lie_action(x, t: np.ndarray) -> np.ndarray:
    """Infinitesimal sigma: -X T + T(X., .) + T(., X.)."""
    x = np.asarray(x)
    out = -np.tensordot(x, t, axes=(1, 0))
    out = out + np.transpose(np.tensordot(t, x, axes=(1, 0)), (0, 2, 1))
    out = out + np.tensordot(t, x, axes=(2, 0))
    return out


# --- stabilisers ---

def stabilizer_algebra(omega) -> Subspace:
    """Lie algebra of the CO(2n) stabiliser of the 2-form ``omega``.

    Unknowns X = a + t I with a antisymmetric; equations X^T omega + omega X = 0.
    Returned as a subspace of the flattened (2n)x(2n) matrices.
    """
    omega = [[Fraction(x) for x in row] for row in omega]
    m = len(omega)
    if linalg.rank(omega) < m:
        raise ContactDegeneracy("stabilizer requested for a degenerate 2-form")
    gens = []
    for p, q in itertools.combinations(range(m), 2):
        gens.append(_i_pq(p, q, m))
    gens.append([[Fraction(int(i == j)) for j in range(m)] for i in range(m)])
    eqs_cols = []
    for x in gens:
        xt = [list(r) for r in zip(*x)]
        e = _lin(_mm(xt, omega), _mm(omega, x))
        eqs_cols.append([v for row in e for v in row])
    eqs = [list(r) for r in zip(*eqs_cols)]
    null = linalg.kernel(eqs)
    mats = []
    for vec in null.basis:
        acc = _zero(m)
        for c, x in zip(vec, gens):
            if c:
                acc = _lin(acc, x, 1, c)
        mats.append([v for row in acc for v in row])
    return Subspace.span(m * m, mats)


def stabilizer_dimension(mu, rtol: float = 1e-6) -> int:
    """dim of the O(2n) stabiliser of block-diag(mu_i J2): sum of squared multiplicities."""
    groups: list[int] = []
    last = None
    for x in sorted(mu, reverse=True):
        if last is not None and abs(x - last) <= rtol * max(abs(last), 1.0):
            groups[-1] += 1
        else:
            groups.append(1)
            last = x
    return sum(k * k for k in groups)
