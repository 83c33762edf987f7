"""Dense homogeneous polynomial systems and their Bombieri-Weyl geometry.

A system is n homogeneous polynomials in the n+1 variables x_0..x_n with
degree list (d_1,...,d_n).  Coefficients are stored densely, aligned with a
canonical graded-lexicographic monomial order, so that serialization and
linear operations on coefficient vectors are unambiguous.

The Hermitian product used throughout is the unitarily invariant one with
monomial weights alpha!/s! on degree-s forms (Bombieri-Weyl / Kostlan).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial
from typing import Mapping, Sequence

import numpy as np

from .rng import as_generator


class DegreeViolationError(ValueError):
    """An affine monomial exceeds the declared degree of its polynomial."""


class ZeroAtInfinityError(ValueError):
    """A projective point with x_0 ~ 0 has no affine representative."""


class DegreeMismatchError(ValueError):
    """Operands live in different polynomial spaces."""


# ---------------------------------------------------------------------------
# Monomial tables
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def monomial_exponents(n: int, s: int) -> np.ndarray:
    """All exponent vectors alpha in N^{n+1} with |alpha| = s.

    Rows are sorted in descending lexicographic order (x_0^s first, x_n^s
    last), which is the canonical order for coefficient storage and
    serialization.  Shape (comb(s+n, n), n+1); the array is read-only.
    """
    if n < 0 or s < 0:
        raise ValueError("need n >= 0 and s >= 0")
    rows: list[tuple[int, ...]] = []

    def rec(prefix: tuple[int, ...], vars_left: int, total: int) -> None:
        if vars_left == 1:
            rows.append(prefix + (total,))
            return
        for a in range(total, -1, -1):
            rec(prefix + (a,), vars_left - 1, total - a)

    rec((), n + 1, s)
    out = np.array(rows, dtype=np.int64)
    out.flags.writeable = False
    return out


@lru_cache(maxsize=None)
def monomial_index(n: int, s: int) -> dict:
    """Map from exponent tuple to its row in ``monomial_exponents(n, s)``."""
    table = monomial_exponents(n, s)
    return {tuple(int(a) for a in row): i for i, row in enumerate(table)}


@lru_cache(maxsize=None)
def bw_weights(n: int, s: int) -> np.ndarray:
    """Monomial weights alpha!/s! aligned with ``monomial_exponents(n, s)``."""
    table = monomial_exponents(n, s)
    sfact = factorial(s)
    w = np.array(
        [np.prod([factorial(int(a)) for a in row]) / sfact for row in table],
        dtype=float,
    )
    w.flags.writeable = False
    return w


@lru_cache(maxsize=None)
def _product_index(n: int, s1: int, s2: int) -> np.ndarray:
    """(m1, m2) table of target rows for monomial products of degrees s1, s2."""
    e1 = monomial_exponents(n, s1)
    e2 = monomial_exponents(n, s2)
    idx = monomial_index(n, s1 + s2)
    out = np.empty((e1.shape[0], e2.shape[0]), dtype=np.int64)
    for i, a in enumerate(e1):
        for j, b in enumerate(e2):
            out[i, j] = idx[tuple(int(v) for v in (a + b))]
    out.flags.writeable = False
    return out


def dense_multiply(n: int, s1: int, s2: int, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of dense homogeneous coefficient vectors of degrees s1 and s2."""
    idx = _product_index(n, s1, s2)
    out = np.zeros(comb(s1 + s2 + n, n), dtype=complex)
    np.add.at(out, idx, np.outer(a, b))
    return out


# ---------------------------------------------------------------------------
# Degree list
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DegreeList:
    """Degrees (d_1,...,d_n) of a square homogeneous system."""

    degrees: tuple[int, ...]

    def __post_init__(self):
        degs = tuple(int(d) for d in self.degrees)
        object.__setattr__(self, "degrees", degs)
        if len(degs) < 1:
            raise ValueError("need at least one polynomial")
        if any(d < 1 for d in degs):
            raise ValueError("every degree must be >= 1")

    @property
    def n(self) -> int:
        return len(self.degrees)

    @property
    def max_degree(self) -> int:
        return max(self.degrees)

    @property
    def bezout(self) -> int:
        """Generic number of projective zeros, the product of the degrees."""
        out = 1
        for d in self.degrees:
            out *= d
        return out

    @property
    def dim(self) -> int:
        """Complex dimension of the coefficient space (N+1)."""
        n = self.n
        return sum(comb(d + n, n) for d in self.degrees)

    @property
    def projective_dim(self) -> int:
        """N, the dimension of the projectivized coefficient space."""
        return self.dim - 1


# ---------------------------------------------------------------------------
# Projective points
# ---------------------------------------------------------------------------

class ProjectivePoint:
    """Unit-norm representative of a point in complex projective space."""

    __slots__ = ("vec",)

    def __init__(self, rep):
        v = np.asarray(rep, dtype=complex).reshape(-1)
        nrm = np.linalg.norm(v)
        if nrm == 0 or not np.isfinite(nrm):
            raise ValueError("projective point needs a nonzero finite representative")
        v = v / nrm
        v.flags.writeable = False
        self.vec = v

    @classmethod
    def from_affine(cls, z) -> "ProjectivePoint":
        z = np.asarray(z, dtype=complex).reshape(-1)
        return cls(np.concatenate(([1.0 + 0j], z)))

    @property
    def dim(self) -> int:
        return self.vec.shape[0] - 1

    def affine(self, threshold: float = 1e-8) -> np.ndarray:
        return affine_zero_of(self, threshold)

    def distance(self, other) -> float:
        return proj_distance(self, other)

    def is_close(self, other, tol: float = 1e-10) -> bool:
        """Projective equality test: |1 - |<x,y>|| <= tol for unit representatives."""
        c = abs(np.vdot(_as_vec(other), self.vec))
        return abs(1.0 - c) <= tol

    def __repr__(self):
        return f"ProjectivePoint({self.vec!r})"


def _as_vec(z) -> np.ndarray:
    if isinstance(z, ProjectivePoint):
        return z.vec
    return np.asarray(z, dtype=complex).reshape(-1)


def proj_distance(x, y) -> float:
    """Riemannian distance in projective space, arccos|<x,y>|, in [0, pi/2].

    Computed through the phase-aligned chord, which stays accurate down to
    machine precision for nearby points (arccos alone loses half the digits).
    """
    xv = _as_vec(x)
    yv = _as_vec(y)
    xv = xv / np.linalg.norm(xv)
    yv = yv / np.linalg.norm(yv)
    c = np.vdot(yv, xv)  # <x, y>, linear in x
    ac = abs(c)
    if ac == 0.0:
        return np.pi / 2
    ya = yv * (c / ac)
    chord = np.linalg.norm(xv - ya)
    return 2.0 * np.arcsin(min(1.0, 0.5 * chord))


def affine_zero_of(zeta, threshold: float = 1e-8) -> np.ndarray:
    """Affine representative (z_1/z_0,...,z_n/z_0) of a projective point."""
    v = _as_vec(zeta)
    v = v / np.linalg.norm(v)
    if abs(v[0]) < threshold:
        raise ZeroAtInfinityError(f"|x_0| = {abs(v[0]):.3e} below chart threshold")
    return v[1:] / v[0]


# ---------------------------------------------------------------------------
# Polynomial systems
# ---------------------------------------------------------------------------

class PolySystem:
    """Dense homogeneous system; immutable after construction.

    ``coeffs[i]`` is aligned with ``monomial_exponents(n, degrees[i])``.
    """

    __slots__ = ("degrees", "coeffs", "_blocks", "_dblocks")

    def __init__(self, degrees, coeffs: Sequence[np.ndarray]):
        if not isinstance(degrees, DegreeList):
            degrees = DegreeList(tuple(degrees))
        self.degrees = degrees
        n = degrees.n
        cs = []
        for i, d in enumerate(degrees.degrees):
            c = np.asarray(coeffs[i], dtype=complex).reshape(-1)
            m = comb(d + n, n)
            if c.shape[0] != m:
                raise ValueError(
                    f"polynomial {i}: expected {m} coefficients for degree {d}, got {c.shape[0]}"
                )
            c = c.copy()
            c.flags.writeable = False
            cs.append(c)
        self.coeffs = tuple(cs)
        self._blocks = None
        self._dblocks = None

    @property
    def n(self) -> int:
        return self.degrees.n

    # -- evaluation ---------------------------------------------------------

    def _eval_blocks(self):
        # group polynomials by degree so each monomial vector is computed once
        if self._blocks is None:
            groups: dict[int, list[int]] = {}
            for i, d in enumerate(self.degrees.degrees):
                groups.setdefault(d, []).append(i)
            blocks = []
            for s, idxs in sorted(groups.items()):
                C = np.vstack([self.coeffs[i] for i in idxs])
                blocks.append((s, np.array(idxs), C))
            self._blocks = blocks
        return self._blocks

    def _deriv_blocks(self):
        if self._dblocks is None:
            n = self.n
            dblocks = []
            for s, idxs, C in self._eval_blocks():
                E = monomial_exponents(n, s)
                m1 = comb(s - 1 + n, n)
                idx1 = monomial_index(n, s - 1)
                D = np.zeros((n + 1, C.shape[0], m1), dtype=complex)
                for r, alpha in enumerate(E):
                    for j in range(n + 1):
                        aj = int(alpha[j])
                        if aj == 0:
                            continue
                        low = list(alpha)
                        low[j] -= 1
                        D[j, :, idx1[tuple(low)]] += aj * C[:, r]
                dblocks.append((s, idxs, D))
            self._dblocks = dblocks
        return self._dblocks

    def evaluate(self, x) -> np.ndarray:
        return evaluate(self, x)

    def jacobian(self, x) -> np.ndarray:
        return jacobian(self, x)

    def norm(self) -> float:
        return bw_norm(self)

    def scaled(self, c: complex) -> "PolySystem":
        return PolySystem(self.degrees, [c * a for a in self.coeffs])

    def normalized(self) -> "PolySystem":
        nrm = bw_norm(self)
        if nrm == 0:
            raise ValueError("cannot normalize the zero system")
        return self.scaled(1.0 / nrm)

    def __repr__(self):
        return f"PolySystem(degrees={self.degrees.degrees})"


def _power_table(x: np.ndarray, maxdeg: int) -> np.ndarray:
    """P[j, k] = x_j**k for 0 <= k <= maxdeg."""
    P = np.empty((x.shape[0], maxdeg + 1), dtype=complex)
    P[:, 0] = 1.0
    for k in range(1, maxdeg + 1):
        P[:, k] = P[:, k - 1] * x
    return P


@lru_cache(maxsize=None)
def _var_rows(n: int) -> np.ndarray:
    out = np.arange(n + 1)[None, :]
    out.flags.writeable = False
    return out


def _monomials(P: np.ndarray, n: int, s: int) -> np.ndarray:
    return np.prod(P[_var_rows(n), monomial_exponents(n, s)], axis=1)


def evaluate(h: PolySystem, x) -> np.ndarray:
    """Evaluate h at x in C^{n+1}."""
    x = np.asarray(x, dtype=complex).reshape(-1)
    n = h.n
    if x.shape[0] != n + 1:
        raise ValueError(f"expected point in C^{n + 1}, got length {x.shape[0]}")
    P = _power_table(x, h.degrees.max_degree)
    out = np.empty(n, dtype=complex)
    for s, idxs, C in h._eval_blocks():
        out[idxs] = C @ _monomials(P, n, s)
    return out


def jacobian(h: PolySystem, x) -> np.ndarray:
    """Derivative matrix Dh(x), shape (n, n+1)."""
    x = np.asarray(x, dtype=complex).reshape(-1)
    n = h.n
    P = _power_table(x, max(h.degrees.max_degree - 1, 0))
    out = np.empty((n, n + 1), dtype=complex)
    for s, idxs, D in h._deriv_blocks():
        mono = _monomials(P, n, s - 1)
        out[idxs, :] = (D @ mono).T
    return out


def evaluate_and_jacobian(h: PolySystem, x) -> tuple[np.ndarray, np.ndarray]:
    """Value and derivative sharing one power table (hot path for tracking)."""
    x = np.asarray(x, dtype=complex).reshape(-1)
    n = h.n
    P = _power_table(x, h.degrees.max_degree)
    val = np.empty(n, dtype=complex)
    jac = np.empty((n, n + 1), dtype=complex)
    dblocks = h._deriv_blocks()
    for (s, idxs, C), (_, _, D) in zip(h._eval_blocks(), dblocks):
        val[idxs] = C @ _monomials(P, n, s)
        jac[idxs, :] = (D @ _monomials(P, n, s - 1)).T
    return val, jac


# ---------------------------------------------------------------------------
# Bombieri-Weyl product, sampling, unitary action
# ---------------------------------------------------------------------------

def bw_inner(h: PolySystem, g: PolySystem) -> complex:
    """<h, g>, linear in h and conjugate-linear in g."""
    if h.degrees != g.degrees:
        raise DegreeMismatchError(
            f"degree lists differ: {h.degrees.degrees} vs {g.degrees.degrees}"
        )
    n = h.n
    total = 0.0 + 0j
    for i, d in enumerate(h.degrees.degrees):
        w = bw_weights(n, d)
        total += np.sum(w * h.coeffs[i] * np.conj(g.coeffs[i]))
    return complex(total)


def bw_norm(h: PolySystem) -> float:
    n = h.n
    total = 0.0
    for i, d in enumerate(h.degrees.degrees):
        w = bw_weights(n, d)
        total += float(np.sum(w * np.abs(h.coeffs[i]) ** 2))
    return float(np.sqrt(total))


def sample_bw_gaussian(degrees, seed) -> PolySystem:
    """Standard complex Gaussian system in the Bombieri-Weyl metric.

    Each coefficient a_alpha is complex Gaussian with E|a|^2 = d!/alpha!
    (real and imaginary parts independent with half that variance), which
    makes the coordinates in any BW-orthonormal basis standard complex
    Gaussians and gives E||h||^2 = dim of the coefficient space.
    """
    if not isinstance(degrees, DegreeList):
        degrees = DegreeList(tuple(degrees))
    rng = as_generator(seed)
    n = degrees.n
    coeffs = []
    for d in degrees.degrees:
        w = bw_weights(n, d)
        m = w.shape[0]
        g = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2.0)
        coeffs.append(g / np.sqrt(w))
    return PolySystem(degrees, coeffs)


def unitary_act(h: PolySystem, U: np.ndarray, tol: float = 1e-12) -> PolySystem:
    """Coefficients of the composed system h(U x).

    U must be unitary to within ``tol``; the BW norm is preserved.
    """
    U = np.asarray(U, dtype=complex)
    n = h.n
    if U.shape != (n + 1, n + 1):
        raise ValueError(f"expected a {(n + 1, n + 1)} matrix, got {U.shape}")
    if np.max(np.abs(U.conj().T @ U - np.eye(n + 1))) > tol:
        raise ValueError("matrix is not unitary to the required tolerance")

    out_coeffs = []
    for i, d in enumerate(h.degrees.degrees):
        E = monomial_exponents(n, d)
        c = h.coeffs[i]
        # powers of the substituted linear forms l_j(x) = sum_k U[j,k] x_k
        maxexp = E.max(axis=0)
        pows: list[list[np.ndarray]] = []
        for j in range(n + 1):
            pj = [np.array([1.0 + 0j])]
            for e in range(1, int(maxexp[j]) + 1):
                pj.append(dense_multiply(n, e - 1, 1, pj[-1], U[j]))
            pows.append(pj)
        acc = np.zeros(E.shape[0], dtype=complex)
        for r, alpha in enumerate(E):
            if c[r] == 0:
                continue
            prod = None
            deg = 0
            for j in range(n + 1):
                aj = int(alpha[j])
                if aj == 0:
                    continue
                factor = pows[j][aj]
                if prod is None:
                    prod, deg = factor, aj
                else:
                    prod = dense_multiply(n, deg, aj, prod, factor)
                    deg += aj
            acc += c[r] * prod
        out_coeffs.append(acc)
    return PolySystem(h.degrees, out_coeffs)


# ---------------------------------------------------------------------------
# Homogenization
# ---------------------------------------------------------------------------

def homogenize(affine_polys: Sequence[Mapping[tuple, complex]], degrees) -> PolySystem:
    """Homogeneous counterpart of an affine system.

    ``affine_polys[i]`` maps n-variable exponent tuples to coefficients; each
    monomial is padded with the power of x_0 that brings it to the declared
    degree.  Setting x_0 = 1 recovers the input.
    """
    if not isinstance(degrees, DegreeList):
        degrees = DegreeList(tuple(degrees))
    n = degrees.n
    if len(affine_polys) != n:
        raise ValueError(f"expected {n} polynomials, got {len(affine_polys)}")
    coeffs = []
    for i, (p, d) in enumerate(zip(affine_polys, degrees.degrees)):
        idx = monomial_index(n, d)
        c = np.zeros(comb(d + n, n), dtype=complex)
        for alpha, a in p.items():
            alpha = tuple(int(v) for v in alpha)
            if len(alpha) != n or any(v < 0 for v in alpha):
                raise ValueError(f"polynomial {i}: bad exponent tuple {alpha}")
            s = sum(alpha)
            if s > d:
                raise DegreeViolationError(
                    f"polynomial {i}: monomial of degree {s} exceeds declared degree {d}"
                )
            c[idx[(d - s, *alpha)]] += complex(a)
        coeffs.append(c)
    return PolySystem(degrees, coeffs)


def dehomogenize(h: PolySystem) -> list[dict]:
    """Affine coefficient dicts obtained by setting x_0 = 1 (zeros dropped)."""
    n = h.n
    out = []
    for i, d in enumerate(h.degrees.degrees):
        E = monomial_exponents(n, d)
        p: dict[tuple, complex] = {}
        for r, alpha in enumerate(E):
            a = h.coeffs[i][r]
            if a != 0:
                key = tuple(int(v) for v in alpha[1:])
                p[key] = p.get(key, 0j) + complex(a)
        out.append(p)
    return out


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------

def system_to_json(h: PolySystem) -> dict:
    """Canonical JSON form: graded-lex coefficient order, zeros omitted."""
    polys = []
    n = h.n
    for i, d in enumerate(h.degrees.degrees):
        E = monomial_exponents(n, d)
        entries = []
        for r, alpha in enumerate(E):
            a = h.coeffs[i][r]
            if a != 0:
                entries.append(
                    {"alpha": [int(v) for v in alpha], "re": float(a.real), "im": float(a.imag)}
                )
        polys.append(entries)
    return {"n": n, "degrees": list(h.degrees.degrees), "polys": polys}


def system_from_json(obj: Mapping) -> PolySystem:
    n = int(obj["n"])
    degrees = DegreeList(tuple(int(d) for d in obj["degrees"]))
    if degrees.n != n:
        raise ValueError("field 'n' disagrees with the degree list length")
    coeffs = []
    for i, (entries, d) in enumerate(zip(obj["polys"], degrees.degrees)):
        idx = monomial_index(n, d)
        c = np.zeros(comb(d + n, n), dtype=complex)
        for e in entries:
            alpha = tuple(int(v) for v in e["alpha"])
            if len(alpha) != n + 1 or sum(alpha) != d:
                raise ValueError(f"polynomial {i}: exponent {alpha} does not have degree {d}")
            c[idx[alpha]] += complex(float(e["re"]), float(e["im"]))
        coeffs.append(c)
    return PolySystem(degrees, coeffs)
