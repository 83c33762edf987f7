"""Start pairs (g, zeros) for the homotopy: two explicit constructions and a
random sampler that emulates drawing a uniform system together with a
uniformly chosen zero of it.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

from .polyspace import (
    DegreeList,
    PolySystem,
    ProjectivePoint,
    bw_inner,
    bw_norm,
    bw_weights,
    dense_multiply,
    monomial_exponents,
    monomial_index,
    system_from_json,
    system_to_json,
)
from .conditioning import householder_complement
from .rng import as_generator


class TooManyZerosError(ValueError):
    """Zero enumeration would exceed the configured cap."""


@dataclass(frozen=True)
class StartPair:
    """Unit-norm start system with one or all of its zeros."""

    system: PolySystem
    zeros: tuple[ProjectivePoint, ...]
    provenance: str

    @property
    def zero(self) -> ProjectivePoint:
        return self.zeros[0]


def _check_n(n: int, degrees) -> DegreeList:
    dl = degrees if isinstance(degrees, DegreeList) else DegreeList(tuple(degrees))
    if dl.n != n:
        raise ValueError(f"n={n} disagrees with len(degrees)={dl.n}")
    return dl


def shsm_pair(n: int, degrees) -> StartPair:
    """The pair g_i = d_i^{1/2} x_0^{d_i-1} x_i with zero e_0 = (1,0,...,0).

    Its conditioning at e_0 is the minimal value sqrt(n).
    """
    dl = _check_n(n, degrees)
    coeffs = []
    for i, d in enumerate(dl.degrees):
        idx = monomial_index(n, d)
        c = np.zeros(len(idx), dtype=complex)
        alpha = [0] * (n + 1)
        alpha[0] = d - 1
        alpha[i + 1] = 1
        c[idx[tuple(alpha)]] = np.sqrt(d)
        coeffs.append(c)
    g = PolySystem(dl, coeffs).normalized()
    e0 = np.zeros(n + 1, dtype=complex)
    e0[0] = 1.0
    return StartPair(g, (ProjectivePoint(e0),), "shsm")


def bc_pair(n: int, degrees, cap: int = 100_000) -> StartPair:
    """The pair g_i = (x_0^{d_i} - x_i^{d_i}) / sqrt(2n) with all its zeros.

    The zeros are (1, w_1, ..., w_n) over all choices w_i^{d_i} = 1, so the
    full Bezout count of them is enumerated.
    """
    dl = _check_n(n, degrees)
    if dl.bezout > cap:
        raise TooManyZerosError(f"would enumerate {dl.bezout} zeros (cap {cap})")
    coeffs = []
    for i, d in enumerate(dl.degrees):
        idx = monomial_index(n, d)
        c = np.zeros(len(idx), dtype=complex)
        a0 = [0] * (n + 1)
        a0[0] = d
        ai = [0] * (n + 1)
        ai[i + 1] = d
        c[idx[tuple(a0)]] = 1.0 / np.sqrt(2 * n)
        c[idx[tuple(ai)]] = -1.0 / np.sqrt(2 * n)
        coeffs.append(c)
    g = PolySystem(dl, coeffs).normalized()
    roots = [np.exp(2j * np.pi * np.arange(d) / d) for d in dl.degrees]
    zeros = []
    index = [0] * n
    while True:
        vec = np.empty(n + 1, dtype=complex)
        vec[0] = 1.0
        for i in range(n):
            vec[i + 1] = roots[i][index[i]]
        zeros.append(ProjectivePoint(vec))
        for i in range(n - 1, -1, -1):
            index[i] += 1
            if index[i] < dl.degrees[i]:
                break
            index[i] = 0
        else:
            break
    return StartPair(g, tuple(zeros), "bc")


def bp_sample(n: int, degrees, seed) -> StartPair:
    """Random start pair from the linear-algebra sampler.

    Draw a standard complex Gaussian n x (n+1) matrix M, take zeta as a unit
    kernel vector, embed M isometrically as the component of the system that
    is linear across zeta (weight d_i^{1/2} <z,zeta>^{d_i-1} (M z)_i), and add
    an independent Gaussian drawn from the subspace of systems vanishing at
    zeta to second order.  The result is normalized to unit norm; its
    distribution emulates a uniform system with a uniformly chosen zero.
    """
    dl = _check_n(n, degrees)
    rng = as_generator(seed)
    resamples = 0
    while True:
        M = (rng.standard_normal((n, n + 1)) + 1j * rng.standard_normal((n, n + 1))) / np.sqrt(2)
        sv = np.linalg.svd(M, compute_uv=False)
        if sv[-1] >= 1e-12 * sv[0]:
            break
        resamples += 1
    _, _, Vh = np.linalg.svd(M, full_matrices=True)
    zeta = Vh[-1].conj()
    zeta = zeta / np.linalg.norm(zeta)

    B = householder_complement(zeta)
    zbar = np.conj(zeta)
    coeffs = []
    for i, d in enumerate(dl.degrees):
        E = monomial_exponents(n, d)
        w = bw_weights(n, d)
        # <z, zeta>^s expansions: coefficient of z^alpha is (s!/alpha!) prod conj(zeta)^alpha
        hat_d = np.prod(zbar[None, :] ** E, axis=1) / w
        E1 = monomial_exponents(n, d - 1)
        w1 = bw_weights(n, d - 1)
        hat_d1 = np.prod(zbar[None, :] ** E1, axis=1) / w1

        # linear-across-zeta embedding of row i of M
        ell = np.sqrt(d) * dense_multiply(n, d - 1, 1, hat_d1, M[i])

        # Gaussian residual orthogonal to the value and linear components
        m = E.shape[0]
        f = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2)
        f = f / np.sqrt(w)
        basis = [hat_d]
        for j in range(n):
            bj = np.sqrt(d) * dense_multiply(n, d - 1, 1, hat_d1, np.conj(B[:, j]))
            basis.append(bj)
        for b in basis:
            f = f - np.sum(w * f * np.conj(b)) * b
        coeffs.append(f + ell)

    g = PolySystem(dl, coeffs).normalized()
    tag = f"bp(resamples={resamples})" if resamples else "bp"
    return StartPair(g, (ProjectivePoint(zeta),), tag)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def pair_to_json(pair: StartPair) -> dict:
    obj = system_to_json(pair.system)
    obj["zeros"] = [
        [{"re": float(c.real), "im": float(c.imag)} for c in z.vec] for z in pair.zeros
    ]
    obj["provenance"] = pair.provenance
    return obj


def pair_from_json(obj) -> StartPair:
    system = system_from_json(obj)
    zeros = tuple(
        ProjectivePoint([complex(c["re"], c["im"]) for c in z]) for z in obj["zeros"]
    )
    return StartPair(system, zeros, str(obj.get("provenance", "unknown")))
