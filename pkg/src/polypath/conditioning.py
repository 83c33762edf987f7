"""Condition numbers for homogeneous systems and basic matrix conditioning.

The central quantity is

    mu(h, z) = ||h|| * || (Dh(z)|_{z_perp})^{-1} Diag(||z||^{d_i - 1} d_i^{1/2}) ||_2,

infinite when the restricted derivative is rank deficient.  It is invariant
under scaling of h and of the representative of z, and under the unitary
action on both arguments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polyspace import PolySystem, _as_vec, bw_norm, jacobian

RANK_RTOL = 1e-14  # sigma_min <= RANK_RTOL * sigma_max declares mu infinite


@dataclass(frozen=True)
class ConditionReport:
    """mu together with the smallest restricted singular value it came from."""

    mu: float
    sigma_min: float
    scaled: bool = True


def householder_complement(z: np.ndarray) -> np.ndarray:
    """Orthonormal basis of z_perp as the trailing columns of a Householder matrix.

    z must be a unit vector in C^{n+1}; returns an (n+1) x n matrix B with
    B* B = I and B* z = 0.
    """
    z = np.asarray(z, dtype=complex).reshape(-1)
    n1 = z.shape[0]
    a0 = abs(z[0])
    alpha = z[0] / a0 if a0 > 0 else 1.0 + 0j
    u = z.copy()
    u[0] += alpha
    # trailing columns of I - 2 u u* / (u* u), without forming the full matrix
    B = (-2.0 / np.vdot(u, u).real) * np.outer(u, u[1:].conj())
    B[1:, :] += np.eye(n1 - 1)
    return B


def restricted_jacobian(h: PolySystem, z) -> tuple[np.ndarray, np.ndarray]:
    """(A, B): derivative restricted to z_perp in the orthonormal basis B."""
    zv = _as_vec(z)
    zu = zv / np.linalg.norm(zv)
    B = householder_complement(zu)
    A = jacobian(h, zv) @ B
    return A, B


def mu_from_restricted(A: np.ndarray, norm_h: float, degrees, norm_z: float = 1.0) -> float:
    """mu given the restricted derivative A evaluated at a representative of norm norm_z.

    The rank tolerance is applied to the degree-scaled restriction; the
    scaling matrix has condition at most sqrt(max d / min d), so this agrees
    with a check on the raw restriction up to that bounded factor.
    """
    degrees = np.asarray(degrees, dtype=float)
    scale = norm_z ** (degrees - 1.0) * np.sqrt(degrees)
    sv = np.linalg.svd(A / scale[:, None], compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= RANK_RTOL * sv[0]:
        return float("inf")
    return float(norm_h / sv[-1])


def mu(h: PolySystem, z) -> float:
    """Scaled condition number of a (system, point) pair; +inf when ill posed."""
    return condition_report(h, z).mu


def condition_report(h: PolySystem, z) -> ConditionReport:
    zv = _as_vec(z)
    nz = float(np.linalg.norm(zv))
    if nz == 0:
        raise ValueError("z must be nonzero")
    A, _ = restricted_jacobian(h, zv)
    sv = np.linalg.svd(A, compute_uv=False)
    value = mu_from_restricted(A, bw_norm(h), h.degrees.degrees, norm_z=nz)
    return ConditionReport(mu=value, sigma_min=float(sv[-1]))


def mu_univariate(f, z: complex) -> float:
    """Closed form for one polynomial in one variable at a point z.

    ``f`` is an ascending coefficient array (f = sum a_k z^k, degree = len-1).
    Returns d^{1/2} (1+|z|^2)^{(d-2)/2} ||h|| / |f'(z)| with h the homogeneous
    counterpart of f; agrees with ``mu`` on (homogenize(f), (1,z)) at roots.
    """
    a = np.asarray(f, dtype=complex).reshape(-1)
    d = a.shape[0] - 1
    if d < 1:
        raise ValueError("need degree >= 1")
    if not np.any(a):
        raise ValueError("f must be nonzero")
    from math import comb

    norm_h = np.sqrt(sum(abs(a[k]) ** 2 / comb(d, k) for k in range(d + 1)))
    fp = sum(k * a[k] * z ** (k - 1) for k in range(1, d + 1))
    if fp == 0:
        return float("inf")
    return float(np.sqrt(d) * (1 + abs(z) ** 2) ** ((d - 2) / 2.0) * norm_h / abs(fp))


def mu_frobenius(h: PolySystem, z) -> float:
    """Frobenius variant: ||h|| * || Dh(z)^+ Diag(||z||^{d_i-1} d_i^{1/2}) ||_F.

    At a zero with full-rank derivative this sits between mu and sqrt(n)*mu.
    Returns +inf when Dh(z) is rank deficient.
    """
    zv = _as_vec(z)
    nz = float(np.linalg.norm(zv))
    J = jacobian(h, zv)
    sv = np.linalg.svd(J, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= RANK_RTOL * sv[0]:
        return float("inf")
    degrees = np.asarray(h.degrees.degrees, dtype=float)
    scale = nz ** (degrees - 1.0) * np.sqrt(degrees)
    M = moore_penrose(J) * scale[None, :]
    return float(bw_norm(h) * np.linalg.norm(M, "fro"))


def moore_penrose(A: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    """SVD pseudoinverse with singular values below rtol * sigma_max zeroed."""
    A = np.asarray(A, dtype=complex)
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    if s.size and s[0] > 0:
        sinv = np.where(s > rtol * s[0], 1.0 / np.where(s > 0, s, 1.0), 0.0)
    else:
        sinv = np.zeros_like(s)
    return (Vh.conj().T * sinv) @ U.conj().T


def distance_to_rank_deficient(A: np.ndarray) -> float:
    """Spectral-norm distance from an m x n matrix (m <= n) to the rank-deficient set.

    Equals sigma_m(A); zero for rank-deficient input.
    """
    A = np.asarray(A, dtype=complex)
    m, n = A.shape
    if m > n:
        raise ValueError("expected m <= n")
    return float(np.linalg.svd(A, compute_uv=False)[-1])
