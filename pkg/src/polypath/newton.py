"""Affine and projective Newton operators and approximate-zero certification.

A point z is an approximate zero of h with associated zero zeta when the
projective Newton iterates z_k satisfy d(z_k, zeta) <= 2^{-(2^k - 1)} d(z0, zeta).
Points within u0 / (d^{3/2} mu(h, zeta)) of zeta in projective distance are
approximate zeros, with u0 = 0.17586.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .conditioning import RANK_RTOL, householder_complement, mu, mu_from_restricted
from .polyspace import PolySystem, ProjectivePoint, _as_vec, evaluate_and_jacobian, proj_distance

U0 = 0.17586

# proj_distance resolves nearby points to ~1e-15; refined reference zeros are
# accurate to the same order, so contraction checks get this absolute slack.
DISTANCE_FLOOR = 1e-13


class SingularJacobianError(np.linalg.LinAlgError):
    """Newton step undefined: the (restricted) derivative is rank deficient."""


@dataclass(frozen=True)
class Certificate:
    """Outcome of the computable approximate-zero check at a point z.

    ``radius`` is u0 / (d^{3/2} mu(h, z)); the step-length test uses half of
    it as a safety margin because mu is evaluated at z, not at the unknown
    exact zero.
    """

    certified: bool
    radius: float
    mu_at_point: float
    newton_step_len: float
    reason: str | None = None


@dataclass(frozen=True)
class ProbeResult:
    distances: tuple[float, ...]
    contraction_ok: bool
    diverged: bool


# ---------------------------------------------------------------------------
# Newton operators
# ---------------------------------------------------------------------------

def _eval_affine(polys: Sequence[Mapping[tuple, complex]], z: np.ndarray):
    n = len(polys)
    f = np.zeros(n, dtype=complex)
    J = np.zeros((n, n), dtype=complex)
    for i, p in enumerate(polys):
        for alpha, c in p.items():
            mono = 1.0 + 0j
            for j, a in enumerate(alpha):
                if a:
                    mono *= z[j] ** a
            f[i] += c * mono
            for j, a in enumerate(alpha):
                if a == 0:
                    continue
                dm = c * a
                for k, b in enumerate(alpha):
                    e = b - 1 if k == j else b
                    if e:
                        dm *= z[k] ** e
                J[i, j] += dm
    return f, J


def newton_affine(polys: Sequence[Mapping[tuple, complex]], z) -> np.ndarray:
    """One affine Newton step z - Df(z)^{-1} f(z).

    ``polys`` maps n-variable exponent tuples to coefficients (n polynomials
    in n variables).
    """
    z = np.asarray(z, dtype=complex).reshape(-1)
    if len(polys) != z.shape[0]:
        raise ValueError("system and point dimensions disagree")
    f, J = _eval_affine(polys, z)
    sv = np.linalg.svd(J, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= RANK_RTOL * sv[0]:
        raise SingularJacobianError("affine derivative is singular at the point")
    return z - np.linalg.solve(J, f)


def projective_newton_raw(h: PolySystem, zv: np.ndarray):
    """One projective Newton step on a unit representative.

    Returns (new unit vector, Riemannian step length, restricted derivative A).
    A is evaluated at the input point and can be reused for conditioning.
    """
    B = householder_complement(zv)
    val, J = evaluate_and_jacobian(h, zv)
    A = J @ B
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= RANK_RTOL * sv[0]:
        raise SingularJacobianError("restricted derivative is singular at the point")
    y = np.linalg.solve(A, val)
    w = zv - B @ y
    w = w / np.linalg.norm(w)
    return w, float(np.arctan(np.linalg.norm(y))), A


def newton_projective(h: PolySystem, z) -> ProjectivePoint:
    """Projective Newton step; the output does not depend on the representative."""
    zv = _as_vec(z)
    zv = zv / np.linalg.norm(zv)
    w, _, _ = projective_newton_raw(h, zv)
    return ProjectivePoint(w)


def refine_zero(h: PolySystem, z, max_iters: int = 50, tol: float = 1e-14) -> ProjectivePoint:
    """Polish a near-zero by Newton iteration until the step drops below tol."""
    zv = _as_vec(z)
    zv = zv / np.linalg.norm(zv)
    for _ in range(max_iters):
        zv, step, _ = projective_newton_raw(h, zv)
        if step < tol:
            break
    return ProjectivePoint(zv)


# ---------------------------------------------------------------------------
# Certification
# ---------------------------------------------------------------------------

def certify_approximate_zero(h: PolySystem, z) -> Certificate:
    """Computable proxy for the approximate-zero property at z.

    Certifies when the projective Newton step length is at most half of
    u0 / (d^{3/2} mu(h, z)).  mu at the exact zero is unknown at runtime, so
    the factor 1/2 absorbs its variation near z.
    """
    zv = _as_vec(z)
    zv = zv / np.linalg.norm(zv)
    d32 = float(h.degrees.max_degree) ** 1.5
    m = mu(h, zv)
    if not np.isfinite(m):
        return Certificate(False, 0.0, m, float("nan"), reason="mu is infinite")
    radius = U0 / (d32 * m)
    try:
        _, beta, _ = projective_newton_raw(h, zv)
    except SingularJacobianError:
        return Certificate(False, radius, m, float("nan"), reason="Newton step undefined")
    certified = beta <= 0.5 * radius
    reason = None if certified else "Newton step exceeds half the certification radius"
    return Certificate(certified, radius, m, beta, reason=reason)


def quadratic_convergence_probe(h: PolySystem, z0, k: int, reference) -> ProbeResult:
    """Distances of k Newton iterates to a refined reference zero.

    Checks the doubling contraction d_j <= 2^{-(2^j - 1)} d_0 with 10%
    multiplicative slack and a small absolute floor for distance resolution.
    The probe reports divergence when an iterate leaves the pi/4 ball or the
    Newton step becomes undefined.
    """
    ref = _as_vec(reference)
    zv = _as_vec(z0)
    zv = zv / np.linalg.norm(zv)
    dists = [proj_distance(zv, ref)]
    diverged = False
    for _ in range(k):
        try:
            zv, _, _ = projective_newton_raw(h, zv)
        except SingularJacobianError:
            diverged = True
            break
        dj = proj_distance(zv, ref)
        if dj > np.pi / 4:
            diverged = True
            break
        dists.append(dj)
    ok = not diverged and len(dists) == k + 1
    if ok:
        d0 = dists[0]
        for j in range(1, k + 1):
            bound = 1.1 * d0 / 2.0 ** (2.0 ** j - 1) + DISTANCE_FLOOR
            if dists[j] > bound:
                ok = False
                break
    return ProbeResult(tuple(dists), ok, diverged)
