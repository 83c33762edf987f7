"""Eigenpair continuation between matrices and the companion-matrix bridge.

The conditioning of an eigenpair (A, lambda, v) is

    mu_eig = max(1, ||A||_F ||(pi_{v_perp} (lambda I - A)|_{v_perp})^{-1}||),

infinite at multiple eigenvalues.  Continuation follows the segment
A_t = (1-t) A0 + t A1 with a mu-adaptive step and one bordered Newton
correction of (A v - lambda v, v* v - 1) per advance.

Test oracles here are self-contained: characteristic polynomials come from
the Faddeev-LeVerrier recurrence and their roots from a Durand-Kerner
iteration, so nothing downstream depends on the tracker being validated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .conditioning import RANK_RTOL, householder_complement
from .tracker import TrackerConfig


class SingularEigenpathError(np.linalg.LinAlgError):
    """Continuation hit a (near) multiple eigenvalue."""


@dataclass(frozen=True)
class EigenTriple:
    """Matrix with one eigenvalue and a unit eigenvector."""

    A: np.ndarray
    lam: complex
    v: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=complex)
        v = np.asarray(self.v, dtype=complex).reshape(-1)
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise ValueError("eigenvector must be nonzero")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "v", v / nrm)
        object.__setattr__(self, "lam", complex(self.lam))

    def residual(self) -> float:
        return float(np.linalg.norm(self.A @ self.v - self.lam * self.v))

    def is_valid(self, tol: float = 1e-10) -> bool:
        return self.residual() <= tol * np.linalg.norm(self.A, "fro")


class EigenStepRecord(NamedTuple):
    t: float
    mu: float
    dt: float
    residual: float


@dataclass
class EigenTrackResult:
    status: str  # "success" | "step-limit" | "singular-encounter"
    triple: EigenTriple
    steps: int
    step_log: list[EigenStepRecord]
    length_estimate: float
    rejected: int = 0

    @property
    def success(self) -> bool:
        return self.status == "success"


def mu_eig(A: np.ndarray, lam: complex, v: np.ndarray) -> float:
    """Eigenpair condition number; at least 1, infinite at multiple eigenvalues."""
    A = np.asarray(A, dtype=complex)
    v = np.asarray(v, dtype=complex).reshape(-1)
    v = v / np.linalg.norm(v)
    B = householder_complement(v)
    M = B.conj().T @ ((lam * np.eye(A.shape[0]) - A) @ B)
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0:
        return 1.0
    if sv[0] == 0.0 or sv[-1] <= RANK_RTOL * sv[0]:
        return float("inf")
    return max(1.0, float(np.linalg.norm(A, "fro") / sv[-1]))


def _bordered_newton(A: np.ndarray, lam: complex, v: np.ndarray):
    """One Newton step on (A v - lam v, v* v - 1) with the phase pinned to v."""
    n = A.shape[0]
    K = np.zeros((n + 1, n + 1), dtype=complex)
    K[:n, :n] = A - lam * np.eye(n)
    K[:n, n] = -v
    K[n, :n] = v.conj()
    rhs = np.empty(n + 1, dtype=complex)
    rhs[:n] = -(A @ v - lam * v)
    rhs[n] = (1.0 - np.vdot(v, v)) / 2.0
    try:
        delta = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularEigenpathError("bordered system is singular") from exc
    if not np.all(np.isfinite(delta)):
        raise SingularEigenpathError("bordered solve overflowed")
    v_new = v + delta[:n]
    v_new = v_new / np.linalg.norm(v_new)
    return lam + delta[n], v_new


def _path_tangent(A: np.ndarray, lam: complex, v: np.ndarray, dA: np.ndarray):
    n = A.shape[0]
    K = np.zeros((n + 1, n + 1), dtype=complex)
    K[:n, :n] = A - lam * np.eye(n)
    K[:n, n] = -v
    K[n, :n] = v.conj()
    rhs = np.zeros(n + 1, dtype=complex)
    rhs[:n] = -(dA @ v)
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        return None
    return sol[:n], sol[n]


def track_eigenpair(A0: np.ndarray, A1: np.ndarray, start: EigenTriple,
                    config: TrackerConfig | None = None) -> EigenTrackResult:
    """Continue an eigenpair of A0 along (1-t) A0 + t A1 to an eigenpair of A1."""
    cfg = config or TrackerConfig(stall_progress=1e-7)
    A0 = np.asarray(A0, dtype=complex)
    A1 = np.asarray(A1, dtype=complex)
    if A0.shape != A1.shape or A0.ndim != 2 or A0.shape[0] != A0.shape[1]:
        raise ValueError("A0 and A1 must be square matrices of equal size")
    if not start.is_valid(tol=1e-8):
        raise ValueError("start triple does not satisfy the eigenpair residual bound")

    dA = A1 - A0
    norm_dA = float(np.linalg.norm(dA, "fro"))
    lam, v = start.lam, start.v.copy()
    t = 0.0
    steps = rejected = attempts = 0

    def A_at(t):
        return A0 + t * dA

    na0_sq = float(np.vdot(A0, A0).real)
    cross = float(np.vdot(dA, A0).real)
    ndA_sq = norm_dA * norm_dA

    def norm_A_at(t):
        return np.sqrt(max(na0_sq + 2.0 * t * cross + t * t * ndA_sq, 0.0))

    mu_cur = mu_eig(A_at(0.0), lam, v)
    log = [EigenStepRecord(0.0, mu_cur, 0.0, EigenTriple(A_at(0.0), lam, v).residual())]
    L = 0.0
    tan = _path_tangent(A_at(0.0), lam, v, dA)
    if tan is not None:
        vdot, lamdot = tan
        q_prev = mu_cur * float(np.sqrt(norm_dA ** 2 + abs(lamdot) ** 2 + np.vdot(vdot, vdot).real))
    else:
        q_prev = mu_cur * norm_dA
    mult = 1.0
    stall_marker = (0, 0.0)  # (steps, t) at the last stagnation check

    def finish(status, lam, v, steps, log, L):
        A_end = A_at(1.0)
        triple = EigenTriple(A_end, lam, v)
        if status == "success":
            for _ in range(10):
                if triple.residual() <= 1e-12 * max(np.linalg.norm(A_end, "fro"), 1e-300):
                    break
                try:
                    lam2, v2 = _bordered_newton(A_end, triple.lam, triple.v)
                except SingularEigenpathError:
                    break
                triple = EigenTriple(A_end, lam2, v2)
            if triple.residual() > 1e-10 * np.linalg.norm(A_end, "fro"):
                status = "singular-encounter"
        return EigenTrackResult(status, triple, steps, log, L, rejected)

    if norm_dA == 0.0:
        return finish("success", lam, v, 0, log, 0.0)
    if not np.isfinite(mu_cur) or mu_cur > cfg.mu_limit:
        return finish("singular-encounter", lam, v, 0, log, 0.0)

    while t < 1.0 - 1e-15:
        # The mu-adaptive rule carries the ||A_t||_F scale so that the step
        # count is invariant under rescaling both matrices.
        base = cfg.lambda0 * norm_A_at(t) / (
            mu_cur * mu_cur * max(norm_dA, cfg.dh_floor)
        )
        dt = min(mult * base, 1.0 - t)
        while True:
            attempts += 1
            if attempts > cfg.max_steps:
                return finish("step-limit", lam, v, steps, log, L)
            t_try = t + dt
            A_try = A_at(t_try)
            try:
                lam_try, v_try = _bordered_newton(A_try, lam, v)
                res_try = float(np.linalg.norm(A_try @ v_try - lam_try * v_try))
                # loose along-path tolerance; the endpoint polish restores 1e-12
                ok = res_try <= 3e-6 * norm_A_at(t_try)
            except SingularEigenpathError:
                ok = False
            if ok:
                break
            rejected += 1
            dt *= cfg.shrink
            mult = max(mult * cfg.shrink, 1e-8)
            if dt <= 1e-16:
                return finish("singular-encounter", lam, v, steps, log, L)
        dt_actual = t_try - t
        lam_prev, v_prev = lam, v
        t, lam, v = t_try, lam_try, v_try
        steps += 1
        mu_cur = mu_eig(A_try, lam, v)
        if not np.isfinite(mu_cur) or mu_cur > cfg.mu_limit:
            return finish("singular-encounter", lam, v, steps, log, L)
        # finite-difference (lamdot, vdot) for the length quadrature
        q_new = mu_cur * float(np.sqrt(
            norm_dA ** 2
            + abs((lam - lam_prev) / dt_actual) ** 2
            + (np.linalg.norm(v - v_prev) / dt_actual) ** 2
        ))
        L += 0.5 * (q_prev + q_new) * dt_actual
        q_prev = q_new
        log.append(EigenStepRecord(t, mu_cur, dt_actual, res_try))
        mult = min(1.0, mult * cfg.grow)
        if steps - stall_marker[0] >= cfg.stall_window:
            if t - stall_marker[1] < cfg.stall_window * cfg.stall_progress:
                return finish("singular-encounter", lam, v, steps, log, L)
            stall_marker = (steps, t)

    return finish("success", lam, v, steps, log, L)


def diagonal_eigenpairs(A: np.ndarray, tol: float = 1e-12) -> list[EigenTriple]:
    """Start triples (d_i, e_i) of a diagonal matrix."""
    A = np.asarray(A, dtype=complex)
    off = A - np.diag(np.diag(A))
    if np.max(np.abs(off)) > tol * max(np.max(np.abs(A)), 1e-300):
        raise ValueError("matrix is not diagonal")
    n = A.shape[0]
    out = []
    for i in range(n):
        v = np.zeros(n, dtype=complex)
        v[i] = 1.0
        out.append(EigenTriple(A, A[i, i], v))
    return out


# ---------------------------------------------------------------------------
# Companion matrices and self-contained spectral oracles
# ---------------------------------------------------------------------------

def companion_matrix(coeffs, return_scale: bool = False):
    """Companion matrix of a univariate polynomial (ascending coefficients).

    Non-monic input is normalized by the leading coefficient; the scale is
    returned when requested.  The matrix is upper Hessenberg with ones on the
    subdiagonal and -a_0..-a_{d-1} in the last column.
    """
    a = np.asarray(coeffs, dtype=complex).reshape(-1)
    if a.shape[0] < 2:
        raise ValueError("need degree >= 1")
    lead = a[-1]
    if lead == 0:
        raise ValueError("leading coefficient must be nonzero")
    monic = a / lead
    d = a.shape[0] - 1
    C = np.zeros((d, d), dtype=complex)
    if d > 1:
        idx = np.arange(d - 1)
        C[idx + 1, idx] = 1.0
    C[:, d - 1] = -monic[:d]
    if return_scale:
        return C, complex(lead)
    return C


def char_poly(A: np.ndarray) -> np.ndarray:
    """Ascending coefficients of det(zI - A) by the Faddeev-LeVerrier recurrence."""
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    coeffs = np.zeros(n + 1, dtype=complex)
    coeffs[n] = 1.0
    M = np.eye(n, dtype=complex)
    for k in range(1, n + 1):
        AM = A @ M
        c = -np.trace(AM) / k
        coeffs[n - k] = c
        M = AM + c * np.eye(n)
    return coeffs


def poly_roots_dk(coeffs, max_iters: int = 500, tol: float = 1e-14) -> np.ndarray:
    """All roots of a univariate polynomial by Durand-Kerner iteration.

    Independent of the continuation machinery; adequate as a test oracle for
    well-conditioned polynomials of moderate degree.  A few Newton polishing
    steps follow the simultaneous iteration.
    """
    a = np.asarray(coeffs, dtype=complex).reshape(-1)
    if a.shape[0] < 2:
        raise ValueError("need degree >= 1")
    if a[-1] == 0:
        raise ValueError("leading coefficient must be nonzero")
    monic = a / a[-1]
    d = a.shape[0] - 1
    radius = 1.0 + np.max(np.abs(monic[:-1]))
    z = radius ** (1.0 / 1.5) * np.exp(
        2j * np.pi * np.arange(d) / d + 0.4j
    )

    def val(x):
        out = np.zeros_like(x)
        for c in monic[::-1]:
            out = out * x + c
        return out

    for _ in range(max_iters):
        delta = np.zeros_like(z)
        for i in range(d):
            diff = z[i] - np.delete(z, i)
            denom = np.prod(diff)
            if denom == 0:
                z[i] += (1e-8 + 1e-8j) * (1 + abs(z[i]))
                continue
            delta[i] = val(np.array([z[i]]))[0] / denom
        z = z - delta
        if np.max(np.abs(delta)) < tol * (1.0 + np.max(np.abs(z))):
            break
    # Newton polish
    dcoef = monic[1:] * np.arange(1, d + 1)
    for _ in range(3):
        fv = val(z)
        dv = np.zeros_like(z)
        for c in dcoef[::-1]:
            dv = dv * z + c
        mask = dv != 0
        z[mask] = z[mask] - fv[mask] / dv[mask]
    return z


def refine_eigenpair(A: np.ndarray, lam: complex, v: np.ndarray,
                     iters: int = 20) -> EigenTriple:
    """Rayleigh-quotient / inverse iteration polish of an approximate eigenpair."""
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    v = np.asarray(v, dtype=complex).reshape(-1)
    v = v / np.linalg.norm(v)
    lam = complex(lam)
    for _ in range(iters):
        try:
            w = np.linalg.solve(A - lam * np.eye(n), v)
        except np.linalg.LinAlgError:
            break
        nw = np.linalg.norm(w)
        if not np.isfinite(nw) or nw == 0:
            break
        v = w / nw
        lam_new = complex(np.vdot(v, A @ v))
        if abs(lam_new - lam) < 1e-16 * (1 + abs(lam_new)):
            lam = lam_new
            break
        lam = lam_new
    return EigenTriple(A, lam, v)


# ---------------------------------------------------------------------------
# Matrix JSON
# ---------------------------------------------------------------------------

def matrix_to_json(A: np.ndarray) -> dict:
    A = np.asarray(A, dtype=complex)
    return {
        "n": int(A.shape[0]),
        "re": A.real.tolist(),
        "im": A.imag.tolist(),
    }


def matrix_from_json(obj) -> np.ndarray:
    n = int(obj["n"])
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj["im"], dtype=float)
    if re.shape != (n, n) or im.shape != (n, n):
        raise ValueError("matrix fields must be n x n")
    return re + 1j * im
