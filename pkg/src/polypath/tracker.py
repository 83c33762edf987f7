"""Homotopy paths and condition-adaptive Newton path tracking.

Paths are either great-circle arcs between unit-norm systems or straight
segments of the form h - (1-t) * hat built from the evaluation of the target
at one point.  Tracking advances t by

    dt = lambda0 / (d^{3/2} mu(h_t, z)^2 max(||hdot_t||, eps)),

corrects with a fixed number of projective Newton steps, and accepts a step
when the Newton step lengths contract by at least a factor two.  The
accumulated quadrature of mu * ||(hdot, zetadot)|| estimates the condition
length of the tracked path.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _fast
from .conditioning import householder_complement, mu_from_restricted
from .newton import Certificate, certify_approximate_zero, refine_zero
from .polyspace import (
    PolySystem,
    ProjectivePoint,
    _as_vec,
    _monomials,
    _power_table,
    bw_inner,
    bw_norm,
    bw_weights,
    monomial_exponents,
)

GREAT_CIRCLE = "great-circle"
SEGMENT = "segment"
EVAL_POINT = "eval-point"


class DegeneratePathError(ValueError):
    """The requested path has no usable direction."""


@dataclass(frozen=True)
class TrackerConfig:
    lambda0: float = 0.05
    max_steps: int = 1_000_000
    newton_iters_per_step: int = 3
    shrink: float = 0.5
    grow: float = 1.25
    mu_limit: float = 1e14
    dh_floor: float = 1e-12
    # a path averaging less than stall_progress per accepted step over a
    # window of stall_window steps is creeping toward the singular set
    stall_window: int = 2000
    stall_progress: float = 1e-9

    def __post_init__(self):
        if not 0 < self.lambda0 <= 1:
            raise ValueError("lambda0 must lie in (0, 1]")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink factor must lie in (0, 1)")
        if not 1 < self.grow <= 2:
            raise ValueError("grow factor must lie in (1, 2]")


class StepRecord(NamedTuple):
    t: float
    mu: float
    dt: float
    newton_residual: float


@dataclass
class TrackResult:
    status: str  # "success" | "step-limit" | "singular-encounter"
    endpoint: ProjectivePoint
    steps: int
    step_log: list[StepRecord]
    L_kappa_estimate: float
    certificate: Certificate | None
    residual: float
    rejected: int = 0
    points: list[tuple[float, np.ndarray]] = field(default_factory=list, repr=False)

    @property
    def success(self) -> bool:
        return self.status == "success"


# ---------------------------------------------------------------------------
# Path specifications
# ---------------------------------------------------------------------------

class PathSpec:
    """Curve t -> h_t of systems with its derivative hdot_t.

    Both kinds are linear combinations h_t = a(t) * SA + b(t) * SB of two
    fixed systems, so values and derivatives along the path are combined from
    the endpoint systems without rebuilding coefficient tables.
    """

    __slots__ = ("kind", "g", "h", "t_end", "_sa", "_sb", "_gram", "_kdata")

    def __init__(self, kind: str, g: PolySystem, h: PolySystem, t_end: float,
                 sa: PolySystem, sb: PolySystem | None):
        self.kind = kind
        self.g = g
        self.h = h
        self.t_end = float(t_end)
        self._sa = sa
        self._sb = sb
        self._kdata = None
        if kind == GREAT_CIRCLE:
            self._gram = None
        else:
            na2 = bw_norm(sa) ** 2
            nb2 = bw_norm(sb) ** 2 if sb is not None else 0.0
            cross = complex(bw_inner(sa, sb)).real if sb is not None else 0.0
            self._gram = (na2, nb2, cross)

    def _kernel_data(self):
        # stacked exponent rows and endpoint coefficients for the compiled step
        if self._kdata is None:
            n = self._sa.n
            exps = []
            ca = []
            cb = []
            off = [0]
            for i, d in enumerate(self._sa.degrees.degrees):
                E = monomial_exponents(n, d)
                exps.append(E)
                ca.append(self._sa.coeffs[i])
                if self._sb is not None:
                    cb.append(self._sb.coeffs[i])
                else:
                    cb.append(np.zeros_like(self._sa.coeffs[i]))
                off.append(off[-1] + E.shape[0])
            self._kdata = (
                np.ascontiguousarray(np.vstack(exps)),
                np.asarray(off, dtype=np.int64),
                np.ascontiguousarray(np.concatenate(ca)),
                np.ascontiguousarray(np.concatenate(cb)),
                int(self._sa.degrees.max_degree),
            )
        return self._kdata

    # coefficient weights a(t), b(t) and their derivatives
    def _ab(self, t: float) -> tuple[float, float]:
        if self.kind == GREAT_CIRCLE:
            return np.cos(t), np.sin(t)
        return 1.0, -(1.0 - t)

    def _dab(self, t: float) -> tuple[float, float]:
        if self.kind == GREAT_CIRCLE:
            return -np.sin(t), np.cos(t)
        return 0.0, 1.0

    def value_and_jacobian(self, t: float, x: np.ndarray):
        a, b = self._ab(t)
        if self._sb is None:
            va, Ja = _pair_eval_single(self._sa, x)
            return a * va, a * Ja
        (va,Ja), (vb, Jb) = _pair_eval(self._sa, self._sb, x)
        return a * va + b * vb, a * Ja + b * Jb

    def value(self, t: float, x: np.ndarray) -> np.ndarray:
        a, b = self._ab(t)
        if self._sb is None:
            return a * self._sa.evaluate(x)
        return a * self._sa.evaluate(x) + b * self._sb.evaluate(x)

    def tangent_value(self, t: float, x: np.ndarray) -> np.ndarray:
        da, db = self._dab(t)
        out = da * self._sa.evaluate(x) if da else np.zeros(self._sa.n, dtype=complex)
        if self._sb is not None and db:
            out = out + db * self._sb.evaluate(x)
        return out

    def tangent_norm(self, t: float) -> float:
        if self.kind == GREAT_CIRCLE:
            return 1.0 if self._sb is not None else 0.0
        return float(np.sqrt(self._gram[1]))

    def norm_at(self, t: float) -> float:
        if self.kind == GREAT_CIRCLE:
            return 1.0
        na2, nb2, cross = self._gram
        a, b = self._ab(t)
        return float(np.sqrt(max(a * a * na2 + 2 * a * b * cross + b * b * nb2, 0.0)))

    def system_at(self, t: float) -> PolySystem:
        a, b = self._ab(t)
        if self._sb is None:
            coeffs = [a * c for c in self._sa.coeffs]
        else:
            coeffs = [a * ca + b * cb for ca, cb in zip(self._sa.coeffs, self._sb.coeffs)]
        return PolySystem(self._sa.degrees, coeffs)

    def tangent_system_at(self, t: float) -> PolySystem:
        da, db = self._dab(t)
        if self._sb is None:
            coeffs = [da * c for c in self._sa.coeffs]
        else:
            coeffs = [da * ca + db * cb for ca, cb in zip(self._sa.coeffs, self._sb.coeffs)]
        return PolySystem(self._sa.degrees, coeffs)


def _pair_eval_single(h: PolySystem, x: np.ndarray):
    from .polyspace import evaluate_and_jacobian

    return evaluate_and_jacobian(h, x)


def _pair_eval(ha: PolySystem, hb: PolySystem, x: np.ndarray):
    """evaluate_and_jacobian for two systems with equal degrees, shared monomials."""
    n = ha.n
    P = _power_table(x, ha.degrees.max_degree)
    va = np.empty(n, dtype=complex)
    ja = np.empty((n, n + 1), dtype=complex)
    vb = np.empty(n, dtype=complex)
    jb = np.empty((n, n + 1), dtype=complex)
    blocks = zip(ha._eval_blocks(), ha._deriv_blocks(), hb._eval_blocks(), hb._deriv_blocks())
    for (s, idxs, Ca), (_, _, Da), (_, _, Cb), (_, _, Db) in blocks:
        mono = _monomials(P, n, s)
        mono1 = _monomials(P, n, s - 1)
        va[idxs] = Ca @ mono
        ja[idxs, :] = (Da @ mono1).T
        vb[idxs] = Cb @ mono
        jb[idxs, :] = (Db @ mono1).T
    return (va, ja), (vb, jb)


def great_circle(g: PolySystem, h: PolySystem) -> PathSpec:
    """Unit-sphere arc from g to h (up to phase), parametrized by arc length.

    The arc length is the projective distance arccos|<g,h>|; the target is
    phase-adjusted so the endpoint equals h up to a unit scalar.
    """
    if g.degrees != h.degrees:
        raise DegeneratePathError("start and target systems have different degree lists")
    gn = g.normalized()
    hn = h.normalized()
    c = complex(bw_inner(hn, gn))
    ac = abs(c)
    if 1.0 - ac * ac <= 1e-24:
        # projectively equal: zero-length path
        return PathSpec(GREAT_CIRCLE, gn, hn, 0.0, gn, None)
    hadj = hn.scaled(np.conj(c) / ac) if ac > 0 else hn
    perp = [ha - ac * ga for ha, ga in zip(hadj.coeffs, gn.coeffs)]
    w = PolySystem(g.degrees, perp).normalized()
    t_end = float(np.arccos(min(1.0, ac)))
    return PathSpec(GREAT_CIRCLE, gn, hn, t_end, gn, w)


def hat_component(h: PolySystem, zeta) -> PolySystem:
    """System z -> Diag(<z, zeta>^{d_i}) h(zeta) for a unit representative of zeta."""
    zv = _as_vec(zeta)
    zv = zv / np.linalg.norm(zv)
    n = h.n
    values = h.evaluate(zv)
    coeffs = []
    for i, d in enumerate(h.degrees.degrees):
        E = monomial_exponents(n, d)
        w = bw_weights(n, d)
        zbar_pow = np.prod(np.conj(zv)[None, :] ** E, axis=1)
        coeffs.append(values[i] * zbar_pow / w)
    return PolySystem(h.degrees, coeffs)


def eval_point_homotopy(h: PolySystem, zeta) -> PathSpec:
    """Segment h_t = h - (1-t) * hat from a system vanishing at zeta to h."""
    hat = hat_component(h, zeta)
    g = PolySystem(h.degrees, [a - b for a, b in zip(h.coeffs, hat.coeffs)])
    return PathSpec(EVAL_POINT, g, h, 1.0, h, hat)


# ---------------------------------------------------------------------------
# Tracking
# ---------------------------------------------------------------------------

def _newton_at(path: PathSpec, t: float, zv: np.ndarray):
    """One projective Newton step at h_t; returns (z_new, step_len, A).

    Exact singularity surfaces as None; near-singular restrictions produce
    huge steps that the caller's contraction test rejects.
    """
    B = householder_complement(zv)
    val, J = path.value_and_jacobian(t, zv)
    A = J @ B
    try:
        y = np.linalg.solve(A, val)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(y)):
        return None
    w = zv - B @ y
    w /= np.linalg.norm(w)
    return w, float(np.arctan(np.linalg.norm(y))), A


def _newton_iterations(path: PathSpec, t: float, zv: np.ndarray, iters: int, tol: float):
    """Run up to ``iters`` Newton corrections at h_t.

    Returns (z, first, last, A, zdot_norm, ok) with A the restricted
    derivative from the final correction and zdot the induced motion of the
    zero, solve(A, hdot_t(z)).
    """
    if _fast.HAVE_NUMBA:
        EXP, OFF, CA, CB, dmax = path._kernel_data()
        a, b = path._ab(t)
        da, db = path._dab(t)
        return _fast.newton_block(
            EXP, OFF, CA, CB, dmax,
            complex(a), complex(b), complex(da), complex(db),
            zv, iters, tol,
        )
    first = last = 0.0
    A = None
    for i in range(iters):
        res = _newton_at(path, t, zv)
        if res is None:
            return zv, first, last, A, 0.0, False
        zv, sl, A = res
        if i == 0:
            first = sl
        last = sl
        if sl < tol:
            break
    if A is None:
        B = householder_complement(zv)
        _, J = path.value_and_jacobian(t, zv)
        A = J @ B
    try:
        zdot = np.linalg.solve(A, path.tangent_value(t, zv))
        zn = float(np.linalg.norm(zdot)) if np.all(np.isfinite(zdot)) else 0.0
    except np.linalg.LinAlgError:
        zn = 0.0
    return zv, first, last, A, zn, True


def track(path: PathSpec, z0, config: TrackerConfig | None = None,
          check_start: bool = True) -> TrackResult:
    """Follow the zero of h_0 at z0 along the path to t_end.

    The start point must certify for h_0 unless ``check_start`` is False.
    """
    cfg = config or TrackerConfig()
    zv = _as_vec(z0)
    zv = zv / np.linalg.norm(zv)
    degrees = path.g.degrees.degrees
    d32 = float(max(degrees)) ** 1.5
    converged_step = 1e-14

    if check_start:
        cert0 = certify_approximate_zero(path.system_at(0.0), zv)
        if not cert0.certified:
            raise ValueError(
                "start point does not certify for the initial system "
                f"(mu={cert0.mu_at_point:.3g}, step={cert0.newton_step_len:.3g})"
            )

    def finish(status, t, zv, steps, log, L, rejected, points):
        endpoint_sys = path.system_at(path.t_end)
        cert = None
        residual = float(np.linalg.norm(endpoint_sys.evaluate(zv)))
        if status == "success":
            cert = certify_approximate_zero(endpoint_sys, zv)
            if not cert.certified:
                try:
                    zp = refine_zero(endpoint_sys, zv, max_iters=5)
                    cert2 = certify_approximate_zero(endpoint_sys, zp.vec)
                    if cert2.certified:
                        zv, cert = zp.vec, cert2
                except Exception:
                    pass
                residual = float(np.linalg.norm(endpoint_sys.evaluate(zv)))
            if not cert.certified:
                status = "singular-encounter"
        return TrackResult(status, ProjectivePoint(zv), steps, log, L, cert,
                           residual, rejected, points)

    # state at t = 0
    B = householder_complement(zv)
    _, J = path.value_and_jacobian(0.0, zv)
    A = J @ B
    mu_cur = mu_from_restricted(A, path.norm_at(0.0), degrees)
    if not np.isfinite(mu_cur) or mu_cur > cfg.mu_limit:
        return finish("singular-encounter", 0.0, zv, 0, [], 0.0, 0, [(0.0, zv.copy())])

    t = 0.0
    steps = rejected = attempts = 0
    log: list[StepRecord] = [StepRecord(0.0, mu_cur, 0.0, 0.0)]
    points = [(0.0, zv.copy())]
    L = 0.0
    zdot = np.linalg.solve(A, path.tangent_value(0.0, zv))
    q_prev = mu_cur * float(np.sqrt(path.tangent_norm(0.0) ** 2 + np.vdot(zdot, zdot).real))
    mult = 1.0
    stall_marker = (0, 0.0)

    if path.t_end <= 0.0:
        return finish("success", t, zv, 0, log, 0.0, 0, points)

    while t < path.t_end * (1 - 1e-15):
        base = cfg.lambda0 / (d32 * mu_cur * mu_cur * max(path.tangent_norm(t), cfg.dh_floor))
        dt = min(mult * base, path.t_end - t)
        # retry loop: halve dt until the Newton contraction test passes
        while True:
            attempts += 1
            if attempts > cfg.max_steps:
                return finish("step-limit", t, zv, steps, log, L, rejected, points)
            t_try = t + dt
            z_try, first, last, A_try, zdot_norm, ok = _newton_iterations(
                path, t_try, zv, cfg.newton_iters_per_step, converged_step
            )
            if ok and (first < converged_step or last <= 0.5 * first):
                break
            rejected += 1
            dt *= cfg.shrink
            mult = max(mult * cfg.shrink, 1e-8)
            if dt <= 1e-16 * max(path.t_end, 1.0):
                return finish("singular-encounter", t, zv, steps, log, L, rejected, points)
        # accepted
        dt_actual = t_try - t
        t, zv = t_try, z_try
        steps += 1
        mu_cur = mu_from_restricted(A_try, path.norm_at(t), degrees)
        if not np.isfinite(mu_cur) or mu_cur > cfg.mu_limit:
            points.append((t, zv.copy()))
            return finish("singular-encounter", t, zv, steps, log, L, rejected, points)
        q_new = mu_cur * float(np.sqrt(path.tangent_norm(t) ** 2 + zdot_norm ** 2))
        L += 0.5 * (q_prev + q_new) * dt_actual
        q_prev = q_new
        log.append(StepRecord(t, mu_cur, dt_actual, last))
        points.append((t, zv.copy()))
        mult = min(1.0, mult * cfg.grow)
        if steps - stall_marker[0] >= cfg.stall_window:
            if t - stall_marker[1] < cfg.stall_window * cfg.stall_progress:
                return finish("singular-encounter", t, zv, steps, log, L, rejected, points)
            stall_marker = (steps, t)

    return finish("success", t, zv, steps, log, L, rejected, points)


def _segment_track(path: PathSpec, t0: float, t1: float, zv: np.ndarray,
                   config: TrackerConfig | None = None):
    """Continue a zero from t0 to t1 along a path; returns (z, mu at t1) or None.

    Lightweight variant of ``track`` used for quadrature sweeps: no logging,
    no certification, same step rule and acceptance test.
    """
    cfg = config or TrackerConfig()
    degrees = path.g.degrees.degrees
    d32 = float(max(degrees)) ** 1.5
    conv = 1e-14
    zv = zv.copy()
    B = householder_complement(zv)
    _, J = path.value_and_jacobian(t0, zv)
    mu_cur = mu_from_restricted(J @ B, path.norm_at(t0), degrees)
    if not np.isfinite(mu_cur) or mu_cur > cfg.mu_limit:
        return None
    t = t0
    mult = 1.0
    attempts = 0
    while t < t1 - 1e-15 * max(abs(t1), 1.0):
        base = cfg.lambda0 / (d32 * mu_cur * mu_cur * max(path.tangent_norm(t), cfg.dh_floor))
        dt = min(mult * base, t1 - t)
        while True:
            attempts += 1
            if attempts > cfg.max_steps:
                return None
            t_try = t + dt
            z_try, first, last, A_try, _, ok = _newton_iterations(
                path, t_try, zv, cfg.newton_iters_per_step, conv
            )
            if ok and (first < conv or last <= 0.5 * first):
                break
            dt *= cfg.shrink
            mult = max(mult * cfg.shrink, 1e-8)
            if dt <= 1e-16 * max(abs(t1), 1.0):
                return None
        t, zv = t_try, z_try
        mu_cur = mu_from_restricted(A_try, path.norm_at(t), degrees)
        if not np.isfinite(mu_cur) or mu_cur > cfg.mu_limit:
            return None
        mult = min(1.0, mult * cfg.grow)
    return zv, mu_cur


# ---------------------------------------------------------------------------
# Condition length
# ---------------------------------------------------------------------------

def condition_length(path: PathSpec, result: TrackResult, num_samples: int = 256) -> float:
    """Quadrature estimate of the condition length along a tracked path.

    The zero curve is re-derived at uniform quadrature nodes by Newton
    correction seeded from the tracked points, so the estimate is
    reparametrization invariant and stable under node refinement once the
    underlying track has converged.
    """
    if path.t_end <= 0.0:
        return 0.0
    if not result.points:
        raise ValueError("track result carries no path points")
    degrees = path.g.degrees.degrees
    ts = np.array([p[0] for p in result.points])
    nodes = np.linspace(0.0, path.t_end, num_samples + 1)
    vals = np.empty(num_samples + 1)
    for k, tk in enumerate(nodes):
        j = int(np.argmin(np.abs(ts - tk)))
        zv = result.points[j][1]
        for _ in range(12):
            res = _newton_at(path, tk, zv)
            if res is None:
                break
            zv, sl, A = res
            if sl < 1e-12:
                break
        else:
            res = _newton_at(path, tk, zv)
        if res is None:
            vals[k] = np.nan
            continue
        _, _, A = res
        m = mu_from_restricted(A, path.norm_at(tk), degrees)
        zdot = np.linalg.solve(A, path.tangent_value(tk, zv))
        vals[k] = m * np.sqrt(path.tangent_norm(tk) ** 2 + np.vdot(zdot, zdot).real)
    good = np.isfinite(vals)
    if not np.all(good):
        vals = np.interp(nodes, nodes[good], vals[good])
    return float(np.trapezoid(vals, nodes))


def condition_length_lower_bound(mu_start: float, mu_end: float, n: int, d: int) -> float:
    """Lower bound on the condition length of any curve joining two pairs."""
    return abs(np.log(mu_start / mu_end) - np.log(np.sqrt(n + 1.0))) / (
        d ** 1.5 * np.sqrt(n + 1.0)
    )


def step_log_to_csv(result: TrackResult, fileobj) -> None:
    """Write the step log as CSV columns (step, t, mu, dt, newton_residual)."""
    writer = csv.writer(fileobj)
    writer.writerow(["step", "t", "mu", "dt", "newton_residual"])
    for i, rec in enumerate(result.step_log):
        writer.writerow([i, repr(rec.t), repr(rec.mu), repr(rec.dt), repr(rec.newton_residual)])
