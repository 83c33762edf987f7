"""Monte-Carlo reproduction of exact expectation values and spherical-energy
experiments.

Conventions fixed here: the Riemann sphere is the sphere of radius 1/2
centered at (0, 0, 1/2); all energies and their closed-form targets use the
natural logarithm; statistics whose integrand is a squared condition number
are heavy tailed and therefore estimated by a median of 32 batch means.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import comb, log

import numpy as np

from . import conditioning, polyspace, startsys, tracker
from .rng import rng_stream

MOM_BATCHES = 32


class ExperimentInvalidError(RuntimeError):
    """Too many trials failed for the estimate to mean anything."""


@dataclass(frozen=True)
class SphereConfiguration:
    """d points on the sphere of radius 1/2 centered at (0, 0, 1/2)."""

    points: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 2 or p.shape[1] != 3:
            raise ValueError("points must have shape (d, 3)")
        r = p - np.array([0.0, 0.0, 0.5])
        err = np.abs((r ** 2).sum(axis=1) - 0.25)
        if np.max(err) > 1e-12:
            raise ValueError("points do not lie on the radius-1/2 sphere")
        p = p.copy()
        p.flags.writeable = False
        object.__setattr__(self, "points", p)

    @property
    def count(self) -> int:
        return int(self.points.shape[0])


@dataclass(frozen=True)
class McReport:
    estimate: float
    stderr: float
    samples: int
    method: str
    target: float | None = None

    def within(self, rel_tol: float) -> bool:
        if self.target is None:
            raise ValueError("report has no target")
        return abs(self.estimate - self.target) <= rel_tol * abs(self.target)


@dataclass(frozen=True)
class B1Report:
    """Average of the squared condition number over extended arcs."""

    report: McReport
    discard_rate: float
    good_pair_threshold: float  # sqrt(2) pi n N
    a1_upper_bound: float  # sqrt(2) * estimate


@dataclass(frozen=True)
class FeketeResult:
    config: SphereConfiguration
    energy: float
    grad_norm: float
    restarts: int


@dataclass(frozen=True)
class EnergyBoundReport:
    max_mu: float
    bound: float
    satisfied: bool
    energy: float
    note: str


# ---------------------------------------------------------------------------
# Targets
# ---------------------------------------------------------------------------

def target_sum_mu_squared(n: int, degrees) -> float:
    """Closed-form E[sum of mu^2 over the zeros] for a uniform system."""
    dl = degrees if isinstance(degrees, polyspace.DegreeList) else polyspace.DegreeList(tuple(degrees))
    N = dl.projective_dim
    return dl.bezout * N * (n * (1 + 1 / n) ** (n + 1) - 2 * n - 1)


def target_energy_uniform(d: int) -> float:
    return d * d / 4.0 - d / 4.0


def target_energy_random_poly(d: int) -> float:
    return d * d / 4.0 - d * log(d) / 4.0 - d / 4.0


def rsz_window(d: int, slack: float = 0.2) -> tuple[float, float]:
    """Known bracket for the minimal energy, with additive slack on top.

    The asymptotic constant sits in [-0.4375, -0.3700708...]; local
    minimization at finite d is not guaranteed to reach the true minimum, so
    callers widen the upper end by ``slack * d``.
    """
    base = d * d / 4.0 - d * log(d) / 4.0
    return base - 0.4375 * d, base - 0.37 * d + slack * d


# ---------------------------------------------------------------------------
# Monte-Carlo harness
# ---------------------------------------------------------------------------

def _batch_sizes(samples: int, k: int = MOM_BATCHES) -> list[int]:
    base = samples // k
    sizes = [base + (1 if i < samples % k else 0) for i in range(k)]
    return [s for s in sizes if s > 0]


def _run_batches(batch_fn, samples: int, seed: int, jobs: int = 1):
    """batch_fn(rng, size) -> 1-D array of per-sample values.

    Batches derive independent streams from (seed, batch index), so the
    result is identical for any job count.
    """
    sizes = _batch_sizes(samples)
    args = [(rng_stream(seed, b), s) for b, s in enumerate(sizes)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            chunks = list(ex.map(lambda a: batch_fn(*a), args))
    else:
        chunks = [batch_fn(rng, s) for rng, s in args]
    return chunks


def _mom_report(chunks, target=None, median_of_means=True) -> McReport:
    means = np.array([np.mean(c) for c in chunks])
    k = means.shape[0]
    total = sum(len(c) for c in chunks)
    est = float(np.median(means)) if median_of_means else float(np.mean(means))
    stderr = float(np.std(means, ddof=1) / np.sqrt(k)) if k > 1 else float("nan")
    method = f"median-of-means({k})" if median_of_means else "mean"
    return McReport(est, stderr, total, method, target)


# ---------------------------------------------------------------------------
# Spherical energies
# ---------------------------------------------------------------------------

def fekete_energy(X: SphereConfiguration) -> float:
    """Logarithmic potential -sum_{i<j} log ||x_i - x_j||; +inf on coincidence."""
    p = X.points
    d = p.shape[0]
    iu = np.triu_indices(d, 1)
    diff = p[:, None, :] - p[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))[iu]
    if np.any(dist == 0.0):
        return float("inf")
    return float(-np.log(dist).sum())


def zeros_to_sphere(zs) -> SphereConfiguration:
    """Map complex numbers onto the radius-1/2 Riemann sphere.

    Non-finite entries represent the point at infinity and land on the south
    pole (0, 0, 0).
    """
    zs = np.asarray(zs, dtype=complex).reshape(-1)
    pts = np.zeros((zs.shape[0], 3), dtype=float)
    finite = np.isfinite(zs)
    zf = zs[finite]
    den = 1.0 + np.abs(zf) ** 2
    pts[finite, 0] = zf.real / den
    pts[finite, 1] = zf.imag / den
    pts[finite, 2] = 1.0 / den
    return SphereConfiguration(pts)


def sphere_to_zeros(X: SphereConfiguration, pole_tol: float = 1e-14) -> np.ndarray:
    """Inverse chart: (a, b, c) -> (a + ib)/c, with the south pole mapped to inf."""
    p = X.points
    out = np.empty(p.shape[0], dtype=complex)
    for i, (a, b, c) in enumerate(p):
        if c <= pole_tol:
            out[i] = complex("inf")
        else:
            out[i] = complex(a, b) / c
    return out


def _uniform_sphere_points(rng, size: int, d: int) -> np.ndarray:
    v = rng.standard_normal((size, d, 3))
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    return 0.5 * v + np.array([0.0, 0.0, 0.5])


def _energies(pts: np.ndarray) -> np.ndarray:
    d = pts.shape[1]
    iu = np.triu_indices(d, 1)
    diff = pts[:, :, None, :] - pts[:, None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))[:, iu[0], iu[1]]
    return -np.log(dist).sum(axis=1)


def mc_energy_uniform(d: int, samples: int, seed: int, jobs: int = 1,
                      values_sink: list | None = None) -> McReport:
    """Mean energy of d i.i.d. uniform points on the sphere; target d^2/4 - d/4."""
    if d < 2:
        raise ValueError("need d >= 2")

    def batch(rng, size):
        out = np.empty(size)
        chunk = max(1, min(size, 200_000 // (d * d)))
        done = 0
        while done < size:
            m = min(chunk, size - done)
            out[done:done + m] = _energies(_uniform_sphere_points(rng, m, d))
            done += m
        return out

    chunks = _run_batches(batch, samples, seed, jobs)
    if values_sink is not None:
        values_sink.extend(chunks)
    return _mom_report(chunks, target=target_energy_uniform(d), median_of_means=False)


def _kostlan_coeff_batch(rng, size: int, d: int) -> np.ndarray:
    w = np.sqrt(np.array([comb(d, k) for k in range(d + 1)], dtype=float))
    c = (rng.standard_normal((size, d + 1)) + 1j * rng.standard_normal((size, d + 1)))
    return c / np.sqrt(2.0) * w


def _batched_roots(a: np.ndarray) -> np.ndarray:
    """Roots of a batch of univariate polynomials via companion eigenvalues."""
    size, d1 = a.shape
    d = d1 - 1
    m = a / a[:, [d]]
    comp = np.zeros((size, d, d), dtype=complex)
    if d > 1:
        idx = np.arange(d - 1)
        comp[:, idx + 1, idx] = 1.0
    comp[:, :, d - 1] = -m[:, :d]
    return np.linalg.eigvals(comp)


def _root_residuals(a: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Relative residual |f(z)| / (sum|a_k| max(1,|z|)^d) per root."""
    d = a.shape[1] - 1
    val = np.zeros_like(z)
    for k in range(d, -1, -1):
        val = val * z + a[:, [k]]
    scale = np.abs(a).sum(axis=1, keepdims=True) * np.maximum(1.0, np.abs(z)) ** d
    return np.abs(val) / scale


def mc_energy_random_poly(d: int, samples: int, seed: int, jobs: int = 1,
                          reject_tol: float = 1e-8,
                          values_sink: list | None = None) -> tuple[McReport, float]:
    """Mean energy of the zeros of a random polynomial, mapped to the sphere.

    Returns the report and the rejection rate of samples whose companion
    roots failed the residual check; a rate above 1% invalidates the run.
    """
    if d < 2:
        raise ValueError("need d >= 2")

    def batch(rng, size):
        a = _kostlan_coeff_batch(rng, size, d)
        z = _batched_roots(a)
        bad = (_root_residuals(a, z) > reject_tol).any(axis=1)
        pts = np.empty((size, d, 3))
        den = 1.0 + np.abs(z) ** 2
        pts[:, :, 0] = z.real / den
        pts[:, :, 1] = z.imag / den
        pts[:, :, 2] = 1.0 / den
        e = _energies(pts)
        e[bad] = np.nan
        return e

    chunks = _run_batches(batch, samples, seed, jobs)
    all_vals = np.concatenate(chunks)
    reject_rate = float(np.isnan(all_vals).mean())
    if reject_rate > 0.01:
        raise ExperimentInvalidError(f"root rejection rate {reject_rate:.2%} exceeds 1%")
    clean = [c[~np.isnan(c)] for c in chunks]
    if values_sink is not None:
        values_sink.extend(clean)
    report = _mom_report(clean, target=target_energy_random_poly(d), median_of_means=False)
    return report, reject_rate


# ---------------------------------------------------------------------------
# Condition-number statistics
# ---------------------------------------------------------------------------

def _sum_mu2_univariate_batch(rng, size: int, d: int) -> np.ndarray:
    a = _kostlan_coeff_batch(rng, size, d)
    z = _batched_roots(a)
    norm2 = (np.abs(a) ** 2 / np.array([comb(d, k) for k in range(d + 1)])).sum(axis=1)
    fp = np.zeros_like(z)
    for k in range(d, 0, -1):
        fp = fp * z + k * a[:, [k]]
    mu2 = d * (1 + np.abs(z) ** 2) ** (d - 2) * norm2[:, None] / np.abs(fp) ** 2
    return mu2.sum(axis=1)


def mc_sum_mu_squared(n: int, degrees, samples: int, seed: int, jobs: int = 1,
                      bezout_cap: int = 64, values_sink: list | None = None) -> McReport:
    """Median-of-means estimate of E[sum of mu^2 over all zeros].

    For n = 1 the zeros come from the companion oracle; for n >= 2 every
    sample tracks all start zeros to the sampled system, and a tracking
    failure rate above 1% invalidates the experiment.
    """
    dl = degrees if isinstance(degrees, polyspace.DegreeList) else polyspace.DegreeList(tuple(degrees))
    if dl.n != n:
        raise ValueError("n disagrees with the degree list")
    target = target_sum_mu_squared(n, dl)
    if n == 1:
        d = dl.degrees[0]
        if d == 1:
            # a linear form has one zero with mu identically 1
            chunks = [np.ones(s) for s in _batch_sizes(samples)]
        else:
            chunks = _run_batches(lambda rng, s: _sum_mu2_univariate_batch(rng, s, d),
                                  samples, seed, jobs)
        if values_sink is not None:
            values_sink.extend(chunks)
        return _mom_report(chunks, target=target)

    if dl.bezout > bezout_cap:
        raise ValueError(f"Bezout number {dl.bezout} exceeds the cap {bezout_cap}")
    pair = startsys.bc_pair(n, dl)
    failures = [0]

    def batch(rng, size):
        out = np.empty(size)
        for i in range(size):
            h = polyspace.sample_bw_gaussian(dl, rng).normalized()
            path = tracker.great_circle(pair.system, h)
            total = 0.0
            ok = True
            for z in pair.zeros:
                res = tracker.track(path, z, check_start=False)
                if not res.success:
                    ok = False
                    break
                total += res.certificate.mu_at_point ** 2
            if ok:
                out[i] = total
            else:
                failures[0] += 1
                out[i] = np.nan
        return out

    chunks = _run_batches(batch, samples, seed, jobs)
    all_vals = np.concatenate(chunks)
    fail_rate = float(np.isnan(all_vals).mean())
    if fail_rate > 0.01:
        raise ExperimentInvalidError(f"zero-finding failure rate {fail_rate:.2%} exceeds 1%")
    clean = [c[~np.isnan(c)] for c in chunks if np.any(~np.isnan(c))]
    if values_sink is not None:
        values_sink.extend(clean)
    return _mom_report(clean, target=target)


def estimate_B1(pair: startsys.StartPair, samples: int, t_nodes: int, seed: int,
                jobs: int = 1) -> B1Report:
    """Average over random targets of the integral of mu^2 along extended arcs.

    For each random unit target h, the zero of the pair is continued along
    the half great circle through g and h (arc length pi) and mu^2 is
    integrated by the trapezoid rule on ``t_nodes`` intervals.  Samples whose
    continuation hits a singular encounter are discarded and counted.
    """
    g = pair.system
    n = g.degrees.n
    N = g.degrees.projective_dim
    discards = [0]

    def one_sample(rng) -> float:
        h = polyspace.sample_bw_gaussian(g.degrees, rng).normalized()
        c = complex(polyspace.bw_inner(h, g))
        ac = abs(c)
        if 1.0 - ac * ac <= 1e-24:
            return np.nan
        hadj = h.scaled(np.conj(c) / ac) if ac > 0 else h
        perp = [ha - ac * ga for ha, ga in zip(hadj.coeffs, g.coeffs)]
        w = polyspace.PolySystem(g.degrees, perp).normalized()
        arc = tracker.PathSpec(tracker.GREAT_CIRCLE, g, hadj, np.pi, g, w)
        nodes = np.linspace(0.0, np.pi, t_nodes + 1)
        mu2 = np.empty(t_nodes + 1)
        zv = pair.zero.vec
        mu2[0] = conditioning.mu_from_restricted(
            conditioning.restricted_jacobian(g, zv)[0], 1.0, g.degrees.degrees
        ) ** 2
        from .tracker import _segment_track  # local alias

        for k in range(1, t_nodes + 1):
            out = _segment_track(arc, nodes[k - 1], nodes[k], zv)
            if out is None:
                return np.nan
            zv, mu_k = out
            mu2[k] = mu_k ** 2
        return float(np.trapezoid(mu2, nodes))

    def batch(rng, size):
        vals = np.empty(size)
        for i in range(size):
            vals[i] = one_sample(rng)
            if np.isnan(vals[i]):
                discards[0] += 1
        return vals

    chunks = _run_batches(batch, samples, seed, jobs)
    all_vals = np.concatenate(chunks)
    rate = float(np.isnan(all_vals).mean())
    clean = [c[~np.isnan(c)] for c in chunks if np.any(~np.isnan(c))]
    threshold = float(np.sqrt(2.0) * np.pi * n * N)
    report = _mom_report(clean, target=threshold)
    return B1Report(report, rate, threshold, float(np.sqrt(2.0) * report.estimate))


# ---------------------------------------------------------------------------
# Fekete minimization
# ---------------------------------------------------------------------------

def _energy_units(u: np.ndarray) -> float:
    d = u.shape[0]
    iu = np.triu_indices(d, 1)
    diff = u[:, None, :] - u[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))[iu] / 2.0
    return float(-np.log(dist).sum())


def _minimize_once(rng, d: int, iters: int, gtol: float):
    u = rng.standard_normal((d, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    step = 1.0 / d
    E = _energy_units(u)
    gn = np.inf
    for _ in range(iters):
        diff = u[:, None, :] - u[None, :, :]
        dist2 = (diff ** 2).sum(-1)
        np.fill_diagonal(dist2, np.inf)
        g = -(diff / dist2[:, :, None]).sum(axis=1)
        g -= (g * u).sum(axis=1, keepdims=True) * u
        gn = float(np.linalg.norm(g))
        if gn < gtol:
            break
        for _ in range(60):
            un = u - step * g
            un /= np.linalg.norm(un, axis=1, keepdims=True)
            En = _energy_units(un)
            if En < E:
                u, E = un, En
                step *= 1.3
                break
            step *= 0.5
        else:
            break
    return u, E, gn


def minimize_energy(d: int, iters: int = 20_000, seed: int = 0,
                    restarts: int = 10, gtol: float = 1e-6) -> FeketeResult:
    """Projected gradient descent with backtracking on the sphere energy.

    Best of ``restarts`` random starts; a local minimum, not a certified
    global one.
    """
    if d < 2:
        raise ValueError("need d >= 2")
    best = None
    for r in range(restarts):
        u, E, gn = _minimize_once(rng_stream(seed, r), d, iters, gtol)
        if best is None or E < best[1]:
            best = (u, E, gn)
    u, E, gn = best
    pts = 0.5 * u + np.array([0.0, 0.0, 0.5])
    return FeketeResult(SphereConfiguration(pts), E, gn, restarts)


def energy_bound_check(X: SphereConfiguration) -> EnergyBoundReport:
    """Conditioning of the polynomial whose zeros are the given configuration.

    Builds the degree-d polynomial with zeros at the configuration (points at
    the south pole become zeros at infinity) and compares the largest zero
    conditioning against sqrt(d (d+1)), the value guaranteed at true energy
    minimizers.  For a locally minimized configuration the bound is reported,
    not guaranteed.
    """
    zs = sphere_to_zeros(X)
    d = X.count
    finite = [z for z in zs if np.isfinite(z)]
    k_inf = d - len(finite)
    coeffs = np.array([1.0 + 0j])
    for z in finite:
        coeffs = np.convolve(coeffs, np.array([-z, 1.0]))
    affine = {(j,): coeffs[j] for j in range(coeffs.shape[0]) if coeffs[j] != 0}
    h = polyspace.homogenize([affine], [d])
    mus = []
    for z in zs:
        if np.isfinite(z):
            point = polyspace.ProjectivePoint([1.0, z])
        else:
            point = polyspace.ProjectivePoint([0.0, 1.0])
        mus.append(conditioning.mu(h, point))
    max_mu = float(np.max(mus))
    bound = float(np.sqrt(d * (d + 1)))
    note = "configuration from local minimization; bound certified only at true minimizers"
    if k_inf:
        note += f"; {k_inf} zero(s) at infinity"
    return EnergyBoundReport(max_mu, bound, max_mu <= bound, fekete_energy(X), note)
