"""Compiled inner loop for path tracking.

The per-step work (a few projective Newton corrections on systems with tiny
coefficient tables) is dominated by interpreter overhead in pure numpy, so
the Newton block is compiled with numba when available.  The tracker falls
back to an equivalent numpy implementation otherwise; results agree up to
floating-point ordering.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except Exception:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap


@njit(cache=True)
def _solve_pivoted(A, b):
    """Gaussian elimination with partial pivoting; returns (x, ok)."""
    n = A.shape[0]
    M = np.empty((n, n + 1), dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            M[i, j] = A[i, j]
        M[i, n] = b[i]
    for col in range(n):
        piv = col
        best = abs(M[col, col])
        for r in range(col + 1, n):
            v = abs(M[r, col])
            if v > best:
                piv = r
                best = v
        if best == 0.0:
            return np.zeros(n, dtype=np.complex128), False
        if piv != col:
            for j in range(col, n + 1):
                tmp = M[col, j]
                M[col, j] = M[piv, j]
                M[piv, j] = tmp
        for r in range(col + 1, n):
            f = M[r, col] / M[col, col]
            if f != 0:
                for j in range(col, n + 1):
                    M[r, j] -= f * M[col, j]
    x = np.empty(n, dtype=np.complex128)
    for i in range(n - 1, -1, -1):
        acc = M[i, n]
        for j in range(i + 1, n):
            acc -= M[i, j] * x[j]
        x[i] = acc / M[i, i]
    for i in range(n):
        if not (np.isfinite(x[i].real) and np.isfinite(x[i].imag)):
            return x, False
    return x, True


@njit(cache=True)
def newton_block(EXP, OFF, CA, CB, dmax, aa, bb, da, db, z0, iters, conv_tol):
    """Projective Newton corrections at a fixed system h = aa*SA + bb*SB.

    EXP stacks the monomial exponent rows of all polynomials, OFF delimits
    them, CA/CB are the matching coefficient slices of the two systems.
    Returns (z, first, last, A, zdot_norm, ok) where A is the restricted
    derivative at the last corrected point and zdot solves A zdot = hdot(z)
    with hdot = da*SA + db*SB.
    """
    n = OFF.shape[0] - 1
    n1 = z0.shape[0]
    z = z0.copy()
    first = 0.0
    last = 0.0
    A = np.zeros((n, n), dtype=np.complex128)
    B = np.zeros((n1, n), dtype=np.complex128)
    P = np.empty((n1, dmax + 1), dtype=np.complex128)
    va = np.empty(n, dtype=np.complex128)
    vb = np.empty(n, dtype=np.complex128)
    Ja = np.empty((n, n1), dtype=np.complex128)
    Jb = np.empty((n, n1), dtype=np.complex128)

    it = 0
    while it < iters:
        # orthonormal basis of z_perp from a Householder reflector
        a0 = abs(z[0])
        alpha = z[0] / a0 if a0 > 0.0 else 1.0 + 0.0j
        uu = 2.0 * (1.0 + a0)
        c = -2.0 / uu
        for j in range(n1):
            uj = z[j]
            if j == 0:
                uj = uj + alpha
            for k in range(n):
                uk = z[k + 1]
                B[j, k] = c * uj * np.conj(uk)
        for k in range(n):
            B[k + 1, k] += 1.0

        # power table and system values/derivatives
        for j in range(n1):
            P[j, 0] = 1.0 + 0.0j
            for k in range(1, dmax + 1):
                P[j, k] = P[j, k - 1] * z[j]
        for i in range(n):
            sa = 0.0 + 0.0j
            sb = 0.0 + 0.0j
            for j in range(n1):
                Ja[i, j] = 0.0 + 0.0j
                Jb[i, j] = 0.0 + 0.0j
            for r in range(OFF[i], OFF[i + 1]):
                mono = 1.0 + 0.0j
                for j in range(n1):
                    mono *= P[j, EXP[r, j]]
                sa += CA[r] * mono
                sb += CB[r] * mono
                for j in range(n1):
                    e = EXP[r, j]
                    if e > 0:
                        dm = complex(e, 0.0)
                        for j2 in range(n1):
                            ee = EXP[r, j2]
                            if j2 == j:
                                ee -= 1
                            if ee > 0:
                                dm *= P[j2, ee]
                        Ja[i, j] += CA[r] * dm
                        Jb[i, j] += CB[r] * dm
            va[i] = sa
            vb[i] = sb

        # restricted derivative and Newton step
        for i in range(n):
            for k in range(n):
                acc = 0.0 + 0.0j
                for j in range(n1):
                    acc += (aa * Ja[i, j] + bb * Jb[i, j]) * B[j, k]
                A[i, k] = acc
        rhs = np.empty(n, dtype=np.complex128)
        for i in range(n):
            rhs[i] = aa * va[i] + bb * vb[i]
        y, ok = _solve_pivoted(A, rhs)
        if not ok:
            return z, first, last, A, 0.0, False
        yn = 0.0
        for k in range(n):
            yn += y[k].real * y[k].real + y[k].imag * y[k].imag
        yn = np.sqrt(yn)
        step = np.arctan(yn)
        if it == 0:
            first = step
        last = step
        # z <- normalize(z - B y)
        wn = 0.0
        for j in range(n1):
            acc = z[j]
            for k in range(n):
                acc -= B[j, k] * y[k]
            z[j] = acc
            wn += acc.real * acc.real + acc.imag * acc.imag
        wn = np.sqrt(wn)
        for j in range(n1):
            z[j] /= wn
        it += 1
        if step < conv_tol:
            break

    # tangent of the zero curve at the final point, in the basis implied by A
    for j in range(n1):
        P[j, 0] = 1.0 + 0.0j
        for k in range(1, dmax + 1):
            P[j, k] = P[j, k - 1] * z[j]
    rhs = np.empty(n, dtype=np.complex128)
    for i in range(n):
        sa = 0.0 + 0.0j
        sb = 0.0 + 0.0j
        for r in range(OFF[i], OFF[i + 1]):
            mono = 1.0 + 0.0j
            for j in range(n1):
                mono *= P[j, EXP[r, j]]
            sa += CA[r] * mono
            sb += CB[r] * mono
        rhs[i] = da * sa + db * sb
    zdot, ok2 = _solve_pivoted(A, rhs)
    zn = 0.0
    if ok2:
        for k in range(n):
            zn += zdot[k].real * zdot[k].real + zdot[k].imag * zdot[k].imag
        zn = np.sqrt(zn)
    return z, first, last, A, zn, True
