"""Small deterministic solvers used by the exact verification paths.

Everything here is dense, derivative-driven, and iteration-capped: failures
raise instead of returning a silently degraded answer.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConvergenceError

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section_min(f, a: float, b: float, tol: float = 1e-12, max_iter: int = 200):
    """Minimize a unimodal f on [a, b]; returns (x, f(x))."""
    if not b >= a:
        raise ValueError("golden_section_min: need a <= b")
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol * (1.0 + abs(a) + abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    if fc <= fd:
        return c, fc
    return d, fd


def minimize_exp_sum(weights, slopes, tol: float = 1e-13, max_iter: int = 200):
    """Minimize g(p) = sum_i w_i exp(s_i p) for w_i > 0; returns (p*, g(p*)).

    Strictly convex whenever some s_i != 0; coercive iff the nonzero slopes
    take both signs. One-sided slopes mean the infimum is only approached at
    infinity; that configuration signals an arbitrage upstream, so it raises.
    """
    w = np.asarray(weights, dtype=float)
    s = np.asarray(slopes, dtype=float)
    if w.shape != s.shape or w.ndim != 1 or w.size == 0:
        raise ValueError("minimize_exp_sum: need matching nonempty 1-D arrays")
    if np.any(w <= 0.0):
        raise ValueError("minimize_exp_sum: weights must be positive")
    nz = s != 0.0
    if not np.any(nz):
        return 0.0, float(np.sum(w))
    if np.all(s[nz] > 0.0) or np.all(s[nz] < 0.0):
        raise ValueError(
            "minimize_exp_sum: slopes are one-sided, infimum not attained "
            "(martingale-measure constraint violated upstream)"
        )

    def val_grad(p):
        with np.errstate(over="ignore"):
            e = w * np.exp(s * p)
            return float(np.sum(e)), float(np.sum(e * s))

    # expand to a sign-changing derivative bracket
    lo = hi = 0.0
    _, g0 = val_grad(0.0)
    if g0 > 0.0:
        step = 1.0
        while True:
            lo = lo - step
            _, glo = val_grad(lo)
            if glo <= 0.0:
                break
            step *= 2.0
            if step > 2.0**60:
                raise ConvergenceError("minimize_exp_sum: bracket expansion failed")
    elif g0 < 0.0:
        step = 1.0
        while True:
            hi = hi + step
            _, ghi = val_grad(hi)
            if ghi >= 0.0:
                break
            step *= 2.0
            if step > 2.0**60:
                raise ConvergenceError("minimize_exp_sum: bracket expansion failed")
    else:
        return 0.0, float(np.sum(w))

    # safeguarded Newton on the derivative
    p = 0.5 * (lo + hi)
    for _ in range(max_iter):
        if hi - lo < tol * (1.0 + abs(lo) + abs(hi)):
            break
        with np.errstate(over="ignore"):
            e = w * np.exp(s * p)
            g = float(np.sum(e * s))
            h = float(np.sum(e * s * s))
        if g > 0.0:
            hi = p
        elif g < 0.0:
            lo = p
        else:
            break
        p_newton = p - g / h if h > 0.0 and math.isfinite(g) and math.isfinite(h) else math.nan
        if math.isfinite(p_newton) and lo < p_newton < hi:
            p = p_newton
        else:
            p = 0.5 * (lo + hi)
    value, _ = val_grad(p)
    return float(p), value


def barrier_minimize(
    phi,
    A,
    b,
    r0,
    gap_tol: float = 1e-10,
    max_newton: int = 200,
    mu0: float = 1.0,
    mu_shrink: float = 0.2,
):
    """Minimize sum_i phi_i(r_i) over {r > 0, A r = b} by a log-barrier method.

    ``phi(r)`` must return (values, gradients, second derivatives) as arrays
    for a positive vector r, each phi_i convex. ``r0`` must be strictly
    positive and feasible. Newton steps solve the equality-constrained
    barrier problem through the Schur complement; the barrier parameter
    shrinks until the duality-gap bound m*mu falls below ``gap_tol``.

    Returns (r, multipliers, info) where info carries the gap bound, the
    Newton iteration count, and the max equality residual. Raises
    ConvergenceError at the iteration cap.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    r = np.asarray(r0, dtype=float).copy()
    m = r.size
    if np.any(r <= 0.0):
        raise ValueError("barrier_minimize: start must be strictly positive")
    if A.ndim != 2 or A.shape[1] != m or A.shape[0] != b.size:
        raise ValueError("barrier_minimize: constraint shape mismatch")
    # drop all-zero rows (vacuous constraints) once, keeping determinism
    keep = np.any(A != 0.0, axis=1)
    if not np.all(keep):
        if np.any(np.abs(b[~keep]) > 1e-12):
            raise ValueError("barrier_minimize: infeasible zero row")
        A = A[keep]
        b = b[keep]
    k = A.shape[0]
    lam = np.zeros(k)

    def barrier_val(rv, mu):
        v, _, _ = phi(rv)
        return float(np.sum(v)) - mu * float(np.sum(np.log(rv)))

    mu = mu0
    newton_used = 0
    while True:
        for _ in range(max_newton):
            if newton_used >= max_newton:
                raise ConvergenceError(
                    f"barrier_minimize: {max_newton} Newton iterations exhausted "
                    f"at gap bound {m * mu:.3e}"
                )
            _, grad, hess = phi(r)
            g = grad - mu / r
            h = hess + mu / (r * r)
            hinv = 1.0 / h
            # Schur system for the equality multipliers
            S = (A * hinv) @ A.T
            rhs = -(A * hinv) @ g
            try:
                lam = np.linalg.solve(S, rhs)
            except np.linalg.LinAlgError:
                lam = np.linalg.lstsq(S, rhs, rcond=None)[0]
            dr = -hinv * (g + A.T @ lam)
            newton_used += 1
            # Newton decrement squared = dr' H dr = -(g + A'lam)' dr
            slope = float((g + A.T @ lam) @ dr)
            if -slope < 1e-13 * (1.0 + abs(barrier_val(r, mu))):
                break
            # keep strictly inside the positive orthant
            neg = dr < 0.0
            alpha = 1.0
            if np.any(neg):
                alpha = min(1.0, 0.99 * float(np.min(-r[neg] / dr[neg])))
            f_cur = barrier_val(r, mu)
            while alpha > 1e-14:
                r_new = r + alpha * dr
                if np.all(r_new > 0.0) and barrier_val(r_new, mu) <= f_cur + 1e-4 * alpha * slope:
                    break
                alpha *= 0.5
            if alpha <= 1e-14:
                break
            r = r + alpha * dr
        if m * mu <= gap_tol:
            break
        mu *= mu_shrink
    eq_residual = float(np.max(np.abs(A @ r - b))) if k else 0.0
    info = {
        "gap_bound": m * mu,
        "newton_iterations": newton_used,
        "eq_residual": eq_residual,
    }
    return r, lam, info
