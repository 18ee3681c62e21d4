"""Utility slices, exponential fields, and Fenchel-Legendre conjugation.

A utility slice is one dated utility function x -> U(x): strictly
increasing, strictly concave, C1, with marginal utility sweeping all of
(0, inf). Its convex dual is

    V(y) = sup_x (U(x) - x y),   y > 0,

with the adjoined value V(0) = sup_x U(x) when finite.

The exponential family used throughout is

    U(x) = -exp(-gamma x + a),   gamma > 0,

whose dual is available in closed form:

    V(y) = entropy_kernel(y / gamma) - (y / gamma) a,

where entropy_kernel(y) = y log y - y, extended by 0 at y = 0. The closed
form gives V(0) = 0, matching sup_x U(x) = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .errors import InadaViolationError
from .solvers import golden_section_min


def entropy_kernel(y):
    """y log y - y, extended by 0 at y = 0. Scalar or array; requires y >= 0."""
    arr = np.asarray(y, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("entropy_kernel: argument must be nonnegative")
    safe = np.where(arr > 0.0, arr, 1.0)
    out = np.where(arr > 0.0, arr * np.log(safe) - arr, 0.0)
    if np.ndim(y) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class UtilitySlice:
    """One dated utility function with its marginal, both plain callables.

    Evaluation-based on purpose: conjugation must work for slices the
    library did not construct.
    """

    value: Callable[[float], float]
    deriv: Callable[[float], float]
    label: str = ""


@dataclass(frozen=True)
class DualSlice:
    """Convex dual of a utility slice.

    ``value`` maps y >= 0 to V(y); ``argmax_x`` maps y > 0 to the wealth
    attaining the sup in the conjugation.
    """

    value: Callable[[float], float]
    argmax_x: Callable[[float], float]
    label: str = ""


def exponential_slice(gamma: float, a: float, label: str = "") -> UtilitySlice:
    """U(x) = -exp(-gamma x + a) as a UtilitySlice."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    g, s = float(gamma), float(a)
    return UtilitySlice(
        value=lambda x: -math.exp(-g * x + s),
        deriv=lambda x: g * math.exp(-g * x + s),
        label=label or f"exp(gamma={g:g}, a={s:g})",
    )


def exponential_dual_slice(gamma: float, a: float, label: str = "") -> DualSlice:
    """Closed-form dual of the exponential slice."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    g, s = float(gamma), float(a)
    return DualSlice(
        value=lambda y: conjugate_exponential(g, s, y),
        argmax_x=lambda y: (s - math.log(y / g)) / g,
        label=label or f"exp-dual(gamma={g:g}, a={s:g})",
    )


def conjugate_exponential(gamma_t, a_t, y):
    """V(y) = entropy_kernel(y/gamma) - (y/gamma) a, vectorized over all three.

    Accepts scalars or arrays (broadcast together); y = 0 gives exactly 0.
    """
    g = np.asarray(gamma_t, dtype=float)
    if np.any(g <= 0.0):
        raise ValueError("conjugate_exponential: gamma must be positive")
    yv = np.asarray(y, dtype=float)
    if np.any(yv < 0.0):
        raise ValueError("conjugate_exponential: y must be nonnegative")
    ratio = yv / g
    out = entropy_kernel(ratio) - ratio * np.asarray(a_t, dtype=float)
    if np.ndim(out) == 0:
        return float(out)
    return out


def conjugate_numeric(
    u: UtilitySlice,
    y: float,
    tol: float = 1e-10,
    max_width: float = 1e6,
) -> tuple[float, float]:
    """Evaluate V(y) = sup_x (U(x) - x y) by solving deriv(x*) = y.

    Geometric bracket expansion from [-1, 1] (the marginal is decreasing,
    so a sign change brackets the root), then bisection to width ``tol``.
    Returns (V(y), x*). The value error is second order in ``tol`` because
    the objective is stationary at x*.

    Raises InadaViolationError when no bracket is found within
    ``max_width``, and ValueError for y <= 0.
    """
    if y <= 0.0:
        raise ValueError(f"conjugate_numeric: y must be positive, got {y}")
    if tol <= 0.0:
        raise ValueError("conjugate_numeric: tol must be positive")

    def g(x):
        return u.deriv(x) - y

    lo, hi = -1.0, 1.0
    glo, ghi = g(lo), g(hi)
    # deriv decreasing: need g(lo) >= 0 >= g(hi)
    while glo < 0.0:
        lo *= 2.0
        if -lo > max_width:
            raise InadaViolationError(
                f"marginal utility never reaches {y:g} on [{lo:g}, 0]"
            )
        glo = g(lo)
    while ghi > 0.0:
        hi *= 2.0
        if hi > max_width:
            raise InadaViolationError(
                f"marginal utility never falls below {y:g} on [0, {hi:g}]"
            )
        ghi = g(hi)
    if glo == 0.0:
        x_star = lo
    elif ghi == 0.0:
        x_star = hi
    else:
        for _ in range(200):
            if hi - lo < tol:
                break
            mid = 0.5 * (lo + hi)
            gm = g(mid)
            if gm > 0.0:
                lo = mid
            elif gm < 0.0:
                hi = mid
            else:
                lo = hi = mid
        x_star = 0.5 * (lo + hi)
    return u.value(x_star) - x_star * y, x_star


def conjugate_slice(u: UtilitySlice, tol: float = 1e-10) -> DualSlice:
    """Numeric DualSlice wrapping conjugate_numeric."""
    return DualSlice(
        value=lambda y: conjugate_numeric(u, y, tol)[0],
        argmax_x=lambda y: conjugate_numeric(u, y, tol)[1],
        label=f"numeric-dual({u.label})" if u.label else "numeric-dual",
    )


def bidual(dual: DualSlice, x: float, y_grid, refine_tol: float = 1e-12) -> float:
    """min over y of (V(y) + x y), grid plus golden-section refinement.

    Recovers U(x) for a convex dual when the grid brackets the minimizer.
    """
    ys = np.asarray(list(y_grid), dtype=float)
    if ys.size == 0:
        raise ValueError("bidual: empty y grid")
    if np.any(ys <= 0.0):
        raise ValueError("bidual: grid entries must be positive")
    ys = np.sort(ys)

    def f(y):
        return dual.value(y) + x * y

    vals = np.array([f(y) for y in ys])
    i = int(np.argmin(vals))
    lo = ys[max(i - 1, 0)]
    hi = ys[min(i + 1, ys.size - 1)]
    if lo == hi:
        return float(vals[i])
    y_best, v_best = golden_section_min(f, float(lo), float(hi), tol=refine_tol)
    return float(min(v_best, vals[i]))


def validate_utility_slice(u: UtilitySlice, grid=None) -> list[str]:
    """Sampled invariant check: increasing, concave, positive decreasing
    marginal, and the marginal sweeping (0, inf) along a probe sequence.

    Returns a list of violation messages, empty when all checks pass.
    """
    if grid is None:
        grid = np.linspace(-5.0, 5.0, 41)
    grid = np.asarray(grid, dtype=float)
    problems = []
    vals = np.array([u.value(x) for x in grid])
    ders = np.array([u.deriv(x) for x in grid])
    if not np.all(np.diff(vals) > 0):
        problems.append("value not strictly increasing on probe grid")
    if not np.all(np.diff(vals, 2) < 0):
        problems.append("value not strictly concave on probe grid")
    if not np.all(ders > 0):
        problems.append("marginal not strictly positive on probe grid")
    if not np.all(np.diff(ders) < 0):
        problems.append("marginal not strictly decreasing on probe grid")
    # documented probe sequence for the limit behavior
    if not u.deriv(-64.0) > u.deriv(0.0) * 4.0:
        problems.append("marginal does not grow towards -inf (probe x=-64)")
    if not u.deriv(64.0) < u.deriv(0.0) / 4.0:
        problems.append("marginal does not vanish towards +inf (probe x=64)")
    return problems


class ExponentialFieldParams:
    """Exponential field on an event tree: per-node (gamma, a) pairs.

    ``gamma`` and ``a_shift`` map node ids to the risk aversion and additive
    shift of U(node, x) = -exp(-gamma x + a). Adaptedness is automatic since
    values attach to nodes. Lookups at unknown nodes raise KeyError.
    """

    def __init__(self, gamma: Mapping[str, float], a_shift: Mapping[str, float]):
        self.gamma = dict(gamma)
        self.a_shift = dict(a_shift)
        for node, g in self.gamma.items():
            if not (g > 0.0) or not math.isfinite(g):
                raise ValueError(f"gamma must be positive and finite at node {node!r}, got {g}")
        for node, a in self.a_shift.items():
            if not math.isfinite(a):
                raise ValueError(f"a_shift must be finite at node {node!r}, got {a}")

    def nodes(self):
        return set(self.gamma) & set(self.a_shift)

    def defined_at(self, node: str) -> bool:
        return node in self.gamma and node in self.a_shift

    def slice_at(self, node: str) -> UtilitySlice:
        return exponential_slice(self.gamma[node], self.a_shift[node], label=str(node))

    def dual_slice_at(self, node: str) -> DualSlice:
        return exponential_dual_slice(self.gamma[node], self.a_shift[node], label=str(node))

    def with_offsets(self, offsets: Mapping[str, float]) -> "ExponentialFieldParams":
        """Copy with a_shift[node] += offset for each given node."""
        a = dict(self.a_shift)
        for node, off in offsets.items():
            a[node] = a[node] + off
        return ExponentialFieldParams(self.gamma, a)

    def __repr__(self):
        return f"ExponentialFieldParams(nodes={len(self.gamma)})"


def eval_exponential(params: ExponentialFieldParams, node: str, x) -> float:
    """U(node, x) = -exp(-gamma_node x + a_node); KeyError on unknown node."""
    g = params.gamma[node]
    a = params.a_shift[node]
    out = -np.exp(-g * np.asarray(x, dtype=float) + a)
    if np.ndim(out) == 0:
        return float(out)
    return out
