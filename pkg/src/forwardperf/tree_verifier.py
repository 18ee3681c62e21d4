"""Exact verification of self-generation and duality on event trees.

Primal value by backward dynamic programming:

    u(xi; t, T) = sup over trading strategies of E[U(T, xi + sum pi dS) | t-node].

For exponential fields with a replicable inverse risk aversion
(1/gamma_child = 1/gamma_node + psi * dS on every branch), wealth separates
multiplicatively and the DP collapses to a scalar factor recursion

    C(node) = inf_pi sum_c p_c C(c) exp(-gamma_c pi dS_c),   C(T-node) = e^a,

with u(xi) = -exp(-gamma xi) C(node); the log-factor equals the additive
shift a self-generation demands, so gaps are reported in those units and do
not depend on the wealth argument. Without replicability the generic path
tabulates value functions on a wealth grid with monotone cubic
interpolation and reports its own discretization error estimate.

Dual value as one convex program per conditioning node:

    v(eta; t, T) = min over terminal conditional masses r of
                   sum_w p_w V(w, eta r_w / p_w)

subject to r >= 0, sum r = 1, and one linear martingale constraint per
interior node; solved by the log-barrier Newton method in ``solvers``. The
conditional entropy functional is this same program at eta = 1 (the
splitting identity for the entropy kernel kills the extra term), which also
drives the backward construction of the consistent additive shift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Mapping

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import ArbitrageError, ConvergenceError
from .fields import (
    ExponentialFieldParams,
    UtilitySlice,
    conjugate_exponential,
    conjugate_numeric,
    entropy_kernel,
)
from .report import CheckRecord, VerificationReport
from .solvers import barrier_minimize, golden_section_min, minimize_exp_sum
from .tree_market import (
    EventTree,
    TreeMeasure,
    density_process,
    density_quotient,
    enumerate_product_measures,
    measure_from_leaf_masses,
    node_polytope,
    reference_measure,
)

_REPLICATION_TOL = 1e-10


# -- results -------------------------------------------------------------


@dataclass
class PrimalResult:
    t: int
    T: int
    values: dict[str, float]
    xi: Mapping[str, float]
    method: str  # "exponential" or "grid"
    log_factor: dict[str, float] | None = None
    policy: dict[str, float] | None = None
    replication: dict[str, float] | None = None
    grid_error: float | None = None


@dataclass
class DualResult:
    t: int
    T: int
    values: dict[str, float]
    eta: Mapping[str, float]
    minimizer: dict[str, TreeMeasure] = dc_field(default_factory=dict)
    kkt_residual: dict[str, float] = dc_field(default_factory=dict)
    near_boundary: dict[str, bool] = dc_field(default_factory=dict)


@dataclass
class EntropyResult:
    t: int
    T: int
    values: dict[str, float]
    minimizer: dict[str, TreeMeasure] | None = None


@dataclass
class ReplicationResult:
    feasible: bool
    psi: dict[str, float] | None
    failed_node: str | None
    residual: float


# -- small helpers -------------------------------------------------------


def _per_node(arg, nodes, name):
    """Broadcast a scalar or per-node mapping onto the given nodes."""
    if isinstance(arg, Mapping):
        missing = [n for n in nodes if n not in arg]
        if missing:
            raise ValueError(f"{name} missing at nodes {missing!r}")
        return {n: float(arg[n]) for n in nodes}
    val = float(arg)
    return {n: val for n in nodes}


def _window_leaves(tree, start, T):
    leaves = tree.descendants_at(start, T)
    p = np.array([tree.cond_prob(start, w) for w in leaves])
    return leaves, p


def _constraint_system(tree, start, T, leaves):
    """Unit-mass row plus one martingale row per interior window node."""
    index = {w: i for i, w in enumerate(leaves)}
    rows = [np.ones(len(leaves))]
    for m in tree.window_interior(start, T):
        row = np.zeros(len(leaves))
        for br in tree.branches_of(m):
            for w in tree.descendants_at(br.child, T):
                row[index[w]] = br.dprice
        rows.append(row)
    A = np.vstack(rows)
    b = np.zeros(A.shape[0])
    b[0] = 1.0
    return A, b


def _interior_start(tree, start, T, leaves):
    """Strictly positive feasible point: product of one-step vertex centroids."""
    mass = {start: 1.0}
    for m in tree.window_interior(start, T):
        poly = node_polytope(tree, m)
        if poly.empty or not poly.has_equivalent_point():
            raise ArbitrageError(
                f"node {m!r}: no equivalent one-step martingale measure; "
                "dual program has no interior point"
            )
        center = poly.centroid()
        for j, child in enumerate(poly.children):
            mass[child] = mass[m] * float(center[j])
    return np.array([mass[w] for w in leaves])


def _field_kind(field) -> str:
    if isinstance(field, ExponentialFieldParams):
        return "exponential"
    if isinstance(field, Mapping):
        return "slices"
    raise TypeError(f"unsupported field specification {type(field)!r}")


# -- primal --------------------------------------------------------------


def replicate_inverse_gamma(tree: EventTree, gamma: Mapping[str, float]) -> ReplicationResult:
    """Per-node portfolio replicating 1/gamma increments, or the first
    inconsistent node.

    Solves psi * dS_c = 1/gamma_c - 1/gamma_node across children in least
    squares; a residual above 1e-10 is an infeasibility certificate.
    """
    psi: dict[str, float] = {}
    worst = 0.0
    for nid in tree._dfs_order:
        if tree.is_leaf(nid):
            continue
        if gamma[nid] <= 0.0:
            raise ValueError(f"gamma must be positive, node {nid!r}")
        branches = tree.branches_of(nid)
        d = np.array([br.dprice for br in branches])
        rhs = np.array([1.0 / gamma[br.child] - 1.0 / gamma[nid] for br in branches])
        denom = float(d @ d)
        coeff = float(d @ rhs) / denom if denom > 0.0 else 0.0
        residual = float(np.max(np.abs(coeff * d - rhs)))
        worst = max(worst, residual)
        if residual > _REPLICATION_TOL:
            return ReplicationResult(
                feasible=False, psi=None, failed_node=nid, residual=residual
            )
        psi[nid] = coeff
    return ReplicationResult(feasible=True, psi=psi, failed_node=None, residual=worst)


def _exponential_factors(tree, field, t, T):
    """Scalar factor recursion C plus the one-step base policy per node."""
    C: dict[str, float] = {}
    policy: dict[str, float] = {}
    order = []
    for start in tree.nodes_at(t):
        order.extend(tree.window_interior(start, T))
        for w in tree.descendants_at(start, T):
            C[w] = math.exp(field.a_shift[w])
    for nid in sorted(order, key=lambda n: -tree.time_of(n)):
        branches = tree.branches_of(nid)
        weights = np.array([br.prob * C[br.child] for br in branches])
        slopes = np.array([-field.gamma[br.child] * br.dprice for br in branches])
        try:
            pi0, value = minimize_exp_sum(weights, slopes)
        except ValueError as exc:
            raise ArbitrageError(f"node {nid!r}: {exc}") from exc
        C[nid] = value
        policy[nid] = pi0
    return C, policy


def _grid_dp(tree, slices, t, T, grid):
    """Tabulated backward induction; returns per-node value arrays on the grid."""
    gmin, gmax = grid[0], grid[-1]
    values: dict[str, np.ndarray] = {}
    for start in tree.nodes_at(t):
        for w in tree.descendants_at(start, T):
            u = slices[w]
            values[w] = np.array([u.value(x) for x in grid])
    order = []
    for start in tree.nodes_at(t):
        order.extend(tree.window_interior(start, T))
    for nid in sorted(order, key=lambda n: -tree.time_of(n)):
        branches = tree.branches_of(nid)
        interps = [PchipInterpolator(grid, values[br.child], extrapolate=False) for br in branches]
        probs = np.array([br.prob for br in branches])
        dps = np.array([br.dprice for br in branches])
        out = np.empty_like(grid)
        for i, x in enumerate(grid):
            # portfolio range keeping every child argument on the grid
            plo, phi = -math.inf, math.inf
            for dp in dps:
                if dp > 0:
                    plo = max(plo, (gmin - x) / dp)
                    phi = min(phi, (gmax - x) / dp)
                elif dp < 0:
                    plo = max(plo, (gmax - x) / dp)
                    phi = min(phi, (gmin - x) / dp)
            if not np.any(dps != 0.0):
                out[i] = float(probs @ [f(x) for f in interps])
                continue

            def objective(pi):
                total = 0.0
                for p, f, dp in zip(probs, interps, dps):
                    # clamp float dust at the interval ends back onto the grid
                    total += p * float(f(min(max(x + pi * dp, gmin), gmax)))
                return -total

            pi_star, neg = golden_section_min(objective, plo, phi, tol=1e-11)
            out[i] = -neg
        values[nid] = out
    return values


def primal_value(
    tree: EventTree,
    field,
    xi,
    t: int = 0,
    T: int | None = None,
    grid_points: int = 257,
    grid_span: tuple[float, float] = (-10.0, 10.0),
) -> PrimalResult:
    """Primal value field on [t, T] at wealth xi (scalar or per-node).

    Exponential fields with replicable 1/gamma use the exact factor
    recursion; otherwise values are tabulated on a wealth grid and the
    result carries a grid-halving error estimate.
    """
    if T is None:
        T = tree.horizon
    if not (0 <= t <= T <= tree.horizon):
        raise ValueError(f"bad window [{t}, {T}] for horizon {tree.horizon}")
    starts = tree.nodes_at(t)
    xi_by_node = _per_node(xi, starts, "xi")
    kind = _field_kind(field)

    if kind == "exponential":
        needed = set(starts)
        for s in starts:
            needed.update(tree.window_interior(s, T))
            needed.update(tree.descendants_at(s, T))
        for nid in needed:
            if not field.defined_at(nid):
                raise KeyError(f"field has no data at node {nid!r}")
        rep = replicate_inverse_gamma(tree, field.gamma)
        if rep.feasible:
            C, policy = _exponential_factors(tree, field, t, T)
            values = {
                n: -math.exp(-field.gamma[n] * xi_by_node[n]) * C[n] for n in starts
            }
            return PrimalResult(
                t=t,
                T=T,
                values=values,
                xi=xi_by_node,
                method="exponential",
                log_factor={n: math.log(C[n]) for n in starts},
                policy=policy,
                replication=rep.psi,
            )
        slices = {
            w: field.slice_at(w)
            for s in starts
            for w in tree.descendants_at(s, T)
        }
    else:
        slices = dict(field)
        for s in starts:
            for w in tree.descendants_at(s, T):
                if w not in slices:
                    raise KeyError(f"no utility slice for terminal node {w!r}")

    gmin, gmax = grid_span
    for n, x in xi_by_node.items():
        if not (gmin <= x <= gmax):
            raise ValueError(
                f"xi={x:g} at node {n!r} outside the wealth grid [{gmin:g}, {gmax:g}]"
            )

    def run(npts):
        grid = np.linspace(gmin, gmax, npts)
        tab = _grid_dp(tree, slices, t, T, grid)
        vals = {}
        for n in starts:
            vals[n] = float(PchipInterpolator(grid, tab[n])(xi_by_node[n]))
        return vals

    values = run(grid_points)
    coarse = run(grid_points // 2 + 1)
    grid_error = max(abs(values[n] - coarse[n]) for n in starts)
    return PrimalResult(
        t=t,
        T=T,
        values=values,
        xi=xi_by_node,
        method="grid",
        grid_error=grid_error,
    )


# -- dual ----------------------------------------------------------------


def _dual_solve_node(tree, start, T, eta, leaf_phi, gap_tol=1e-10, max_newton=200):
    """Minimize sum_w phi_w(r_w) over the window's leaf-mass polytope."""
    leaves, p = _window_leaves(tree, start, T)
    A, b = _constraint_system(tree, start, T, leaves)
    r0 = _interior_start(tree, start, T, leaves)
    phi = leaf_phi(leaves, p)
    r, _, info = barrier_minimize(phi, A, b, r0, gap_tol=gap_tol, max_newton=max_newton)
    vals, _, _ = phi(r)
    value = float(np.sum(vals))
    return value, r, leaves, p, info


def _exp_phi_factory(field, eta):
    def make(leaves, p):
        gam = np.array([field.gamma[w] for w in leaves])
        ash = np.array([field.a_shift[w] for w in leaves])
        kappa = eta / (p * gam)
        lin = eta * ash / gam

        def phi(r):
            v = p * entropy_kernel(kappa * r) - lin * r
            g = (eta / gam) * (np.log(kappa * r)) - lin
            h = eta / (gam * r)
            return v, g, h

        return phi

    return make


def _slice_phi_factory(slices, eta, foc_tol=1e-12):
    def make(leaves, p):
        duals = [slices[w] for w in leaves]

        def phi(r):
            y = eta * r / p
            v = np.empty_like(r)
            g = np.empty_like(r)
            h = np.empty_like(r)
            for i, (u, yi) in enumerate(zip(duals, y)):
                val, x_star = conjugate_numeric(u, float(yi), tol=foc_tol)
                v[i] = p[i] * val
                g[i] = -eta * x_star
                step = 1e-6 * yi
                _, x_hi = conjugate_numeric(u, float(yi + step), tol=foc_tol)
                _, x_lo = conjugate_numeric(u, float(yi - step), tol=foc_tol)
                h[i] = -eta * eta / p[i] * (x_hi - x_lo) / (2.0 * step)
            return v, g, h

        return phi

    return make


def dual_value(
    tree: EventTree,
    field,
    eta,
    t: int = 0,
    T: int | None = None,
    gap_tol: float = 1e-10,
    max_newton: int = 200,
) -> DualResult:
    """Dual value field on [t, T] at dual argument eta (scalar or per-node).

    Minimizes the terminal dual expectation over all absolutely continuous
    martingale measures of the window; the reported minimizer includes a
    near-boundary flag rather than an interiority assumption.
    """
    if T is None:
        T = tree.horizon
    if not (0 <= t <= T <= tree.horizon):
        raise ValueError(f"bad window [{t}, {T}] for horizon {tree.horizon}")
    starts = tree.nodes_at(t)
    eta_by_node = _per_node(eta, starts, "eta")
    if any(e < 0.0 for e in eta_by_node.values()):
        raise ValueError("eta must be nonnegative")
    kind = _field_kind(field)

    result = DualResult(t=t, T=T, values={}, eta=eta_by_node)
    for start in starts:
        e = eta_by_node[start]
        if t == T:
            if kind == "exponential":
                result.values[start] = conjugate_exponential(
                    field.gamma[start], field.a_shift[start], e
                )
            else:
                raise ValueError("t == T dual evaluation needs an exponential field")
            continue
        if e == 0.0:
            if kind != "exponential":
                raise ValueError(
                    "eta = 0 for a generic field is outside the validated regime"
                )
            # V(T, 0) = 0 identically, so any measure attains the value
            result.values[start] = 0.0
            result.minimizer[start] = reference_measure(tree)
            result.kkt_residual[start] = 0.0
            result.near_boundary[start] = False
            continue
        if kind == "exponential":
            factory = _exp_phi_factory(field, e)
        else:
            factory = _slice_phi_factory(field, e)
        value, r, leaves, p, info = _dual_solve_node(
            tree, start, T, e, factory, gap_tol=gap_tol, max_newton=max_newton
        )
        result.values[start] = value
        masses = {w: float(ri) for w, ri in zip(leaves, r)}
        result.minimizer[start] = measure_from_leaf_masses(tree, start, T, masses)
        result.kkt_residual[start] = float(info["gap_bound"] + info["eq_residual"])
        result.near_boundary[start] = bool(np.min(r) < 1e-7)
    return result


# -- entropy -------------------------------------------------------------


def _check_terminal_gamma(tree, gamma, starts, T):
    for s in starts:
        for w in tree.descendants_at(s, T):
            if gamma[w] <= 0.0:
                raise ValueError(f"gamma must be positive at terminal node {w!r}")


def entropy(
    tree: EventTree,
    gamma: Mapping[str, float],
    a_shift: Mapping[str, float],
    q: TreeMeasure,
    t: int = 0,
    T: int | None = None,
) -> EntropyResult:
    """Conditional entropy of the measure q over [t, T], exactly.

    E[ entropy_kernel(zeta / gamma_T) - zeta * a_T / gamma_T | t-node ] with
    zeta the density quotient of q (ratio 1 on a vanished denominator).
    """
    if T is None:
        T = tree.horizon
    if not (0 <= t <= T <= tree.horizon):
        raise ValueError(f"bad window [{t}, {T}]")
    starts = tree.nodes_at(t)
    _check_terminal_gamma(tree, gamma, starts, T)
    z = density_process(tree, q)
    values = {}
    for start in starts:
        leaves, p = _window_leaves(tree, start, T)
        total = 0.0
        for w, pw in zip(leaves, p):
            zeta = density_quotient(tree, z, t, T, w)
            total += pw * (
                entropy_kernel(zeta / gamma[w]) - zeta * a_shift[w] / gamma[w]
            )
        values[start] = total
    return EntropyResult(t=t, T=T, values=values)


def min_entropy(
    tree: EventTree,
    gamma: Mapping[str, float],
    a_shift: Mapping[str, float],
    t: int = 0,
    T: int | None = None,
    gap_tol: float = 1e-10,
) -> EntropyResult:
    """Minimal conditional entropy over the measure polytope, with minimizer.

    This is the dual program at unit dual argument: the splitting identity
    entropy_kernel(a b) = a*entropy_kernel(b) + b*entropy_kernel(a) + a*b
    makes the terminal dual expectation at eta = 1 equal to the entropy.
    """
    if T is None:
        T = tree.horizon
    starts = tree.nodes_at(t)
    _check_terminal_gamma(tree, gamma, starts, T)
    field = ExponentialFieldParams(
        gamma={n: gamma[n] for n in gamma},
        a_shift={n: a_shift.get(n, 0.0) for n in gamma},
    )
    dual = dual_value(tree, field, 1.0, t, T, gap_tol=gap_tol)
    return EntropyResult(t=t, T=T, values=dict(dual.values), minimizer=dict(dual.minimizer))


def solve_entropy_shift(
    tree: EventTree,
    gamma: Mapping[str, float],
    terminal_a,
    tol_2b: float = 1e-9,
) -> dict[str, float]:
    """Backward construction of the additive shift from the entropy identity.

    Verifies first that every one-step polytope vertex preserves the
    conditional mean of 1/gamma (else the construction is refused, citing
    the failing node), then sets, level by level,

        a[node] = gamma * (entropy_kernel(1/gamma) - min entropy to horizon).

    The dynamic-programming principle of the entropy minimum makes the
    resulting shift consistent over every window, not just to the horizon.
    """
    leaves = tree.leaves()
    a_term = _per_node(terminal_a, leaves, "terminal_a")
    for nid in tree._dfs_order:
        if not (gamma[nid] > 0.0):
            raise ValueError(f"gamma must be positive, node {nid!r}")
    for nid in tree._dfs_order:
        if tree.is_leaf(nid):
            continue
        poly = node_polytope(tree, nid)
        if poly.empty:
            raise ArbitrageError(f"node {nid!r}: empty one-step polytope")
        inv_children = np.array([1.0 / gamma[c] for c in poly.children])
        for v in poly.vertices:
            got = float(v @ inv_children)
            if abs(got - 1.0 / gamma[nid]) > tol_2b:
                raise ValueError(
                    f"inverse-gamma conditional mean violated at node {nid!r}: "
                    f"vertex gives {got:.12g}, field has {1.0 / gamma[nid]:.12g}"
                )
    a_out: dict[str, float] = dict(a_term)
    for t in range(tree.horizon - 1, -1, -1):
        ent = min_entropy(tree, gamma, a_out, t, tree.horizon)
        for nid in tree.nodes_at(t):
            g = gamma[nid]
            a_out[nid] = g * (entropy_kernel(1.0 / g) - ent.values[nid])
    return a_out


# -- checks --------------------------------------------------------------


def check_self_generation_primal(
    tree: EventTree,
    field: ExponentialFieldParams,
    time_pairs,
    xi_grid,
    tol: float = 1e-6,
) -> VerificationReport:
    """Per (t, T) and per xi: does the computed value reproduce the slice.

    For the exponential fast path the gap is reported in shift units
    (|log C - a|), which is independent of the wealth argument; the worst
    raw value difference over the grid is recorded alongside.
    """
    report = VerificationReport()
    overall_gap = 0.0
    overall_node = None
    for (t, T) in time_pairs:
        res = primal_value(tree, field, 0.0, t, T)
        gaps = {}
        if res.method == "exponential":
            for n in tree.nodes_at(t):
                gaps[n] = abs(res.log_factor[n] - field.a_shift[n])
        value_gap = 0.0
        for x in xi_grid:
            resx = primal_value(tree, field, float(x), t, T)
            for n in tree.nodes_at(t):
                ux = resx.values[n]
                Ux = -math.exp(-field.gamma[n] * float(x) + field.a_shift[n])
                value_gap = max(value_gap, abs(ux - Ux))
                if res.method != "exponential":
                    gaps[n] = max(gaps.get(n, 0.0), abs(ux - Ux))
        worst_node = max(gaps, key=gaps.get)
        worst = gaps[worst_node]
        if worst > overall_gap:
            overall_gap, overall_node = worst, worst_node
        notes = ()
        if res.method == "grid":
            notes = (f"generic grid path, grid error estimate {res.grid_error:.3g}",)
        report.add(
            CheckRecord(
                check_tag=f"primal-self-generation[t={t},T={T}]",
                verdict=worst <= tol,
                value=worst,
                target=0.0,
                tolerance=tol,
                worst_node=worst_node,
                notes=notes,
                details={"value_gap": value_gap, "method": res.method},
            )
        )
    report.add(
        CheckRecord(
            check_tag="primal-self-generation",
            verdict=overall_gap <= tol,
            value=overall_gap,
            target=0.0,
            tolerance=tol,
            worst_node=overall_node,
        )
    )
    return report


def check_self_generation_dual(
    tree: EventTree,
    field: ExponentialFieldParams,
    time_pairs,
    eta_grid,
    tol: float = 1e-6,
) -> VerificationReport:
    """Per (t, T) and per eta: does the dual value reproduce the dual slice.

    Gaps are reported in shift units via the implied shift
    a_implied = (gamma/eta) (entropy_kernel(eta/gamma) - v), so a root
    perturbation of the field shows up at exactly its own size.
    """
    report = VerificationReport()
    overall_gap = 0.0
    overall_node = None
    for (t, T) in time_pairs:
        gaps = {}
        value_gap = 0.0
        for e in eta_grid:
            e = float(e)
            res = dual_value(tree, field, e, t, T)
            for n in tree.nodes_at(t):
                g = field.gamma[n]
                v = res.values[n]
                V = conjugate_exponential(g, field.a_shift[n], e)
                value_gap = max(value_gap, abs(v - V))
                if e > 0.0:
                    a_implied = (g / e) * (entropy_kernel(e / g) - v)
                    gaps[n] = max(gaps.get(n, 0.0), abs(a_implied - field.a_shift[n]))
        worst_node = max(gaps, key=gaps.get)
        worst = gaps[worst_node]
        if worst > overall_gap:
            overall_gap, overall_node = worst, worst_node
        report.add(
            CheckRecord(
                check_tag=f"dual-self-generation[t={t},T={T}]",
                verdict=worst <= tol,
                value=worst,
                target=0.0,
                tolerance=tol,
                worst_node=worst_node,
                details={"value_gap": value_gap},
            )
        )
    report.add(
        CheckRecord(
            check_tag="dual-self-generation",
            verdict=overall_gap <= tol,
            value=overall_gap,
            target=0.0,
            tolerance=tol,
            worst_node=overall_node,
        )
    )
    return report


def _refined_min(f, pts, tol, positive_domain=False, max_expand=120):
    """Min of f seeded by a grid: golden-section between the argmin's
    neighbors, first walking downhill past a boundary argmin (halving
    toward zero on a positive domain, doubling steps otherwise)."""
    vals = [f(p) for p in pts]
    i = int(np.argmin(vals))
    if 0 < i < len(pts) - 1:
        lo, hi = pts[i - 1], pts[i + 1]
    else:
        if i == len(pts) - 1:
            inner = pts[i - 1] if len(pts) > 1 else pts[i] - 1.0
            step = max(pts[i] - inner, 1.0)
            advance = lambda x, s: (x + s, s * 2.0)
        elif positive_domain:
            inner = pts[1] if len(pts) > 1 else 2.0 * pts[0]
            advance = lambda x, s: (x / 2.0, s)
            step = 0.0
        else:
            inner = pts[1] if len(pts) > 1 else pts[0] + 1.0
            step = max(inner - pts[0], 1.0)
            advance = lambda x, s: (x - s, s * 2.0)
        a, b, fb = inner, pts[i], vals[i]
        c, step = advance(b, step)
        fc = f(c)
        for _ in range(max_expand):
            if fc > fb:
                break
            a, b, fb = b, c, fc
            c, step = advance(c, step)
            fc = f(c)
        else:
            raise ConvergenceError("conjugacy refinement found no bracket")
        lo, hi = min(a, c), max(a, c)
    span_tol = tol * (1.0 + abs(lo) + abs(hi))
    x_best, f_best = golden_section_min(f, lo, hi, tol=span_tol)
    if vals[i] < f_best:
        return vals[i], pts[i]
    return f_best, x_best


def check_value_conjugacy(
    tree: EventTree,
    field: ExponentialFieldParams,
    t: int,
    T: int,
    xi_grid,
    eta_grid,
    tol: float = 1e-6,
) -> VerificationReport:
    """Fenchel conjugacy between the computed value fields.

    Per node: u(xi) against min over eta of (v(eta) + xi eta), and v(eta)
    against max over xi of (u(xi) - xi eta), each refined from its grid by
    golden-section around the best grid point (expanding past the grid
    when the optimizer falls outside it). Also records the attaining dual
    argument at the first grid wealth.
    """
    xi_grid = [float(x) for x in xi_grid]
    eta_grid = sorted(float(e) for e in eta_grid)
    if not xi_grid or not eta_grid:
        raise ValueError("conjugacy check needs nonempty grids")
    if any(e <= 0.0 for e in eta_grid):
        raise ValueError("eta grid entries must be positive")
    report = VerificationReport()
    starts = tree.nodes_at(t)

    base = primal_value(tree, field, 0.0, t, T)
    if base.method != "exponential":
        raise ValueError("conjugacy check requires the exponential fast path")

    def u_of(n, x):
        return -math.exp(-field.gamma[n] * x) * math.exp(base.log_factor[n])

    v_cache: dict[float, DualResult] = {}

    def v_of(n, e):
        if e not in v_cache:
            v_cache[e] = dual_value(tree, field, e, t, T)
        return v_cache[e].values[n]

    worst_primal = 0.0
    worst_dual = 0.0
    worst_node = None
    eta_hat: dict[str, float] = {}
    for n in starts:
        for i_x, x in enumerate(xi_grid):
            cand, e_best = _refined_min(
                lambda e: v_of(n, e) + x * e, eta_grid, tol, positive_domain=True
            )
            gap = abs(cand - u_of(n, x))
            if gap > worst_primal:
                worst_primal, worst_node = gap, n
            if i_x == 0:
                eta_hat[n] = e_best
        xs = sorted(xi_grid)
        for e in eta_grid:
            neg_best, _ = _refined_min(lambda x: -(u_of(n, x) - x * e), xs, tol)
            gap = abs(-neg_best - v_of(n, e))
            worst_dual = max(worst_dual, gap)
    report.add(
        CheckRecord(
            check_tag=f"conjugacy-primal-from-dual[t={t},T={T}]",
            verdict=worst_primal <= tol,
            value=worst_primal,
            target=0.0,
            tolerance=tol,
            worst_node=worst_node,
            details={"eta_hat": eta_hat},
        )
    )
    report.add(
        CheckRecord(
            check_tag=f"conjugacy-dual-from-primal[t={t},T={T}]",
            verdict=worst_dual <= tol,
            value=worst_dual,
            target=0.0,
            tolerance=tol,
        )
    )
    return report


def check_exponential_conditions(
    tree: EventTree,
    gamma: Mapping[str, float],
    a_shift: Mapping[str, float],
    time_pairs,
    tol: float = 1e-6,
) -> VerificationReport:
    """The three-way characterization for exponential fields.

    Positivity of gamma (adaptedness and integrability are automatic on a
    finite tree), preservation of the conditional mean of 1/gamma by every
    product vertex of the measure polytope, and the entropy identity
    entropy_kernel(1/gamma) - a/gamma = min entropy, per time pair.
    """
    report = VerificationReport()

    bad_gamma = [n for n in tree._dfs_order if not (gamma[n] > 0.0)]
    report.add(
        CheckRecord(
            check_tag="exp-condition-positivity",
            verdict=not bad_gamma,
            worst_node=bad_gamma[0] if bad_gamma else None,
            notes=(
                "adaptedness and integrability hold by construction on a finite tree",
            ),
        )
    )

    worst_b = 0.0
    worst_b_node = None
    worst_c = 0.0
    worst_c_node = None
    for (t, T) in time_pairs:
        gap_b = 0.0
        node_b = None
        for q in enumerate_product_measures(tree, t, T):
            for n in tree.nodes_at(t):
                mean = 0.0
                for w in tree.descendants_at(n, T):
                    mean += q.node_mass(tree, w, start=n) / gamma[w]
                gap = abs(mean - 1.0 / gamma[n])
                if gap > gap_b:
                    gap_b, node_b = gap, n
        report.add(
            CheckRecord(
                check_tag=f"exp-condition-inverse-gamma-martingale[t={t},T={T}]",
                verdict=gap_b <= tol,
                value=gap_b,
                target=0.0,
                tolerance=tol,
                worst_node=node_b,
            )
        )
        if gap_b > worst_b:
            worst_b, worst_b_node = gap_b, node_b

        ent = min_entropy(tree, gamma, a_shift, t, T)
        gap_c = 0.0
        node_c = None
        for n in tree.nodes_at(t):
            g = gamma[n]
            implied_a = g * (entropy_kernel(1.0 / g) - ent.values[n])
            gap = abs(implied_a - a_shift[n])
            if gap > gap_c:
                gap_c, node_c = gap, n
        report.add(
            CheckRecord(
                check_tag=f"exp-condition-entropy-identity[t={t},T={T}]",
                verdict=gap_c <= tol,
                value=gap_c,
                target=0.0,
                tolerance=tol,
                worst_node=node_c,
            )
        )
        if gap_c > worst_c:
            worst_c, worst_c_node = gap_c, node_c

    report.add(
        CheckRecord(
            check_tag="exp-condition-inverse-gamma-martingale",
            verdict=worst_b <= tol,
            value=worst_b,
            target=0.0,
            tolerance=tol,
            worst_node=worst_b_node,
        )
    )
    report.add(
        CheckRecord(
            check_tag="exp-condition-entropy-identity",
            verdict=worst_c <= tol,
            value=worst_c,
            target=0.0,
            tolerance=tol,
            worst_node=worst_c_node,
        )
    )
    return report


def forward_measure(
    tree: EventTree,
    q: TreeMeasure,
    gamma: Mapping[str, float],
    T: int | None = None,
    tol_2b: float = 1e-9,
    mass_tol: float = 1e-12,
) -> TreeMeasure:
    """Reweight q by gamma_0 / gamma_T and renormalize into conditionals.

    Requires the conditional mean of 1/gamma to be preserved by q (checked
    node by node); the reweighted total mass is then verified to be one.
    """
    if T is None:
        T = tree.horizon
    q.validate(tree)
    for nid in tree._dfs_order:
        if tree.is_leaf(nid) or tree.time_of(nid) >= T:
            continue
        if q.node_mass(tree, nid) <= 0.0 and nid != tree.root:
            continue
        mean = 0.0
        for w in tree.descendants_at(nid, T):
            mean += q.node_mass(tree, w, start=nid) / gamma[w]
        if abs(mean - 1.0 / gamma[nid]) > tol_2b:
            raise ValueError(
                f"forward measure undefined: inverse-gamma conditional mean fails "
                f"at node {nid!r} ({mean:.10g} vs {1.0 / gamma[nid]:.10g})"
            )
    g0 = gamma[tree.root]
    weights = {}
    total = 0.0
    for w in tree.descendants_at(tree.root, T):
        mass = q.node_mass(tree, w) * g0 / gamma[w]
        weights[w] = mass
        total += mass
    if abs(total - 1.0) > mass_tol:
        raise ValueError(f"forward measure mass {total:.15g} differs from 1")
    return measure_from_leaf_masses(tree, tree.root, T, weights)


def check_forward_supermartingale(
    tree: EventTree,
    gamma: Mapping[str, float],
    a_shift: Mapping[str, float],
    t: int = 0,
    T: int | None = None,
    tol: float = 1e-6,
) -> VerificationReport:
    """Forward-measure drift of the shifted log density.

    For every product vertex Q of the window polytope, with Q_g its
    reweighting by gamma_0/gamma_T, the process a - log Z^{Q_g} must not
    drift up between any window node and the terminal time (nodes Q_g
    avoids are skipped); the entropy-minimizing measure must achieve
    equality. Positivity and the inverse-gamma mean condition are verified
    first and raise when violated.
    """
    if T is None:
        T = tree.horizon
    if not (0 <= t < T <= tree.horizon):
        raise ValueError(f"need a nondegenerate window, got [{t}, {T}]")
    for n in tree._dfs_order:
        if not (gamma[n] > 0.0):
            raise ValueError(f"gamma must be positive, node {n!r}")

    starts = tree.nodes_at(t)

    def window_nodes(start):
        return tree.window_interior(start, T)

    # vertex-level inverse-gamma mean precondition
    for q in enumerate_product_measures(tree, t, T):
        for start in starts:
            for m in window_nodes(start):
                if q.node_mass(tree, m, start=start) <= 0.0 and m != start:
                    continue
                mean = sum(
                    q.node_mass(tree, w, start=m) / gamma[w]
                    for w in tree.descendants_at(m, T)
                )
                if abs(mean - 1.0 / gamma[m]) > 1e-9:
                    raise ValueError(
                        f"inverse-gamma conditional mean fails at node {m!r}; "
                        "forward measures are not probabilities"
                    )

    def drift_gaps(q: TreeMeasure, only_start: str | None = None):
        """Per window node: E^{Q_gamma}[F_T | m] - F_m, skipping avoided nodes."""
        gaps = {}
        for start in starts:
            if only_start is not None and start != only_start:
                continue
            # window-local forward reweighting of q
            fw_masses = {}
            for w in tree.descendants_at(start, T):
                fw_masses[w] = (
                    q.node_mass(tree, w, start=start) * gamma[start] / gamma[w]
                )
            qg = measure_from_leaf_masses(tree, start, T, fw_masses)
            zg = density_process(tree, qg)
            z_start = zg.at(start)
            for m in window_nodes(start):
                mass_m = qg.node_mass(tree, m, start=start)
                if m != start and mass_m <= 0.0:
                    continue
                zeta_m = zg.at(m) / z_start if z_start > 0.0 else 1.0
                f_m = a_shift[m] - (math.log(zeta_m) if zeta_m > 0.0 else 0.0)
                exp_ft = 0.0
                for w in tree.descendants_at(m, T):
                    mw = qg.node_mass(tree, w, start=m)
                    if mw <= 0.0:
                        continue
                    zeta_w = zg.at(w) / z_start if z_start > 0.0 else 1.0
                    exp_ft += mw * (a_shift[w] - math.log(zeta_w))
                gaps[m] = exp_ft - f_m
        return gaps

    worst_super = -math.inf
    worst_super_node = None
    for q in enumerate_product_measures(tree, t, T):
        for m, gap in drift_gaps(q).items():
            if gap > worst_super:
                worst_super, worst_super_node = gap, m
    report = VerificationReport()
    report.add(
        CheckRecord(
            check_tag=f"forward-supermartingale[t={t},T={T}]",
            verdict=worst_super <= tol,
            value=worst_super,
            target=0.0,
            tolerance=tol,
            worst_node=worst_super_node,
            notes=("positive drift of the shifted log density violates the bound",),
        )
    )

    ent = min_entropy(tree, gamma, a_shift, t, T)
    worst_eq = 0.0
    worst_eq_node = None
    for start in starts:
        # each minimizer only describes its own subtree
        q_hat = ent.minimizer[start]
        for m, gap in drift_gaps(q_hat, only_start=start).items():
            if abs(gap) > worst_eq:
                worst_eq, worst_eq_node = abs(gap), m
    report.add(
        CheckRecord(
            check_tag=f"forward-martingale-at-optimum[t={t},T={T}]",
            verdict=worst_eq <= tol,
            value=worst_eq,
            target=0.0,
            tolerance=tol,
            worst_node=worst_eq_node,
        )
    )
    return report
