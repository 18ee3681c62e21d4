"""Finite event-tree markets.

An event tree is a finite filtered probability space: nodes are information
sets, edges carry the reference conditional probability and the price
increment of the single risky asset (numeraire already applied). Time is
the node depth; all leaves sit at the horizon.

One-step martingale measures at a node form the polytope

    {q >= 0, sum_c q_c = 1, sum_c q_c * dS_c = 0},

described exactly by its vertices: basic feasible solutions have support of
size <= 2, so closed-form enumeration over singletons and pairs replaces an
LP and is exact. Absolutely continuous martingale measures over a window
are compositions of one-step choices; measures may put mass zero on whole
subtrees, which the quotient convention (ratio = 1 on a vanished
denominator) handles downstream.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import ArbitrageError, ScenarioError, TreeStructureError
from .report import CheckRecord, VerificationReport

_VERTEX_TOL = 1e-12


@dataclass(frozen=True)
class Branch:
    child: str
    prob: float
    dprice: float


@dataclass(frozen=True)
class TreeNode:
    id: str
    time: int
    branches: tuple[Branch, ...]


class EventTree:
    """Immutable rooted tree with per-edge probabilities and price increments.

    Structural problems (duplicate ids, broken linkage, wrong times, leaves
    off the horizon) raise TreeStructureError at construction; numeric
    policy (probabilities positive and summing to one, finite increments)
    is checked by validate_tree, which reports rather than raises.
    """

    def __init__(self, horizon: int, nodes: Iterable[TreeNode]):
        self.horizon = int(horizon)
        self.nodes: dict[str, TreeNode] = {}
        for node in nodes:
            if node.id in self.nodes:
                raise TreeStructureError(f"duplicate node id {node.id!r}")
            self.nodes[node.id] = node
        if not self.nodes:
            raise TreeStructureError("empty tree")
        if self.horizon < 0:
            raise TreeStructureError("horizon must be nonnegative")

        self.parent: dict[str, str] = {}
        for node in self.nodes.values():
            for br in node.branches:
                if br.child not in self.nodes:
                    raise TreeStructureError(
                        f"node {node.id!r} references unknown child {br.child!r}"
                    )
                if br.child in self.parent:
                    raise TreeStructureError(f"node {br.child!r} has two parents")
                self.parent[br.child] = node.id

        roots = [n for n in self.nodes if n not in self.parent]
        if len(roots) != 1:
            raise TreeStructureError(f"expected a unique root, found {roots!r}")
        self.root = roots[0]

        # reachability doubles as the cycle check: parent linkage is
        # single-valued, so unreachable nodes mean detached cycles
        order = []
        stack = [self.root]
        while stack:
            nid = stack.pop()
            order.append(nid)
            for br in reversed(self.nodes[nid].branches):
                stack.append(br.child)
        if len(order) != len(self.nodes):
            missing = set(self.nodes) - set(order)
            raise TreeStructureError(f"nodes not reachable from root: {sorted(missing)!r}")
        self._dfs_order = tuple(order)

        for nid in self.nodes:
            t_expect = 0 if nid == self.root else self.nodes[self.parent[nid]].time + 1
            if self.nodes[nid].time != t_expect:
                raise TreeStructureError(
                    f"node {nid!r} has time {self.nodes[nid].time}, expected {t_expect}"
                )
        for nid, node in self.nodes.items():
            if not node.branches and node.time != self.horizon:
                raise TreeStructureError(f"leaf {nid!r} at time {node.time} != horizon")
            if node.branches and node.time >= self.horizon:
                raise TreeStructureError(f"node {nid!r} at the horizon has children")

        self._path_cache: dict[str, tuple[str, ...]] = {}

    # -- basic queries ---------------------------------------------------

    def is_leaf(self, nid: str) -> bool:
        return not self.nodes[nid].branches

    def time_of(self, nid: str) -> int:
        return self.nodes[nid].time

    def branches_of(self, nid: str) -> tuple[Branch, ...]:
        return self.nodes[nid].branches

    def children(self, nid: str) -> tuple[str, ...]:
        return tuple(br.child for br in self.nodes[nid].branches)

    def nodes_at(self, t: int) -> tuple[str, ...]:
        return tuple(n for n in self._dfs_order if self.nodes[n].time == t)

    def leaves(self) -> tuple[str, ...]:
        return self.nodes_at(self.horizon)

    def path_from_root(self, nid: str) -> tuple[str, ...]:
        cached = self._path_cache.get(nid)
        if cached is not None:
            return cached
        path = [nid]
        cur = nid
        while cur != self.root:
            cur = self.parent[cur]
            path.append(cur)
        out = tuple(reversed(path))
        self._path_cache[nid] = out
        return out

    def descendants_at(self, nid: str, t: int) -> tuple[str, ...]:
        """Descendants of nid at time t, in canonical DFS order."""
        if self.nodes[nid].time > t:
            raise ValueError(f"node {nid!r} is later than time {t}")
        out = []
        stack = [nid]
        while stack:
            cur = stack.pop()
            if self.nodes[cur].time == t:
                out.append(cur)
                continue
            for br in reversed(self.nodes[cur].branches):
                stack.append(br.child)
        return tuple(out)

    def window_interior(self, nid: str, T: int) -> tuple[str, ...]:
        """Nodes strictly inside [time(nid), T) below nid, DFS order, nid first."""
        out = []
        stack = [nid]
        while stack:
            cur = stack.pop()
            if self.nodes[cur].time >= T:
                continue
            out.append(cur)
            for br in reversed(self.nodes[cur].branches):
                stack.append(br.child)
        return tuple(out)

    def branch_to(self, child: str) -> Branch:
        par = self.parent[child]
        for br in self.nodes[par].branches:
            if br.child == child:
                return br
        raise TreeStructureError(f"linkage broken at {child!r}")

    def cond_prob(self, ancestor: str, nid: str) -> float:
        """Reference-measure probability of reaching nid from its ancestor."""
        path = self.path_from_root(nid)
        if ancestor not in path:
            raise ValueError(f"{ancestor!r} is not an ancestor of {nid!r}")
        p = 1.0
        start = path.index(ancestor)
        for child in path[start + 1 :]:
            p *= self.branch_to(child).prob
        return p

    def price(self, nid: str) -> float:
        """Cumulative price increment from the root (root price normalized to 0)."""
        return sum(self.branch_to(c).dprice for c in self.path_from_root(nid)[1:])

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "nodes": [
                {
                    "id": node.id,
                    "time": node.time,
                    "branches": [
                        {"child": br.child, "prob": br.prob, "dprice": br.dprice}
                        for br in node.branches
                    ],
                }
                for node in (self.nodes[n] for n in self._dfs_order)
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping, validate: bool = True) -> "EventTree":
        if not isinstance(data, Mapping):
            raise ScenarioError("tree document must be an object")
        unknown = set(data) - {"horizon", "nodes"}
        if unknown:
            raise ScenarioError(f"unknown tree keys: {sorted(unknown)}")
        if "horizon" not in data or "nodes" not in data:
            raise ScenarioError("tree document needs 'horizon' and 'nodes'")
        nodes = []
        for i, rec in enumerate(data["nodes"]):
            bad = set(rec) - {"id", "time", "branches"}
            if bad:
                raise ScenarioError(f"nodes[{i}]: unknown keys {sorted(bad)}")
            try:
                nid = rec["id"]
                t = rec["time"]
            except KeyError as exc:
                raise ScenarioError(f"nodes[{i}]: missing {exc}")
            if not isinstance(nid, str):
                raise ScenarioError(f"nodes[{i}]: id must be a string")
            branches = []
            for j, brec in enumerate(rec.get("branches", [])):
                bad = set(brec) - {"child", "prob", "dprice"}
                if bad:
                    raise ScenarioError(f"nodes[{i}].branches[{j}]: unknown keys {sorted(bad)}")
                try:
                    branches.append(
                        Branch(
                            child=brec["child"],
                            prob=float(brec["prob"]),
                            dprice=float(brec["dprice"]),
                        )
                    )
                except (KeyError, TypeError, ValueError) as exc:
                    raise ScenarioError(f"nodes[{i}].branches[{j}]: {exc}")
            nodes.append(TreeNode(id=nid, time=int(t), branches=tuple(branches)))
        tree = cls(horizon=int(data["horizon"]), nodes=nodes)
        if validate:
            report = validate_tree(tree)
            if not report.all_passed:
                msgs = "; ".join(
                    f"{r.check_tag}: {r.notes[0] if r.notes else 'failed'}"
                    for r in report.failures()
                )
                raise TreeStructureError(f"tree fails validation: {msgs}")
        return tree

    @classmethod
    def from_json(cls, path, validate: bool = True) -> "EventTree":
        def _reject_const(token):
            raise ScenarioError(f"non-finite number {token!r} in tree file")

        with open(path) as fh:
            try:
                data = json.load(fh, parse_constant=_reject_const)
            except json.JSONDecodeError as exc:
                raise ScenarioError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}")
        return cls.from_dict(data, validate=validate)


def validate_tree(tree: EventTree, tol: float = 1e-9) -> VerificationReport:
    """Numeric invariants: branch probabilities strictly positive summing to
    one, finite increments. Structure is already enforced at construction.
    """
    report = VerificationReport()
    bad_sums: dict[str, float] = {}
    bad_probs: list[str] = []
    bad_prices: list[str] = []
    for nid in tree._dfs_order:
        node = tree.nodes[nid]
        if not node.branches:
            continue
        total = sum(br.prob for br in node.branches)
        if abs(total - 1.0) > tol:
            bad_sums[nid] = total
        for br in node.branches:
            if not (br.prob > 0.0) or not math.isfinite(br.prob):
                bad_probs.append(nid)
                break
        for br in node.branches:
            if not math.isfinite(br.dprice):
                bad_prices.append(nid)
                break
    report.add(
        CheckRecord(
            check_tag="tree-branch-prob-sums",
            verdict=not bad_sums,
            value=max((abs(v - 1.0) for v in bad_sums.values()), default=0.0),
            target=0.0,
            tolerance=tol,
            worst_node=next(iter(bad_sums), None),
            notes=tuple(f"node {n}: probabilities sum to {v:.6g}" for n, v in bad_sums.items()),
        )
    )
    report.add(
        CheckRecord(
            check_tag="tree-branch-prob-positive",
            verdict=not bad_probs,
            worst_node=bad_probs[0] if bad_probs else None,
            notes=tuple(f"node {n}: nonpositive or nonfinite branch probability" for n in bad_probs),
        )
    )
    report.add(
        CheckRecord(
            check_tag="tree-price-increments-finite",
            verdict=not bad_prices,
            worst_node=bad_prices[0] if bad_prices else None,
            notes=tuple(f"node {n}: nonfinite price increment" for n in bad_prices),
        )
    )
    return report


# -- one-step polytopes -------------------------------------------------


def one_step_vertices(dprices) -> np.ndarray:
    """Vertices of {q >= 0, sum q = 1, sum q*d = 0} as an (n_vertices, m) array.

    Basic feasible solutions have support <= 2 (two equality constraints):
    singletons need d = 0, pairs need increments of opposite sign. Exact
    closed forms, deterministic order (singletons by index, then pairs
    lexicographically), duplicates dropped.
    """
    d = np.asarray(dprices, dtype=float)
    m = d.size
    verts: list[np.ndarray] = []

    def _push(v):
        for seen in verts:
            if np.max(np.abs(seen - v)) <= _VERTEX_TOL:
                return
        verts.append(v)

    for j in range(m):
        if d[j] == 0.0:
            v = np.zeros(m)
            v[j] = 1.0
            _push(v)
    for i in range(m):
        for j in range(i + 1, m):
            den = d[j] - d[i]
            if den == 0.0:
                continue
            qi = d[j] / den
            qj = -d[i] / den
            if qi < 0.0 or qj < 0.0:
                continue
            v = np.zeros(m)
            v[i] = qi
            v[j] = qj
            _push(v)
    if not verts:
        return np.empty((0, m))
    return np.vstack(verts)


@dataclass(frozen=True)
class NodePolytope:
    """One node's one-step martingale measures: constraints and vertices."""

    node: str
    children: tuple[str, ...]
    dprices: tuple[float, ...]
    vertices: np.ndarray  # (n_vertices, n_children)

    @property
    def empty(self) -> bool:
        return self.vertices.shape[0] == 0

    def centroid(self) -> np.ndarray:
        if self.empty:
            raise ArbitrageError(f"node {self.node!r}: empty one-step polytope")
        return self.vertices.mean(axis=0)

    def has_equivalent_point(self) -> bool:
        """True iff some strictly positive measure exists (then the centroid is one)."""
        if self.empty:
            return False
        return bool(np.all(self.vertices.max(axis=0) > _VERTEX_TOL))


def node_polytope(tree: EventTree, nid: str) -> NodePolytope:
    branches = tree.branches_of(nid)
    d = tuple(br.dprice for br in branches)
    return NodePolytope(
        node=nid,
        children=tuple(br.child for br in branches),
        dprices=d,
        vertices=one_step_vertices(d),
    )


@dataclass(frozen=True)
class MeasurePolytope:
    """Per-node one-step descriptions for a time window [t, T]."""

    t: int
    T: int
    node_polytopes: Mapping[str, NodePolytope]

    def vertices_at(self, nid: str) -> np.ndarray:
        return self.node_polytopes[nid].vertices


def measure_polytope(tree: EventTree, t: int, T: int | None = None) -> MeasurePolytope:
    """One-step polytopes for every nonterminal node in the window [t, T]."""
    if T is None:
        T = tree.horizon
    if not (0 <= t <= T <= tree.horizon):
        raise ValueError(f"bad window [{t}, {T}] for horizon {tree.horizon}")
    polys = {}
    for start in tree.nodes_at(t):
        for nid in tree.window_interior(start, T):
            polys[nid] = node_polytope(tree, nid)
    return MeasurePolytope(t=t, T=T, node_polytopes=polys)


def check_nflvr(tree: EventTree) -> tuple[bool, VerificationReport]:
    """Existence of an equivalent one-step martingale measure at every node.

    Equivalent to no free lunch with vanishing risk on finite trees. A node
    passes iff its vertex set is nonempty and every child carries positive
    mass at some vertex; the vertex centroid is then strictly positive.
    """
    failing: dict[str, str] = {}
    for nid in tree._dfs_order:
        if tree.is_leaf(nid):
            continue
        poly = node_polytope(tree, nid)
        if poly.empty:
            failing[nid] = "no one-step martingale measure (arbitrage)"
        elif not poly.has_equivalent_point():
            starved = [
                poly.children[j]
                for j in range(len(poly.children))
                if poly.vertices[:, j].max() <= _VERTEX_TOL
            ]
            failing[nid] = f"no equivalent measure: children {starved} get zero mass"
    ok = not failing
    report = VerificationReport(
        [
            CheckRecord(
                check_tag="nflvr",
                verdict=ok,
                worst_node=next(iter(failing), None),
                notes=tuple(f"node {n}: {reason}" for n, reason in failing.items()),
                details={"failing_nodes": dict(failing)},
            )
        ]
    )
    return ok, report


# -- measures and densities ---------------------------------------------


@dataclass(frozen=True)
class TreeMeasure:
    """One-step conditional probabilities per node, aligned with branch order."""

    cond: Mapping[str, tuple[float, ...]]

    def at(self, nid: str) -> tuple[float, ...]:
        return self.cond[nid]

    def edge_prob(self, tree: EventTree, child: str) -> float:
        par = tree.parent[child]
        idx = tree.children(par).index(child)
        return self.cond[par][idx]

    def node_mass(self, tree: EventTree, nid: str, start: str | None = None) -> float:
        """Measure of the node given its ancestor ``start`` (root default)."""
        path = tree.path_from_root(nid)
        if start is None:
            start = tree.root
        mass = 1.0
        for child in path[path.index(start) + 1 :]:
            mass *= self.edge_prob(tree, child)
        return mass

    def validate(self, tree: EventTree, nodes: Iterable[str] | None = None, tol: float = 1e-9):
        """Raise ValueError unless normalized nonnegative on the given nodes."""
        check = nodes if nodes is not None else [n for n in tree._dfs_order if not tree.is_leaf(n)]
        for nid in check:
            if nid not in self.cond:
                raise ValueError(f"measure missing conditionals at node {nid!r}")
            qs = self.cond[nid]
            if len(qs) != len(tree.branches_of(nid)):
                raise ValueError(f"measure at node {nid!r} has wrong arity")
            if any(q < -tol for q in qs):
                raise ValueError(f"measure at node {nid!r} has negative entries")
            if abs(sum(qs) - 1.0) > tol:
                raise ValueError(f"measure at node {nid!r} sums to {sum(qs):.6g}")

    def martingale_residual(self, tree: EventTree, nodes: Iterable[str]) -> float:
        """Worst |sum q*dS| over the given nodes with positive mass on the path."""
        worst = 0.0
        for nid in nodes:
            if self.node_mass(tree, nid) <= 0.0 and nid != tree.root:
                continue
            branches = tree.branches_of(nid)
            resid = abs(sum(q * br.dprice for q, br in zip(self.cond[nid], branches)))
            worst = max(worst, resid)
        return worst


def reference_measure(tree: EventTree) -> TreeMeasure:
    """P itself as a TreeMeasure."""
    return TreeMeasure(
        cond={
            nid: tuple(br.prob for br in tree.branches_of(nid))
            for nid in tree._dfs_order
            if not tree.is_leaf(nid)
        }
    )


@dataclass(frozen=True)
class DensityPath:
    """The density process of a measure against P: z per node, z(root) = 1."""

    z: Mapping[str, float]

    def at(self, nid: str) -> float:
        return self.z[nid]


def density_process(tree: EventTree, q: TreeMeasure) -> DensityPath:
    """z(node) = product over the path of q_edge / p_edge. Absorbing at zero."""
    q.validate(tree)
    z: dict[str, float] = {tree.root: 1.0}
    for nid in tree._dfs_order:
        if tree.is_leaf(nid):
            continue
        zn = z[nid]
        for idx, br in enumerate(tree.branches_of(nid)):
            z[br.child] = zn * (q.cond[nid][idx] / br.prob)
    return DensityPath(z=z)


def density_quotient(tree: EventTree, z: DensityPath, s: int, t: int, nid: str) -> float:
    """z(node at t) / z(ancestor at s), with the convention 1 on a zero denominator."""
    if not 0 <= s <= t:
        raise ValueError(f"need 0 <= s <= t, got s={s}, t={t}")
    if tree.time_of(nid) != t:
        raise ValueError(f"node {nid!r} is at time {tree.time_of(nid)}, not {t}")
    ancestor = tree.path_from_root(nid)[s]
    zs = z.at(ancestor)
    if zs == 0.0:
        return 1.0
    return z.at(nid) / zs


# -- feasibility, support, and extreme measures --------------------------


def _restricted_vertices(tree: EventTree, nid: str, allowed: set[str]) -> np.ndarray:
    """Vertices of the node polytope with mass confined to ``allowed`` children."""
    branches = tree.branches_of(nid)
    idx = [i for i, br in enumerate(branches) if br.child in allowed]
    if not idx:
        return np.empty((0, len(branches)))
    sub = one_step_vertices([branches[i].dprice for i in idx])
    out = np.zeros((sub.shape[0], len(branches)))
    for col, i in enumerate(idx):
        out[:, i] = sub[:, col]
    return out


def _feasible_map(tree: EventTree, T: int) -> dict[str, bool]:
    """Per node: can any measure on [time(node), T] give this node full mass.

    A node is feasible iff it is terminal in the window or its one-step
    polytope restricted to feasible children is nonempty.
    """
    feasible: dict[str, bool] = {}
    # process deepest first
    for nid in sorted(tree._dfs_order, key=lambda n: -tree.time_of(n)):
        if tree.time_of(nid) > T:
            continue
        if tree.time_of(nid) == T or tree.is_leaf(nid):
            feasible[nid] = True
            continue
        allowed = {c for c in tree.children(nid) if feasible.get(c, False)}
        feasible[nid] = _restricted_vertices(tree, nid, allowed).shape[0] > 0
    return feasible


def maximal_support(tree: EventTree, t: int = 0, T: int | None = None) -> set[str]:
    """Union of supports over all absolutely continuous martingale measures.

    Returns the set of time-T nodes that some measure on [t, T] charges. A
    node is supported iff every edge on its path from its time-t ancestor
    admits a restricted one-step vertex with positive mass on that edge
    (a product of such vertices then charges the whole path).

    Raises ArbitrageError when some time-t subtree admits no measure at all.
    """
    if T is None:
        T = tree.horizon
    if not (0 <= t <= T <= tree.horizon):
        raise ValueError(f"bad window [{t}, {T}]")
    feasible = _feasible_map(tree, T)
    usable_edge: dict[str, bool] = {}
    for start in tree.nodes_at(t):
        if not feasible[start]:
            raise ArbitrageError(
                f"no martingale measure on the subtree of {start!r} up to time {T}"
            )
        for nid in tree.window_interior(start, T):
            allowed = {c for c in tree.children(nid) if feasible.get(c, False)}
            verts = _restricted_vertices(tree, nid, allowed)
            for j, child in enumerate(tree.children(nid)):
                usable_edge[child] = bool(
                    verts.shape[0] > 0 and verts[:, j].max(initial=0.0) > _VERTEX_TOL
                )
    out = set()
    for start in tree.nodes_at(t):
        for target in tree.descendants_at(start, T):
            path = tree.path_from_root(target)
            segment = path[path.index(start) + 1 :]
            if all(usable_edge.get(child, False) for child in segment):
                out.add(target)
    return out


def enumerate_product_measures(
    tree: EventTree, t: int = 0, T: int | None = None, max_count: int = 200000
) -> list[TreeMeasure]:
    """All products of one-step vertices on [t, T]: the extreme candidates.

    Nodes that a choice leaves with zero mass get reference conditionals
    (any choice there leaves the induced measure unchanged). Restricted to
    feasible children so every returned measure genuinely composes to a
    martingale measure.
    """
    if T is None:
        T = tree.horizon
    if not (0 <= t <= T <= tree.horizon):
        raise ValueError(f"bad window [{t}, {T}]")
    feasible = _feasible_map(tree, T)
    pref = reference_measure(tree)

    def expand(nid: str) -> list[dict[str, tuple[float, ...]]]:
        if tree.time_of(nid) >= T or tree.is_leaf(nid):
            return [{}]
        allowed = {c for c in tree.children(nid) if feasible.get(c, False)}
        verts = _restricted_vertices(tree, nid, allowed)
        if verts.shape[0] == 0:
            raise ArbitrageError(f"no martingale measure below node {nid!r}")
        out: list[dict[str, tuple[float, ...]]] = []
        children = tree.children(nid)
        for v in verts:
            partials: list[dict[str, tuple[float, ...]]] = [{nid: tuple(float(x) for x in v)}]
            for j, child in enumerate(children):
                if v[j] <= _VERTEX_TOL:
                    continue
                child_choices = expand(child)
                partials = [
                    {**p, **c} for p in partials for c in child_choices
                ]
                if len(partials) > max_count:
                    raise ValueError("enumerate_product_measures: too many vertices")
            out.extend(partials)
            if len(out) > max_count:
                raise ValueError("enumerate_product_measures: too many vertices")
        return out

    measures: list[TreeMeasure] = []
    start_nodes = tree.nodes_at(t)
    assignments: list[dict[str, tuple[float, ...]]] = [{}]
    for start in start_nodes:
        choices = expand(start)
        assignments = [{**a, **c} for a in assignments for c in choices]
        if len(assignments) > max_count:
            raise ValueError("enumerate_product_measures: too many vertices")
    for assign in assignments:
        cond = dict(assign)
        for nid in tree._dfs_order:
            if tree.is_leaf(nid) or nid in cond:
                continue
            cond[nid] = pref.cond[nid]
        measures.append(TreeMeasure(cond=cond))
    return measures


def measure_from_leaf_masses(
    tree: EventTree, start: str, T: int, masses: Mapping[str, float], mass_tol: float = 1e-15
) -> TreeMeasure:
    """Rebuild one-step conditionals on [time(start), T] from terminal masses.

    ``masses`` maps each time-T descendant of ``start`` to its conditional
    measure given ``start``. Nodes with (numerically) zero mass get
    reference conditionals; everything outside the window also falls back
    to the reference measure so the result is a complete TreeMeasure.
    """
    pref = reference_measure(tree)
    node_mass: dict[str, float] = {}
    for target in tree.descendants_at(start, T):
        m = float(masses[target])
        path = tree.path_from_root(target)
        for nid in path[path.index(start) :]:
            node_mass[nid] = node_mass.get(nid, 0.0) + m
    cond = dict(pref.cond)
    for nid in tree.window_interior(start, T):
        total = node_mass.get(nid, 0.0)
        if total <= mass_tol:
            continue
        qs = []
        for child in tree.children(nid):
            qs.append(node_mass.get(child, 0.0) / total)
        cond[nid] = tuple(qs)
    return TreeMeasure(cond=cond)
