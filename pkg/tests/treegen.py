"""Deterministic tree and field builders shared across the test modules.

The random generator is seeded numpy only; every tree it emits has both-sign
price increments at every node (so an equivalent one-step martingale measure
always exists) and a risk aversion whose reciprocal is replicable by a
per-node portfolio (so entropy shifts are solvable without further checks).
"""

import numpy as np

from forwardperf.fields import ExponentialFieldParams
from forwardperf.tree_market import EventTree
from forwardperf.tree_verifier import solve_entropy_shift


def binomial_tree(p_up=0.8, d=(1.0, -1.0)):
    return EventTree.from_dict(
        {
            "horizon": 1,
            "nodes": [
                {
                    "id": "r",
                    "time": 0,
                    "branches": [
                        {"child": "u", "prob": p_up, "dprice": d[0]},
                        {"child": "d", "prob": 1.0 - p_up, "dprice": d[1]},
                    ],
                },
                {"id": "u", "time": 1, "branches": []},
                {"id": "d", "time": 1, "branches": []},
            ],
        }
    )


def trinomial_tree(probs=(0.5, 0.3, 0.2), d=(1.0, 0.0, -1.0)):
    return EventTree.from_dict(
        {
            "horizon": 1,
            "nodes": [
                {
                    "id": "r",
                    "time": 0,
                    "branches": [
                        {"child": "u", "prob": probs[0], "dprice": d[0]},
                        {"child": "m", "prob": probs[1], "dprice": d[1]},
                        {"child": "d", "prob": probs[2], "dprice": d[2]},
                    ],
                },
                {"id": "u", "time": 1, "branches": []},
                {"id": "m", "time": 1, "branches": []},
                {"id": "d", "time": 1, "branches": []},
            ],
        }
    )


def uniform_trinomial_tree():
    third = 1.0 / 3.0
    return trinomial_tree(probs=(third, third, third))


def two_period_tree():
    """Asymmetric 2-period binomial with distinct conditionals per node."""
    return EventTree.from_dict(
        {
            "horizon": 2,
            "nodes": [
                {
                    "id": "r",
                    "time": 0,
                    "branches": [
                        {"child": "a", "prob": 0.6, "dprice": 1.0},
                        {"child": "b", "prob": 0.4, "dprice": -1.0},
                    ],
                },
                {
                    "id": "a",
                    "time": 1,
                    "branches": [
                        {"child": "a1", "prob": 0.5, "dprice": 1.0},
                        {"child": "a2", "prob": 0.5, "dprice": -1.0},
                    ],
                },
                {
                    "id": "b",
                    "time": 1,
                    "branches": [
                        {"child": "b1", "prob": 0.55, "dprice": 0.5},
                        {"child": "b2", "prob": 0.45, "dprice": -1.5},
                    ],
                },
                {"id": "a1", "time": 2, "branches": []},
                {"id": "a2", "time": 2, "branches": []},
                {"id": "b1", "time": 2, "branches": []},
                {"id": "b2", "time": 2, "branches": []},
            ],
        }
    )


def random_tree(seed, periods=2, max_branching=3):
    """Random tree, <= max_branching branches, both-sign increments per node."""
    rng = np.random.default_rng(seed)
    nodes = []
    counter = [0]

    def fresh():
        counter[0] += 1
        return f"n{counter[0]}"

    def grow(nid, t):
        if t == periods:
            nodes.append({"id": nid, "time": t, "branches": []})
            return
        k = int(rng.integers(2, max_branching + 1))
        # one strictly negative, one strictly positive, rest anywhere
        d = [-float(rng.uniform(0.2, 2.0)), float(rng.uniform(0.2, 2.0))]
        for _ in range(k - 2):
            d.append(float(rng.uniform(-2.0, 2.0)))
        rng.shuffle(d)
        p = rng.uniform(0.2, 1.0, size=k)
        p = p / p.sum()
        branches = []
        kids = []
        for j in range(k):
            cid = fresh()
            kids.append(cid)
            branches.append({"child": cid, "prob": float(p[j]), "dprice": d[j]})
        nodes.append({"id": nid, "time": t, "branches": branches})
        for cid in kids:
            grow(cid, t + 1)

    grow("r", 0)
    return EventTree.from_dict({"horizon": periods, "nodes": nodes})


def replicable_gamma(tree, seed, gamma0=None):
    """Per-node gamma with 1/gamma increments spanned by the price increments.

    psi at each node is capped at half of (1/gamma)/max|dS| so the
    reciprocal stays strictly positive down the whole tree.
    """
    rng = np.random.default_rng(seed)
    g0 = float(rng.uniform(0.5, 2.0)) if gamma0 is None else float(gamma0)
    inv = {tree.root: 1.0 / g0}
    psi = {}
    for nid in tree._dfs_order:
        if tree.is_leaf(nid):
            continue
        dmax = max(abs(br.dprice) for br in tree.branches_of(nid))
        cap = 0.5 * inv[nid] / dmax
        psi[nid] = float(rng.uniform(-cap, cap))
        for br in tree.branches_of(nid):
            inv[br.child] = inv[nid] + psi[nid] * br.dprice
    return {nid: 1.0 / inv[nid] for nid in inv}, psi


def solved_field(tree, seed, gamma0=None, terminal_scale=1.0):
    """Replicable gamma plus the entropy-consistent shift, as field params."""
    gamma, _ = replicable_gamma(tree, seed, gamma0=gamma0)
    rng = np.random.default_rng(seed + 10_000)
    terminal = {
        w: float(rng.uniform(-terminal_scale, terminal_scale)) for w in tree.leaves()
    }
    a_shift = solve_entropy_shift(tree, gamma, terminal)
    return ExponentialFieldParams(gamma=gamma, a_shift=a_shift)


def constant_field(tree, gamma=1.0, a=0.0):
    return ExponentialFieldParams(
        gamma={nid: gamma for nid in tree._dfs_order},
        a_shift={nid: a for nid in tree._dfs_order},
    )
