"""Seeded random instances and protocol trees for tests and experiments."""

from __future__ import annotations

import numpy as np

from .model import Instance
from .protocol import (BuyerNode, Leaf, Node, SellerNode, TransferNode)


def _labels(prefix: str, k: int) -> tuple[str, ...]:
    return tuple(f"{prefix}{i}" for i in range(k))


def _budget_levels(rng: np.random.Generator, nb: int) -> tuple[float, ...]:
    while True:
        levels = np.sort(rng.uniform(0.5, 8.0, size=nb))
        if nb == 1 or np.diff(levels).min() > 0.05:
            return tuple(float(x) for x in levels)


def random_independent_instance(rng: np.random.Generator,
                                max_states: int = 4, max_types: int = 4,
                                max_actions: int = 4, max_budgets: int = 3
                                ) -> Instance:
    """Instance whose state is independent of (type, budget)."""
    nw = int(rng.integers(2, max_states + 1))
    nt = int(rng.integers(2, max_types + 1))
    na = int(rng.integers(2, max_actions + 1))
    nb = int(rng.integers(1, max_budgets + 1))
    omega_marg = rng.dirichlet(np.ones(nw))
    tb = rng.dirichlet(np.ones(nt * nb))
    if nt * nb > 2 and rng.random() < 0.3:
        tb[rng.integers(0, nt * nb)] = 0.0
        tb /= tb.sum()
    prior = np.einsum("w,p->wp", omega_marg, tb).reshape(nw, nt, nb)
    return Instance(
        omega=_labels("w", nw), theta=_labels("t", nt), actions=_labels("a", na),
        budgets=_budget_levels(rng, nb),
        seller_budget=float(rng.choice([0.0, 1.0, 3.0])),
        prior=prior, utility=rng.uniform(0.0, 10.0, size=(nw, nt, na)))


def random_correlated_instance(rng: np.random.Generator,
                               max_states: int = 4, max_types: int = 4,
                               max_actions: int = 4, max_budgets: int = 3
                               ) -> Instance:
    """Instance with an arbitrary joint prior over (state, type, budget)."""
    nw = int(rng.integers(2, max_states + 1))
    nt = int(rng.integers(2, max_types + 1))
    na = int(rng.integers(2, max_actions + 1))
    nb = int(rng.integers(1, max_budgets + 1))
    flat = rng.dirichlet(np.ones(nw * nt * nb))
    if rng.random() < 0.3:
        flat[rng.integers(0, flat.size)] = 0.0
        flat /= flat.sum()
    return Instance(
        omega=_labels("w", nw), theta=_labels("t", nt), actions=_labels("a", na),
        budgets=_budget_levels(rng, nb),
        seller_budget=float(rng.choice([0.0, 1.0, 3.0])),
        prior=flat.reshape(nw, nt, nb),
        utility=rng.uniform(0.0, 10.0, size=(nw, nt, na)))


def random_tree(rng: np.random.Generator, instance: Instance,
                max_depth: int = 5) -> Node:
    """Random protocol tree that always respects the seller's stake: a
    refund never exceeds the stake plus what the path collected so far."""

    def build(depth: int, allowance: float) -> Node:
        kinds = ["leaf", "transfer", "buyer", "seller"]
        probs = [0.25, 0.25, 0.25, 0.25] if depth > 0 else [1.0, 0, 0, 0]
        kind = rng.choice(kinds, p=probs)
        if kind == "leaf":
            return Leaf()
        if kind == "transfer":
            amount = float(rng.uniform(-allowance, 5.0))
            return TransferNode(amount=amount,
                                child=build(depth - 1, allowance + amount))
        n_children = int(rng.integers(1, 4))
        children = [build(depth - 1, allowance) for _ in range(n_children)]
        if kind == "buyer":
            return BuyerNode(children=children)
        rows = {w: rng.dirichlet(np.ones(n_children))
                for w in instance.omega}
        return SellerNode(children=children, transitions=rows)

    return build(max_depth, float(instance.seller_budget))
