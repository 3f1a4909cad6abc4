"""Finite bounded trees: the clocks of the games and the stage indexing.

Trees are given by parent arrays.  Node ids double as stage ordinals in the
staged constructions, so products and enumeration keep the convention that a
node's id is larger than its parent's (the tree order refines the integer
order).  ``build_tree`` itself accepts any acyclic parent array.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence


class TreeError(ValueError):
    pass


@dataclass(frozen=True)
class Tree:
    """A finite forest: parent[i] is None for roots.

    ``pairs`` is set on product trees and records which factor nodes each
    node came from.
    """

    parent: tuple
    height: tuple
    pairs: Optional[tuple] = None

    @property
    def node_count(self) -> int:
        return len(self.parent)

    def children(self, node: Optional[int]) -> tuple:
        return tuple(i for i, p in enumerate(self.parent) if p == node)

    def roots(self) -> tuple:
        return self.children(None)

    def ancestors(self, node: int) -> tuple:
        """Strict ancestors, root first."""
        chain = []
        p = self.parent[node]
        while p is not None:
            chain.append(p)
            p = self.parent[p]
        return tuple(reversed(chain))

    def below_or_equal(self, node: int) -> frozenset:
        return frozenset(self.ancestors(node)) | {node}

    def le(self, a: int, b: int) -> bool:
        """Tree order: a <=_T b."""
        while b is not None:
            if a == b:
                return True
            b = self.parent[b]
        return False

    def lt(self, a: int, b: int) -> bool:
        return a != b and self.le(a, b)

    def comparable(self, a: int, b: int) -> bool:
        return self.le(a, b) or self.le(b, a)

    def descendants(self, node: Optional[int]) -> tuple:
        """Strict descendants of node, in increasing id order (all nodes if None)."""
        if node is None:
            return tuple(range(self.node_count))
        return tuple(i for i in range(self.node_count) if self.lt(node, i))

    def leaves(self) -> tuple:
        have_child = set(p for p in self.parent if p is not None)
        return tuple(i for i in range(self.node_count) if i not in have_child)

    def max_height(self) -> int:
        return max(self.height) if self.height else -1

    def nodes_at_height(self, h: int) -> tuple:
        return tuple(i for i, hh in enumerate(self.height) if hh == h)

    def is_ordinal_ordered(self) -> bool:
        """Whether the tree order refines the id order (parent < child)."""
        return all(p is None or p < i for i, p in enumerate(self.parent))

    def branches(self):
        """All maximal branches (root-to-leaf chains) as tuples."""
        out = []
        for leaf in self.leaves():
            out.append(self.ancestors(leaf) + (leaf,))
        return tuple(out)

    def to_json(self) -> str:
        return json.dumps({"parents": [p for p in self.parent]})


def build_tree(parents: Sequence[Optional[int]]) -> Tree:
    """Validate a parent array and compute heights.

    Raises on dangling parent references and on cycles.
    """
    n = len(parents)
    parent = tuple(None if p is None else int(p) for p in parents)
    for i, p in enumerate(parent):
        if p is not None and not (0 <= p < n):
            raise TreeError(f"node {i} has dangling parent {p}")
        if p == i:
            raise TreeError(f"node {i} is its own parent")
    height = [None] * n

    def resolve(i, trail):
        if height[i] is not None:
            return height[i]
        if i in trail:
            raise TreeError(f"cycle detected through node {i}")
        trail.add(i)
        p = parent[i]
        h = 0 if p is None else resolve(p, trail) + 1
        height[i] = h
        return h

    for i in range(n):
        resolve(i, set())
    return Tree(parent, tuple(height))


def tree_from_json(text: str) -> Tree:
    data = json.loads(text)
    if not isinstance(data, dict) or "parents" not in data:
        raise TreeError("tree JSON must be an object with a 'parents' array")
    return build_tree(data["parents"])


def chain(n: int) -> Tree:
    """A single branch of n nodes."""
    return build_tree([None] + list(range(n - 1))) if n else build_tree([])


def full_forest(roots: int, branching: int, depth: int) -> Tree:
    """Forest of `roots` full `branching`-ary trees with the given depth.

    depth counts levels: depth 1 gives just the roots.  Nodes are numbered
    height-major, so ids are compatible with the tree order.
    """
    parents = [None] * roots
    level = list(range(roots))
    for _ in range(depth - 1):
        nxt = []
        for node in level:
            for _ in range(branching):
                parents.append(node)
                nxt.append(len(parents) - 1)
        level = nxt
    return build_tree(parents)


def tree_product(t1: Tree, t2: Tree) -> Tree:
    """Product tree: nodes are same-height pairs, ordered coordinate-wise.

    The parent of (a, b) is (parent(a), parent(b)).  Nodes are enumerated by
    height and then lexicographically, so ids refine the tree order whenever
    the factors do.
    """
    pairs = []
    max_h = min(t1.max_height(), t2.max_height())
    for h in range(max_h + 1):
        for a in t1.nodes_at_height(h):
            for b in t2.nodes_at_height(h):
                pairs.append((a, b))
    index = {pair: i for i, pair in enumerate(pairs)}
    parents = []
    for a, b in pairs:
        pa, pb = t1.parent[a], t2.parent[b]
        parents.append(None if pa is None else index[(pa, pb)])
    tree = build_tree(parents)
    return Tree(tree.parent, tree.height, tuple(pairs))


def is_antichain(t: Tree, nodes: Iterable[int]) -> bool:
    ns = list(nodes)
    for i, a in enumerate(ns):
        for b in ns[i + 1:]:
            if t.comparable(a, b):
                return False
    return True


def minimal_antichain(t: Tree, beta: int, delta: int) -> frozenset:
    """The tree-minimal elements of the id interval [beta, delta)."""
    if beta > delta:
        raise TreeError(f"empty bounds: beta={beta} > delta={delta}")
    if delta > t.node_count:
        raise TreeError("delta exceeds the node count")
    window = range(beta, delta)
    out = []
    for a in window:
        if not any(t.lt(b, a) for b in window if b != a):
            out.append(a)
    return frozenset(out)


def antichain_chain_cover(nodes: frozenset, length: Optional[int] = None) -> list:
    """Increasing finite stages covering an antichain.

    Stage n is the first min(n+1, size) elements in ascending id order; the
    stages form a chain whose union is the whole set.
    """
    if not nodes:
        raise TreeError("cannot cover an empty antichain")
    ordered = sorted(nodes)
    size = len(ordered)
    if length is None:
        length = size
    return [frozenset(ordered[: min(n + 1, size)]) for n in range(length)]


@dataclass(frozen=True)
class Ladder:
    """A strictly increasing run of stages approaching a target stage.

    The finite stand-in for convergence is that the last step is the stage
    immediately below the target.
    """

    target: int
    steps: tuple

    def validate(self, excluded: frozenset) -> None:
        if not self.steps:
            raise TreeError("ladder has no steps")
        if list(self.steps) != sorted(set(self.steps)):
            raise TreeError("ladder steps must be strictly increasing")
        if self.steps[-1] + 1 != self.target:
            raise TreeError("ladder must end immediately below its target")
        if any(s < 0 or s >= self.target for s in self.steps):
            raise TreeError("ladder steps must lie below the target")
        hit = [s for s in self.steps if s in excluded]
        if hit:
            raise TreeError(f"ladder steps {hit} land on excluded stages")


def all_trees(max_nodes: int) -> list:
    """All forests with 1..max_nodes nodes, one per isomorphism class.

    Enumeration is by canonical shape; within each tree, nodes are numbered
    height-major so ids refine the tree order.
    """

    # Canonical code of a rooted tree: sorted tuple of child codes.
    def tree_codes(n):
        if n == 1:
            return [()]
        out = set()
        for split in forest_codes(n - 1):
            out.add(split)
        return [c for c in sorted(out)]

    def forest_codes(n):
        # All multisets of tree codes with total size n, as sorted tuples.
        if n == 0:
            return [()]
        out = set()
        for k in range(1, n + 1):
            for t in tree_codes(k):
                for rest in forest_codes(n - k):
                    out.add(tuple(sorted((t,) + rest)))
        return sorted(out)

    def code_size(code) -> int:
        return 1 + sum(code_size(c) for c in code)

    def realize(forest) -> Tree:
        parents = []
        queue = []
        for code in forest:
            parents.append(None)
            queue.append((len(parents) - 1, code))
        while queue:
            nxt = []
            for node, code in queue:
                for child in code:
                    parents.append(node)
                    nxt.append((len(parents) - 1, child))
            queue = nxt
        return build_tree(parents)

    seen = set()
    out = []
    for n in range(1, max_nodes + 1):
        for forest in forest_codes(n):
            if sum(code_size(c) for c in forest) != n:
                continue
            if forest in seen:
                continue
            seen.add(forest)
            out.append(realize(forest))
    return out
