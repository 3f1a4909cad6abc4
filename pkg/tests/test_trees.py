import json

import pytest

from efgroups import trees as tr


def test_build_tree_single_root():
    t = tr.build_tree([None])
    assert t.node_count == 1
    assert t.height == (0,)


def test_build_tree_chain():
    t = tr.build_tree([None, 0, 1])
    assert t.height == (0, 1, 2)
    assert t.parent == (None, 0, 1)


def test_build_tree_cycle():
    with pytest.raises(tr.TreeError):
        tr.build_tree([1, 0])


def test_build_tree_dangling():
    with pytest.raises(tr.TreeError):
        tr.build_tree([None, 5])


def test_tree_json_roundtrip():
    t = tr.build_tree([None, 0, 0])
    doc = json.loads(t.to_json())
    assert doc == {"parents": [None, 0, 0]}
    assert tr.tree_from_json(t.to_json()).parent == t.parent


def test_tree_product_chain_by_chain():
    p = tr.tree_product(tr.chain(1), tr.chain(1))
    assert p.node_count == 1
    p2 = tr.tree_product(tr.chain(3), tr.chain(3))
    assert p2.node_count == 3
    assert p2.parent == (None, 0, 1)


def test_tree_product_roots():
    one = tr.chain(1)
    two = tr.build_tree([None, None])
    p = tr.tree_product(one, two)
    assert p.node_count == 2 and p.parent == (None, None)
    p2 = tr.tree_product(two, tr.build_tree([None, None, None]))
    assert p2.node_count == 6


def test_tree_product_counts_and_branch_projection():
    t1 = tr.build_tree([None, 0, 0, 1])
    t2 = tr.full_forest(2, 2, 3)
    p = tr.tree_product(t1, t2)
    expect = sum(
        len(t1.nodes_at_height(h)) * len(t2.nodes_at_height(h))
        for h in range(max(t1.max_height(), t2.max_height()) + 1)
    )
    assert p.node_count == expect
    for branch in p.branches():
        proj1 = [p.pairs[n][0] for n in branch]
        proj2 = [p.pairs[n][1] for n in branch]
        for a, b in zip(proj1, proj1[1:]):
            assert t1.parent[b] == a
        for a, b in zip(proj2, proj2[1:]):
            assert t2.parent[b] == a


def test_minimal_antichain_chain():
    t = tr.build_tree([None, 0, 1, 2])
    assert tr.minimal_antichain(t, 1, 3) == frozenset({1})


def test_minimal_antichain_roots():
    t = tr.build_tree([None, None, 0, 1])
    assert tr.minimal_antichain(t, 0, t.node_count) == frozenset({0, 1})


def test_minimal_antichain_forest():
    t = tr.build_tree([None, None, None])
    assert tr.minimal_antichain(t, 1, 3) == frozenset({1, 2})
    with pytest.raises(tr.TreeError):
        tr.minimal_antichain(t, 3, 1)


def test_minimal_antichain_covers_window():
    t = tr.build_tree([None, 0, 0, None, 3, 1])
    for beta in range(t.node_count):
        for delta in range(beta, t.node_count + 1):
            anti = tr.minimal_antichain(t, beta, delta)
            assert tr.is_antichain(t, anti)
            for x in range(beta, delta):
                assert any(t.le(a, x) for a in anti)


def test_antichain_chain_cover():
    cov = tr.antichain_chain_cover(frozenset({3, 5, 9}), 5)
    assert cov == [
        frozenset({3}),
        frozenset({3, 5}),
        frozenset({3, 5, 9}),
        frozenset({3, 5, 9}),
        frozenset({3, 5, 9}),
    ]
    assert tr.antichain_chain_cover(frozenset({7})) == [frozenset({7})]
    with pytest.raises(tr.TreeError):
        tr.antichain_chain_cover(frozenset())


def test_ladder_validation():
    lad = tr.Ladder(5, (0, 2, 4))
    lad.validate(frozenset({1, 3}))
    with pytest.raises(tr.TreeError):
        tr.Ladder(5, (0, 4, 2)).validate(frozenset())
    with pytest.raises(tr.TreeError):
        tr.Ladder(5, (0, 2)).validate(frozenset())  # does not reach the target
    with pytest.raises(tr.TreeError):
        tr.Ladder(5, (0, 3, 4)).validate(frozenset({3}))  # hits an excluded stage


def test_all_trees_catalog():
    ts = tr.all_trees(4)
    assert len(ts) == 16
    ts6 = tr.all_trees(6)
    assert len(ts6) == 84
    assert all(t.is_ordinal_ordered() for t in ts6)
    assert len({t.parent for t in ts6}) == len(ts6)
    sizes = sorted(t.node_count for t in ts6)
    assert sizes[0] == 1 and sizes[-1] == 6
