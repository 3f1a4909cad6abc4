import pytest

from efgroups import constructions as cn
from efgroups import equivalences as eq
from efgroups import trees as tr
from efgroups.abgroup import Homomorphism, Presentation
from efgroups.zlinalg import IntMatrix

from conftest import make_adversarial_build


def hand_filtration(ambient_gens, stage_rows, relations=None):
    rel = IntMatrix(relations) if relations else IntMatrix.zeros(0, ambient_gens)
    ambient = Presentation(ambient_gens, rel)
    return eq.Filtration.from_rows(ambient, stage_rows)


def matched_pair():
    tree = tr.chain(5)
    script = cn.GuessScript(upsilon={1: (frozenset({0}),)}, predictions={3: "family"})
    build = cn.build_truncated_pair(tree, ["free", "e0", "free", "e1", "free"], script, 1)
    return build, eq.Filtration.from_build(build, 0), eq.Filtration.from_build(build, 1)


def test_stable_quotient_equiv_reflexive():
    f = hand_filtration(2, [[(1, 0)], [(0, 1)]])
    assert eq.stable_quotient_equiv(f, f)


def test_quotient_mismatch_detected():
    # One chain has a Z/2 stage quotient, the other a Z/3 one.
    f = hand_filtration(2, [[(2, 0)], [(1, 0)]])
    g = hand_filtration(2, [[(3, 0)], [(1, 0)]])
    assert not eq.stable_quotient_equiv(f, g)


def test_free_ranks_absorbed():
    # Z^2 vs Z^5 stage quotients are stably the same (torsion parts empty).
    f = hand_filtration(5, [[(1, 0, 0, 0, 0), (0, 1, 0, 0, 0)]])
    g = hand_filtration(5, [[(1, 0, 0, 0, 0), (0, 1, 0, 0, 0), (0, 0, 1, 0, 0),
                             (0, 0, 0, 1, 0), (0, 0, 0, 0, 1)]])
    assert eq.stable_quotient_equiv(f, g)


def test_length_mismatch_errors():
    f = hand_filtration(1, [[(1,)]])
    g = hand_filtration(1, [[(1,)], []])
    with pytest.raises(eq.EquivalenceError):
        eq.stable_quotient_equiv(f, g)


def test_is_level_preserving_identity_and_swap():
    f = hand_filtration(2, [[(1, 0)], [(0, 1)]])
    ident = Homomorphism(f.ambient, f.ambient, IntMatrix.identity(2))
    assert eq.is_level_preserving(ident, f, f, 1)
    swap = Homomorphism(f.ambient, f.ambient, IntMatrix([[0, 1], [1, 0]]))
    assert not eq.is_level_preserving(swap, f, f, 1)
    with pytest.raises(eq.EquivalenceError):
        eq.is_level_preserving(ident, f, f, 5)


def test_family_map_is_level_preserving_on_builds():
    build, f0, f1 = matched_pair()
    top = build.family_hom(build.stage_count - 1)
    assert eq.is_level_preserving(top, f0, f1, build.stage_count - 1)


def test_search_finds_identity():
    f = hand_filtration(2, [[(1, 0)], [(0, 1)]])
    res = eq.search_level_preserving(f, f, 1)
    assert res.found
    assert eq.is_level_preserving(res.witness.hom, f, f, 1)


def test_search_fails_on_quotient_mismatch():
    f = hand_filtration(1, [[(2,)], [(1,)]])
    g = hand_filtration(1, [[(3,)], [(1,)]])
    res = eq.search_level_preserving(f, g, 1, coeff_bound=2)
    assert not res.found
    assert res.bounded
    assert not eq.stable_quotient_equiv(f, g)


def test_search_respects_bound():
    f = hand_filtration(1, [[(1,)]])
    res = eq.search_level_preserving(f, f, 0, coeff_bound=0)
    assert not res.found and res.bounded
    res1 = eq.search_level_preserving(f, f, 0, coeff_bound=1)
    assert res1.found


def test_search_on_matched_builds_all_levels():
    build, f0, f1 = matched_pair()
    for level in range(build.stage_count):
        res = eq.search_level_preserving(f0, f1, level)
        assert res.found, level
        assert eq.is_level_preserving(res.witness.hom, f0, f1, level)
        assert eq.stable_quotient_equiv(f0, f1, upto=level + 1)


def test_extend_free_step():
    f = hand_filtration(3, [[(1, 0, 0)], [(0, 1, 0)], [(0, 0, 1)]])
    witness = eq.LevelIso(Homomorphism(Presentation.free(1), Presentation.free(1), IntMatrix([[1]])), 0)
    out = eq.extend_level_preserving(witness, f, f, 2)
    assert out.level == 2
    assert eq.is_level_preserving(out.hom, f, f, 2)
    # restriction to the original level is the input map
    assert out.hom.matrix.row(0) == (1, 0, 0)
    with pytest.raises(eq.EquivalenceError):
        eq.extend_level_preserving(out, f, f, 1)


def test_extend_over_chain_stage_with_family_patch():
    build, h, bounds = make_adversarial_build()
    f0 = eq.Filtration.from_build(build, 0)
    f1 = eq.Filtration.from_build(build, 1)
    start = eq.LevelIso(
        Homomorphism(build.group(0, 1), build.group(1, 1), build.family[0]), 0
    )
    theta = build.family[3]  # stage isomorphism across the chain stage
    ladder = cn.default_ladder(build, 3)
    out = eq.extend_level_preserving(
        start, f0, f1, 3,
        patch_data={"build": build, "theta": {3: theta}, "ladders": {3: ladder}},
    )
    assert out.level == 3
    assert eq.is_level_preserving(out.hom, f0, f1, 3)
    # restriction to the starting level is the input witness
    for i in range(start.hom.matrix.rows):
        row = out.hom.matrix.row(i)
        expect = start.hom.matrix.row(i)
        assert row[: len(expect)] == expect
        assert all(c == 0 for c in row[len(expect):])


def test_extend_requires_patch_for_chain():
    build, h, bounds = make_adversarial_build()
    f0 = eq.Filtration.from_build(build, 0)
    f1 = eq.Filtration.from_build(build, 1)
    start = eq.LevelIso(
        Homomorphism(build.group(0, 1), build.group(1, 1), build.family[0]), 0
    )
    with pytest.raises(eq.EquivalenceError):
        eq.extend_level_preserving(start, f0, f1, 3)


def test_extend_rejects_level_breaking_patch():
    build, h, bounds = make_adversarial_build()
    f0 = eq.Filtration.from_build(build, 0)
    f1 = eq.Filtration.from_build(build, 1)
    start = eq.LevelIso(
        Homomorphism(build.group(0, 1), build.group(1, 1), build.family[0]), 0
    )
    n = build.stage_gens[4]
    bad = [list(r) for r in build.family[3].data]
    # swap the images of the two stage-0 generators with a later one: the
    # patch no longer maps the level-1 group onto its partner
    bad[0], bad[5] = bad[5], bad[0]
    ladder = cn.default_ladder(build, 3)
    with pytest.raises(eq.EquivalenceError):
        eq.extend_level_preserving(
            start, f0, f1, 3,
            patch_data={"build": build, "theta": {3: IntMatrix(bad)}, "ladders": {3: ladder}},
        )


def test_witness_round_trip_property():
    # search success implies the witness really is level-preserving, and a
    # witness at a level forces stable quotient equivalence up to it.
    pairs = [
        (hand_filtration(2, [[(2, 0)], [(0, 1)]]), hand_filtration(2, [[(0, 2)], [(1, 0)]])),
        (hand_filtration(2, [[(1, 0)], [(0, 3)]]), hand_filtration(2, [[(0, 1)], [(3, 0)]])),
    ]
    for f, g in pairs:
        res = eq.search_level_preserving(f, g, 1, coeff_bound=1)
        if res.found:
            assert eq.is_level_preserving(res.witness.hom, f, g, 1)
            assert eq.stable_quotient_equiv(f, g, upto=2)
