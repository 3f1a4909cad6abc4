"""The acceptance gate: one test per criterion, each printing a verdict line.

Every expected value here is either computed by an oracle inside the test
(coset censuses, congruence arithmetic, exhaustive sweeps) or is an exact
structural fact checked with zero tolerance.
"""

import json
import math
import random
import time

from efgroups import abgroup as ab
from efgroups import cli
from efgroups import constructions as cn
from efgroups import efgame as ef
from efgroups import equivalences as eq
from efgroups import trees as tr
from efgroups.abgroup import Presentation, Subgroup
from efgroups.zlinalg import IntMatrix, hnf, snf

from conftest import CATALOG, adversarial_prediction, declared_ball, make_matched_build


def stamp(num, label, started):
    print(f"\nACCEPTANCE {num} PASS ({time.time() - started:.1f}s): {label}")


# -- 1: exact normal forms with census cross-check ---------------------------------


def hnf_coset_census(g: Presentation, max_order: int):
    """Orders of all elements via Hermite-form coset enumeration.

    Independent of the Smith-form classification path: membership and
    transversals come from row reduction against the relation lattice only.
    """
    h, _ = hnf(g.relations)
    rows = [r for r in h.data if any(r)]
    pivots = {}
    for r in rows:
        j = next(i for i, x in enumerate(r) if x)
        pivots[j] = r
    if len(pivots) < g.gens:
        return None  # infinite group
    order = 1
    for j in range(g.gens):
        order *= pivots[j][j]
    if order > max_order:
        return None

    def reduce(vec):
        v = list(vec)
        for j in range(g.gens):
            r = pivots[j]
            q = v[j] // r[j]
            if q:
                for i in range(j, g.gens):
                    v[i] -= q * r[i]
        return v

    def member(vec):
        return all(c == 0 for c in reduce(vec))

    reps = []
    v = [0] * g.gens
    bounds = [pivots[j][j] for j in range(g.gens)]
    total = order
    for _ in range(total):
        reps.append(tuple(v))
        for i in range(g.gens - 1, -1, -1):
            v[i] += 1
            if v[i] < bounds[i]:
                break
            v[i] = 0
    divisors = [d for d in range(1, order + 1) if order % d == 0]
    orders = []
    for rep in reps:
        for d in divisors:
            if member([d * c for c in rep]):
                orders.append(d)
                break
    return sorted(orders)


def census_from_invariant_factors(torsion):
    from itertools import product

    orders = []
    for combo in product(*[range(t) for t in torsion]) if torsion else [()]:
        o = 1
        for c, t in zip(combo, torsion):
            o = math.lcm(o, t // math.gcd(t, c))
        orders.append(o)
    return sorted(orders)


def test_acceptance_1_snf_hnf_suite():
    started = time.time()
    rng = random.Random(20240817)
    census_checked = 0
    for trial in range(1000):
        if trial % 5 == 0:
            rows = cols = rng.randrange(2, 4)
            m = IntMatrix([[rng.randrange(-4, 5) for _ in range(cols)] for _ in range(rows)])
        else:
            rows = rng.randrange(1, 7)
            cols = rng.randrange(1, 7)
            m = IntMatrix([[rng.randrange(-20, 21) for _ in range(cols)] for _ in range(rows)])
        dec = snf(m)
        assert dec.U @ m @ dec.V == dec.D
        assert dec.U.det() in (1, -1) and dec.V.det() in (1, -1)
        diag = dec.diagonal()
        assert all(d >= 0 for d in diag)
        nonzero = [d for d in diag if d]
        assert all(b % a == 0 for a, b in zip(nonzero, nonzero[1:]))
        assert all(d == 0 for d in diag[len(nonzero):])
        h, u = hnf(m)
        assert u @ m == h
        assert u.det() in (1, -1)
        g = Presentation(cols, m)
        census = hnf_coset_census(g, 200)
        if census is not None:
            free_rank, torsion = ab.invariant_factors(g)
            assert free_rank == 0
            assert census == census_from_invariant_factors(torsion)
            census_checked += 1
    assert census_checked >= 50, "the sample must include small finite quotients"
    assert time.time() - started < 60
    stamp(1, f"SNF/HNF suite, 1000 matrices, {census_checked} censuses", started)


# -- 2: height growth ------------------------------------------------------------------


def test_acceptance_2_height_growth():
    started = time.time()
    for n in range(1, 65):
        g = Presentation.free(n + 1)
        rows = []
        for i in range(n):
            row = [0] * (n + 1)
            row[i] = -1
            row[i + 1] = 2
            rows.append(row)
        span = Subgroup.spanned_by(g, rows)
        x = tuple(1 if i == 0 else 0 for i in range(n + 1))
        assert ab.p_height(g, span, x, 2) == n, n
    assert time.time() - started < 10
    stamp(2, "2-height of u0 over the N-fold w-span equals N for N=1..64", started)


# -- 3: chain structure ----------------------------------------------------------------


ODD_PRIMES_12 = [3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41]


def test_acceptance_3_zchain_structure():
    started = time.time()
    for n in range(1, 33):
        b = cn.PairedBuild(tr.chain(2), ["free", "e1"],
                           cn.GuessScript(predictions={1: "family"}), truncation=1)
        cn.free_step(b, 0)
        k_list = [b.gen_vec(("x", 0, i % 2)) for i in range(n)]
        p_list = [ODD_PRIMES_12[i % 12] for i in range(n)]
        cn.z_chain(b, 1, k_list, p_list)
        g = b.group(0)
        assert ab.invariant_factors(g) == (2 + 1, ()), n
        # z0 + sum_j (prod_{i<j} p_i) k_j lies in (prod p_i) G, exactly
        modulus = math.prod(p_list)
        vec = list(b.gen_vec(("z", 1, 0)))
        coef = 1
        for j in range(n):
            for i, c in enumerate(b.pad(k_list[j])):
                vec[i] += coef * c
            coef *= p_list[j]
        stacked = IntMatrix.diagonal([modulus] * g.gens).vstack(g.relations)
        from efgroups.zlinalg import express_in_rows

        assert express_in_rows(stacked, tuple(vec)) is not None, n
    stamp(3, "chains of length 1..32 over the first 12 odd primes: free rank base+1, exact z0 congruence", started)


# -- 4: exhaustive non-extension ---------------------------------------------------------


def test_acceptance_4_nonextension_exhaustive():
    started = time.time()
    tree = tr.chain(4)
    h = adversarial_prediction(7, 5, 0)
    script = cn.GuessScript(upsilon={1: (frozenset({0}),)}, predictions={3: h})
    bounds = cn.ObstructionBounds(d_bound=5, ball_radius=2, chain_length=3, trigger_depth=0)
    build = cn.build_truncated_pair(tree, ["free", "e0", "free", "e1"], script, 1, bounds)
    assert len(build.gen_names) - 4 <= 8  # base rank within the stated box
    chain = build.chains[3]
    assert chain.length <= 8
    triples = cn.enumerate_triples(build, 3, bounds, chain.length)
    unblocked = [t for t in triples if not cn.extension_obstruction(build, 3, h, t)]
    assert unblocked == [], f"{len(unblocked)} of {len(triples)} hypotheses not refuted"
    assert time.time() - started < 300
    stamp(4, f"all {len(triples)} boxed extension hypotheses refuted, zero exceptions", started)


# -- 5: game solver soundness -------------------------------------------------------------


def test_acceptance_5_solver_soundness():
    started = time.time()
    trees = tr.all_trees(6)
    groups = list(CATALOG.items())
    minimax_agreed = 0
    verified = 0
    for t in trees:
        for name_a, a in groups:
            for name_b, b in groups:
                spec = ef.GameSpec.finite(a, b, t)
                res = ef.solve_game(spec)
                assert res.winner in (ef.EXISTS, ef.FORALL)
                if name_a == name_b:
                    assert res.winner == ef.EXISTS, (name_a, t.parent)
                try:
                    raw = ef.raw_minimax(spec, 100000)
                    assert raw == res.winner, (name_a, name_b, t.parent)
                    minimax_agreed += 1
                except ef.StateBudgetExceeded:
                    pass
                if res.winner == ef.EXISTS:
                    assert ef.verify_strategy(spec, res.strategy), (name_a, name_b, t.parent)
                else:
                    assert ef.verify_forall_strategy(spec, res.strategy), (name_a, name_b, t.parent)
                verified += 1
    assert minimax_agreed > 500
    assert time.time() - started < 300
    stamp(5, f"{verified} instances solved and verified, {minimax_agreed} cross-checked against raw minimax", started)


# -- 6: the coherent-family strategy wins -----------------------------------------------


def test_acceptance_6_family_strategy_wins_every_small_tree():
    started = time.time()
    for t_play in tr.all_trees(4):
        build, t_index = make_matched_build(t_play)
        family = build.family_dict()
        strat = ef.strategy_from_coherent_family(family, t_play, t_index)
        ball = declared_ball(build)
        spec = ef.GameSpec.ball(build.group(0), build.group(1), t_play, ball, ball)
        assert ef.verify_strategy(spec, strat), t_play.parent
    stamp(6, "family strategy wins the ball-restricted game on every play tree with <= 4 nodes", started)


# -- 7: standard form ------------------------------------------------------------------


def scripted_build_catalog():
    out = []
    # adversarial chain build
    tree = tr.chain(4)
    h = adversarial_prediction(7, 5, 0)
    script = cn.GuessScript(upsilon={1: (frozenset({0}),)}, predictions={3: h})
    bounds = cn.ObstructionBounds(d_bound=2, ball_radius=1, chain_length=3, trigger_depth=0)
    out.append(cn.build_truncated_pair(tree, ["free", "e0", "free", "e1"], script, 1, bounds))
    # chain build with two free stages below the chain
    tree2 = tr.chain(5)
    h2 = adversarial_prediction(9, 7, 0)
    script2 = cn.GuessScript(upsilon={1: (frozenset({0}),)}, predictions={4: h2})
    bounds2 = cn.ObstructionBounds(d_bound=2, ball_radius=1, chain_length=2, trigger_depth=0)
    out.append(cn.build_truncated_pair(tree2, ["free", "e0", "free", "free", "e1"], script2, 1, bounds2))
    # matched build (no chain)
    script3 = cn.GuessScript(upsilon={1: (frozenset({0}),)}, predictions={3: "family"})
    out.append(cn.build_truncated_pair(tr.chain(5), ["free", "e0", "free", "e1", "free"], script3, 1))
    # longer gadget on a forest
    tree4 = tr.build_tree([None, None, None, 0])
    script4 = cn.GuessScript(upsilon={3: (frozenset({0}), frozenset({1}), frozenset({2}))})
    out.append(cn.build_truncated_pair(tree4, ["free", "free", "free", "e0"], script4, 3))
    return out


def test_acceptance_7_standard_form():
    started = time.time()
    checked = 0
    for build in scripted_build_catalog():
        ps = cn.build_projections(build)
        assert cn.check_standard_form(build, ps)
        for delta in build.chains:
            ladders = cn.valid_ladders(build, delta)
            assert ladders
            for lad in ladders:
                assert cn.check_standard_form(build, ps, ladders={delta: lad})
                checked += 1
    assert checked >= 6
    stamp(7, f"projection coherence and the ladder law hold exactly ({checked} ladder checks)", started)


# -- 8: filtration machinery ---------------------------------------------------------------


def test_acceptance_8_filtration_machinery():
    started = time.time()
    # matched scripts: witnesses at every level
    script = cn.GuessScript(upsilon={1: (frozenset({0}),)}, predictions={3: "family"})
    build = cn.build_truncated_pair(tr.chain(5), ["free", "e0", "free", "e1", "free"], script, 1)
    f0 = eq.Filtration.from_build(build, 0)
    f1 = eq.Filtration.from_build(build, 1)
    for level in range(min(5, build.stage_count)):
        res = eq.search_level_preserving(f0, f1, level)
        assert res.found, level
        assert eq.is_level_preserving(res.witness.hom, f0, f1, level)
        assert eq.stable_quotient_equiv(f0, f1, upto=level + 1)
    # quotient-mismatched scripts: equivalence fails and the search agrees
    ambient = Presentation.free(2)
    fa = eq.Filtration.from_rows(ambient, [[(2, 0)], [(1, 0)]])
    fb = eq.Filtration.from_rows(ambient, [[(3, 0)], [(1, 0)]])
    assert not eq.stable_quotient_equiv(fa, fb)
    res = eq.search_level_preserving(fa, fb, 1, coeff_bound=2)
    assert not res.found and res.bounded
    # the same mismatch in different coordinates
    fc = eq.Filtration.from_rows(ambient, [[(0, 2)], [(0, 1)]])
    fd = eq.Filtration.from_rows(ambient, [[(3, 0)], [(1, 0)]])
    assert not eq.stable_quotient_equiv(fc, fd)
    assert not eq.search_level_preserving(fc, fd, 1, coeff_bound=2).found
    stamp(8, "matched builds witness filtration-equivalence at all levels <= 5; mismatches refused", started)


# -- 9: determinism ---------------------------------------------------------------------


def test_acceptance_9_byte_determinism(tmp_path):
    started = time.time()
    suite = {
        "kind": "suite",
        "seed": 424242,
        "scenarios": [
            {
                "kind": "game",
                "left": {"gens": 1, "relations": [[2]]},
                "right": {"gens": 1, "relations": [[3]]},
                "tree": {"parents": [None]},
                "expect": {"winner": "forall"},
            },
            {
                "kind": "build",
                "tree": {"parents": [None, 0, 1, 2]},
                "plan": ["free", "e0", "free", "e1"],
                "truncation": 1,
                "script": {"upsilon": {"1": [[0]]}, "predictions": {"3": "family"}},
                "expect": {"chain_installed": False},
            },
            {
                "kind": "equivalence",
                "left": {"ambient": {"gens": 1, "relations": []}, "stages": [[[2]], [[1]]]},
                "right": {"ambient": {"gens": 1, "relations": []}, "stages": [[[2]], [[1]]]},
                "level": 1,
                "expect": {"quotient_equivalent": True, "witness_found": True},
            },
        ],
    }
    blobs = set()
    for fmt in ("json", "text"):
        for _ in range(2):
            blobs.add((fmt, cli.emit_report(cli.run_scenario(suite), fmt)))
    assert len(blobs) == 2  # one distinct rendering per format

    path = tmp_path / "suite.json"
    path.write_text(json.dumps(suite))
    outs = []
    for i in range(2):
        out = tmp_path / f"report{i}.json"
        assert cli.main(["run", str(path), "--format", "json", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    stamp(9, "identical scenario and seed produce byte-identical reports", started)
