"""Quotient- and filtration-equivalence of staged chains.

Stable quotient-equivalence compares the torsion of successive stage
quotients (free parts are absorbed).  Filtration-equivalence is witnessed:
a level-preserving isomorphism found by bounded backtracking, checked
exactly, and extendable stage by stage; chain stages need the patch data
that the build itself provides.
"""

from efgroups import constructions as cn
from efgroups import equivalences as eq
from efgroups import trees as tr
from efgroups.abgroup import Presentation

# A matched pair: same plan, prediction equal to the family's own map, so no
# chain appears and the two sides match level by level.
script = cn.GuessScript(upsilon={1: (frozenset({0}),)}, predictions={3: "family"})
build = cn.build_truncated_pair(tr.chain(5), ["free", "e0", "free", "e1", "free"], script, 1)
f0 = eq.Filtration.from_build(build, 0)
f1 = eq.Filtration.from_build(build, 1)

print("stably quotient-equivalent:", eq.stable_quotient_equiv(f0, f1))
for level in range(build.stage_count):
    res = eq.search_level_preserving(f0, f1, level)
    print(f"level {level}: witness found = {res.found}")
    assert res.found and eq.is_level_preserving(res.witness.hom, f0, f1, level)

# Mismatched chains: a Z/2 stage quotient against a Z/3 one.
ambient = Presentation.free(2)
fa = eq.Filtration.from_rows(ambient, [[(2, 0)], [(1, 0)]])
fb = eq.Filtration.from_rows(ambient, [[(3, 0)], [(1, 0)]])
print("\nmismatched chains quotient-equivalent:", eq.stable_quotient_equiv(fa, fb))
print("witness search (bound 2):", eq.search_level_preserving(fa, fb, 1, coeff_bound=2).found)

# Crossing a chain stage needs the patch isomorphism and its ladder; the
# adversarial build supplies both from its own coherent family.
from efgroups.abgroup import Homomorphism
from efgroups.zlinalg import IntMatrix

h_rows = [[1 if j == i else 0 for j in range(7)] for i in range(7)]
h_rows[5][0] = 1
adv_script = cn.GuessScript(upsilon={1: (frozenset({0}),)}, predictions={3: IntMatrix(h_rows)})
adv_bounds = cn.ObstructionBounds(d_bound=2, ball_radius=1, chain_length=2)
adv = cn.build_truncated_pair(tr.chain(4), ["free", "e0", "free", "e1"], adv_script, 1, adv_bounds)
g0 = eq.Filtration.from_build(adv, 0)
g1 = eq.Filtration.from_build(adv, 1)
start = eq.LevelIso(Homomorphism(adv.group(0, 1), adv.group(1, 1), adv.family[0]), 0)
out = eq.extend_level_preserving(
    start, g0, g1, 3,
    patch_data={"build": adv, "theta": {3: adv.family[3]}, "ladders": {3: cn.default_ladder(adv, 3)}},
)
print("\nextension across the chain stage reaches level:", out.level)
print("and is level-preserving:", eq.is_level_preserving(out.hom, g0, g1, 3))
