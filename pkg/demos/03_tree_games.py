"""The tree game: solving, strategies, and what trees can distinguish.

In each round one player (forall) climbs strictly upward in a finite tree
and picks an element of either group; the other player (exists) answers in
the opposite group.  When the tree runs out, exists has won exactly when the
accumulated correspondence preserves every integer linear relation.
"""

from efgroups import efgame as ef
from efgroups import trees as tr
from efgroups.abgroup import Presentation

z2 = Presentation.cyclic(2)
z3 = Presentation.cyclic(3)
z4 = Presentation.cyclic(4)
klein = Presentation.direct_sum_of_cyclics([2, 2])

# One round already separates groups whose elements satisfy different
# relations.
print("Z/2 vs Z/3, one round:", ef.t_equivalent(z2, z3, tr.chain(1)))
print("Z/4 vs Klein, one round:", ef.t_equivalent(z4, klein, tr.chain(1)))

# One round cannot see the difference between Z/2 and the Klein group, but a
# second round pins it down.
print("Z/2 vs Klein, one round:", ef.t_equivalent(z2, klein, tr.chain(1)))
print("Z/2 vs Klein, two rounds:", ef.t_equivalent(z2, klein, tr.chain(2)))

# The solver returns the winner's strategy; verification replays every
# opposing line against it.
spec = ef.GameSpec.finite(z2, klein, tr.chain(2))
result = ef.solve_game(spec)
print("\nwinner on the 2-chain:", result.winner,
      f"({result.states_explored} states explored)")
print("strategy survives exhaustive verification:",
      ef.verify_forall_strategy(spec, result.strategy))

# Tree shape matters, not just size: a fork gives forall two independent
# probes but no second round on the same branch.
fork = tr.build_tree([None, 0, 0])
print("\nZ/2 vs Klein on a fork:", ef.t_equivalent(z2, klein, fork))

# Isomorphic groups are equivalent on every tree.
z6 = Presentation.cyclic(6)
z2z3 = Presentation.direct_sum_of_cyclics([2, 3])
print("Z/6 vs Z/2+Z/3 on all trees with <= 5 nodes:",
      all(ef.t_equivalent(z6, z2z3, t) for t in tr.all_trees(5)))
