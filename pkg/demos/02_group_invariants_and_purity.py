"""Finitely presented abelian groups: classification, purity, heights.

A presentation is a generator count plus integer relation rows.  The
classification (free rank and invariant factors) is presentation-invariant,
and subgroup questions are decided exactly against the relation lattice.
"""

from efgroups import abgroup as ab
from efgroups.abgroup import Presentation, Subgroup
from efgroups.zlinalg import IntMatrix

g = Presentation(3, IntMatrix([[2, 0, 0], [0, 6, 0]]))
print("invariant factors of <a,b,c | 2a, 6b>:", ab.invariant_factors(g))
print("Z/6 is Z/2 + Z/3:",
      ab.are_isomorphic(Presentation.cyclic(6), Presentation.direct_sum_of_cyclics([2, 3])))
print("Z/4 is not the Klein group:",
      not ab.are_isomorphic(Presentation.cyclic(4), Presentation.direct_sum_of_cyclics([2, 2])))

# Purity and direct summands in a free ambient group agree, and a summand
# comes with an explicit complement.
z2 = Presentation.free(2)
axis = Subgroup.spanned_by(z2, [(1, 0)])
double = Subgroup.spanned_by(z2, [(2, 0)])
print("\n<(1,0)> pure in Z^2:", ab.purity_check(z2, axis))
print("<(2,0)> pure in Z^2:", ab.purity_check(z2, double))
print("<(1,0)> is a summand:", ab.is_direct_summand(z2, axis))
comp = ab.summand_complement(z2, axis)
print("a complement:", comp.generators)

# The height gadget: w_n = 2 u_{n+1} - u_n makes the coset of u_0 divisible
# by 2 exactly N times modulo the span of N of the w's.
n = 5
amb = Presentation.free(n + 1)
rows = []
for i in range(n):
    row = [0] * (n + 1)
    row[i] = -1
    row[i + 1] = 2
    rows.append(row)
wspan = Subgroup.spanned_by(amb, rows)
u0 = tuple(1 if i == 0 else 0 for i in range(n + 1))
print(f"\n2-height of u0 over the {n}-fold w-span:", ab.p_height(amb, wspan, u0, 2))
print("the quotient is free:", ab.invariant_factors(ab.quotient(amb, wspan)))
