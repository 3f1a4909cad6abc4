"""Two parallel staged groups, a wrong guess, and a chain that refutes it.

The build grows two groups over one generator list.  A gadget stage adds the
divisibility pattern w_n = 2u_{n+1} - u_n; the guessed isomorphism h below
fixes every generator, so it sends w to w where the coherent family sends w
to v.  The chain stage detects this and installs relations
p_n z_{n+1} = z_n + k_n (companion side: the family images of the k's) whose
primes certify that no extension of h maps z_0 to any small combination
d * z_r + g: every hypothesis in the search box dies on a congruence.
"""

from efgroups import abgroup as ab
from efgroups import constructions as cn
from efgroups import trees as tr
from efgroups.zlinalg import IntMatrix

tree = tr.chain(4)
plan = ["free", "e0", "free", "e1"]

# h: identity everywhere except one shear x[2,0] -> x[2,0] + x[0,0].
h_rows = [[1 if j == i else 0 for j in range(7)] for i in range(7)]
h_rows[5][0] = 1
h = IntMatrix(h_rows)

script = cn.GuessScript(upsilon={1: (frozenset({0}),)}, predictions={3: h})
bounds = cn.ObstructionBounds(d_bound=3, ball_radius=1, chain_length=3)
build = cn.build_truncated_pair(tree, plan, script, truncation=1, bounds=bounds)

chain = build.chains[3]
print("chain installed with primes:", chain.primes)
print("chain elements:", [spec.x_name for spec in chain.kspecs])
print("every stage stays free:",
      all(not ab.invariant_factors(build.group(0, s))[1] for s in range(5)))

triples = cn.enumerate_triples(build, 3, bounds, chain.length)
blocked = sum(1 for t in triples if cn.extension_obstruction(build, 3, h, t))
print(f"extension hypotheses refuted: {blocked} of {len(triples)}")

# The build's own coherent family is a genuine isomorphism at every stage,
# and its matching hypothesis is (correctly) not refuted.
family = build.family_dict()
print("family maps are isomorphisms:",
      all(hom.is_isomorphism() for hom in family.values()))
coherent = build.family[2]
zero = (0,) * build.stage_gens[3]
print("the family's own extension hypothesis survives:",
      not cn.extension_obstruction(build, 3, coherent, (0, 1, zero)))

# Projections: fresh generators die; chain generators unroll to -sum d_{0j} k_j
# once the k's lie inside the target stage.
ps = cn.build_projections(build)
print("\npi_2 kills this build's chain block:", ps.apply(0, 2, 4, build.gen_vec(("z", 3, 0))))
print("standard form (coherence + ladder law):", cn.check_standard_form(build, ps))

hand = cn.PairedBuild(tr.chain(4), ["free", "free", "free", "e1"],
                      cn.GuessScript(predictions={3: "family"}), truncation=1)
cn.free_step(hand, 0)
cn.free_step(hand, 1)
cn.free_step(hand, 2)
cn.z_chain(hand, 3, [hand.gen_vec(("x", 0, 0)), hand.gen_vec(("x", 1, 0))], [2, 3])
ps2 = cn.build_projections(hand)
print("with k0 = x[0,0], k1 = x[1,0] and primes (2,3):")
print("pi_2(z0) =", ps2.apply(0, 2, 4, hand.gen_vec(("z", 3, 0))), "(that is, -(k0 + 2 k1))")
