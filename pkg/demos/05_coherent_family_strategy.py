"""A matched pair of builds and the strategy read off its coherent family.

The index tree is the product of the play tree with a small full forest, so
every branch of play has a matching branch of bookkeeping.  Depending on
which index branch the walk takes, the same gadget element w is answered by
w (off the scripted cell's branch) or by v (on it); either way the reply is
consistent with one stage isomorphism, so exists never breaks a relation.
"""

from efgroups import constructions as cn
from efgroups import efgame as ef
from efgroups import trees as tr

t_play = tr.chain(3)
t2 = tr.full_forest(2, 2, t_play.max_height() + 1)
t_index = tr.tree_product(t_play, t2)
print("play tree:", t_play.parent)
print("index tree nodes:", t_index.node_count)

plan = ["free"] * t_index.node_count
plan[1] = "e0"
script = cn.GuessScript(upsilon={1: (frozenset({0}),)})
build = cn.build_truncated_pair(t_index, plan, script, truncation=1)
print("generators per side:", build.gens)

family = build.family_dict()
strategy = ef.strategy_from_coherent_family(family, t_play, t_index)

ball = [build.pad(build.gen_vec(n)) for n in (("x", 0, 0), ("u", 1, 0), ("u", 1, 1), ("v", 1, 0))]
ball.append(build.pad(build.w_vec(1, 0)))
spec = ef.GameSpec.ball(build.group(0), build.group(1), t_play, ball, ball)

print("exhaustive verification over the declared ball:",
      ef.verify_strategy(spec, strategy))

# Watch the two behaviors on w directly.
w = build.pad(build.w_vec(1, 0))
reply_low = strategy.reply(spec, (), 0, ef.LEFT, w)
print("reply to w on the first branch: ", reply_low == w and "w (identity block)" or reply_low)
