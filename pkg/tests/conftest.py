import pytest

from efgroups import abgroup as ab
from efgroups import constructions as cn
from efgroups import trees as tr
from efgroups.zlinalg import IntMatrix

# The group catalog used throughout the game tests.
CATALOG = {
    "Z2": ab.Presentation.cyclic(2),
    "Z3": ab.Presentation.cyclic(3),
    "Z4": ab.Presentation.cyclic(4),
    "Z2xZ2": ab.Presentation.direct_sum_of_cyclics([2, 2]),
    "Z6": ab.Presentation.cyclic(6),
}


def adversarial_prediction(build_gens: int, shear_from: int, shear_onto: int) -> IntMatrix:
    """The identity on all generators plus one shear x -> x + x' on a free pair.

    Together with fixing the gadget generators (so every w maps to w, never to
    a v), this is the natural wrong guess: it is an isomorphism of the two
    sides that cannot agree with the coherent family anywhere.
    """
    rows = [[1 if j == i else 0 for j in range(build_gens)] for i in range(build_gens)]
    rows[shear_from][shear_onto] = 1
    return IntMatrix(rows)


def make_adversarial_build(chain_length=3, d_bound=2, ball_radius=1):
    tree = tr.chain(4)
    # Stage layout below the chain stage: x[0,*] | u[1,*] v[1,*] | x[2,*].
    h = adversarial_prediction(7, 5, 0)
    script = cn.GuessScript(upsilon={1: (frozenset({0}),)}, predictions={3: h})
    bounds = cn.ObstructionBounds(d_bound=d_bound, ball_radius=ball_radius,
                                  chain_length=chain_length, trigger_depth=0)
    build = cn.build_truncated_pair(tree, ["free", "e0", "free", "e1"], script, 1, bounds)
    return build, h, bounds


def make_matched_build(t_play: tr.Tree):
    """A matched pair indexed by the product of the play tree with a small forest."""
    t2 = tr.full_forest(2, 2, t_play.max_height() + 1)
    t_index = tr.tree_product(t_play, t2)
    plan = ["free"] * t_index.node_count
    script = cn.GuessScript()
    if t_index.node_count >= 2:
        plan[1] = "e0"
        script = cn.GuessScript(upsilon={1: (frozenset({0}),)})
    build = cn.build_truncated_pair(t_index, plan, script, truncation=1)
    return build, t_index


def declared_ball(build: cn.PairedBuild):
    names = [("x", 0, 0)]
    if 1 in build.gadget_len:
        names += [("u", 1, 0), ("u", 1, 1), ("v", 1, 0)]
    ball = [build.pad(build.gen_vec(nm)) for nm in names]
    if 1 in build.gadget_len:
        ball.append(build.pad(build.w_vec(1, 0)))
    return ball


@pytest.fixture(scope="session")
def adversarial_build():
    return make_adversarial_build()


@pytest.fixture(scope="session")
def catalog():
    return dict(CATALOG)
