"""Tree-indexed Ehrenfeucht-Fraisse games on finitely presented abelian groups.

The package is organized as one module per layer:

* ``zlinalg``       exact integer matrices, Smith/Hermite forms, solving
* ``abgroup``       finitely presented abelian groups and their invariants
* ``trees``         finite bounded trees, products, antichains, ladders
* ``efgame``        the tree game solver and strategy machinery
* ``constructions`` staged two-sided group builds: gadgets, chains, projections
* ``equivalences``  quotient- and filtration-equivalence of staged chains
* ``cli``           scenario runner, report emitter, interactive play
"""

from .zlinalg import IntMatrix, SNFDecomposition, snf, hnf, solve_linear
from .abgroup import (
    Presentation,
    Subgroup,
    Homomorphism,
    invariant_factors,
    are_isomorphic,
    dual_rank,
    subgroup_membership,
    quotient,
    purity_check,
    is_direct_summand,
    p_height,
    is_partial_iso,
    stein_check,
    INFINITE,
)
from .trees import Tree, Ladder, build_tree, tree_product, minimal_antichain, antichain_chain_cover

__all__ = [
    "IntMatrix",
    "SNFDecomposition",
    "snf",
    "hnf",
    "solve_linear",
    "Presentation",
    "Subgroup",
    "Homomorphism",
    "invariant_factors",
    "are_isomorphic",
    "dual_rank",
    "subgroup_membership",
    "quotient",
    "purity_check",
    "is_direct_summand",
    "p_height",
    "is_partial_iso",
    "stein_check",
    "INFINITE",
    "Tree",
    "Ladder",
    "build_tree",
    "tree_product",
    "minimal_antichain",
    "antichain_chain_cover",
]
