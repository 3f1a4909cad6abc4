"""Quotient- and filtration-equivalence of staged chains of subgroups.

A filtration is an increasing chain of finitely generated subgroups of one
ambient group, starting at the trivial subgroup, with a stage kind attached
to every step.  Two filtrations are stably quotient-equivalent when the
successive quotients agree up to free summands, i.e. have equal torsion.
Filtration-equivalence is the stronger, witnessed notion: a level-preserving
isomorphism at every level.  The witness search here is a bounded-coefficient
backtracking search, complete only relative to its bound, and says so in its
result.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

from . import abgroup as ab
from .abgroup import Homomorphism, Presentation, Subgroup
from .constructions import E1, FREE, Ladder, PairedBuild, extend_over_zchain
from .zlinalg import IntMatrix


class EquivalenceError(ValueError):
    pass


@dataclass(frozen=True)
class Filtration:
    """An increasing chain of subgroups given by cumulative generator rows.

    ``members[i]`` lists generator rows of stage i; each stage's rows must
    extend the previous stage's rows (so stages are nested by construction).
    Stage 0 is the trivial subgroup.
    """

    ambient: Presentation
    members: tuple
    labels: tuple

    def __post_init__(self):
        if not self.members or self.members[0].rows != 0:
            raise EquivalenceError("a filtration must start at the trivial subgroup")
        for lo, hi in zip(self.members, self.members[1:]):
            if hi.data[: lo.rows] != lo.data:
                raise EquivalenceError("each stage must extend the previous stage's rows")
        if len(self.labels) != len(self.members) - 1:
            raise EquivalenceError("one label per stage step is required")

    @property
    def length(self) -> int:
        return len(self.members)

    def subgroup(self, i: int) -> Subgroup:
        return Subgroup(self.ambient, self.members[i])

    def step_quotient(self, i: int) -> Presentation:
        return ab.subquotient(self.ambient, self.subgroup(i + 1), self.subgroup(i))

    @classmethod
    def from_rows(cls, ambient: Presentation, stage_rows: Sequence[Sequence[Sequence[int]]],
                  labels: Optional[Sequence[str]] = None) -> "Filtration":
        members = []
        acc = []
        members.append(IntMatrix.zeros(0, ambient.gens))
        for rows in stage_rows:
            acc = acc + [list(r) for r in rows]
            members.append(IntMatrix(acc) if acc else IntMatrix.zeros(0, ambient.gens))
        if labels is None:
            labels = (FREE,) * (len(members) - 1)
        return cls(ambient, tuple(members), tuple(labels))

    @classmethod
    def from_build(cls, build: PairedBuild, side: int) -> "Filtration":
        top = build.group(side)
        members = []
        for s in range(build.stage_count + 1):
            n = build.stage_gens[s]
            rows = [[1 if j == i else 0 for j in range(top.gens)] for i in range(n)]
            members.append(IntMatrix(rows) if rows else IntMatrix.zeros(0, top.gens))
        return cls(top, tuple(members), build.labels)


@dataclass(frozen=True)
class LevelIso:
    """A level-preserving isomorphism witness at a given level."""

    hom: Homomorphism
    level: int


@dataclass(frozen=True)
class SearchResult:
    witness: Optional[LevelIso]
    bounded: bool = True

    @property
    def found(self) -> bool:
        return self.witness is not None


def stable_quotient_equiv(f: Filtration, g: Filtration, upto: Optional[int] = None) -> bool:
    """Successive quotients isomorphic after absorbing free summands.

    Compares the torsion parts of every stage quotient; free ranks are
    deliberately ignored (each side is padded by countably many free
    generators in the stabilized comparison).
    """
    if f.length != g.length:
        raise EquivalenceError("filtrations have different lengths")
    last = f.length - 1 if upto is None else min(upto, f.length - 1)
    for i in range(last):
        tf = ab.invariant_factors(f.step_quotient(i))[1]
        tg = ab.invariant_factors(g.step_quotient(i))[1]
        if tf != tg:
            return False
    return True


def _image_subgroup(g: Filtration, theta: Homomorphism, count: int):
    """Span of the first `count` generator images, in the ambient of g.

    The witness convention throughout this module: matrix row i of a
    level-preserving map is the image of the i-th stage generator row.  Since
    stages are cumulative, the first members[nu].rows rows are exactly the
    images of stage nu.
    """
    rows = [
        list(theta.matrix.row(i)) + [0] * (g.ambient.gens - theta.target.gens)
        for i in range(count)
    ]
    return Subgroup(g.ambient, IntMatrix(rows) if rows else IntMatrix.zeros(0, g.ambient.gens))


def is_level_preserving(theta: Homomorphism, f: Filtration, g: Filtration, alpha: int) -> bool:
    """Exact image equality theta[A_nu] = B_nu for every level nu <= alpha."""
    if alpha + 1 >= f.length or alpha + 1 >= g.length:
        raise EquivalenceError("level exceeds the filtrations")
    if theta.matrix.rows < f.members[alpha + 1].rows:
        raise EquivalenceError("domain too small: the map does not cover the top stage")
    for nu in range(alpha + 1):
        img = _image_subgroup(g, theta, f.members[nu].rows)
        target = g.subgroup(nu)
        if not all(ab.subgroup_membership(target, row) for row in img.generators.data):
            return False
        if not all(ab.subgroup_membership(img, row) for row in target.generators.data):
            return False
    return True


def _hom_ok(f: Filtration, g: Filtration, dom_rows, img_rows) -> bool:
    """Do the assigned images define a homomorphism on the span of dom_rows?"""
    ker = ab.kernel_lattice(f.ambient, dom_rows)
    for c in ker.data:
        combo = [0] * g.ambient.gens
        for coef, img in zip(c, img_rows):
            if coef:
                for i, x in enumerate(img):
                    combo[i] += coef * x
        if not ab.is_zero(g.ambient, combo):
            return False
    return True


def _is_injective_onto(f: Filtration, g: Filtration, dom_rows, img_rows, level: int) -> bool:
    ker_dom = ab.kernel_lattice(f.ambient, dom_rows)
    ker_img = ab.kernel_lattice(g.ambient, img_rows)
    if ker_dom != ker_img:
        return False
    span = Subgroup(g.ambient, IntMatrix([list(r) for r in img_rows]) if img_rows else IntMatrix.zeros(0, g.ambient.gens))
    return all(ab.subgroup_membership(span, row) for row in g.members[level].data)


def search_level_preserving(f: Filtration, g: Filtration, alpha: int, coeff_bound: int = 1,
                            node_cap: int = 200000) -> SearchResult:
    """Bounded backtracking search for a level-preserving isomorphism.

    Images of each stage's new generators are drawn from combinations of the
    other side's stage generators with coefficients bounded by
    ``coeff_bound``; like-positioned combinations are tried first.  The
    search is complete only relative to the bound and the node cap, which is
    what the ``bounded`` flag in the result records.
    """
    if alpha + 1 >= f.length or alpha + 1 >= g.length:
        raise EquivalenceError("level exceeds the filtrations")
    levels = alpha + 1
    new_rows = []
    for nu in range(1, levels + 1):
        new_rows.append((nu, f.members[nu].data[f.members[nu - 1].rows:]))

    nodes = [0]

    def candidates(nu: int, position: int):
        basis = g.members[nu].data
        k = len(basis)
        box = itertools.product(range(-coeff_bound, coeff_bound + 1), repeat=k)
        scored = []
        for c in box:
            vec = [0] * g.ambient.gens
            for coef, row in zip(c, basis):
                if coef:
                    for i, x in enumerate(row):
                        vec[i] += coef * x
            unit = 1 if (position < k and all(x == (1 if i == position else 0) for i, x in enumerate(c))) else 0
            scored.append((1 - unit, sum(abs(x) for x in c), c, tuple(vec)))
        scored.sort()
        return [v for (_, _, _, v) in scored]

    dom_rows: list = []
    img_rows: list = []

    def place(level_idx: int) -> Optional[list]:
        if level_idx == len(new_rows):
            if _is_injective_onto(f, g, dom_rows, img_rows, levels):
                return list(img_rows)
            return None
        nu, rows = new_rows[level_idx]

        def assign(j: int) -> Optional[list]:
            if j == len(rows):
                # Level complete: images must carve out exactly B_nu.
                if not _is_injective_onto(f, g, dom_rows, img_rows, nu):
                    return None
                return place(level_idx + 1)
            dom_rows.append(rows[j])
            base = len(img_rows)
            for vec in candidates(nu, base):
                nodes[0] += 1
                if nodes[0] > node_cap:
                    raise StopIteration
                img_rows.append(vec)
                if _hom_ok(f, g, dom_rows, img_rows):
                    got = assign(j + 1)
                    if got is not None:
                        return got
                img_rows.pop()
            dom_rows.pop()
            return None

        return assign(0)

    try:
        got = place(0)
    except StopIteration:
        return SearchResult(None, bounded=True)
    if got is None:
        return SearchResult(None, bounded=True)
    # The witness is recorded on prefix coordinates when the stage generators
    # are coordinate vectors, else as a map into the ambient group.
    if _prefix_coordinates(f, levels) and _prefix_coordinates(g, levels):
        src = _prefix_presentation(f, levels)
        tgt = _prefix_presentation(g, levels)
        rows = [list(v[: tgt.gens]) for v in got]
        hom = Homomorphism(src, tgt, IntMatrix(rows) if rows else IntMatrix.zeros(0, tgt.gens))
    else:
        source = ab.subquotient(f.ambient, f.subgroup(levels), Subgroup.trivial(f.ambient))
        hom = Homomorphism(source, g.ambient, IntMatrix([list(v) for v in got]) if got else IntMatrix.zeros(0, g.ambient.gens))
    return SearchResult(LevelIso(hom, alpha), bounded=True)


def _prefix_coordinates(f: Filtration, level: int) -> bool:
    m = f.members[level]
    return all(
        all(x == (1 if j == i else 0) for j, x in enumerate(row))
        for i, row in enumerate(m.data)
    )


def _prefix_presentation(f: Filtration, level: int) -> Presentation:
    n = f.members[level].rows
    rows = [list(r[:n]) for r in f.ambient.relations.data if not any(r[n:])]
    return Presentation(n, IntMatrix(rows) if rows else IntMatrix.zeros(0, n))


def extend_level_preserving(witness: LevelIso, f: Filtration, g: Filtration, nu: int,
                            patch_data: Optional[dict] = None) -> LevelIso:
    """Extend a level-preserving isomorphism from its level up to level nu.

    Steps with matching free blocks are extended by mapping new generators to
    the like-positioned generators of the other side.  Chain steps of a build
    need patch data: the build, a stage isomorphism theta per chain stage and
    a ladder per chain stage; theta must match levels along its ladder, the
    new blocks at ladder steps are patched to follow theta, and the chain
    generators are mapped by the downward recursion.
    """
    mu = witness.level
    if nu <= mu:
        raise EquivalenceError("the target level must lie above the witness level")
    if nu + 1 >= f.length:
        raise EquivalenceError("level exceeds the filtrations")
    patch_data = patch_data or {}
    build: Optional[PairedBuild] = patch_data.get("build")
    thetas: Dict[int, IntMatrix] = patch_data.get("theta", {})
    ladders: Dict[int, Ladder] = patch_data.get("ladders", {})

    if not (_prefix_coordinates(f, f.length - 1) and _prefix_coordinates(g, g.length - 1)):
        raise EquivalenceError("extension requires prefix-coordinate filtrations")

    # Every chain stage crossed needs its patch isomorphism and ladder.
    chain_stages = [
        s for s in range(mu + 1, nu + 1)
        if f.labels[s] == E1 and f.members[s + 1].rows > f.members[s].rows
    ]
    for delta in chain_stages:
        if build is None or delta not in build.chains:
            raise EquivalenceError(f"chain stage {delta} needs build patch data")
        theta = thetas.get(delta)
        if theta is None:
            raise EquivalenceError(f"chain stage {delta} needs a patch isomorphism")
        ladder = ladders.get(delta)
        if ladder is None:
            raise EquivalenceError(f"chain stage {delta} needs a ladder")
        excluded = frozenset(i for i, kind in enumerate(build.labels) if kind != FREE)
        ladder.validate(excluded)
        th = Homomorphism(build.group(0, delta + 1), build.group(1, delta + 1), theta)
        for step in ladder.steps:
            for lv in (step, step + 1):
                imgs = [list(th.apply(row[: th.source.gens])) for row in f.members[lv].data]
                sub = Subgroup(g.ambient, IntMatrix([r + [0] * (g.ambient.gens - len(r)) for r in imgs]) if imgs else IntMatrix.zeros(0, g.ambient.gens))
                tgt = g.subgroup(lv)
                ok = all(ab.subgroup_membership(tgt, r) for r in sub.generators.data) and all(
                    ab.subgroup_membership(sub, r) for r in tgt.generators.data
                )
                if not ok:
                    raise EquivalenceError(
                        f"patch isomorphism does not match levels at ladder step {step}"
                    )

    rows = [list(r) for r in witness.hom.matrix.data]
    for s in range(mu + 1, nu + 1):
        n_lo = f.members[s].rows
        n_hi = f.members[s + 1].rows
        if len(rows) != n_lo:
            raise EquivalenceError("witness rows out of step with the filtration")
        if s in chain_stages:
            # Chain step: the z block follows the downward recursion, with
            # the tail pinned wherever the accumulated map already agrees
            # with the chain's companion images.
            chain = build.chains[s]
            top1 = build.group(1, s + 1)
            gm = IntMatrix([r + [0] * (top1.gens - len(r)) for r in rows])
            agree = [
                ab.elements_equal(top1, gm.left_apply(chain.k0[m]), build.pad(chain.k1[m], top1.gens))
                for m in range(chain.length)
            ]
            n_prime = chain.length
            while n_prime > 0 and agree[n_prime - 1]:
                n_prime -= 1
            ext = extend_over_zchain(build, s, gm, n_prime)
            rows = [list(r) for r in ext.data]
        else:
            block = n_hi - n_lo
            for j in range(block):
                vec = [0] * n_hi
                vec[n_lo + j] = 1
                # At a ladder step of a pending chain, follow the patch map.
                for delta in chain_stages:
                    if s in ladders[delta].steps and thetas[delta].rows > n_lo + j:
                        th_row = thetas[delta].row(n_lo + j)
                        if any(th_row[n_hi:]):
                            raise EquivalenceError("patch map is not in prefix form at a ladder step")
                        vec = list(th_row[:n_hi])
                        break
                rows.append(vec)
            rows = [r + [0] * (n_hi - len(r)) for r in rows]
    src = _prefix_presentation(f, nu + 1)
    tgt = _prefix_presentation(g, nu + 1)
    rows = [r[: tgt.gens] + [0] * max(0, tgt.gens - len(r)) for r in rows]
    hom = Homomorphism(src, tgt, IntMatrix(rows) if rows else IntMatrix.zeros(0, tgt.gens))
    out = LevelIso(hom, nu)
    if not is_level_preserving(hom, f, g, nu):
        raise EquivalenceError("extension failed to stay level-preserving")
    return out
