"""Finitely presented abelian groups.

A group is presented by a generator count and an integer relation matrix
(each row is one relation among the generators).  Elements are coefficient
row vectors; equality of elements is equality of cosets, decided exactly
against the relation lattice.  Classification goes through the Smith normal
form of the relation matrix, which also supplies a coordinate system
("diagonal coordinates") in which the group is a direct sum of cyclic
factors.  That coordinate system backs most operations here: membership,
heights, orders, enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence, Tuple

from .zlinalg import (
    IntMatrix,
    express_in_rows,
    hnf,
    left_kernel,
    snf,
    unimodular_inverse,
)

INFINITE = math.inf

Element = Tuple[int, ...]


@dataclass(frozen=True)
class Presentation:
    """A finitely presented abelian group: Z^gens modulo the relation rows."""

    gens: int
    relations: IntMatrix

    def __post_init__(self):
        if self.gens < 0:
            raise ValueError("negative generator count")
        if self.relations.rows and self.relations.cols != self.gens:
            raise ValueError("relation width does not match generator count")

    @classmethod
    def free(cls, rank: int) -> "Presentation":
        return cls(rank, IntMatrix.zeros(0, rank))

    @classmethod
    def cyclic(cls, n: int) -> "Presentation":
        return cls(1, IntMatrix([[n]]))

    @classmethod
    def direct_sum_of_cyclics(cls, orders: Sequence[int]) -> "Presentation":
        """Z/n1 + Z/n2 + ...; an order of 0 contributes a free factor."""
        n = len(orders)
        rows = [[orders[i] if j == i else 0 for j in range(n)] for i in range(n) if orders[i]]
        return cls(n, IntMatrix(rows) if rows else IntMatrix.zeros(0, n))

    def zero(self) -> Element:
        return (0,) * self.gens

    def element(self, coeffs: Iterable[int]) -> Element:
        v = tuple(int(c) for c in coeffs)
        if len(v) != self.gens:
            raise ValueError(f"element has {len(v)} coordinates, expected {self.gens}")
        return v


@dataclass(frozen=True)
class Subgroup:
    """A finitely generated subgroup of an ambient presented group."""

    ambient: Presentation
    generators: IntMatrix

    def __post_init__(self):
        if self.generators.rows and self.generators.cols != self.ambient.gens:
            raise ValueError("subgroup generators do not live in the ambient group")

    @classmethod
    def spanned_by(cls, ambient: Presentation, vectors: Sequence[Sequence[int]]) -> "Subgroup":
        rows = [list(v) for v in vectors]
        return cls(ambient, IntMatrix(rows) if rows else IntMatrix.zeros(0, ambient.gens))

    @classmethod
    def trivial(cls, ambient: Presentation) -> "Subgroup":
        return cls(ambient, IntMatrix.zeros(0, ambient.gens))


@dataclass(frozen=True)
class Homomorphism:
    """A homomorphism given by generator images: row i is the image of gen i."""

    source: Presentation
    target: Presentation
    matrix: IntMatrix

    def __post_init__(self):
        if self.matrix.rows != self.source.gens:
            raise ValueError("matrix must have one row per source generator")
        if self.matrix.rows and self.matrix.cols != self.target.gens:
            raise ValueError("matrix width must match target generator count")

    def apply(self, x: Sequence[int]) -> Element:
        if len(x) != self.source.gens:
            raise ValueError("element does not live in the source group")
        if self.source.gens == 0:
            return (0,) * self.target.gens
        return self.matrix.left_apply(x)

    def is_valid(self) -> bool:
        """Every source relation must map to a relation of the target."""
        for row in self.source.relations.data:
            if not is_zero(self.target, self.matrix.left_apply(row)):
                return False
        return True

    def then(self, other: "Homomorphism") -> "Homomorphism":
        if self.target.gens != other.source.gens:
            raise ValueError("composition mismatch")
        return Homomorphism(self.source, other.target, self.matrix @ other.matrix)

    def is_isomorphism(self) -> bool:
        if not self.is_valid():
            return False
        # Surjective: every target generator is hit modulo relations.
        stacked = self.matrix.vstack(self.target.relations)
        for j in range(self.target.gens):
            e = [1 if i == j else 0 for i in range(self.target.gens)]
            if express_in_rows(stacked, e) is None:
                return False
        # Injective: anything mapped to zero was already zero.
        ker = kernel_lattice(self.target, self.matrix.data)
        for row in ker.data:
            if not is_zero(self.source, row):
                return False
        return True

    @classmethod
    def identity(cls, g: Presentation) -> "Homomorphism":
        return cls(g, g, IntMatrix.identity(g.gens))


# -- classification ---------------------------------------------------------


@lru_cache(maxsize=None)
def _diag_data(g: Presentation):
    """SNF-derived coordinates: (moduli, V, Vinv).

    In coordinates y = x @ V the relation lattice becomes the span of
    moduli[i] * e_i, so two elements are equal iff their y-coordinates agree
    modulo the moduli (modulus 0 meaning exact equality).
    """
    dec = snf(g.relations) if g.relations.rows else None
    n = g.gens
    if dec is None:
        return ((0,) * n, IntMatrix.identity(n), IntMatrix.identity(n))
    diag = dec.diagonal()
    moduli = tuple(diag[i] if i < len(diag) else 0 for i in range(n))
    v = dec.V
    return (moduli, v, unimodular_inverse(v))


def diag_coords(g: Presentation, x: Sequence[int]) -> tuple:
    """Coordinates of x in the cyclic decomposition (row convention y = x @ V)."""
    _, v, _ = _diag_data(g)
    return v.left_apply(x) if g.gens else ()


def reduced_coords(g: Presentation, x: Sequence[int]) -> tuple:
    """Canonical form of x in diagonal coordinates (reduced mod the moduli)."""
    moduli, v, _ = _diag_data(g)
    y = v.left_apply(x) if g.gens else ()
    return tuple(c % m if m else c for c, m in zip(y, moduli))


def is_zero(g: Presentation, x: Sequence[int]) -> bool:
    return all(c == 0 for c in reduced_coords(g, x))


def elements_equal(g: Presentation, x: Sequence[int], y: Sequence[int]) -> bool:
    diff = tuple(a - b for a, b in zip(x, y))
    return is_zero(g, diff)


def invariant_factors(g: Presentation) -> tuple:
    """(free_rank, torsion) with torsion a divisibility chain of ints >= 2."""
    moduli, _, _ = _diag_data(g)
    free_rank = sum(1 for m in moduli if m == 0)
    torsion = tuple(m for m in moduli if m >= 2)
    return free_rank, torsion


def are_isomorphic(g: Presentation, h: Presentation) -> bool:
    return invariant_factors(g) == invariant_factors(h)


def dual_rank(g: Presentation) -> int:
    """Rank of the group of homomorphisms into Z; equals the free rank."""
    return invariant_factors(g)[0]


def group_order(g: Presentation) -> Optional[int]:
    """Order of the group, or None when infinite."""
    free_rank, torsion = invariant_factors(g)
    if free_rank:
        return None
    return math.prod(torsion) if torsion else 1


def enumerate_elements(g: Presentation, max_order: int = 10000) -> Optional[list]:
    """All elements as coefficient vectors, or None when the group is too big.

    The order of the listing is deterministic (lexicographic in diagonal
    coordinates, zero first).
    """
    order = group_order(g)
    if order is None or order > max_order:
        return None
    moduli, _, vinv = _diag_data(g)
    out = []
    y = [0] * g.gens
    radices = [m if m else 1 for m in moduli]
    total = order
    for _ in range(total):
        out.append(vinv.left_apply(y) if g.gens else ())
        for i in range(g.gens - 1, -1, -1):
            if radices[i] == 1:
                continue
            y[i] += 1
            if y[i] < radices[i]:
                break
            y[i] = 0
    return out


def element_order(g: Presentation, x: Sequence[int]) -> int:
    """Order of x, with 0 meaning infinite order."""
    moduli, v, _ = _diag_data(g)
    y = v.left_apply(x) if g.gens else ()
    order = 1
    for c, m in zip(y, moduli):
        if m == 0:
            if c != 0:
                return 0
        else:
            c %= m
            order = math.lcm(order, m // math.gcd(m, c))
    return order


# -- subgroups, quotients, purity -------------------------------------------


def subgroup_membership(s: Subgroup, x: Sequence[int]) -> bool:
    if len(x) != s.ambient.gens:
        raise ValueError("element does not live in the ambient group")
    stacked = s.generators.vstack(s.ambient.relations)
    return express_in_rows(stacked, x) is not None


def subgroup_contains(outer: Subgroup, inner: Subgroup) -> bool:
    return all(subgroup_membership(outer, row) for row in inner.generators.data)


def quotient(g: Presentation, s: Subgroup) -> Presentation:
    """G/S, presented by appending the subgroup generators as relations."""
    if s.ambient != g:
        raise ValueError("subgroup does not live in this group")
    return Presentation(g.gens, g.relations.vstack(s.generators))


def kernel_lattice(g: Presentation, vectors: Sequence[Sequence[int]]) -> IntMatrix:
    """All integer relations satisfied by a tuple of elements of G.

    Returns the lattice {c : sum_i c_i * vectors_i = 0 in G} as canonical
    HNF rows.
    """
    k = len(vectors)
    if k == 0:
        return IntMatrix.zeros(0, 0)
    stacked = IntMatrix([list(v) for v in vectors]).vstack(g.relations)
    ker = left_kernel(stacked)
    proj = [row[:k] for row in ker.data]
    if not proj:
        return IntMatrix.zeros(0, k)
    canon, _ = hnf(IntMatrix(proj))
    keep = [r for r in canon.data if any(r)]
    return IntMatrix(keep) if keep else IntMatrix.zeros(0, k)


def subquotient(g: Presentation, top: Subgroup, bottom: Subgroup) -> Presentation:
    """(top + relations)/(bottom + relations), presented on top's generators."""
    if top.ambient != g or bottom.ambient != g:
        raise ValueError("subgroups must live in the given group")
    t = top.generators.rows
    if t == 0:
        return Presentation(0, IntMatrix.zeros(0, 0))
    stacked = top.generators.vstack(bottom.generators).vstack(g.relations)
    ker = left_kernel(stacked)
    rows = [row[:t] for row in ker.data]
    rel = IntMatrix(rows) if rows else IntMatrix.zeros(0, t)
    return Presentation(t, rel)


def purity_check(g: Presentation, s: Subgroup) -> bool:
    """Purity of S in a torsion-free ambient group: the quotient is torsion-free."""
    if invariant_factors(g)[1]:
        raise ValueError("purity check requires a torsion-free ambient group")
    return not invariant_factors(quotient(g, s))[1]


def _free_coordinates(g: Presentation):
    """Isomorphism of a torsion-free G with Z^rank, as (project, embed) data.

    project: ambient coeff vector -> rank-length vector
    embed:   rank-length vector -> ambient coeff vector
    """
    moduli, v, vinv = _diag_data(g)
    free_idx = [i for i, m in enumerate(moduli) if m == 0]
    if any(m >= 2 for m in moduli):
        raise ValueError("group has torsion")

    def project(x):
        y = v.left_apply(x)
        return tuple(y[i] for i in free_idx)

    def embed(z):
        y = [0] * g.gens
        for i, c in zip(free_idx, z):
            y[i] = c
        return vinv.left_apply(y)

    return len(free_idx), project, embed


def summand_complement(g: Presentation, s: Subgroup) -> Optional[Subgroup]:
    """A complement of S in G when S is a direct summand, else None.

    G must be free (torsion-free finitely generated).  The construction works
    in free coordinates: an SNF basis change exhibits S as the span of
    d_i * w_i for a basis (w_i); the complement is spanned by the unused w_i,
    and exists exactly when every nonzero d_i is 1.
    """
    free_rank, torsion = invariant_factors(g)
    if torsion:
        raise ValueError("ambient group is not free")
    rank, project, embed = _free_coordinates(g)
    a = IntMatrix([list(project(row)) for row in s.generators.data]) if s.generators.rows else IntMatrix.zeros(0, rank)
    if a.rows == 0:
        basis = IntMatrix.identity(rank)
        return Subgroup(g, IntMatrix([list(embed(row)) for row in basis.data]))
    dec = snf(a)
    diag = dec.diagonal()
    if any(d not in (0, 1) for d in diag):
        return None
    vinv = unimodular_inverse(dec.V)
    used = sum(1 for d in diag if d == 1)
    comp_rows = [vinv.row(i) for i in range(rank) if i >= len(diag) or diag[i] == 0]
    # Verify: S-basis plus complement must be a basis of Z^rank.
    s_basis_rows = [vinv.row(i) for i in range(used)]
    if s_basis_rows or comp_rows:
        full = IntMatrix(s_basis_rows + comp_rows)
        if full.rows != rank or not full.is_unimodular():
            return None
    return Subgroup(g, IntMatrix([list(embed(row)) for row in comp_rows]) if comp_rows else IntMatrix.zeros(0, g.gens))


def is_direct_summand(g: Presentation, s: Subgroup) -> bool:
    """Whether S is a direct summand of a free ambient group.

    Decided by actually constructing a complement, which keeps this routine
    independent of the purity route (torsion of the quotient).
    """
    return summand_complement(g, s) is not None


# -- heights -----------------------------------------------------------------


def _is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p < 4:
        return True
    if p % 2 == 0:
        return False
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


def _vp(n: int, p: int) -> int:
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k


def p_height(g: Presentation, s: Subgroup, x: Sequence[int], p: int):
    """Largest n with x in p^n * G + S, or INFINITE when unbounded.

    Computed in the diagonal coordinates of G/S: the height of a cyclic
    component c in Z/m at p is v_p(c) as long as that is below v_p(m), and
    infinite once c lies in the maximal p-divisible part.
    """
    if not _is_prime(p):
        raise ValueError(f"{p} is not prime")
    q = quotient(g, s)
    moduli, v, _ = _diag_data(q)
    y = v.left_apply(x) if q.gens else ()
    height = INFINITE
    for c, m in zip(y, moduli):
        if m == 0:
            comp = INFINITE if c == 0 else _vp(c, p)
        else:
            a = _vp(m, p)
            c %= m
            comp = INFINITE if c % (p ** a) == 0 else _vp(c, p)
        if comp < height:
            height = comp
    return height


# -- partial isomorphisms ----------------------------------------------------


def is_partial_iso(a: Presentation, b: Presentation, a_tuple: Sequence[Sequence[int]], b_tuple: Sequence[Sequence[int]]) -> bool:
    """Whether a_i -> b_i preserves all integer linear relations, both ways."""
    if len(a_tuple) != len(b_tuple):
        raise ValueError("tuples have different lengths")
    return kernel_lattice(a, a_tuple) == kernel_lattice(b, b_tuple)


# -- dual-image confinement (finite rendering) --------------------------------


@dataclass(frozen=True)
class SteinVerdict:
    """Outcome of the confinement check.

    ``failed_hypotheses`` lists which of the two finite hypotheses fail
    ("quotient-not-finite", "quotient-not-torsion-free"); when both hold the
    conclusion is forced, and ``conclusion_holds`` reports it either way.
    """

    failed_hypotheses: tuple
    conclusion_holds: bool

    @property
    def hypotheses_hold(self) -> bool:
        return not self.failed_hypotheses

    @property
    def ok(self) -> bool:
        return self.conclusion_holds or not self.hypotheses_hold


def stein_check(
    theta: Homomorphism,
    a_sub: Subgroup,
    b_sub: Subgroup,
    a_primed: Subgroup,
    b_primed: Subgroup,
    c_primed: Subgroup,
) -> SteinVerdict:
    """Confinement of images: with A <= B in the source, A' <= B' <= C' in the
    target, theta[A] <= A', B/A finite and C'/B' torsion-free, the image of B
    must land in B'.

    Violated nesting or setup preconditions raise; the two finiteness-style
    hypotheses are reported in the verdict rather than raised, so a caller can
    exercise instances where they fail.
    """
    src, tgt = theta.source, theta.target
    if a_sub.ambient != src or b_sub.ambient != src:
        raise ValueError("A and B must be subgroups of the source")
    if any(s.ambient != tgt for s in (a_primed, b_primed, c_primed)):
        raise ValueError("A', B', C' must be subgroups of the target")
    if not subgroup_contains(b_sub, a_sub):
        raise ValueError("nesting violated: A is not contained in B")
    if not subgroup_contains(b_primed, a_primed) or not subgroup_contains(c_primed, b_primed):
        raise ValueError("nesting violated: need A' <= B' <= C'")
    for row in a_sub.generators.data:
        if not subgroup_membership(a_primed, theta.apply(row)):
            raise ValueError("setup violated: theta[A] is not contained in A'")
    for row in b_sub.generators.data:
        if not subgroup_membership(c_primed, theta.apply(row)):
            raise ValueError("setup violated: theta[B] is not contained in C'")

    failed = []
    free_rank, _ = invariant_factors(subquotient(src, b_sub, a_sub))
    if free_rank != 0:
        failed.append("quotient-not-finite")
    if invariant_factors(subquotient(tgt, c_primed, b_primed))[1]:
        failed.append("quotient-not-torsion-free")

    conclusion = all(subgroup_membership(b_primed, theta.apply(row)) for row in b_sub.generators.data)
    return SteinVerdict(tuple(failed), conclusion)
