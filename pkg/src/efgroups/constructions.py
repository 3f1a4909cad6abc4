"""Finite staged construction of a parallel pair of groups.

A build processes a plan of labeled stages, indexed by the nodes of a tree
whose order refines the stage order.  Both sides grow the same generator
list; they differ only in the relations installed at obstruction stages.

Stage kinds:

* ``free``  adjoins two fresh generators x[mu,0], x[mu,1];
* ``e0``    adjoins a divisibility gadget u[s,0..N], v[s,0..N-1] and records
            the derived elements w[s,n] = 2*u[s,n+1] - u[s,n] in a registry of
            cells keyed by finite antichains (the stage's scripted cells);
* ``e1``    consults a scripted candidate isomorphism h; when enough
            registered w's witness that h cannot agree with the coherent
            family, it installs a divisibility chain z[d,0..N] with relations
            p_n * z[d,n+1] = z[d,n] + k[d,n] on side 0 and the family images
            of the k's on side 1, choosing the k's and primes so that h
            provably does not extend over the chain.

Alongside the groups, the build maintains the coherent family of stage
isomorphisms f_nu (side 0 to side 1) indexed by the tree, from which the
game strategies are read off.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import abgroup as ab
from .abgroup import Homomorphism, Presentation, Subgroup
from .trees import Ladder, Tree, antichain_chain_cover, is_antichain, minimal_antichain
from .zlinalg import IntMatrix, echelon_of, echelon_reduce, express_in_rows

FREE = "free"
E0 = "e0"
E1 = "e1"


class BuildError(ValueError):
    pass


class KWitnessError(BuildError):
    """No admissible k element; reports which selection case lacked a witness."""

    def __init__(self, case: str, detail: str):
        self.case = case
        super().__init__(f"selection case {case}: {detail}")


@dataclass(frozen=True)
class StageLabel:
    index: int
    kind: str

    def __post_init__(self):
        if self.kind not in (FREE, E0, E1):
            raise BuildError(f"unknown stage kind {self.kind!r}")
        if self.index == 0 and self.kind != FREE:
            raise BuildError("stage 0 must be free")


@dataclass(frozen=True)
class GuessScript:
    """Deterministic stand-in for the guessing device.

    ``upsilon`` assigns each e0 stage its sequence of antichain cells; the
    cells must be nonempty, pairwise disjoint, lie below the stage, and have
    an antichain as union.  ``predictions`` assigns each e1 stage a candidate
    isomorphism: either an explicit matrix or the string "family" meaning the
    build's own coherent map at that stage.
    """

    upsilon: Dict[int, tuple] = field(default_factory=dict)
    predictions: Dict[int, object] = field(default_factory=dict)

    def validate(self, tree: Tree, labels: Sequence[str]):
        for sigma, cells in self.upsilon.items():
            if labels[sigma] != E0:
                raise BuildError(f"upsilon given for stage {sigma}, which is not e0")
            union = set()
            for cell in cells:
                if not cell:
                    raise BuildError(f"stage {sigma}: empty antichain cell")
                if any(t >= sigma for t in cell):
                    raise BuildError(f"stage {sigma}: cell {set(cell)} not below the stage")
                if union & set(cell):
                    raise BuildError(f"stage {sigma}: cells must be pairwise disjoint")
                union |= set(cell)
            if not is_antichain(tree, union):
                raise BuildError(f"stage {sigma}: union of cells is not an antichain")
        for delta, pred in self.predictions.items():
            if labels[delta] != E1:
                raise BuildError(f"prediction given for stage {delta}, which is not e1")
            if not (pred == "family" or isinstance(pred, IntMatrix)):
                raise BuildError("prediction must be a matrix or the string 'family'")


class WRegistry:
    """Cells of registered w elements, keyed by (visible-from stage, antichain)."""

    def __init__(self, events: tuple = ()):
        # events: ((sigma, n, cell), ...) in registration order
        self.events = events

    def register(self, sigma: int, n: int, cell: frozenset) -> "WRegistry":
        return WRegistry(self.events + ((sigma, n, cell),))

    def at(self, stage: int, cell: frozenset) -> tuple:
        """Names w[s,n] visible at `stage` in the given cell (s < stage)."""
        return tuple(("w", s, n) for (s, n, c) in self.events if c == cell and s < stage)

    def cells(self, stage: int) -> tuple:
        out = []
        for (s, n, c) in self.events:
            if s < stage and c not in out:
                out.append(c)
        return tuple(out)

    def members(self, stage: int) -> tuple:
        return tuple(("w", s, n) for (s, n, c) in self.events if s < stage)


@dataclass(frozen=True)
class ObstructionBounds:
    """Finite search box for extension hypotheses h(z0) = d * z_r + g."""

    d_bound: int = 5
    ball_radius: int = 2
    chain_length: Optional[int] = None
    trigger_depth: int = 0


@dataclass(frozen=True)
class KSpec:
    """Symbolic form of a chain element: x[mu,j] + sign * xi."""

    x_name: tuple
    sign: int = 0
    xi_name: Optional[tuple] = None


@dataclass
class ChainData:
    beta: int
    cells: tuple              # antichain cells Theta_n used at this stage
    kspecs: tuple             # KSpec per step
    k0: tuple                 # side-0 vectors (width = gens at stage delta)
    k1: tuple                 # side-1 images under the cell maps
    primes: tuple
    gammas: tuple             # k[n] lives in G[gamma_n + 2], fresh over G[gamma_n + 1]

    @property
    def length(self) -> int:
        return len(self.primes)


class PairedBuild:
    """Two parallel staged groups over one generator list.

    Stages are processed strictly in order; ``stage_gens[s]`` is the
    generator count of the stage-s group and relations added at a stage only
    involve generators that exist by then, so every stage group is the
    prefix-coordinate subgroup of every later one.
    """

    def __init__(self, tree: Tree, labels: Sequence[str], script: GuessScript,
                 truncation: int, bounds: ObstructionBounds = ObstructionBounds()):
        if tree.node_count != len(labels):
            raise BuildError("one stage label per tree node is required")
        if not tree.is_ordinal_ordered():
            raise BuildError("the index tree must refine the stage order")
        if labels and labels[0] != FREE:
            raise BuildError("stage 0 must be free")
        if truncation < 1:
            raise BuildError("truncation must be at least 1")
        script.validate(tree, labels)
        self.tree = tree
        self.labels = tuple(labels)
        self.script = script
        self.truncation = truncation
        self.bounds = bounds
        self.gen_names: List[tuple] = []
        self.names: Dict[tuple, int] = {}
        self.rel = ([], [])           # per side: list of relation rows (lists)
        self.stage_gens = [0]
        self.stage_rels = [[0], [0]]
        self.wreg = WRegistry()
        self.gadget_len: Dict[int, int] = {}
        self.chains: Dict[int, ChainData] = {}
        self.family: List[IntMatrix] = []
        self.next_stage = 0

    # -- bookkeeping -------------------------------------------------------

    @property
    def stage_count(self) -> int:
        return len(self.labels)

    def stages(self, side: int = 0) -> list:
        """The chain as (label, group-after-stage) pairs; embeddings are
        prefix-coordinate inclusions."""
        return [
            (StageLabel(i, kind), self.group(side, i + 1))
            for i, kind in enumerate(self.labels)
        ]

    @property
    def gens(self) -> int:
        return len(self.gen_names)

    def _add_gen(self, name: tuple) -> int:
        self.names[name] = len(self.gen_names)
        self.gen_names.append(name)
        for side in (0, 1):
            for row in self.rel[side]:
                row.append(0)
        return self.names[name]

    def _add_relation(self, side: int, row: Sequence[int]):
        self.rel[side].append(list(row) + [0] * (self.gens - len(row)))

    def _close_stage(self):
        self.stage_gens.append(self.gens)
        self.stage_rels[0].append(len(self.rel[0]))
        self.stage_rels[1].append(len(self.rel[1]))
        self._extend_family()
        self.next_stage += 1

    def gen_vec(self, name: tuple, width: Optional[int] = None) -> tuple:
        idx = self.names[name]
        w = self.gens if width is None else width
        return tuple(1 if i == idx else 0 for i in range(w))

    def w_vec(self, sigma: int, n: int, width: Optional[int] = None) -> tuple:
        w = self.gens if width is None else width
        lo = self.names[("u", sigma, n)]
        hi = self.names[("u", sigma, n + 1)]
        return tuple(2 if i == hi else (-1 if i == lo else 0) for i in range(w))

    def name_vec(self, name: tuple, width: Optional[int] = None) -> tuple:
        if name[0] == "w":
            return self.w_vec(name[1], name[2], width)
        return self.gen_vec(name, width)

    def element(self, name: tuple, width: Optional[int] = None) -> tuple:
        """Resolve any registered symbol, including derived chain elements.

        Supports the generator names plus ("w", s, n), ("k", d, n) and
        ("xi", d, n) for the chain constituents.
        """
        if name[0] == "k":
            _, delta, n = name
            return self.pad(self.chains[delta].k0[n], width)
        if name[0] == "xi":
            _, delta, n = name
            spec = self.chains[delta].kspecs[n]
            w = self.gens if width is None else width
            if spec is None or not spec.sign:
                return (0,) * w
            return self.name_vec(spec.xi_name, width)
        return self.name_vec(name, width)

    def group(self, side: int, stage: Optional[int] = None) -> Presentation:
        s = self.next_stage if stage is None else stage
        n = self.stage_gens[s]
        rows = [r[:n] for r in self.rel[side][: self.stage_rels[side][s]]]
        return Presentation(n, IntMatrix(rows) if rows else IntMatrix.zeros(0, n))

    def stage_subgroup(self, side: int, stage: int) -> Subgroup:
        top = self.group(side)
        n = self.stage_gens[stage]
        rows = [[1 if j == i else 0 for j in range(top.gens)] for i in range(n)]
        return Subgroup(top, IntMatrix(rows) if rows else IntMatrix.zeros(0, top.gens))

    def pad(self, vec: Sequence[int], width: Optional[int] = None) -> tuple:
        w = self.gens if width is None else width
        v = tuple(vec)
        return v + (0,) * (w - len(v))

    # -- the coherent family -----------------------------------------------

    def _gadget_cut(self, sigma: int, nu: int) -> int:
        """Largest cell index of stage sigma meeting the branch below nu, else -1."""
        cells = self.script.upsilon[sigma]
        branch = self.tree.below_or_equal(nu)
        cut = -1
        for n in range(self.gadget_len[sigma]):
            if n < len(cells) and cells[n] & branch:
                cut = max(cut, n)
        return cut

    def _extend_family(self):
        """f_nu for the stage just closed; rows are images of side-0 generators."""
        nu = self.next_stage
        n = self.stage_gens[nu + 1]
        rows: List[list] = []

        def img(name):
            return rows[self.names[name]]

        for idx in range(n):
            name = self.gen_names[idx]
            kind = name[0]
            if kind == "x":
                rows.append(list(self.gen_vec(name, n)))
            elif kind == "u":
                _, sigma, j = name
                cut = self._gadget_cut(sigma, nu)
                if j > cut:
                    rows.append(list(self.gen_vec(name, n)))
                else:
                    # filled in the second pass: u images recurse downward
                    rows.append(None)
            elif kind == "v":
                _, sigma, j = name
                cut = self._gadget_cut(sigma, nu)
                if j <= cut:
                    rows.append(list(self.gen_vec(("u", sigma, j), n)))
                else:
                    rows.append(list(self.gen_vec(name, n)))
            elif kind == "z":
                rows.append(None)  # second pass
            else:
                raise BuildError(f"unexpected generator {name}")

        # Second pass: u images below a cut, downward from the cut.
        for sigma, glen in self.gadget_len.items():
            if self.names.get(("u", sigma, 0), n) >= n:
                continue
            cut = self._gadget_cut(sigma, nu)
            for j in range(cut, -1, -1):
                above = img(("u", sigma, j + 1))
                v1 = self.gen_vec(("v", sigma, j), n)
                rows[self.names[("u", sigma, j)]] = [2 * a - b for a, b in zip(above, v1)]

        # Chain blocks: z images need the accumulated map on the k elements.
        for delta, chain in self.chains.items():
            if self.names.get(("z", delta, 0), n) >= n:
                continue
            g_delta = self.stage_gens[delta]

            def apply_map(vec):
                out = [0] * n
                for i, c in enumerate(vec[:g_delta]):
                    if c:
                        r = rows[i]
                        for jj in range(n):
                            out[jj] += c * r[jj]
                return out

            nn = chain.length
            g1 = self.group(1, nu + 1)
            agree = [
                ab.elements_equal(g1, tuple(apply_map(chain.k0[m])), self.pad(chain.k1[m], n))
                for m in range(nn)
            ]
            n_prime = nn
            while n_prime > 0 and agree[n_prime - 1]:
                n_prime -= 1
            for m in range(n_prime, nn + 1):
                rows[self.names[("z", delta, m)]] = list(self.gen_vec(("z", delta, m), n))
            for m in range(n_prime - 1, -1, -1):
                above = img(("z", delta, m + 1))
                gk = apply_map(chain.k0[m])
                p = chain.primes[m]
                rows[self.names[("z", delta, m)]] = [p * a - b for a, b in zip(above, gk)]

        self.family.append(IntMatrix(rows))

    def family_hom(self, nu: int) -> Homomorphism:
        return Homomorphism(self.group(0, nu + 1), self.group(1, nu + 1), self.family[nu])

    def family_dict(self) -> dict:
        return {nu: self.family_hom(nu) for nu in range(len(self.family))}

    # -- cell maps (x |-> x, registered w |-> v on a fixed cell) -------------

    def cell_map_image(self, delta: int, cell: frozenset, vec: Sequence[int],
                       kspec: Optional[KSpec] = None) -> Optional[tuple]:
        """Image of vec under the partial map attached to a cell at stage delta.

        Defined on the span of the x generators below delta and the w's
        registered in the cell; x goes to x, w[s,n] to v[s,n].  Returns None
        when vec is outside the domain.  When the symbolic form of vec is
        known (a KSpec) the image is computed directly from it.
        """
        g_delta = self.stage_gens[delta]
        if kspec is not None:
            img = list(self.gen_vec(kspec.x_name, g_delta))
            if kspec.sign:
                xi = kspec.xi_name
                target = ("v", xi[1], xi[2]) if xi[0] == "w" else xi
                tv = self.name_vec(target, g_delta)
                img = [a + kspec.sign * b for a, b in zip(img, tv)]
            return tuple(img)
        dom_rows = []
        img_rows = []
        for name, idx in self.names.items():
            if name[0] == "x" and idx < g_delta and name[1] < delta:
                dom_rows.append(self.gen_vec(name, g_delta))
                img_rows.append(self.gen_vec(name, g_delta))
        for wname in self.wreg.at(delta, cell):
            _, s, m = wname
            dom_rows.append(self.w_vec(s, m, g_delta))
            img_rows.append(self.gen_vec(("v", s, m), g_delta))
        if not dom_rows:
            return None
        coeffs = express_in_rows(IntMatrix(list(dom_rows)), self.pad(vec, g_delta))
        if coeffs is None:
            return None
        out = [0] * g_delta
        for c, row in zip(coeffs, img_rows):
            if c:
                for i, x in enumerate(row):
                    out[i] += c * x
        return tuple(out)


# -- stage operations ----------------------------------------------------------


def free_step(build: PairedBuild, mu: int) -> PairedBuild:
    """Adjoin the two fresh free generators of a free stage."""
    if build.next_stage != mu:
        raise BuildError(f"stages must be processed in order (expected {build.next_stage})")
    if build.labels[mu] != FREE:
        raise BuildError(f"stage {mu} is labeled {build.labels[mu]}, not free")
    build._add_gen(("x", mu, 0))
    build._add_gen(("x", mu, 1))
    build._close_stage()
    return build


def update_w_registry(reg: WRegistry, sigma: int, script: GuessScript, count: int,
                      tree: Tree) -> WRegistry:
    """Register w[sigma,n] into the scripted cell Theta_n, for n < count."""
    cells = script.upsilon.get(sigma)
    if cells is None:
        raise BuildError(f"script provides no cells for stage {sigma}")
    if len(cells) < count:
        raise BuildError(f"stage {sigma}: script provides {len(cells)} cells, need {count}")
    for n in range(count):
        cell = frozenset(cells[n])
        if not cell or any(t >= sigma for t in cell) or not is_antichain(tree, cell):
            raise BuildError(f"stage {sigma}: cell {set(cell)} is not an antichain below the stage")
        reg = reg.register(sigma, n, cell)
    return reg


def uv_gadget(build: PairedBuild, sigma: int, length: Optional[int] = None) -> PairedBuild:
    """Adjoin the divisibility gadget of an e0 stage and register its w's."""
    if build.next_stage != sigma:
        raise BuildError(f"stages must be processed in order (expected {build.next_stage})")
    if build.labels[sigma] != E0:
        raise BuildError(f"stage {sigma} is labeled {build.labels[sigma]}, not e0")
    n = build.truncation if length is None else length
    if n < 1:
        raise BuildError("gadget length must be at least 1")
    build.wreg = update_w_registry(build.wreg, sigma, build.script, n, build.tree)
    for j in range(n + 1):
        build._add_gen(("u", sigma, j))
    for j in range(n):
        build._add_gen(("v", sigma, j))
    build.gadget_len[sigma] = n
    build._close_stage()
    return build


def select_prime(target: Sequence[int], floor: int) -> int:
    """Smallest prime above the floor not dividing the target of a free group."""
    content = 0
    for c in target:
        content = math.gcd(content, c)
    if content == 0:
        raise BuildError("every prime divides zero; the target must be nonzero")
    p = max(2, floor + 1)
    while True:
        if ab._is_prime(p) and content % p:
            return p
        p += 1


def _prime_avoiding(contents: Sequence[int], floor: int) -> int:
    """Smallest prime above the floor dividing none of the given contents."""
    p = max(2, floor + 1)
    while True:
        if ab._is_prime(p) and all(c % p for c in contents if c):
            return p
        p += 1


def _content(vec) -> int:
    g = 0
    for c in vec:
        g = math.gcd(g, c)
    return g


def select_k(build: PairedBuild, delta: int, h: IntMatrix, cell: frozenset,
             m: int, mp: int, y: Sequence[int], gamma: int,
             prefer: int = 0) -> Tuple[KSpec, tuple, tuple]:
    """A chain element k with m*h(k) != mp*f(k) + y, in the stated normal form.

    f is the cell map (x to x, registered w to v).  k is drawn from the free
    stage gamma+1, optionally plus or minus a witness, by cases on (y, m, mp):
    nonzero y or m != +-mp can always be met by plain x combinations; the
    resonant cases m == mp (resp. m == -mp) with y == 0 may need a registered
    w with f(w) != h(w) (resp. f(w) != -h(w)) and report which witness is
    missing otherwise.  Returns (symbolic form, side-0 vector, side-1 image).
    """
    if m == 0 or mp == 0:
        raise BuildError("m and mp must be nonzero")
    mu = gamma + 1
    if build.labels[mu] != FREE or mu >= delta:
        raise BuildError(f"stage {mu} does not carry fresh free generators below {delta}")
    g_delta = build.stage_gens[delta]
    g1 = build.group(1, delta)
    y = build.pad(y, g_delta)

    def ok(vec0, vec1):
        lhs = h.left_apply(vec0)
        rhs = tuple(mp * b + c for b, c in zip(vec1, y))
        return not ab.elements_equal(g1, tuple(m * a for a in lhs), rhs)

    x0 = KSpec(("x", mu, 0))
    x1 = KSpec(("x", mu, 1))
    diff = KSpec(("x", mu, 0), -1, ("x", mu, 1))
    summ = KSpec(("x", mu, 0), +1, ("x", mu, 1))
    y_zero = ab.is_zero(g1, y)
    if not y_zero:
        case, candidates = "i", [x0, x1, diff, summ]
    elif m != mp and m != -mp:
        case, candidates = "ii", [x0, x1, diff, summ]
    else:
        sign = +1 if m == mp else -1
        case = "iii" if sign > 0 else "iv"
        candidates = [x0, x1]
        g_below = build.stage_gens[mu]
        for wname in build.wreg.at(delta, cell):
            _, s, j = wname
            if build.names[("u", s, j + 1)] >= g_below:
                continue
            wv = build.w_vec(s, j, g_delta)
            hw = h.left_apply(wv)
            fw = build.gen_vec(("v", s, j), g_delta)
            if not ab.elements_equal(g1, tuple(sign * a for a in hw), fw):
                candidates.append(KSpec(("x", mu, 0), sign, wname))

    rotated = candidates[prefer % len(candidates):] + candidates[: prefer % len(candidates)]
    for spec in rotated:
        vec0 = list(build.gen_vec(spec.x_name, g_delta))
        if spec.sign:
            xi = build.name_vec(spec.xi_name, g_delta)
            vec0 = [a + spec.sign * b for a, b in zip(vec0, xi)]
        vec1 = build.cell_map_image(delta, cell, vec0, kspec=spec)
        if ok(vec0, vec1):
            return spec, tuple(vec0), tuple(vec1)
    if case in ("iii", "iv"):
        raise KWitnessError(case, f"no registered witness w with f(w) != {'+' if case == 'iii' else '-'}h(w) below stage {mu}")
    raise KWitnessError(case, "no fresh-generator combination satisfies the inequality")


def z_chain(build: PairedBuild, delta: int, k_list: Sequence[Sequence[int]],
            p_list: Sequence[int], k1_list: Optional[Sequence[Sequence[int]]] = None,
            chain_meta: Optional[ChainData] = None) -> PairedBuild:
    """Install the divisibility chain of an e1 stage.

    Side 0 gets relations p_n z[n+1] = z[n] + k_n; side 1 gets the same with
    the companion images k1 (defaulting to the same coefficient vectors).
    """
    if build.next_stage != delta:
        raise BuildError(f"stages must be processed in order (expected {build.next_stage})")
    if build.labels[delta] != E1:
        raise BuildError(f"stage {delta} is labeled {build.labels[delta]}, not e1")
    if len(k_list) != len(p_list):
        raise BuildError("need one prime per chain element")
    for p in p_list:
        if not ab._is_prime(p):
            raise BuildError(f"{p} is not prime")
    nsteps = len(p_list)
    g_delta = build.stage_gens[delta]
    k0 = [build.pad(k, g_delta) for k in k_list]
    k1 = [build.pad(k, g_delta) for k in (k1_list if k1_list is not None else k_list)]
    for j in range(nsteps + 1):
        build._add_gen(("z", delta, j))
    width = build.gens
    for n in range(nsteps):
        lo = build.names[("z", delta, n)]
        hi = build.names[("z", delta, n + 1)]
        for side, ks in ((0, k0), (1, k1)):
            row = [0] * width
            row[hi] = p_list[n]
            row[lo] = -1
            for i, c in enumerate(ks[n]):
                row[i] -= c
            build._add_relation(side, row)
    if chain_meta is None:
        chain_meta = ChainData(beta=0, cells=(frozenset(),) * nsteps,
                               kspecs=(None,) * nsteps, k0=tuple(k0), k1=tuple(k1),
                               primes=tuple(p_list), gammas=(delta - 2,) * nsteps)
    build.chains[delta] = chain_meta
    build._close_stage()
    return build


def _ball(width: int, radius: int):
    """Integer vectors of L1 norm <= radius, by (norm, lex) order."""
    def rec(i, rem):
        if i == width:
            yield ()
            return
        for c in range(-rem, rem + 1):
            for rest in rec(i + 1, rem - abs(c)):
                yield (c,) + rest

    vals = sorted(set(rec(0, radius)), key=lambda v: (sum(abs(c) for c in v), v))
    return vals


def enumerate_triples(build: PairedBuild, delta: int, bounds: ObstructionBounds,
                      chain_length: int) -> list:
    """The finite hypothesis box: (r, d, g) with r below the chain length."""
    g_delta = build.stage_gens[delta]
    ball = _ball(g_delta, bounds.ball_radius)
    triples = []
    for r in range(chain_length):
        for d in range(-bounds.d_bound, bounds.d_bound + 1):
            if d == 0:
                continue
            for g in ball:
                triples.append((r, d, g))
    triples.sort(key=lambda t: (t[0] + abs(t[1]) + sum(abs(c) for c in t[2]), t))
    return triples


def obstruction_trigger(build: PairedBuild, delta: int, h: IntMatrix,
                        depth: int) -> Optional[Tuple[int, tuple]]:
    """The finite analog of the chain-installation test.

    Looks for a stage beta below delta such that for both signs e and every
    cover index n up to the depth, some registered w in the n-th cover cell
    of the minimal antichain of [beta, delta) has h(w) != e*v(w).  Returns
    (beta, cover cells) or None.
    """
    g1 = build.group(1, delta)
    g_delta = build.stage_gens[delta]
    for beta in range(delta):
        anti = minimal_antichain(build.tree, beta, delta)
        if not anti:
            continue
        cells = antichain_chain_cover(anti, depth + 1)
        good = True
        for n in range(depth + 1):
            names = build.wreg.at(delta, cells[n])
            for e in (1, -1):
                witness = False
                for name in names:
                    _, s, j = name
                    hw = h.left_apply(build.w_vec(s, j, g_delta))
                    ev = tuple(e * c for c in build.gen_vec(("v", s, j), g_delta))
                    if not ab.elements_equal(g1, hw, ev):
                        witness = True
                        break
                if not witness:
                    good = False
                    break
            if not good:
                break
        if good:
            return beta, tuple(cells)
    return None


def e1_stage(build: PairedBuild, delta: int) -> PairedBuild:
    """Process an e1 stage: consult the scripted prediction, maybe install a chain."""
    if build.next_stage != delta:
        raise BuildError(f"stages must be processed in order (expected {build.next_stage})")
    if build.labels[delta] != E1:
        raise BuildError(f"stage {delta} is labeled {build.labels[delta]}, not e1")
    pred = build.script.predictions.get(delta)
    if pred is None:
        raise BuildError(f"script provides no prediction for e1 stage {delta}")
    if pred == "family":
        h = build.family[delta - 1]
    else:
        h = pred
        if h.rows != build.stage_gens[delta] or (h.rows and h.cols != build.stage_gens[delta]):
            raise BuildError(f"prediction at stage {delta} has the wrong shape")
    bounds = build.bounds
    trig = obstruction_trigger(build, delta, h, bounds.trigger_depth)
    if trig is None:
        build._close_stage()
        return build
    beta, cover = trig
    nsteps = bounds.chain_length if bounds.chain_length is not None else build.truncation
    cells = tuple(cover[n] if n < len(cover) else cover[-1] for n in range(nsteps))

    triples = enumerate_triples(build, delta, bounds, nsteps)
    g_delta = build.stage_gens[delta]
    g1 = build.group(1, delta)
    mu = delta - 1
    if build.labels[mu] != FREE:
        raise BuildError(f"an e1 stage needs a free stage immediately below (stage {mu} is {build.labels[mu]})")

    kspecs: List[KSpec] = []
    k0: List[tuple] = []
    k1: List[tuple] = []
    primes: List[int] = []
    used = set()

    def h_of(vec):
        return h.left_apply(vec)

    def y_star(n, r, d):
        out = [0] * g_delta
        coef = 1
        for j in range(n):
            hv = h_of(k0[j])
            for i in range(g_delta):
                out[i] += coef * hv[i]
            coef *= primes[j]
        coef = 1
        for j in range(r, n):
            for i in range(g_delta):
                out[i] -= d * coef * k1[j][i]
            coef *= primes[j]
        return out

    for n in range(nsteps):
        target = None
        for idx, t in enumerate(triples):
            if idx in used or t[0] >= n:
                continue
            target = (idx, t)
            break
        if target is None:
            m, mp, y = 1, 2, (0,) * g_delta
        else:
            used.add(target[0])
            r, d, g = target[1]
            ys = y_star(n, r, d)
            m = math.prod(primes[:n])
            mp = d * math.prod(primes[r:n])
            # The step must make m*h(k) differ from mp*f(k) - (g + y_star),
            # i.e. refute the hypothesis through this step's congruence.
            y = tuple(-(g[i] if i < len(g) else 0) - ys[i] for i in range(g_delta))
        def boxed_contents(v0, v1):
            # Congruence certificates for every boxed hypothesis usable at
            # this step; a zero vector cannot be certified by any prime.
            contents, zeros = [], 0
            hv = h_of(v0)
            for (r, d, g) in triples:
                if r > n:
                    continue
                ys = y_star(n, r, d)
                mm = math.prod(primes[:n])
                mmp = d * math.prod(primes[r:n])
                q = [mm * hv[i] - mmp * v1[i] + ys[i] + (g[i] if i < len(g) else 0) for i in range(g_delta)]
                c = _content(q)
                if c:
                    contents.append(c)
                else:
                    zeros += 1
            return contents, zeros

        best = None
        seen_specs = set()
        for pref in range(n, n + 4):
            try:
                spec, v0, v1 = select_k(build, delta, h, cells[n], m, mp, y, mu - 1, prefer=pref)
            except KWitnessError:
                if best is None and pref == n + 3:
                    raise
                continue
            if spec in seen_specs:
                continue
            seen_specs.add(spec)
            contents, zeros = boxed_contents(v0, v1)
            if best is None or zeros < best[0]:
                best = (zeros, spec, v0, v1, contents)
            if zeros == 0:
                break
        zeros, spec, v0, v1, contents = best
        kspecs.append(spec)
        k0.append(v0)
        k1.append(v1)
        floor = primes[-1] if primes else 2
        primes.append(_prime_avoiding(contents, floor))

    meta = ChainData(beta=beta, cells=cells, kspecs=tuple(kspecs),
                     k0=tuple(k0), k1=tuple(k1), primes=tuple(primes),
                     gammas=(mu - 1,) * nsteps)
    return z_chain(build, delta, k0, primes, k1_list=k1, chain_meta=meta)


def build_truncated_pair(t_index: Tree, stage_plan: Sequence[str], script: GuessScript,
                         truncation: int, bounds: ObstructionBounds = ObstructionBounds()) -> PairedBuild:
    """Drive a full build: one stage per index-tree node, in id order."""
    build = PairedBuild(t_index, stage_plan, script, truncation, bounds)
    for stage, kind in enumerate(stage_plan):
        if kind == FREE:
            free_step(build, stage)
        elif kind == E0:
            uv_gadget(build, stage)
        else:
            e1_stage(build, stage)
    return build


# -- chain analysis -------------------------------------------------------------


def extension_obstruction(build: PairedBuild, delta: int, h: IntMatrix,
                          triple: Tuple[int, int, Sequence[int]],
                          at_n: Optional[int] = None) -> bool:
    """Whether the hypothesis h(z0) = d*z_r + g is refuted by the chain.

    For each usable step n (r <= n < length, or the single given n), the two
    unrollings of the chain force p_n to divide a definite element of side 1;
    the hypothesis is blocked iff some step's divisibility fails.
    """
    chain = build.chains.get(delta)
    if chain is None:
        raise BuildError(f"stage {delta} carries no chain")
    r, d, g = triple
    if d == 0:
        raise BuildError("d must be nonzero")
    if not (0 <= r < chain.length):
        raise BuildError("r must index a chain step")
    g_delta = build.stage_gens[delta]
    g = build.pad(g, g_delta)
    top1 = build.group(1, delta + 1)
    steps = [at_n] if at_n is not None else list(range(r, chain.length))

    for n in steps:
        if not (r <= n < chain.length):
            raise BuildError("step outside the chain")
        m = math.prod(chain.primes[:n])
        mp = d * math.prod(chain.primes[r:n])
        q = [0] * g_delta
        hv = h.left_apply(chain.k0[n])
        for i in range(g_delta):
            q[i] += m * hv[i] - mp * chain.k1[n][i] + g[i]
        coef = 1
        for j in range(n):
            hv = h.left_apply(chain.k0[j])
            for i in range(g_delta):
                q[i] += coef * hv[i]
            coef *= chain.primes[j]
        coef = 1
        for j in range(r, n):
            for i in range(g_delta):
                q[i] -= d * coef * chain.k1[j][i]
            coef *= chain.primes[j]
        # Blocked at n iff q is not divisible by p_n in the extended group.
        p = chain.primes[n]
        qt = build.pad(q, top1.gens)
        if any(echelon_reduce(_divisibility_basis(build, delta, p), qt)):
            return True
    return False


def _divisibility_basis(build: PairedBuild, delta: int, p: int) -> tuple:
    """Cached echelon basis of p*G + relations for the extended side-1 group."""
    cache = getattr(build, "_divis_cache", None)
    if cache is None:
        cache = build._divis_cache = {}
    key = (delta, p)
    if key not in cache:
        top1 = build.group(1, delta + 1)
        rows = [[p if j == i else 0 for j in range(top1.gens)] for i in range(top1.gens)]
        rows += [list(r) for r in top1.relations.data]
        cache[key] = echelon_of(rows)
    return cache[key]


def extend_over_zchain(build: PairedBuild, delta: int, g_map: IntMatrix,
                       n_prime: int) -> IntMatrix:
    """Extend a map on the stage-delta group over the chain, downward.

    Requires g(k_n) = k1_n for all n >= n_prime; the extension sends z_n to
    z1_n above n_prime and follows the chain relations below it.
    """
    chain = build.chains.get(delta)
    if chain is None:
        raise BuildError(f"stage {delta} carries no chain")
    g_delta = build.stage_gens[delta]
    if g_map.rows != g_delta:
        raise BuildError("the map must be defined exactly on the stage group")
    width = g_map.cols
    top1 = build.group(1, delta + 1)
    if width != top1.gens:
        raise BuildError("the map must land in the extended side-1 group")
    for n in range(n_prime, chain.length):
        img = g_map.left_apply(chain.k0[n])
        if not ab.elements_equal(top1, img, build.pad(chain.k1[n], width)):
            raise BuildError(f"precondition fails at chain index {n}: g(k) != f(k)")
    rows = [list(r) for r in g_map.data]
    images = {}
    for n in range(chain.length, n_prime - 1, -1):
        images[n] = list(build.gen_vec(("z", delta, n), width))
    for n in range(n_prime - 1, -1, -1):
        above = images[n + 1]
        gk = g_map.left_apply(chain.k0[n])
        images[n] = [chain.primes[n] * a - b for a, b in zip(above, gk)]
    for n in range(chain.length + 1):
        rows.append(images[n])
    return IntMatrix(rows)


def gadget_iso(build: PairedBuild, sigma: int, n_cut: int) -> Homomorphism:
    """Block isomorphism of an e0 gadget sending w_n to v_n for n <= n_cut.

    Above the cut it fixes the u's; the v's below the cut absorb the u basis
    vectors so the map stays unimodular.  n_cut = -1 is the identity.
    """
    glen = build.gadget_len.get(sigma)
    if glen is None:
        raise BuildError(f"stage {sigma} carries no gadget")
    if n_cut >= glen:
        raise BuildError(f"cut {n_cut} exceeds the gadget truncation {glen - 1}")
    width = 2 * glen + 1
    block = Presentation.free(width)

    def u(i):
        return i

    def v(i):
        return glen + 1 + i

    rows = [None] * width
    for j in range(n_cut + 1, glen + 1):
        rows[u(j)] = [1 if i == u(j) else 0 for i in range(width)]
    for j in range(n_cut, -1, -1):
        above = rows[u(j + 1)]
        rows[u(j)] = [2 * a - (1 if i == v(j) else 0) for i, a in enumerate(above)]
    for j in range(glen):
        if j <= n_cut:
            rows[v(j)] = [1 if i == u(j) else 0 for i in range(width)]
        else:
            rows[v(j)] = [1 if i == v(j) else 0 for i in range(width)]
    return Homomorphism(block, block, IntMatrix(rows))


# -- projections and standard form ------------------------------------------------


@dataclass
class ProjectionSystem:
    """Coherent projections pi[nu,mu] : G_mu -> G_nu for non-chain nu.

    Matrices are stored per side; row i of matrix(side, nu, mu) is the image
    of the i-th generator of G_mu inside G_nu.
    """

    build: PairedBuild
    matrices: Dict[tuple, IntMatrix]
    projectable: tuple

    def matrix(self, side: int, nu: int, mu: int) -> IntMatrix:
        return self.matrices[(side, nu, mu)]

    def apply(self, side: int, nu: int, mu: int, vec) -> tuple:
        return self.matrix(side, nu, mu).left_apply(self.build.pad(vec, self.build.stage_gens[mu]))

    def kernel(self, side: int, nu: int) -> IntMatrix:
        """K[nu]: the kernel of the projection from the top group onto stage nu."""
        m = self.matrix(side, nu, self.build.stage_count)
        return ab.kernel_lattice(self.build.group(side, nu), list(m.data))

    def kernel_step(self, side: int, nu: int) -> IntMatrix:
        """K[nu, nu+1]: the part of ker(pi_nu) inside the next stage group."""
        m = self.matrix(side, nu, nu + 1)
        return ab.kernel_lattice(self.build.group(side, nu), list(m.data))

    def tampered(self, side: int, nu: int, mu: int, row: int, col: int) -> "ProjectionSystem":
        """Copy with one entry's sign flipped, for negative tests."""
        mats = dict(self.matrices)
        m = [list(r) for r in mats[(side, nu, mu)].data]
        m[row][col] = -m[row][col] if m[row][col] else 1
        mats[(side, nu, mu)] = IntMatrix(m)
        return ProjectionSystem(self.build, mats, self.projectable)


def build_projections(build: PairedBuild) -> ProjectionSystem:
    """Stage projections: free and gadget generators die, chains unroll to zero.

    z images follow the chain relations downward from pi(z_top) = 0, which
    reproduces the cumulative -sum d_{n,j} k_j values on the k's that survive
    into the base stage.
    """
    s = build.stage_count
    projectable = tuple(nu for nu in range(s + 1) if nu == s or build.labels[nu] != E1)
    mats: Dict[tuple, IntMatrix] = {}
    for side in (0, 1):
        for nu in projectable:
            n_nu = build.stage_gens[nu]
            rows = [[1 if j == i else 0 for j in range(n_nu)] for i in range(n_nu)]
            mats[(side, nu, nu)] = IntMatrix(rows)
            for mu in range(nu + 1, s + 1):
                prev = [list(r) for r in mats[(side, nu, mu - 1)].data]
                stage = mu - 1  # the stage whose processing created G_mu
                kind = build.labels[stage]
                n_mu = build.stage_gens[mu]
                if kind in (FREE, E0) or stage not in build.chains:
                    for _ in range(n_mu - len(prev)):
                        prev.append([0] * n_nu)
                else:
                    chain = build.chains[stage]
                    ks = chain.k0 if side == 0 else chain.k1
                    for _ in range(n_mu - len(prev)):
                        prev.append(None)
                    images = {chain.length: [0] * n_nu}
                    for n in range(chain.length - 1, -1, -1):
                        pk = [0] * n_nu
                        for i, c in enumerate(ks[n]):
                            if c:
                                for j in range(n_nu):
                                    pk[j] += c * prev[i][j]
                        images[n] = [chain.primes[n] * a - b for a, b in zip(images[n + 1], pk)]
                    for n in range(chain.length + 1):
                        prev[build.names[("z", stage, n)]] = images[n]
                mats[(side, nu, mu)] = IntMatrix(prev)
    return ProjectionSystem(build, mats, projectable)


def default_ladder(build: PairedBuild, delta: int) -> Ladder:
    """The increasing run of all free stages below delta."""
    steps = tuple(s for s in range(delta) if build.labels[s] == FREE)
    return Ladder(delta, steps)


def valid_ladders(build: PairedBuild, delta: int) -> list:
    """Every ladder on delta whose steps avoid the e0/e1 stages."""
    free_below = [s for s in range(delta - 1) if build.labels[s] == FREE]
    if build.labels[delta - 1] != FREE:
        return []
    out = []
    for k in range(len(free_below) + 1):
        for combo in itertools.combinations(free_below, k):
            out.append(Ladder(delta, tuple(combo) + (delta - 1,)))
    return out


def check_standard_form(build: PairedBuild, projections: ProjectionSystem,
                        ladders: Optional[Dict[int, Ladder]] = None,
                        y_sets: Optional[Dict[int, Sequence[Sequence[int]]]] = None) -> bool:
    """Coherence of the projection system plus the ladder decomposition law.

    The law: for every registered chain generator y at a stage delta, every
    supplied ladder on delta, and every projectable nu < delta, the projection
    pi_nu(y) equals the sum of the step increments (pi_{a+1} - pi_a)(y) over
    ladder steps a below nu.  Ladders whose steps meet e0/e1 stages are
    rejected outright.
    """
    excluded = frozenset(i for i, kind in enumerate(build.labels) if kind != FREE)
    if ladders is None:
        ladders = {delta: default_ladder(build, delta) for delta in build.chains}
    for delta, ladder in ladders.items():
        ladder.validate(excluded)
        if ladder.target != delta:
            raise BuildError(f"ladder target {ladder.target} is not the chain stage {delta}")

    s = build.stage_count
    proj = projections.projectable
    for side in (0, 1):
        # Nesting and identity-on-the-stage.
        for nu in proj:
            n_nu = build.stage_gens[nu]
            for mu in range(nu, s + 1):
                m = projections.matrix(side, nu, mu)
                for i in range(min(n_nu, m.rows)):
                    expect = tuple(1 if j == i else 0 for j in range(n_nu))
                    if m.row(i) != expect:
                        return False
            for mu in range(nu, s):
                small = projections.matrix(side, nu, mu)
                big = projections.matrix(side, nu, mu + 1)
                if big.data[: small.rows] != small.data:
                    return False
        # Coherence pi[tau,nu] o pi[nu,mu] = pi[tau,mu].
        g_cache = {nu: build.group(side, nu) for nu in proj}
        for tau in proj:
            for nu in proj:
                if nu <= tau:
                    continue
                for mu in range(nu, s + 1):
                    left = projections.matrix(side, nu, mu) @ projections.matrix(side, tau, nu)
                    right = projections.matrix(side, tau, mu)
                    for i in range(left.rows):
                        if not ab.elements_equal(g_cache[tau], left.row(i), right.row(i)):
                            return False

    for delta, ladder in ladders.items():
        ys = (y_sets or {}).get(delta)
        if ys is None:
            chain = build.chains[delta]
            ys = [build.gen_vec(("z", delta, n)) for n in range(chain.length + 1)]
        for side in (0, 1):
            for y in ys:
                for nu in projections.projectable:
                    if nu >= delta or build.labels[nu] != FREE:
                        continue
                    lhs = projections.apply(side, nu, delta + 1, y)
                    rhs = [0] * build.stage_gens[nu]
                    for a in ladder.steps:
                        if a >= nu:
                            break
                        up = projections.apply(side, a + 1, delta + 1, y)
                        dn = projections.apply(side, a, delta + 1, y)
                        for i in range(build.stage_gens[nu]):
                            ai = up[i] if i < len(up) else 0
                            bi = dn[i] if i < len(dn) else 0
                            rhs[i] += ai - bi
                    if not ab.elements_equal(build.group(side, nu), lhs, tuple(rhs)):
                        return False
    return True
