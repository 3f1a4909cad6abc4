"""The tree game on a pair of structures.

One player (forall) repeatedly picks a tree node strictly above all of his
previous picks together with an element of either structure; the other player
(exists) answers with an element of the opposite structure.  The game ends
when no node lies strictly above the current one; exists wins a finished play
iff the accumulated correspondence is a partial isomorphism.

For abelian groups the partial-isomorphism condition depends only on the
lattice of integer relations generated by the played pairs (together with the
two relation lattices), not on the order of play.  The solver therefore keys
its memo table on the canonical echelon form of that pair lattice; this is a
pure memo-keying choice and is cross-checked against a memo-free minimax in
the tests.

Structures other than abelian groups can be played by supplying a custom
partial-isomorphism oracle; the solver then keys states on the sorted tuple
of played pairs instead.

A play history is a tuple of (node, side, a_elem, b_elem) entries: the tree
node forall moved to, which structure he picked from, and the resulting pair.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from . import abgroup as ab
from .abgroup import Homomorphism, Presentation
from .trees import Tree
from .zlinalg import (
    IntMatrix,
    echelon_add as lattice_add,
    echelon_add_fast,
    echelon_of as _lattice_of,
    echelon_reduce as lattice_reduce,
    express_in_rows,
)

EXISTS = "exists"
FORALL = "forall"
LEFT = "left"
RIGHT = "right"


class StateBudgetExceeded(RuntimeError):
    """The solver was asked to explore more states than allowed."""


class NoAdmissibleIndexError(RuntimeError):
    """A strategy found no admissible continuation for a move."""


# -- game specification --------------------------------------------------------


@dataclass(frozen=True)
class GameSpec:
    """A playable instance: two presented groups, a tree and finite carriers.

    ``elems_a``/``elems_b`` are the elements either player may pick on that
    side.  For finite groups they are normally full enumerations; for infinite
    groups they are declared generator balls and results are flagged
    ball-restricted.
    """

    left: Presentation
    right: Presentation
    tree: Tree
    elems_a: tuple
    elems_b: tuple
    ball_restricted: bool = False
    oracle: Optional[Callable] = None

    @classmethod
    def finite(cls, left: Presentation, right: Presentation, tree: Tree, max_order: int = 512) -> "GameSpec":
        ea = ab.enumerate_elements(left, max_order)
        eb = ab.enumerate_elements(right, max_order)
        if ea is None or eb is None:
            raise ValueError(
                "structure too large to enumerate; supply explicit generator balls instead"
            )
        return cls(left, right, tree, tuple(ea), tuple(eb))

    @classmethod
    def ball(cls, left: Presentation, right: Presentation, tree: Tree, ball_a, ball_b) -> "GameSpec":
        return cls(
            left,
            right,
            tree,
            tuple(tuple(x) for x in ball_a),
            tuple(tuple(y) for y in ball_b),
            ball_restricted=True,
        )


@dataclass
class SolveResult:
    winner: str
    strategy: "Strategy"
    states_explored: int
    ball_restricted: bool = False


class Strategy:
    """Base interface; a strategy must be total on states reachable under it."""

    side = EXISTS

    def reply(self, spec: GameSpec, history: tuple, node: int, move_side: str, element: tuple) -> tuple:
        raise NotImplementedError

    def memo_key(self, spec, history, node, move_side, element):
        """Hashable dedup key, or None when replies depend on the raw history."""
        return None


# -- the solver ------------------------------------------------------------------


class _Engine:
    """Backward induction with memoization on canonical pair lattices.

    ``canonical=False`` swaps in the non-canonical echelon update; violation
    tests stay exact but lattice states are no longer usable as memo keys, so
    it is only for the memo-free cross-check.
    """

    def __init__(self, spec: GameSpec, max_states: Optional[int], canonical: bool = True):
        self.spec = spec
        self.max_states = max_states
        self._add = lattice_add if canonical else echelon_add_fast
        self._lat_cache = {}
        self.na = spec.left.gens
        self.nb = spec.right.gens
        self.memo = {}
        self.states = 0
        t = spec.tree
        self.succ = {None: tuple(range(t.node_count))}
        for n in range(t.node_count):
            self.succ[n] = t.descendants(n)
        rel_rows = [list(r) + [0] * self.nb for r in spec.left.relations.data]
        rel_rows += [[0] * self.na + list(r) for r in spec.right.relations.data]
        self.init_amajor = _lattice_of(rel_rows)
        self.init_bmajor = _lattice_of([r[self.na:] + r[: self.na] for r in rel_rows])
        self.relA = _lattice_of(spec.left.relations.data)
        self.relB = _lattice_of(spec.right.relations.data)

    def initial(self):
        return (self.init_amajor, self.init_bmajor)

    def extend(self, lat, a_elem, b_elem):
        amajor = self._add(lat[0], list(a_elem) + list(b_elem))
        bmajor = self._add(lat[1], list(b_elem) + list(a_elem))
        return (amajor, bmajor)

    def violated(self, lat) -> bool:
        amajor, bmajor = lat
        for r in amajor:
            if any(r[: self.na]):
                continue
            if any(lattice_reduce(self.relB, r[self.na:])):
                return True
        for r in bmajor:
            if any(r[: self.nb]):
                continue
            if any(lattice_reduce(self.relA, r[self.nb:])):
                return True
        return False

    def moves(self):
        return (
            (LEFT, self.spec.elems_a, self.spec.elems_b),
            (RIGHT, self.spec.elems_b, self.spec.elems_a),
        )

    def value(self, node, lat) -> str:
        key = (node, lat[0])
        got = self.memo.get(key)
        if got is not None:
            return got
        self.states += 1
        if self.max_states is not None and self.states > self.max_states:
            raise StateBudgetExceeded(f"exceeded {self.max_states} states")
        successors = self.succ[node]
        result = EXISTS
        for t in successors:
            for side, elems, replies in self.moves():
                for x in elems:
                    answered = False
                    for y in replies:
                        child = self.extend(lat, x, y) if side == LEFT else self.extend(lat, y, x)
                        if not self.violated(child) and self.value(t, child) == EXISTS:
                            answered = True
                            break
                    if not answered:
                        result = FORALL
                        break
                if result == FORALL:
                    break
            if result == FORALL:
                break
        self.memo[key] = result
        return result

    def lattice_after(self, history):
        history = tuple(history)
        if not history:
            return self.initial()
        got = self._lat_cache.get(history)
        if got is None:
            _, _, a, b = history[-1]
            got = self.extend(self.lattice_after(history[:-1]), a, b)
            self._lat_cache[history] = got
        return got


class SolverExistsStrategy(Strategy):
    """Replies extracted from a solved game: first element keeping the win."""

    side = EXISTS

    def __init__(self, engine: _Engine):
        self._eng = engine

    def reply(self, spec, history, node, move_side, element):
        eng = self._eng
        lat = eng.lattice_after(history)
        replies = spec.elems_b if move_side == LEFT else spec.elems_a
        for y in replies:
            child = eng.extend(lat, element, y) if move_side == LEFT else eng.extend(lat, y, element)
            if not eng.violated(child) and eng.value(node, child) == EXISTS:
                return y
        raise NoAdmissibleIndexError("no winning reply from a winning state")

    def memo_key(self, spec, history, node, move_side, element):
        lat = self._eng.lattice_after(history)
        return (node, lat[0], move_side, element)


class SolverForallStrategy(Strategy):
    """Moves extracted from a solved game that forall wins."""

    side = FORALL

    def __init__(self, engine: _Engine):
        self._eng = engine

    def move(self, spec, history, node):
        eng = self._eng
        lat = eng.lattice_after(history)
        for t in eng.succ[node]:
            for side, elems, replies in eng.moves():
                for x in elems:
                    answered = False
                    for y in replies:
                        child = eng.extend(lat, x, y) if side == LEFT else eng.extend(lat, y, x)
                        if not eng.violated(child) and eng.value(t, child) == EXISTS:
                            answered = True
                            break
                    if not answered:
                        return t, side, x
        raise NoAdmissibleIndexError("no killing move from a winning state")

    def memo_key(self, spec, history, node, move_side, element):
        lat = self._eng.lattice_after(history)
        return (node, lat[0])


def _oracle_value(spec, max_states):
    """Solver path for custom oracles: memo on (node, sorted pairs)."""
    succ = {None: tuple(range(spec.tree.node_count))}
    for n in range(spec.tree.node_count):
        succ[n] = spec.tree.descendants(n)
    memo = {}
    counter = [0]

    def healthy(pairs):
        return spec.oracle(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    def value(node, pairs):
        key = (node, tuple(sorted(pairs)))
        if key in memo:
            return memo[key]
        counter[0] += 1
        if max_states is not None and counter[0] > max_states:
            raise StateBudgetExceeded(f"exceeded {max_states} states")
        res = EXISTS
        for t in succ[node]:
            for side, elems, replies in ((LEFT, spec.elems_a, spec.elems_b), (RIGHT, spec.elems_b, spec.elems_a)):
                for x in elems:
                    answered = False
                    for y in replies:
                        child = pairs + ((x, y) if side == LEFT else (y, x),)
                        if healthy(child) and value(t, child) == EXISTS:
                            answered = True
                            break
                    if not answered:
                        res = FORALL
                        break
                if res == FORALL:
                    break
            if res == FORALL:
                break
        memo[key] = res
        return res

    return value, counter, succ


class _OracleStrategy(Strategy):
    def __init__(self, spec, value, succ, winner):
        self._value = value
        self._succ = succ
        self.side = winner

    def _pairs(self, history):
        return tuple((a, b) for _, _, a, b in history)

    def reply(self, spec, history, node, move_side, element):
        pairs = self._pairs(history)
        replies = spec.elems_b if move_side == LEFT else spec.elems_a
        for y in replies:
            child = pairs + ((element, y) if move_side == LEFT else (y, element),)
            if spec.oracle(tuple(p[0] for p in child), tuple(p[1] for p in child)) and self._value(node, child) == EXISTS:
                return y
        raise NoAdmissibleIndexError("no winning reply from a winning state")

    def move(self, spec, history, node):
        pairs = self._pairs(history)
        for t in self._succ[node]:
            for side, elems, replies in ((LEFT, spec.elems_a, spec.elems_b), (RIGHT, spec.elems_b, spec.elems_a)):
                for x in elems:
                    answered = False
                    for y in replies:
                        child = pairs + ((x, y) if side == LEFT else (y, x),)
                        if spec.oracle(tuple(p[0] for p in child), tuple(p[1] for p in child)) and self._value(t, child) == EXISTS:
                            answered = True
                            break
                    if not answered:
                        return t, side, x
        raise NoAdmissibleIndexError("no killing move from a winning state")

    def memo_key(self, spec, history, node, move_side, element):
        return (node, tuple(sorted(self._pairs(history))), move_side, element)


def solve_game(spec: GameSpec, max_states: Optional[int] = None) -> SolveResult:
    """Backward-induction value of the game, plus the winner's strategy.

    Raises StateBudgetExceeded rather than silently truncating.
    """
    if spec.oracle is not None:
        value, counter, succ = _oracle_value(spec, max_states)
        winner = value(None, ())
        return SolveResult(winner, _OracleStrategy(spec, value, succ, winner), counter[0], spec.ball_restricted)
    eng = _Engine(spec, max_states)
    winner = eng.value(None, eng.initial())
    strategy = SolverExistsStrategy(eng) if winner == EXISTS else SolverForallStrategy(eng)
    return SolveResult(winner, strategy, eng.states, spec.ball_restricted)


def t_equivalent(a: Presentation, b: Presentation, tree: Tree, max_states: Optional[int] = None, max_order: int = 512) -> bool:
    """Whether exists wins the tree game between two finite groups."""
    spec = GameSpec.finite(a, b, tree, max_order)
    return solve_game(spec, max_states).winner == EXISTS


# -- verification ------------------------------------------------------------------


def _position_tools(spec: GameSpec):
    """(successors, initial, extend, violated) honoring a custom oracle."""
    if spec.oracle is None:
        eng = _Engine(spec, None)
        return eng.succ, eng.initial, eng.extend, eng.violated
    succ = {None: tuple(range(spec.tree.node_count))}
    for n in range(spec.tree.node_count):
        succ[n] = spec.tree.descendants(n)

    def initial():
        return ()

    def extend(pairs, a_elem, b_elem):
        return pairs + ((a_elem, b_elem),)

    def violated(pairs):
        return not spec.oracle(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    return succ, initial, extend, violated


def verify_strategy(spec: GameSpec, strategy: Strategy, max_states: Optional[int] = None) -> bool:
    """Exhaustively play every forall line against an exists strategy.

    True iff every completed play ends in a partial isomorphism.  States are
    deduplicated only when the strategy declares a sound memo key.
    """
    succ, initial, extend, violated = _position_tools(spec)
    seen = set()
    explored = [0]

    def run(node, history, lat):
        explored[0] += 1
        if max_states is not None and explored[0] > max_states:
            raise StateBudgetExceeded(f"exceeded {max_states} states")
        successors = succ[node]
        if not successors:
            return not violated(lat)
        for t in successors:
            for side, elems in ((LEFT, spec.elems_a), (RIGHT, spec.elems_b)):
                for x in elems:
                    key = strategy.memo_key(spec, history, t, side, x)
                    if key is not None:
                        if key in seen:
                            continue
                        seen.add(key)
                    try:
                        y = strategy.reply(spec, history, t, side, x)
                    except NoAdmissibleIndexError:
                        return False
                    a_elem, b_elem = (x, y) if side == LEFT else (y, x)
                    child = extend(lat, a_elem, b_elem)
                    if violated(child):
                        return False
                    if not run(t, history + ((t, side, a_elem, b_elem),), child):
                        return False
        return True

    return run(None, (), initial())


def verify_forall_strategy(spec: GameSpec, strategy) -> bool:
    """True iff the forall strategy defeats every exists counterplay."""
    succ, initial, extend, violated = _position_tools(spec)
    seen = set()

    def run(node, history, lat):
        successors = succ[node]
        if not successors:
            return violated(lat)
        key = strategy.memo_key(spec, history, node, None, None)
        if key is not None:
            if key in seen:
                return True
            seen.add(key)
        t, side, x = strategy.move(spec, history, node)
        if t not in successors:
            return False
        replies = spec.elems_b if side == LEFT else spec.elems_a
        for y in replies:
            a_elem, b_elem = (x, y) if side == LEFT else (y, x)
            child = extend(lat, a_elem, b_elem)
            if violated(child):
                continue
            if not run(t, history + ((t, side, a_elem, b_elem),), child):
                return False
        return True

    return run(None, (), initial())


def raw_minimax(spec: GameSpec, state_cap: int) -> str:
    """Memo-free game value, for cross-checking the solver's memo keying.

    Counts every visited position and raises StateBudgetExceeded beyond the
    cap, so callers can restrict the comparison to small instances.
    """
    eng = _Engine(spec, None, canonical=False)
    counter = [0]

    def value(node, lat):
        counter[0] += 1
        if counter[0] > state_cap:
            raise StateBudgetExceeded(f"exceeded {state_cap} states")
        successors = eng.succ[node]
        if not successors:
            return EXISTS if not eng.violated(lat) else FORALL
        for t in successors:
            for side, elems, replies in eng.moves():
                for x in elems:
                    answered = False
                    for y in replies:
                        child = eng.extend(lat, x, y) if side == LEFT else eng.extend(lat, y, x)
                        if not eng.violated(child) and value(t, child) == EXISTS:
                            answered = True
                            break
                    if not answered:
                        return FORALL
        return EXISTS

    return value(None, eng.initial())


# -- strategies from coherent families -----------------------------------------


class FamilyStrategy(Strategy):
    """Exists' replies read off a coherent family of stage isomorphisms.

    The family maps index-tree nodes to isomorphisms between matching stages
    of two groups; coherence means each map extends the maps below it in the
    index-tree order.  On every forall move the strategy climbs to the
    lowest-id index node that lies strictly above its previous picks and whose
    stage contains the played element, then answers through that node's map
    (or its inverse).  Replies depend on the whole history, so no memo key is
    offered.
    """

    side = EXISTS

    def __init__(self, family: dict, t_play: Tree, t_index: Tree, validate: bool = True):
        if validate:
            _validate_family(family, t_index)
        self.family = family
        self.t_play = t_play
        self.t_index = t_index
        self._inverses = {}
        self._rep_cache = {}
        self._replay_cache = {(): None}
        self.amb0 = max((h.source.gens for h in family.values()), default=0)
        self.amb1 = max((h.target.gens for h in family.values()), default=0)
        top0 = max(family.values(), key=lambda h: h.source.gens, default=None)
        self._rel0 = top0.source.relations if top0 is not None else IntMatrix.zeros(0, 0)
        top1 = max(family.values(), key=lambda h: h.target.gens, default=None)
        self._rel1 = top1.target.relations if top1 is not None else IntMatrix.zeros(0, 0)
        # When the index tree is a product over the play tree, the walk pins
        # each pick's first coordinate to forall's current node; this is what
        # keeps the index branch alive exactly as long as forall's branch.
        self._product_aware = (
            t_index.pairs is not None
            and all(p[0] < t_play.node_count for p in t_index.pairs)
        )

    def _stage_rep(self, nu, element, from_side):
        """Representative of the element inside stage nu on its side, or None."""
        key = (nu, tuple(element), from_side)
        if key in self._rep_cache:
            return self._rep_cache[key]
        rep = self._stage_rep_uncached(nu, element, from_side)
        self._rep_cache[key] = rep
        return rep

    def _stage_rep_uncached(self, nu, element, from_side):
        hom = self.family[nu]
        n = hom.source.gens if from_side == LEFT else hom.target.gens
        amb = self.amb0 if from_side == LEFT else self.amb1
        vec = tuple(element)
        if len(vec) < amb:
            vec = vec + (0,) * (amb - len(vec))
        elif len(vec) > amb:
            if any(vec[amb:]):
                return None
            vec = vec[:amb]
        if all(c == 0 for c in vec[n:]):
            return vec[:n]
        rel = self._rel0 if from_side == LEFT else self._rel1
        prefix = [[1 if j == i else 0 for j in range(amb)] for i in range(n)]
        rows = prefix + [list(r) for r in rel.data]
        if not rows:
            return None
        coeffs = express_in_rows(IntMatrix(rows), vec)
        if coeffs is None:
            return None
        return tuple(coeffs[:n])

    def _admissible(self, last, element, from_side, play_node=None):
        nodes = self.t_index.descendants(last) if last is not None else range(self.t_index.node_count)
        for nu in nodes:
            if nu not in self.family:
                continue
            if self._product_aware and play_node is not None and self.t_index.pairs[nu][0] != play_node:
                continue
            rep = self._stage_rep(nu, element, from_side)
            if rep is not None:
                return nu, rep
        return None, None

    def _inverse(self, nu) -> Homomorphism:
        if nu not in self._inverses:
            self._inverses[nu] = ab_inverse(self.family[nu])
        return self._inverses[nu]

    def _replay(self, history):
        history = tuple(history)
        if history in self._replay_cache:
            return self._replay_cache[history]
        last = self._replay(history[:-1])
        play_node, side, a_elem, b_elem = history[-1]
        element = a_elem if side == LEFT else b_elem
        nu, _ = self._admissible(last, element, side, play_node)
        if nu is None:
            raise NoAdmissibleIndexError("replay lost the index branch")
        self._replay_cache[history] = nu
        return nu

    def reply(self, spec, history, node, move_side, element):
        last = self._replay(history)
        nu, rep = self._admissible(last, element, move_side, node)
        if nu is None:
            raise NoAdmissibleIndexError(
                f"no index node above {last} whose stage contains the move"
            )
        if move_side == LEFT:
            img = self.family[nu].apply(rep)
            return tuple(img) + (0,) * (self.amb1 - len(img))
        img = self._inverse(nu).apply(rep)
        return tuple(img) + (0,) * (self.amb0 - len(img))


def ab_inverse(hom: Homomorphism) -> Homomorphism:
    """Inverse of an isomorphism, built by expressing target generators."""
    stacked = hom.matrix.vstack(hom.target.relations)
    rows = []
    for j in range(hom.target.gens):
        e = [1 if i == j else 0 for i in range(hom.target.gens)]
        coeffs = express_in_rows(stacked, e)
        if coeffs is None:
            raise ValueError("homomorphism is not surjective, cannot invert")
        rows.append(list(coeffs[: hom.source.gens]))
    return Homomorphism(hom.target, hom.source, IntMatrix(rows) if rows else IntMatrix.zeros(0, hom.source.gens))


def _validate_family(family: dict, t_index: Tree):
    for nu in family:
        if not (0 <= nu < t_index.node_count):
            raise ValueError(f"family indexed by {nu}, which is not a node of the index tree")
    for nu2, hom2 in family.items():
        parent = t_index.parent[nu2]
        while parent is not None and parent not in family:
            parent = t_index.parent[parent]
        if parent is None:
            continue
        hom1 = family[parent]
        if hom1.source.gens > hom2.source.gens:
            raise ValueError("family stages must grow along the tree order")
        for g in range(hom1.source.gens):
            img1 = tuple(hom1.matrix.row(g)) + (0,) * (hom2.target.gens - hom1.target.gens)
            img2 = hom2.matrix.row(g)
            if not ab.elements_equal(hom2.target, img1, img2):
                raise ValueError(
                    f"family is not coherent: nodes {parent} and {nu2} disagree on generator {g}"
                )


def strategy_from_coherent_family(family: dict, t_play: Tree, t_index: Tree, validate: bool = True) -> FamilyStrategy:
    """Exists strategy induced by a coherent family of stage isomorphisms."""
    return FamilyStrategy(family, t_play, t_index, validate=validate)


# -- transcripts --------------------------------------------------------------


def transcript_json(spec: GameSpec, moves: Sequence[dict], verdict: str, abandoned: bool = False) -> str:
    doc = {
        "left_gens": spec.left.gens,
        "right_gens": spec.right.gens,
        "tree": list(spec.tree.parent),
        "moves": list(moves),
        "verdict": verdict,
        "abandoned": abandoned,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
