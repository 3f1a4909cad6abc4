"""Scenario runner, report emitter and interactive game REPL.

Scenario files are JSON documents with a ``kind`` of game, build, equivalence
or suite.  A run produces a report whose bytes depend only on the scenario
and its seed; verdicts are named booleans and the process exit code is 0 when
all of them hold, 1 when one fails, and 2 for usage or schema errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from . import abgroup as ab
from . import constructions as cn
from . import efgame as ef
from . import equivalences as eq
from . import trees as tr
from .zlinalg import IntMatrix


class ScenarioError(ValueError):
    """Malformed scenario or input file (exit code 2)."""


def _require(cond: bool, msg: str):
    if not cond:
        raise ScenarioError(msg)


def parse_group(doc) -> ab.Presentation:
    _require(isinstance(doc, dict), "group must be an object")
    _require("gens" in doc, "group needs a 'gens' field")
    gens = doc["gens"]
    _require(isinstance(gens, int) and gens >= 0, "'gens' must be a nonnegative integer")
    rel = doc.get("relations", [])
    _require(isinstance(rel, list), "'relations' must be a list of rows")
    for row in rel:
        _require(isinstance(row, list) and len(row) == gens, "each relation needs one entry per generator")
        _require(all(isinstance(x, int) for x in row), "relation entries must be integers")
    return ab.Presentation(gens, IntMatrix(rel) if rel else IntMatrix.zeros(0, gens))


def parse_tree(doc) -> tr.Tree:
    _require(isinstance(doc, dict) and "parents" in doc, "tree must be an object with 'parents'")
    parents = doc["parents"]
    _require(isinstance(parents, list), "'parents' must be a list")
    _require(all(p is None or isinstance(p, int) for p in parents), "parents are node ids or null")
    try:
        return tr.build_tree(parents)
    except tr.TreeError as e:
        raise ScenarioError(f"bad tree: {e}")


def parse_script(doc, tree: tr.Tree) -> cn.GuessScript:
    doc = doc or {}
    _require(isinstance(doc, dict), "'script' must be an object")
    upsilon = {}
    for key, cells in (doc.get("upsilon") or {}).items():
        _require(isinstance(cells, list), "upsilon cells must be a list of node-id lists")
        upsilon[int(key)] = tuple(frozenset(c) for c in cells)
    predictions = {}
    for key, val in (doc.get("predictions") or {}).items():
        if val == "family":
            predictions[int(key)] = "family"
        else:
            _require(isinstance(val, list), "a prediction is a matrix or the string 'family'")
            predictions[int(key)] = IntMatrix(val)
    return cn.GuessScript(upsilon=upsilon, predictions=predictions)


# -- pipelines -------------------------------------------------------------------


def _run_game(doc, max_states: Optional[int]) -> dict:
    left = parse_group(doc.get("left"))
    right = parse_group(doc.get("right"))
    tree = parse_tree(doc.get("tree"))
    try:
        spec = ef.GameSpec.finite(left, right, tree, max_order=doc.get("max_order", 512))
    except ValueError as e:
        raise ScenarioError(str(e))
    result = ef.solve_game(spec, max_states)
    if result.winner == ef.EXISTS:
        verified = ef.verify_strategy(spec, result.strategy)
    else:
        verified = ef.verify_forall_strategy(spec, result.strategy)
    verdicts = {"strategy_verified": verified}
    expect = doc.get("expect", {})
    if "winner" in expect:
        verdicts["expected_winner"] = result.winner == expect["winner"]
    return {
        "kind": "game",
        "verdicts": verdicts,
        "counters": {"states_explored": result.states_explored},
        "details": {"winner": result.winner, "ball_restricted": result.ball_restricted},
    }


def _registry_report(build: cn.PairedBuild) -> dict:
    out = {}
    for cell in build.wreg.cells(build.stage_count):
        names = build.wreg.at(build.stage_count, cell)
        out[json.dumps(sorted(cell))] = ["w[%d,%d]" % (s, n) for (_, s, n) in names]
    return out


def _run_build(doc, max_states: Optional[int]) -> dict:
    tree = parse_tree(doc.get("tree"))
    plan = doc.get("plan")
    _require(isinstance(plan, list) and all(k in (cn.FREE, cn.E0, cn.E1) for k in plan),
             "'plan' must list stage kinds free/e0/e1")
    script = parse_script(doc.get("script"), tree)
    truncation = doc.get("truncation", 1)
    _require(isinstance(truncation, int) and truncation >= 1, "'truncation' must be a positive integer")
    bdoc = doc.get("bounds", {})
    bounds = cn.ObstructionBounds(
        d_bound=bdoc.get("d_bound", 5),
        ball_radius=bdoc.get("ball_radius", 2),
        chain_length=bdoc.get("chain_length"),
        trigger_depth=bdoc.get("trigger_depth", 0),
    )
    try:
        build = cn.build_truncated_pair(tree, plan, script, truncation, bounds)
    except cn.BuildError as e:
        raise ScenarioError(f"bad build scenario: {e}")

    verdicts = {}
    counters = {}
    ranks = []
    free_all = True
    for s in range(build.stage_count + 1):
        fr, tor = ab.invariant_factors(build.group(0, s))
        ranks.append(fr)
        free_all = free_all and not tor
    verdicts["stages_free"] = free_all

    fam = build.family_dict()
    verdicts["family_isomorphisms"] = all(h.is_isomorphism() for h in fam.values())

    heights = {}
    for sigma, glen in build.gadget_len.items():
        g = build.group(0)
        span = [build.pad(build.w_vec(sigma, n)) for n in range(glen)]
        sub = ab.Subgroup.spanned_by(g, span)
        h = ab.p_height(g, sub, build.pad(build.gen_vec(("u", sigma, 0))), 2)
        heights[str(sigma)] = glen if h == glen else (h if h != ab.INFINITE else "infinite")
        verdicts.setdefault("gadget_heights", True)
        if h != glen:
            verdicts["gadget_heights"] = False
    counters["heights"] = heights

    projections = cn.build_projections(build)
    try:
        verdicts["standard_form"] = cn.check_standard_form(build, projections)
    except cn.BuildError:
        verdicts["standard_form"] = False

    blocked = total = 0
    for delta, chain in build.chains.items():
        pred = build.script.predictions[delta]
        h = build.family[delta - 1] if pred == "family" else pred
        for t in cn.enumerate_triples(build, delta, bounds, chain.length):
            total += 1
            if cn.extension_obstruction(build, delta, h, t):
                blocked += 1
    counters["obstruction"] = {"blocked": blocked, "total": total}
    if total:
        verdicts["all_blocked"] = blocked == total
    counters["ranks"] = ranks
    counters["chains"] = {str(d): list(c.primes) for d, c in build.chains.items()}

    expect = doc.get("expect", {})
    if "chain_installed" in expect:
        verdicts["expected_chain"] = bool(build.chains) == expect["chain_installed"]
    if "all_blocked" in expect and total:
        verdicts["expected_blocking"] = (blocked == total) == expect["all_blocked"]

    return {
        "kind": "build",
        "verdicts": verdicts,
        "counters": counters,
        "details": {"registry": _registry_report(build), "gens": len(build.gen_names)},
    }


def _parse_filtration(doc) -> eq.Filtration:
    ambient = parse_group(doc.get("ambient"))
    stages = doc.get("stages")
    _require(isinstance(stages, list), "'stages' must be a list of row lists")
    labels = doc.get("labels")
    return eq.Filtration.from_rows(ambient, stages, tuple(labels) if labels else None)


def _run_equivalence(doc, max_states: Optional[int]) -> dict:
    if "build" in doc:
        sub = _run_build(doc["build"], max_states)  # validates the build scenario
        tree = parse_tree(doc["build"]["tree"])
        script = parse_script(doc["build"].get("script"), tree)
        bdoc = doc["build"].get("bounds", {})
        bounds = cn.ObstructionBounds(
            d_bound=bdoc.get("d_bound", 5),
            ball_radius=bdoc.get("ball_radius", 2),
            chain_length=bdoc.get("chain_length"),
            trigger_depth=bdoc.get("trigger_depth", 0),
        )
        build = cn.build_truncated_pair(tree, doc["build"]["plan"], script,
                                        doc["build"].get("truncation", 1), bounds)
        f = eq.Filtration.from_build(build, 0)
        g = eq.Filtration.from_build(build, 1)
    else:
        f = _parse_filtration(doc.get("left"))
        g = _parse_filtration(doc.get("right"))
    level = doc.get("level", min(f.length, g.length) - 2)
    _require(isinstance(level, int) and level >= 0, "'level' must be a nonnegative integer")
    bound = doc.get("coeff_bound", 1)

    verdicts = {}
    counters = {}
    qe = eq.stable_quotient_equiv(f, g, upto=level + 1)
    result = eq.search_level_preserving(f, g, level, coeff_bound=bound)
    counters["witness_found"] = result.found
    counters["quotient_equivalent"] = qe
    if result.found:
        verdicts["witness_level_preserving"] = eq.is_level_preserving(result.witness.hom, f, g, level)
        verdicts["witness_implies_quotient_equiv"] = qe
    expect = doc.get("expect", {})
    if "quotient_equivalent" in expect:
        verdicts["expected_quotient_equiv"] = qe == expect["quotient_equivalent"]
    if "witness_found" in expect:
        verdicts["expected_witness"] = result.found == expect["witness_found"]
    return {"kind": "equivalence", "verdicts": verdicts, "counters": counters, "details": {"bounded_search": result.bounded}}


def run_scenario(doc_or_path, max_states: Optional[int] = None, _base: str = "") -> dict:
    """Dispatch a scenario document (or file path) to its pipeline."""
    import os

    if isinstance(doc_or_path, str):
        _base = os.path.dirname(doc_or_path)
        try:
            with open(doc_or_path) as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise ScenarioError(f"no such scenario file: {doc_or_path}")
        except json.JSONDecodeError as e:
            raise ScenarioError(f"scenario is not valid JSON: {e}")
    else:
        doc = doc_or_path
    _require(isinstance(doc, dict), "scenario must be a JSON object")
    kind = doc.get("kind")
    _require(kind in ("game", "build", "equivalence", "suite"), f"unknown scenario kind {kind!r}")
    seed = doc.get("seed", 0)
    _require(isinstance(seed, int), "'seed' must be an integer")
    if kind == "game":
        report = _run_game(doc, max_states)
    elif kind == "build":
        report = _run_build(doc, max_states)
    elif kind == "equivalence":
        report = _run_equivalence(doc, max_states)
    else:
        entries = doc.get("scenarios")
        _require(isinstance(entries, list) and entries, "'scenarios' must be a nonempty list")
        reports = []
        for entry in entries:
            if isinstance(entry, str):
                import os

                reports.append(run_scenario(os.path.join(_base, entry), max_states))
            else:
                reports.append(run_scenario(entry, max_states))
        verdicts = {}
        for i, rep in enumerate(reports):
            for name, val in rep["verdicts"].items():
                verdicts[f"{i}:{rep['kind']}:{name}"] = val
        report = {"kind": "suite", "verdicts": verdicts, "counters": {"scenarios": len(reports)},
                  "details": {"reports": reports}}
    report["seed"] = seed
    return report


def emit_report(report: dict, fmt: str = "text") -> str:
    """Render a report with stable field ordering (byte-reproducible)."""
    if fmt == "json":
        return json.dumps(report, sort_keys=True, separators=(",", ":")) + "\n"
    lines = [f"kind: {report['kind']}", f"seed: {report.get('seed', 0)}"]
    for name in sorted(report.get("verdicts", {})):
        val = report["verdicts"][name]
        lines.append(f"{'PASS' if val else 'FAIL'} {name}")
    for name in sorted(report.get("counters", {})):
        lines.append(f"{name}: {json.dumps(report['counters'][name], sort_keys=True)}")
    return "\n".join(lines) + "\n"


def report_passes(report: dict) -> bool:
    if report["kind"] == "suite":
        return all(report["verdicts"].values())
    return all(report.get("verdicts", {}).values())


# -- interactive play ---------------------------------------------------------------


def interactive_play(spec: ef.GameSpec, human_side: str, in_stream=None, out_stream=None,
                     max_states: Optional[int] = None) -> dict:
    """Play one side of the game against the solver, move by move.

    Returns the transcript document.  The human enters moves as prompted;
    'quit' abandons the game and marks the transcript accordingly.
    """
    stdin = in_stream if in_stream is not None else sys.stdin
    stdout = out_stream if out_stream is not None else sys.stdout

    def say(msg):
        print(msg, file=stdout)

    result = ef.solve_game(spec, max_states)
    say(f"solver: {result.winner} wins this game")
    eng = ef._Engine(spec, None)
    history = ()
    lat = eng.initial()
    node = None
    moves = []
    abandoned = False
    rounds = 0

    def legal_nodes():
        return eng.succ[node]

    while legal_nodes():
        succ_nodes = legal_nodes()
        if human_side == ef.FORALL:
            say(f"round {rounds}: legal tree nodes {list(succ_nodes)}")
            say(f"left elements: {[list(e) for e in spec.elems_a]}")
            say(f"right elements: {[list(e) for e in spec.elems_b]}")
            say("move> node side(left|right) element-index   (or quit)")
            line = stdin.readline()
            if not line or line.strip() == "quit":
                abandoned = True
                break
            parts = line.split()
            if len(parts) != 3:
                say("need: node side element-index")
                continue
            try:
                t = int(parts[0])
                side = parts[1]
                idx = int(parts[2])
            except ValueError:
                say("node and element-index must be integers")
                continue
            if t not in succ_nodes:
                say(f"illegal: node {t} is not strictly above the current node")
                continue
            if side not in (ef.LEFT, ef.RIGHT):
                say("side must be left or right")
                continue
            elems = spec.elems_a if side == ef.LEFT else spec.elems_b
            if not (0 <= idx < len(elems)):
                say("element index out of range")
                continue
            x = elems[idx]
            if result.winner == ef.EXISTS:
                y = result.strategy.reply(spec, history, t, side, x)
            else:
                # Best effort for the machine when it has no winning strategy.
                replies = spec.elems_b if side == ef.LEFT else spec.elems_a
                y = replies[0]
                for cand in replies:
                    child = eng.extend(lat, x, cand) if side == ef.LEFT else eng.extend(lat, cand, x)
                    if not eng.violated(child):
                        y = cand
                        break
            say(f"reply: {list(y)}")
        else:
            if result.winner == ef.FORALL:
                t, side, x = result.strategy.move(spec, history, node)
            else:
                t = succ_nodes[0]
                side = ef.LEFT
                x = spec.elems_a[0]
            say(f"round {rounds}: opponent plays node {t}, {side}, element {list(x)}")
            replies = spec.elems_b if side == ef.LEFT else spec.elems_a
            say(f"replies: {[list(e) for e in replies]}")
            say("reply> element-index   (or quit)")
            line = stdin.readline()
            if not line or line.strip() == "quit":
                abandoned = True
                break
            try:
                idx = int(line.strip())
            except ValueError:
                say("the reply is an element index")
                continue
            if not (0 <= idx < len(replies)):
                say("element index out of range")
                continue
            y = replies[idx]
        a_elem, b_elem = (x, y) if side == ef.LEFT else (y, x)
        lat = eng.extend(lat, a_elem, b_elem)
        history = history + ((t, side, a_elem, b_elem),)
        moves.append({"round": rounds, "node": t, "side": side,
                      "element": list(x), "reply": list(y)})
        node = t
        rounds += 1
        if eng.violated(lat):
            say("the correspondence is no longer a partial isomorphism")

    if abandoned:
        verdict = "abandoned"
    else:
        verdict = ef.EXISTS if not eng.violated(lat) else ef.FORALL
    say(f"verdict: {verdict}")
    return json.loads(ef.transcript_json(spec, moves, verdict, abandoned=abandoned))


# -- entry point ---------------------------------------------------------------------


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="efgroups",
                                     description="tree games on finitely presented abelian groups")
    sub = parser.add_subparsers(dest="command")

    runp = sub.add_parser("run", help="run a scenario file and emit its report")
    runp.add_argument("scenario")
    runp.add_argument("--format", choices=("text", "json"), default="text")
    runp.add_argument("--out", default=None, help="write the report to a file instead of stdout")
    runp.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    runp.add_argument("--max-states", type=int, default=None)

    playp = sub.add_parser("play", help="play a tree game against the solver")
    playp.add_argument("--tree", required=True)
    playp.add_argument("--left", required=True)
    playp.add_argument("--right", required=True)
    playp.add_argument("--side", choices=(ef.FORALL, ef.EXISTS), required=True)
    playp.add_argument("--transcript", default=None)
    playp.add_argument("--max-states", type=int, default=None)

    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 2

    try:
        if args.command == "run":
            report = run_scenario(args.scenario, max_states=args.max_states)
            if args.seed is not None:
                report["seed"] = args.seed
            text = emit_report(report, args.format)
            if args.out:
                try:
                    with open(args.out, "w") as fh:
                        fh.write(text)
                except OSError as e:
                    print(f"cannot write report: {e}", file=sys.stderr)
                    return 2
            else:
                sys.stdout.write(text)
            return 0 if report_passes(report) else 1

        if args.command == "play":
            try:
                with open(args.tree) as fh:
                    tree = parse_tree(json.load(fh))
                with open(args.left) as fh:
                    left = parse_group(json.load(fh))
                with open(args.right) as fh:
                    right = parse_group(json.load(fh))
            except (OSError, json.JSONDecodeError) as e:
                print(f"bad input: {e}", file=sys.stderr)
                return 2
            spec = ef.GameSpec.finite(left, right, tree)
            transcript = interactive_play(spec, args.side, max_states=args.max_states)
            if args.transcript:
                with open(args.transcript, "w") as fh:
                    json.dump(transcript, fh, sort_keys=True)
            return 0
    except ScenarioError as e:
        print(f"scenario error: {e}", file=sys.stderr)
        return 2

    return 2


if __name__ == "__main__":
    sys.exit(main())
