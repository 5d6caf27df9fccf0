"""Simplification pipelines, bound calculators and the search oracle.

The pipelines are deterministic transcriptions of the constructive
simplification arguments:

* :func:`simplify_no_white` -- states with free edges, loops (possibly
  crossing) and handles, but no white-vertex data, are driven to
  simplified form with at most N-2 added handles: a kit of handles
  ``h(s_j, e)`` for every label j other than the chosen free edge's lets
  the free edge take any label, and each loop (and each stray handle
  letter) is then eliminated against it.
* :func:`weak_to_simplified` -- a weak simplified state is driven to
  simplified form with at most ``max(0, N - f - h - 1)`` added handles,
  where f counts free edges and h handles.  The pipeline erases handle
  letters matching free edges, makes the remaining letters distinct,
  spreads free-edge labels over distinct values, adds only the ``h(e,e)``
  handles actually needed, and splits the double-loop handles.
* :func:`search_min_handles` -- an independent breadth-first oracle over
  normalized states; within its caps it finds the minimal number of
  added handles reaching a target form.

Determinism: all tie-breaking is lexicographic (lowest label, then
lowest id), so identical inputs give byte-identical derivations.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from chartcalc import rules
from chartcalc.errors import (
    CapExceeded,
    MissingLabels,
    NoFreeEdge,
    NotWeakSimplified,
)
from chartcalc.rules import Derivation, Step, apply_rule
from chartcalc.states import (
    ROOT,
    CoveringState,
    is_simplified,
    is_weak_simplified,
    normalize,
    serialize_state,
    validate_state,
)


@dataclass
class PlanResult:
    final: CoveringState
    derivation: Derivation
    handles_added: int
    bound_claimed: int
    target: str  # "weak" | "full"

    def check(self):
        if self.handles_added > self.bound_claimed:
            raise AssertionError(
                f"certified bound violated: added {self.handles_added} "
                f"> claimed {self.bound_claimed}")
        pred = is_simplified if self.target == "full" else is_weak_simplified
        if not pred(self.final):
            raise AssertionError("final state does not satisfy the target form")
        return self


class _Run:
    """Mutable pipeline context collecting derivation steps."""

    def __init__(self, state: CoveringState):
        self.start = state
        self.state = state
        self.steps: list[Step] = []

    def do(self, rule_id: str, binding: dict):
        self.state = apply_rule(self.state, rule_id, binding)
        self.steps.append((rule_id, dict(binding)))

    def handles_added(self) -> int:
        return sum(1 for rid, _ in self.steps if rid == "R-ADD-HANDLE")

    def result(self, bound: int, target: str) -> PlanResult:
        deriv = Derivation(self.start, self.steps, self.state)
        return PlanResult(self.state, deriv, self.handles_added(),
                          bound, target).check()


def _first_free(state: CoveringState) -> str:
    return min(state.frees, key=lambda fid: (state.frees[fid].label, fid))


def _handle_word(state: CoveringState, hid: str, side: str):
    rec = state.handles[hid].record
    return rec.cocore.letters if side == "a" else rec.core.letters


# ---------------------------------------------------------------------------
# handle normalization helpers (R-INV / R-FLIP housekeeping)


def _normalize_handles(run: _Run):
    """Flip core singles to the cocore side and make single/double
    cocore letters positive."""
    changed = True
    while changed:
        changed = False
        for hid in sorted(run.state.handles):
            rec = run.state.handles[hid].record
            a, b = rec.cocore.letters, rec.core.letters
            if not a and len(b) == 1:
                run.do("R-FLIP", {"handle": hid})
                changed = True
                continue
            if len(a) == 1 and a[0] < 0:
                run.do("R-INV-HANDLE", {"handle": hid})
                changed = True


# ---------------------------------------------------------------------------
# the label walk


def _occupants(state: CoveringState, label: int, region: str = ROOT) -> dict:
    """Who carries ``label`` in a region: frees, singles, doubles,
    transient letters, and any arc carriers (for wrap steps)."""
    out = {"free": [], "single": [], "double": [], "l41a_rev": [],
           "l41b_rev": [], "arc": [], "handle_arc": []}
    for fid in sorted(state.frees):
        f = state.frees[fid]
        if f.region == region and f.label == label:
            out["free"].append(fid)
            out["arc"].append(fid)
    for hid in sorted(state.handles):
        h = state.handles[hid]
        if h.region != region:
            continue
        a, b = h.record.cocore.letters, h.record.core.letters
        if h.record.carries(label):
            out["arc"].append(hid)
            out["handle_arc"].append(hid)
        if len(a) == 1 and a[0] == label and not b:
            out["single"].append(hid)
        if h.record.shape() == "double" and label in (abs(a[0]), abs(b[0])):
            out["double"].append(hid)
        if not a and len(b) == 2 and b[0] == label:
            out["l41a_rev"].append(hid)
        if len(a) == 2 and not b and a[0] == label:
            out["l41b_rev"].append(hid)
    return out


def _neighbor_relabel(run: _Run, walker: str, nxt: int, carrier: str,
                      eliminator: str):
    """Non-consuming relabel: wrap the walker through an arc of the next
    label, swap labels under the debris loop, and eliminate the debris
    against a carrier of the walker's old label."""
    run.do("R-WRAP", {"free": walker, "mode": "wrap", "carrier": carrier,
                      "label": nxt})
    lid = run.state.frees[walker].region
    run.do("R-SWAP-UNDER-LOOP", {"loop": lid})
    if eliminator in run.state.frees:
        run.do("R-LOOP-FREE", {"free": eliminator, "mode": "delete",
                               "loop": lid})
    else:
        run.do("R-LOOP-HANDLE", {"handle": eliminator, "mode": "delete",
                                 "loop": lid})


def _walk_free_to(run: _Run, target: int, region: str = ROOT,
                  avoid: frozenset = frozenset()) -> str | None:
    """Bring some free edge in ``region`` to ``target`` label.

    Steps through adjacent labels using, in preference order: an existing
    free edge, a non-consuming wrap/swap/eliminate combination, a single
    handle (R-SHIFT-COCORE), a double handle (R-L4-1, dissolving it), or
    a two-letter transient handle (R-L4-1 reversed, restoring a double).
    Handles in ``avoid`` are never consumed, though their arcs may still
    carry wrap steps.  Returns the id of a free edge now at ``target``,
    or None if no route exists.
    """
    for _ in range(8 * run.state.degree * (len(run.state.handles) + 2) + 8):
        direct = [fid for fid in sorted(run.state.frees)
                  if run.state.frees[fid].label == target
                  and run.state.frees[fid].region == region]
        if direct:
            return direct[0]
        frees_by_label: dict[int, str] = {}
        for fid in sorted(run.state.frees, reverse=True):
            f = run.state.frees[fid]
            if f.region == region:
                frees_by_label[f.label] = fid
        if not frees_by_label:
            return None

        def steppable(cur: int, nxt: int) -> bool:
            occ = _occupants(run.state, nxt, region)
            if occ["free"]:
                return True
            if any(h not in avoid for h in
                   occ["single"] + occ["double"] + occ["l41a_rev"]
                   + occ["l41b_rev"]):
                return True
            # wrap/swap/eliminate: an arc of nxt plus a spare carrier of cur
            cur_occ = _occupants(run.state, cur, region)
            spare = (cur_occ["handle_arc"] or len(cur_occ["free"]) > 1)
            return bool(occ["arc"]) and bool(spare)

        # breadth-first over the label line through steppable labels
        prev: dict[int, int] = {}
        seen = set(frees_by_label)
        queue = deque(sorted(frees_by_label))
        reached = None
        while queue:
            cur = queue.popleft()
            if cur == target:
                reached = cur
                break
            for nxt in (cur - 1, cur + 1):
                if not 1 <= nxt <= run.state.degree - 1 or nxt in seen:
                    continue
                if steppable(cur, nxt):
                    seen.add(nxt)
                    prev[nxt] = cur
                    queue.append(nxt)
        if reached is None:
            return None
        path = [reached]
        while path[-1] not in frees_by_label:
            path.append(prev[path[-1]])
        path.reverse()  # path[0] has a free edge, path[-1] == target
        cur, nxt = path[0], path[1]
        walker = frees_by_label[cur]
        occ = _occupants(run.state, nxt, region)
        if occ["free"]:
            continue  # switch walkers: loop re-runs with a closer free
        cur_occ = _occupants(run.state, cur, region)
        spares = (cur_occ["handle_arc"]
                  + [f for f in cur_occ["free"] if f != walker])
        if occ["arc"] and spares:
            carrier = occ["arc"][0]
            _neighbor_relabel(run, walker, nxt, carrier, spares[0])
            continue
        moved = False
        for hid in occ["single"]:
            if hid in avoid:
                continue
            run.do("R-SHIFT-COCORE", {"free": walker, "handle": hid})
            moved = True
            break
        if moved:
            continue
        for hid in occ["double"]:
            if hid in avoid:
                continue
            a = _handle_word(run.state, hid, "a")
            variant = "a" if abs(a[0]) == nxt else "b"
            run.do("R-L4-1", {"free": walker, "handle": hid,
                              "variant": variant, "rev": False})
            moved = True
            break
        if moved:
            continue
        for key, variant in (("l41a_rev", "a"), ("l41b_rev", "b")):
            for hid in occ[key]:
                if hid not in avoid:
                    run.do("R-L4-1", {"free": walker, "handle": hid,
                                      "variant": variant, "rev": True})
                    moved = True
                    break
            if moved:
                break
        if not moved:
            return None
    return None


# ---------------------------------------------------------------------------
# simplify_no_white


def simplify_no_white(state: CoveringState) -> PlanResult:
    """Eliminate every loop and every stray handle letter, adding at most
    the N-2 relabeling kit.

    Loops are eliminated innermost-out along the chosen free edge's
    nesting chain, then top-level first; afterwards stray letters on
    non-kit handles are erased.  The kit is only added the first time a
    relabeling is actually needed.
    """
    problems = validate_state(state)
    if problems:
        raise ValueError(f"invalid input state: {problems}")
    if not state.frees:
        raise NoFreeEdge("simplification requires at least one free edge")
    run = _Run(state)
    n = state.degree
    bound = max(0, n - 2)
    fid = _first_free(state)
    kit: dict[int, str] = {}

    def ensure_kit():
        if kit or n <= 2:
            return
        f = run.state.frees[fid]
        for j in range(1, n):
            if j == f.label:
                continue
            hid = run.state.fresh_id("h")
            run.do("R-ADD-HANDLE", {"region": f.region, "label": j,
                                    "handle_id": hid})
            kit[j] = hid

    def relabel_to(label: int):
        f = run.state.frees[fid]
        while f.label != label:
            step = 1 if label > f.label else -1
            nxt = f.label + step
            ensure_kit()
            hid = kit.pop(nxt)
            run.do("R-SHIFT-COCORE", {"free": fid, "handle": hid})
            kit[f.label] = hid
            f = run.state.frees[fid]

    guard = 0
    while True:
        guard += 1
        if guard > 10000:
            raise CapExceeded("simplify_no_white did not converge",
                              {"steps": len(run.steps)})
        f = run.state.frees[fid]
        st = run.state
        if f.region != ROOT and f.region in st.loops:
            target = f.region  # unwrap the free edge's own enclosure first
        else:
            top = [lid for lid in sorted(
                st.loops, key=lambda l: (st.loops[l].label, l))
                if st.loops[lid].parent == f.region]
            target = top[0] if top else None
        if target is not None:
            relabel_to(st.loops[target].label)
            run.do("R-LOOP-FREE", {"free": fid, "mode": "delete",
                                   "loop": target})
            continue
        if run.state.loops:
            # loops elsewhere in the tree: only possible while f is nested,
            # handled above; at root all loops are reachable top-down.
            top = [lid for lid in sorted(run.state.loops)
                   if run.state.loops[lid].parent == ROOT]
            if not top:
                raise CapExceeded("unreachable loops", {})
            continue
        # loops are gone; erase stray letters on non-kit handles
        stray = None
        for hid in sorted(run.state.handles):
            if hid in kit.values():
                continue
            for side in ("a", "b"):
                wrd = _handle_word(run.state, hid, side)
                if wrd:
                    stray = (hid, side, wrd[0])
                    break
            if stray:
                break
        if stray is None:
            break
        hid, side, letter = stray
        relabel_to(abs(letter))
        run.do("R-ERASE", {"free": fid, "handle": hid, "side": side,
                           "mode": "delete", "pos": 0})
    return run.result(bound, "full")


# ---------------------------------------------------------------------------
# weak_to_simplified


def _letter_census(state: CoveringState) -> dict[int, int]:
    counts: dict[int, int] = {}
    for h in state.handles.values():
        for x in h.record.letters():
            counts[abs(x)] = counts.get(abs(x), 0) + 1
    return counts


def _labels_present(state: CoveringState) -> set[int]:
    labels = {f.label for f in state.frees.values()}
    labels |= {abs(x) for h in state.handles.values()
               for x in h.record.letters()}
    return labels


def _erase_matching(run: _Run):
    """Erase every handle letter whose label matches a free edge."""
    changed = True
    while changed:
        changed = False
        free_labels = {f.label: fid for fid, f in
                       sorted(run.state.frees.items(), reverse=True)}
        for hid in sorted(run.state.handles):
            for side in ("a", "b"):
                wrd = _handle_word(run.state, hid, side)
                for pos, letter in enumerate(wrd):
                    if abs(letter) in free_labels:
                        try:
                            run.do("R-ERASE", {
                                "free": free_labels[abs(letter)],
                                "handle": hid, "side": side,
                                "mode": "delete", "pos": pos})
                        except Exception:
                            continue
                        changed = True
                        break
                if changed:
                    break
            if changed:
                break
        if changed:
            continue


def _resolve_transients(run: _Run):
    """Dissolve two-letter transient words left by R-L4-1 walking."""
    changed = True
    while changed:
        changed = False
        _erase_matching(run)
        _normalize_handles(run)
        for hid in sorted(run.state.handles):
            rec = run.state.handles[hid].record
            a, b = rec.cocore.letters, rec.core.letters
            two = (not a and len(b) == 2) or (len(a) == 2 and not b)
            if not two:
                continue
            word = b if not a else a
            # walk a free edge next to one of the letters and erase it
            for pos in (0, 1):
                lab = abs(word[pos])
                got = _walk_free_to(run, lab, avoid=frozenset({hid}))
                if got is not None:
                    run.do("R-ERASE", {"free": got, "handle": hid,
                                       "side": "b" if not a else "a",
                                       "mode": "delete", "pos": pos})
                    changed = True
                    break
            if changed:
                break


def _spread_free_labels(run: _Run):
    """Give free edges as many distinct labels as possible (L4-12)."""
    guard = 0
    while guard < 4 * run.state.degree * (len(run.state.frees) + 1):
        guard += 1
        by_label: dict[int, list[str]] = {}
        for fid in sorted(run.state.frees):
            by_label.setdefault(run.state.frees[fid].label, []).append(fid)
        dup_labels = sorted(l for l, ids in by_label.items() if len(ids) > 1)
        if not dup_labels:
            return
        letters = _letter_census(run.state)
        targets = sorted(l for l in letters if l not in by_label)
        if not targets:
            return  # every occupied label already has a free edge
        i = dup_labels[0]
        target = min(targets, key=lambda t: (abs(t - i), t))
        step = 1 if target > i else -1
        nxt = i + step
        pivot, mover = by_label[i][0], by_label[i][1]
        if nxt in by_label:
            # slide the duplicate one step along existing free labels
            run.do("R-L4-12", {"variant": "a", "pivot": pivot, "mover": mover,
                               "comp": by_label[nxt][0]})
            continue
        # nxt must carry a handle letter; consume it via the right variant
        done = False
        for hid in sorted(run.state.handles):
            rec = run.state.handles[hid].record
            a, b = rec.cocore.letters, rec.core.letters
            binding = {"pivot": pivot, "mover": mover, "comp": hid,
                       "rev": False}
            if len(a) == 1 and a[0] == nxt and not b:
                binding["variant"] = "b"
            elif len(a) == 1 and a[0] == nxt and len(b) == 1:
                binding["variant"] = "c"
            elif not a and len(b) == 1 and abs(b[0]) == nxt:
                binding["variant"] = "d"
            elif len(a) == 1 and len(b) == 1 and abs(b[0]) == nxt and a[0] != nxt:
                binding["variant"] = "e"
            else:
                continue
            try:
                run.do("R-L4-12", binding)
            except Exception:
                continue
            done = True
            break
        if not done:
            return


def _empties(state: CoveringState) -> list[str]:
    return sorted(h for h, it in state.handles.items()
                  if it.record.shape() == "empty")


def _plant_anchor(run: _Run, budget: int) -> bool:
    """Make a single h(s_i, e) at the first free edge's label so that
    non-consuming wrap steps have a spare carrier from the very first
    step of every walk.  Prefers converting an existing h(e,e); only
    otherwise spends budget.  The anchor is a legal simplified shape, so
    it never needs cleaning up."""
    fid = _first_free(run.state)
    lab = run.state.frees[fid].label
    if any(h.record.shape() == "cocore_single"
           and h.record.cocore.letters[0] == lab
           for h in run.state.handles.values()):
        return False
    empties = _empties(run.state)
    if empties:
        run.do("R-ERASE", {"free": fid, "handle": empties[0], "side": "a",
                           "mode": "insert", "pos": 0, "sign": 1})
        return True
    if run.handles_added() < budget:
        run.do("R-ADD-HANDLE", {"region": ROOT, "label": lab,
                                "handle_id": run.state.fresh_id("h")})
        return True
    return False


def _clear_doubles(run: _Run, budget: int) -> bool:
    """Clear every double-loop handle within the added-handle budget.

    Routes, in order: split against an h(e,e) via R-L4-2 when a free
    edge reaches a label adjacent to the core letter; otherwise dissolve
    through R-L4-1 and erase the transient letters.  Returns True once
    no double remains.
    """
    guard = 0
    while guard < 60:
        guard += 1
        doubles = sorted(hid for hid, h in run.state.handles.items()
                         if h.record.shape() == "double")
        if not doubles:
            return True
        hid = doubles[0]
        rec = run.state.handles[hid].record
        alpha, beta = rec.cocore.letters[0], abs(rec.core.letters[0])
        progressed = False

        # split route: f next to the core letter + an empty handle
        if _empties(run.state) or run.handles_added() < budget:
            for tgt in (beta - 1, beta + 1):
                if not 1 <= tgt <= run.state.degree - 1:
                    continue
                got = _walk_free_to(run, tgt, avoid=frozenset({hid}))
                if run.state.handles[hid].record.shape() != "double":
                    progressed = True
                    break
                if got is None:
                    continue
                empties = _empties(run.state)
                if not empties and run.handles_added() < budget:
                    eid = run.state.fresh_id("h")
                    run.do("R-ADD-HANDLE", {"region": ROOT, "label": None,
                                            "handle_id": eid})
                    empties = [eid]
                if not empties:
                    continue
                run.do("R-L4-2", {"free": got, "h1": hid, "h2": empties[0],
                                  "rev": False})
                _erase_matching(run)
                _normalize_handles(run)
                progressed = True
                break
        if progressed:
            continue

        # dissolve route: step onto the handle via R-L4-1 and erase the
        # transient letter, flipping the leftover single
        for tgt, variant in ((alpha - 1, "a"), (alpha + 1, "a"),
                             (beta - 1, "b"), (beta + 1, "b")):
            if not 1 <= tgt <= run.state.degree - 1:
                continue
            got = _walk_free_to(run, tgt, avoid=frozenset({hid}))
            if run.state.handles[hid].record.shape() != "double":
                progressed = True
                break
            if got is None:
                continue
            run.do("R-L4-1", {"free": got, "handle": hid,
                              "variant": variant, "rev": False})
            _resolve_transients(run)
            progressed = True
            break
        if not progressed:
            return False
    return not any(h.record.shape() == "double"
                   for h in run.state.handles.values())


def weak_to_simplified(state: CoveringState) -> PlanResult:
    """Drive a weak simplified state to simplified form within the
    max(0, N-f-h-1) added-handle budget."""
    problems = validate_state(state)
    if problems:
        raise ValueError(f"invalid input state: {problems}")
    if not is_weak_simplified(state):
        raise NotWeakSimplified("input is not in weak simplified form")
    if not state.frees:
        raise NoFreeEdge("weak_to_simplified requires a free edge")
    n = state.degree
    f = state.free_count()
    h = state.handle_count()
    bound = max(0, n - f - h - 1)
    run = _Run(state)
    if is_simplified(state) or n <= 3:
        # crossings need labels more than 1 apart, so no doubles exist for
        # N <= 3: weak forms are already simplified.
        return run.result(bound, "full")

    try:
        _normalize_handles(run)
        _erase_matching(run)
        _resolve_transients(run)

        # make handle letters mutually distinct
        guard = 0
        while guard < 200:
            guard += 1
            counts = _letter_census(run.state)
            dups = sorted(l for l, c in counts.items() if c > 1)
            if not dups:
                break
            lab = dups[0]
            got = _walk_free_to(run, lab)
            if got is None:
                if not _plant_anchor(run, bound):
                    raise CapExceeded("cannot reach duplicated letter label",
                                      {"state": serialize_state(run.state)})
            _erase_matching(run)
            _resolve_transients(run)
        _spread_free_labels(run)
        _erase_matching(run)
        _resolve_transients(run)
        _normalize_handles(run)

        if any(h.record.shape() == "double"
               for h in run.state.handles.values()):
            if not _clear_doubles(run, bound):
                # plant the walk anchor and retry once before giving up
                _plant_anchor(run, bound)
                if not _clear_doubles(run, bound):
                    raise CapExceeded(
                        "cannot clear double-loop handles within budget",
                        {"state": serialize_state(run.state)})
        _normalize_handles(run)
        _erase_matching(run)
        _resolve_transients(run)
        _normalize_handles(run)
        if not is_simplified(run.state):
            raise CapExceeded(
                "pipeline finished without reaching simplified form",
                {"state": serialize_state(run.state)})
    except CapExceeded as exc:
        # A connected covering of degree N carries every label 1..N-1
        # (transitive monodromy); with labels missing the bound is out of
        # scope.  Otherwise try a bounded breadth-first rescue before
        # declaring a stall.
        missing = set(range(1, n)) - _labels_present(state)
        if missing:
            raise MissingLabels(
                f"labels {sorted(missing)} absent: the state does not "
                f"present a connected covering of degree {n}") from exc
        left = bound - run.handles_added()
        rescue = search_min_handles(run.state, max(0, left), "full",
                                    depth_cap=10, state_cap=40000)
        if not rescue.found:
            raise
        for rid, binding in rescue.derivation.steps:
            run.do(rid, binding)
    return run.result(bound, "full")


# ---------------------------------------------------------------------------
# bound calculators


def bound_no_white(n: int) -> int:
    return max(0, n - 2)


def bound_general(w: int, n: int) -> int:
    return w + max(0, n - 2)


def bound_weak_to_full(n: int, f: int, h: int) -> int:
    return max(0, n - f - h - 1)


def bound_corollary(b: int, w: int, n: int) -> int:
    """floor(w/2 + b(N-2)/4) + N-2, evaluated in exact rationals."""
    if b <= 0:
        raise ValueError("the corollary requires b > 0 black vertices")
    if n < 2:
        raise ValueError("degree must be at least 2")
    val = Fraction(w, 2) + Fraction(b * (n - 2), 4)
    import math

    return math.floor(val) + (n - 2)


# ---------------------------------------------------------------------------
# the oracle


@dataclass
class SearchStats:
    expanded: int = 0
    enqueued: int = 0
    deduped: int = 0
    pruned: int = 0
    capped: bool = False
    budget_found: int | None = None


@dataclass
class SearchResult:
    derivation: Derivation | None
    stats: SearchStats = field(default_factory=SearchStats)

    @property
    def found(self) -> bool:
        return self.derivation is not None

    def handles_added(self) -> int:
        if not self.found:
            raise ValueError("no derivation found")
        return self.derivation.handles_added()


def _state_size_ok(s: CoveringState, base: CoveringState) -> bool:
    if len(s.loops) > len(base.loops) + 3:
        return False
    for h in s.handles.values():
        if len(h.record.cocore) + len(h.record.core) > 4:
            return False
    return True


def search_min_handles(state: CoveringState, budget: int,
                       target: str = "full", depth_cap: int = 30,
                       state_cap: int = 200000) -> SearchResult:
    """Breadth-first search for a minimal-added-handle derivation.

    Iterates the allowed budget from 0 upward, so the first derivation
    found uses the minimal number of added handles (within the caps).
    Absence within the caps is reported as not-found, never as a proof
    of impossibility.
    """
    if target not in ("weak", "full"):
        raise ValueError("target must be 'weak' or 'full'")
    goal = is_simplified if target == "full" else is_weak_simplified
    stats = SearchStats()
    for b in range(budget + 1):
        hit = _bfs_budget(state, b, goal, depth_cap, state_cap, stats)
        if hit is not None:
            stats.budget_found = b
            return SearchResult(hit, stats)
    return SearchResult(None, stats)


def _bfs_budget(start: CoveringState, budget: int, goal, depth_cap: int,
                state_cap: int, stats: SearchStats) -> Derivation | None:
    if goal(start):
        return Derivation(start, [], start)
    key0 = serialize_state(normalize(start))
    visited: dict[str, int] = {key0: 0}
    queue: deque = deque([(start, 0, 0, [])])  # state, adds, depth, path
    while queue:
        if len(visited) > state_cap:
            stats.capped = True
            return None
        s, adds, depth, path = queue.popleft()
        if depth >= depth_cap:
            stats.capped = True
            continue
        stats.expanded += 1
        for rid, binding in rules.applicable(s, include_add=adds < budget):
            try:
                s2 = apply_rule(s, rid, binding)
            except Exception:
                continue
            adds2 = adds + (1 if rid == "R-ADD-HANDLE" else 0)
            if not _state_size_ok(s2, start):
                stats.pruned += 1
                continue
            step = (rid, binding)
            if goal(s2):
                return Derivation(start, path + [step], s2)
            key = serialize_state(normalize(s2))
            if key in visited and visited[key] <= adds2:
                stats.deduped += 1
                continue
            visited[key] = adds2
            stats.enqueued += 1
            queue.append((s2, adds2, depth + 1, path + [step]))
    return None


# ---------------------------------------------------------------------------
# conjecture instance check


@dataclass
class ConjectureReport:
    weak_handles: int
    full_handles: int
    bound: int
    violated: bool
    detail: str


def check_conjecture_instance(state: CoveringState) -> ConjectureReport:
    """Check the simplified-vs-weak bound u <= max(u_w route, N-1) on one
    instance by running both pipelines."""
    if not state.frees:
        raise NoFreeEdge("conjecture check requires a free edge")
    n = state.degree
    if is_weak_simplified(state):
        weak_added = 0
        full = weak_to_simplified(state)
        full_added = full.handles_added
    else:
        weak_plan = simplify_no_white(state)
        weak_added = weak_plan.handles_added
        rest = weak_to_simplified(weak_plan.final)
        full_added = weak_added + rest.handles_added
    bound = max(weak_added, n - 1)
    violated = full_added > bound
    detail = (f"weak route adds {weak_added}, full route adds {full_added}, "
              f"bound max(u_w, N-1) = {bound}")
    return ConjectureReport(weak_added, full_added, bound, violated, detail)
