"""The lemma-level rewrite rule catalogue on covering states.

Every rule is a registered :class:`Rule` with an id, a citation tag, an
``apply(state, binding) -> (state, inverse_step)`` function and an
instance enumerator.  Bindings are flat dicts naming the consumed
elements by id plus small parameters (labels, signs, positions).

Bidirectional rules return the *inverse step*: replaying it on the
output restores the input up to :func:`~chartcalc.states.normalize`.
``R-ADD-HANDLE`` is the single one-way rule (handles are only ever
added); its inverse step is ``None``.

Beyond the lemma rules, the catalogue carries the small set of loop
moves that the printed proofs use freely inside a disk region:

* ``R-WRAP`` -- a free edge pushed through an adjacent arc of label j
  (|i-j| = 1) acquires a surrounding j-labeled loop; the reverse unwinds
  it through the same arc.
* ``R-PASS-LOOP`` -- a free edge crosses a loop boundary; at label
  distance 1 the crossing leaves a debris loop around the edge on the
  far side.
* ``R-COLLAR`` -- trades h(s_{i+1}, e) for h(s_i, e) surrounded by
  nested collar loops labeled i+1 (inner) and i (outer).
* ``R-ERASE`` -- a free edge deletes (or inserts) one matching letter of
  a handle word: a chart loop on a handle is still a chart loop, so a
  matching free edge eliminates it, and conversely can lay a fresh loop
  along the handle.
* ``R-CORE-REWRITE`` / ``R-COCORE-REWRITE`` -- replace a handle word by
  a braid-equal word (black-vertex-free chart rewiring on the handle).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from chartcalc import braid
from chartcalc.braid import BraidWord
from chartcalc.errors import NotApplicable, ParseError, StepFailed, EndMismatch
from chartcalc.states import (
    CCW,
    CW,
    CoveringState,
    FreeEdge,
    HandleItem,
    HandleRecord,
    Loop,
    ROOT,
    normalize,
    parse_state,
    serialize_state,
    states_equal,
    validate_state,
)

Step = tuple[str, dict]


@dataclass(frozen=True)
class Rule:
    id: str
    citation: str
    bidirectional: bool
    apply: Callable[[CoveringState, dict], tuple[CoveringState, Step | None]]
    enumerate: Callable[[CoveringState], list[dict]]
    axiom_trivial_handles: bool = False


RULES: dict[str, Rule] = {}


def _register(rule: Rule):
    RULES[rule.id] = rule
    return rule


def _need(binding: dict, key: str):
    if key not in binding:
        raise NotApplicable(f"binding missing {key!r}")
    return binding[key]


def _free(s: CoveringState, binding: dict, key: str = "free") -> str:
    fid = _need(binding, key)
    if fid not in s.frees:
        raise NotApplicable(f"no free edge {fid!r}")
    return fid


def _handle(s: CoveringState, binding: dict, key: str = "handle") -> str:
    hid = _need(binding, key)
    if hid not in s.handles:
        raise NotApplicable(f"no handle {hid!r}")
    return hid


def _loop(s: CoveringState, binding: dict, key: str = "loop") -> str:
    lid = _need(binding, key)
    if lid not in s.loops:
        raise NotApplicable(f"no loop {lid!r}")
    return lid


def _same_region(s: CoveringState, *regions: str):
    if len(set(regions)) != 1:
        raise NotApplicable(f"elements not in a common region: {regions}")


def _loop_is_plain(s: CoveringState, lid: str):
    """Loop with no crossings (safe to delete via a handle loop, to wrap,
    to swap under, etc.)."""
    if s.loop_has_crossings(lid):
        raise NotApplicable(f"loop {lid} has crossings")


def _loop_contents(s: CoveringState, lid: str) -> tuple[list[str], list[str]]:
    kids = s.loop_children(lid)
    items = s.items_in(lid)
    return kids, items


def _word(s: CoveringState, letters: tuple[int, ...]) -> BraidWord:
    return BraidWord(s.degree, tuple(letters))


def _set_handle(s: CoveringState, hid: str, a: tuple[int, ...], b: tuple[int, ...],
                region: str | None = None) -> CoveringState:
    h = s.handles[hid]
    rec = HandleRecord(_word(s, a), _word(s, b))
    handles = dict(s.handles)
    handles[hid] = HandleItem(rec, h.region if region is None else region)
    return s.replace_parts(handles=handles)


def _set_free(s: CoveringState, fid: str, label: int | None = None,
              region: str | None = None) -> CoveringState:
    f = s.frees[fid]
    frees = dict(s.frees)
    frees[fid] = FreeEdge(f.label if label is None else label,
                          f.region if region is None else region)
    return s.replace_parts(frees=frees)


def _delete_loop(s: CoveringState, lid: str) -> CoveringState:
    """Remove a loop node, reparenting its contents and dropping its
    crossing records."""
    parent = s.loops[lid].parent
    loops = {k: (Loop(v.label, v.orient, parent) if v.parent == lid else v)
             for k, v in s.loops.items() if k != lid}
    frees = {k: (FreeEdge(v.label, parent) if v.region == lid else v)
             for k, v in s.frees.items()}
    handles = {k: (HandleItem(v.record, parent) if v.region == lid else v)
               for k, v in s.handles.items()}
    crossings = {p: c for p, c in s.crossings.items() if lid not in p}
    return CoveringState(s.degree, loops, frees, handles, crossings)


def _add_loop(s: CoveringState, label: int, orient: int, parent: str,
              enclose: tuple[str, ...], lid: str | None = None
              ) -> tuple[CoveringState, str]:
    if lid is None:
        lid = s.fresh_id("l")
    elif lid in s.loops:
        raise NotApplicable(f"loop id {lid} already in use")
    loops = dict(s.loops)
    loops[lid] = Loop(label, orient, parent)
    frees = dict(s.frees)
    handles = dict(s.handles)
    for eid in enclose:
        if eid in s.loops:
            if s.loops[eid].parent != parent:
                raise NotApplicable(f"{eid} is not in region {parent}")
            loops[eid] = Loop(s.loops[eid].label, s.loops[eid].orient, lid)
        elif eid in s.frees:
            if s.frees[eid].region != parent:
                raise NotApplicable(f"{eid} is not in region {parent}")
            frees[eid] = FreeEdge(s.frees[eid].label, lid)
        elif eid in s.handles:
            if s.handles[eid].region != parent:
                raise NotApplicable(f"{eid} is not in region {parent}")
            handles[eid] = HandleItem(s.handles[eid].record, lid)
        else:
            raise NotApplicable(f"cannot enclose unknown element {eid}")
    return CoveringState(s.degree, loops, frees, handles, dict(s.crossings)), lid


def _carried_labels(s: CoveringState, eid: str) -> set[int]:
    if eid in s.frees:
        return {s.frees[eid].label}
    if eid in s.handles:
        return {abs(x) for x in s.handles[eid].record.letters()}
    return set()


def _region_of(s: CoveringState, eid: str) -> str:
    if eid in s.frees:
        return s.frees[eid].region
    if eid in s.handles:
        return s.handles[eid].region
    if eid in s.loops:
        return s.loops[eid].parent
    raise NotApplicable(f"unknown element {eid}")


# ---------------------------------------------------------------------------
# R-INV-HANDLE


def _apply_inv(s: CoveringState, b: dict):
    hid = _handle(s, b)
    rec = s.handles[hid].record
    s2 = _set_handle(s, hid, braid.invert(rec.cocore).letters,
                     braid.invert(rec.core).letters)
    return s2, ("R-INV-HANDLE", {"handle": hid})


def _enum_inv(s: CoveringState):
    out = []
    for hid, h in s.handles.items():
        if h.record.letters():
            out.append({"handle": hid})
    return out


_register(Rule("R-INV-HANDLE", "handle rotation inverts both words",
               True, _apply_inv, _enum_inv))


# ---------------------------------------------------------------------------
# R-FLIP (axiom for trivial handles)


def _apply_flip(s: CoveringState, b: dict):
    hid = _handle(s, b)
    rec = s.handles[hid].record
    la, lb = len(rec.cocore), len(rec.core)
    if not ((la == 1 and lb == 0) or (la == 0 and lb == 1)):
        raise NotApplicable("R-FLIP needs a single-letter one-sided handle")
    s2 = _set_handle(s, hid, rec.core.letters, rec.cocore.letters)
    return s2, ("R-FLIP", {"handle": hid})


def _enum_flip(s: CoveringState):
    out = []
    for hid, h in s.handles.items():
        la, lb = len(h.record.cocore), len(h.record.core)
        if (la == 1 and lb == 0) or (la == 0 and lb == 1):
            out.append({"handle": hid})
    return out


_register(Rule("R-FLIP", "trivial handles allow h(e,s_i) ~ h(s_i,e)",
               True, _apply_flip, _enum_flip, axiom_trivial_handles=True))


# ---------------------------------------------------------------------------
# R-LOOP-FREE / R-LOOP-HANDLE


def _loop_create(s: CoveringState, owner_region: str, label: int, b: dict):
    orient = b.get("orient", CCW)
    if orient not in (CCW, CW):
        raise NotApplicable("orient must be +-1")
    enclose = tuple(b.get("enclose", ()))
    s2, lid = _add_loop(s, label, orient, owner_region, enclose,
                        lid=b.get("loop_id"))
    return s2, lid


def _apply_loop_free(s: CoveringState, b: dict):
    fid = _free(s, b)
    f = s.frees[fid]
    mode = b.get("mode", "create")
    if mode == "create":
        s2, lid = _loop_create(s, f.region, f.label, b)
        return s2, ("R-LOOP-FREE", {"free": fid, "mode": "delete", "loop": lid})
    if mode == "delete":
        lid = _loop(s, b)
        lp = s.loops[lid]
        if lp.label != f.label:
            raise NotApplicable(
                f"loop label {lp.label} does not match free edge label {f.label}")
        if f.region not in (lp.parent, lid):
            raise NotApplicable("free edge is not adjacent to the loop")
        kids, items = _loop_contents(s, lid)
        had_crossings = s.loop_has_crossings(lid)
        s2 = _delete_loop(s, lid)
        if had_crossings:
            inverse = None  # crossing records are not recoverable
        else:
            inverse = ("R-LOOP-FREE", {
                "free": fid, "mode": "create", "orient": lp.orient,
                "loop_id": lid,
                "enclose": tuple(kids + [i for i in items if i != fid]
                                 if f.region != lid else
                                 kids + items),
            })
        return s2, inverse
    raise NotApplicable(f"unknown mode {mode!r}")


def _enum_loop_free(s: CoveringState):
    out = []
    for fid, f in s.frees.items():
        out.append({"free": fid, "mode": "create", "orient": CCW, "enclose": ()})
        for eid in s.items_in(f.region):
            if eid != fid:
                out.append({"free": fid, "mode": "create", "orient": CCW,
                            "enclose": (eid,)})
        for lid, lp in s.loops.items():
            if lp.label == f.label and f.region in (lp.parent, lid):
                out.append({"free": fid, "mode": "delete", "loop": lid})
    return out


_register(Rule("R-LOOP-FREE",
               "a free edge creates or eliminates a matching chart loop",
               True, _apply_loop_free, _enum_loop_free))


def _apply_loop_handle(s: CoveringState, b: dict):
    hid = _handle(s, b)
    h = s.handles[hid]
    mode = b.get("mode", "create")
    if mode == "create":
        label = int(_need(b, "label"))
        if not h.record.carries(label):
            raise NotApplicable(f"handle {hid} carries no label-{label} loop")
        s2, lid = _loop_create(s, h.region, label, b)
        return s2, ("R-LOOP-HANDLE", {"handle": hid, "mode": "delete", "loop": lid})
    if mode == "delete":
        lid = _loop(s, b)
        lp = s.loops[lid]
        if not h.record.carries(lp.label):
            raise NotApplicable(f"handle {hid} carries no label-{lp.label} loop")
        if h.region not in (lp.parent, lid):
            raise NotApplicable("handle is not adjacent to the loop")
        _loop_is_plain(s, lid)  # Lemma-level move needs a crossing-free loop
        kids, items = _loop_contents(s, lid)
        s2 = _delete_loop(s, lid)
        inverse = ("R-LOOP-HANDLE", {
            "handle": hid, "mode": "create", "label": lp.label,
            "orient": lp.orient, "loop_id": lid,
            "enclose": tuple(kids + [i for i in items if i != hid]
                             if h.region != lid else kids + items),
        })
        return s2, inverse
    raise NotApplicable(f"unknown mode {mode!r}")


def _enum_loop_handle(s: CoveringState):
    out = []
    for hid, h in s.handles.items():
        labels = sorted({abs(x) for x in h.record.letters()})
        for lab in labels:
            out.append({"handle": hid, "mode": "create", "label": lab,
                        "orient": CCW, "enclose": ()})
            out.append({"handle": hid, "mode": "create", "label": lab,
                        "orient": CCW, "enclose": (hid,)})
        for lid, lp in s.loops.items():
            if (h.record.carries(lp.label) and h.region in (lp.parent, lid)
                    and not s.loop_has_crossings(lid)):
                out.append({"handle": hid, "mode": "delete", "loop": lid})
    return out


_register(Rule("R-LOOP-HANDLE",
               "a handle chart loop creates or eliminates a parallel "
               "crossing-free loop",
               True, _apply_loop_handle, _enum_loop_handle))


# ---------------------------------------------------------------------------
# R-SHIFT-COCORE / R-SHIFT-CORE


def _apply_shift(side: str):
    def apply(s: CoveringState, b: dict):
        fid = _free(s, b)
        hid = _handle(s, b)
        f, h = s.frees[fid], s.handles[hid]
        _same_region(s, f.region, h.region)
        rec = h.record
        wrd = rec.cocore if side == "a" else rec.core
        other = rec.core if side == "a" else rec.cocore
        if len(wrd) != 1 or wrd.letters[0] < 0 or len(other) != 0:
            raise NotApplicable(f"handle is not h(s_j, e) on the {side} side")
        j = wrd.letters[0]
        if abs(f.label - j) != 1:
            raise NotApplicable(f"labels {f.label} and {j} are not adjacent")
        new = (f.label,)
        s2 = _set_free(s, fid, label=j)
        s2 = _set_handle(s2, hid, new if side == "a" else (),
                         () if side == "a" else new)
        rid = "R-SHIFT-COCORE" if side == "a" else "R-SHIFT-CORE"
        return s2, (rid, {"free": fid, "handle": hid})
    return apply


def _enum_shift(side: str):
    def enum(s: CoveringState):
        out = []
        for fid, f in s.frees.items():
            for hid, h in s.handles.items():
                if h.region != f.region:
                    continue
                wrd = h.record.cocore if side == "a" else h.record.core
                other = h.record.core if side == "a" else h.record.cocore
                if (len(wrd) == 1 and wrd.letters[0] > 0 and len(other) == 0
                        and abs(f.label - wrd.letters[0]) == 1):
                    out.append({"free": fid, "handle": hid})
        return out
    return enum


_register(Rule("R-SHIFT-COCORE", "f_i + h(s_{i+1},e) ~ f_{i+1} + h(s_i,e)",
               True, _apply_shift("a"), _enum_shift("a")))
_register(Rule("R-SHIFT-CORE", "f_i + h(e,s_{i+1}) ~ f_{i+1} + h(e,s_i)",
               True, _apply_shift("b"), _enum_shift("b")))


# ---------------------------------------------------------------------------
# R-CONJ


def _apply_conj(s: CoveringState, b: dict):
    mode = b.get("mode", "absorb")
    if mode == "absorb":
        lid = _loop(s, b)
        lp = s.loops[lid]
        _loop_is_plain(s, lid)
        kids, items = _loop_contents(s, lid)
        if kids or len(items) != 1 or items[0] not in s.handles:
            raise NotApplicable("loop must enclose exactly one handle")
        hid = items[0]
        rec = s.handles[hid].record
        if len(rec.cocore) != 0:
            raise NotApplicable("conjugation loop absorbs into h(e, w) only")
        m, o = lp.label, lp.orient
        new_core = braid.conjugate(rec.core, m, o)
        s2 = _delete_loop(s, lid)
        s2 = _set_handle(s2, hid, (), new_core.letters)
        return s2, ("R-CONJ", {"mode": "extract", "handle": hid,
                               "label": m, "sign": o, "loop_id": lid})
    if mode == "extract":
        hid = _handle(s, b)
        h = s.handles[hid]
        if len(h.record.cocore) != 0:
            raise NotApplicable("conjugation extraction needs h(e, w)")
        m = int(_need(b, "label"))
        o = int(_need(b, "sign"))
        if o not in (CCW, CW) or not 1 <= m <= s.degree - 1:
            raise NotApplicable("bad label or sign")
        new_core = braid.conjugate(h.record.core, m, -o)
        s2, lid = _add_loop(s, m, o, h.region, (hid,), lid=b.get("loop_id"))
        s2 = _set_handle(s2, hid, (), new_core.letters)
        return s2, ("R-CONJ", {"mode": "absorb", "loop": lid})
    raise NotApplicable(f"unknown mode {mode!r}")


def _enum_conj(s: CoveringState):
    out = []
    for lid, lp in s.loops.items():
        if s.loop_has_crossings(lid):
            continue
        kids, items = _loop_contents(s, lid)
        if (not kids and len(items) == 1 and items[0] in s.handles
                and len(s.handles[items[0]].record.cocore) == 0):
            out.append({"mode": "absorb", "loop": lid})
    for hid, h in s.handles.items():
        if len(h.record.cocore) == 0:
            for m in range(1, s.degree):
                for o in (CCW, CW):
                    out.append({"mode": "extract", "handle": hid,
                                "label": m, "sign": o})
    return out


_register(Rule("R-CONJ",
               "a loop around h(e,w) conjugates the core word",
               True, _apply_conj, _enum_conj))


# ---------------------------------------------------------------------------
# R-WRAP (push a free edge through an adjacent arc, gaining a debris loop)


def _apply_wrap(s: CoveringState, b: dict):
    fid = _free(s, b)
    f = s.frees[fid]
    mode = b.get("mode", "wrap")
    carrier = _need(b, "carrier")
    label = int(_need(b, "label"))
    if carrier == fid:
        raise NotApplicable("free edge cannot wrap through itself")
    if label not in _carried_labels(s, carrier):
        raise NotApplicable(f"{carrier} carries no arc of label {label}")
    if abs(f.label - label) != 1:
        raise NotApplicable("wrap requires labels at distance 1")
    if mode == "wrap":
        if _region_of(s, carrier) != f.region:
            raise NotApplicable("carrier must share the free edge's region")
        orient = b.get("orient", CCW)
        s2, lid = _add_loop(s, label, orient, f.region, (fid,),
                            lid=b.get("loop_id"))
        return s2, ("R-WRAP", {"free": fid, "mode": "unwrap", "loop": lid,
                               "carrier": carrier, "label": label})
    if mode == "unwrap":
        lid = _loop(s, b)
        lp = s.loops[lid]
        if lp.label != label:
            raise NotApplicable("loop label does not match")
        _loop_is_plain(s, lid)
        kids, items = _loop_contents(s, lid)
        if kids or items != [fid]:
            raise NotApplicable("loop must enclose exactly the free edge")
        if _region_of(s, carrier) != lp.parent:
            raise NotApplicable("carrier must sit just outside the loop")
        s2 = _delete_loop(s, lid)
        return s2, ("R-WRAP", {"free": fid, "mode": "wrap", "carrier": carrier,
                               "label": label, "orient": lp.orient,
                               "loop_id": lid})
    raise NotApplicable(f"unknown mode {mode!r}")


def _enum_wrap(s: CoveringState):
    out = []
    for fid, f in s.frees.items():
        for eid in s.items_in(f.region):
            if eid == fid:
                continue
            for lab in sorted(_carried_labels(s, eid)):
                if abs(f.label - lab) == 1:
                    out.append({"free": fid, "mode": "wrap", "carrier": eid,
                                "label": lab, "orient": CCW})
        lid = f.region
        if lid != ROOT and not s.loop_has_crossings(lid):
            lp = s.loops[lid]
            kids, items = _loop_contents(s, lid)
            if not kids and items == [fid] and abs(f.label - lp.label) == 1:
                for eid in s.items_in(lp.parent):
                    if lp.label in _carried_labels(s, eid):
                        out.append({"free": fid, "mode": "unwrap", "loop": lid,
                                    "carrier": eid, "label": lp.label})
    return out


_register(Rule("R-WRAP",
               "free edge through an adjacent-label arc gains a debris loop",
               True, _apply_wrap, _enum_wrap))


# ---------------------------------------------------------------------------
# R-PASS-LOOP


def _apply_pass(s: CoveringState, b: dict):
    fid = _free(s, b)
    lid = _loop(s, b)
    f, lp = s.frees[fid], s.loops[lid]
    i, j = f.label, lp.label
    if i == j:
        raise NotApplicable("same-label passage is loop elimination, not a pass")
    inward = bool(b.get("inward", True))
    debris = b.get("debris")
    src = lp.parent if inward else lid
    dst = lid if inward else lp.parent
    if debris is None:
        if f.region != src:
            raise NotApplicable("free edge is not on the entry side of the loop")
        if abs(i - j) > 1:
            s2 = _set_free(s, fid, region=dst)
            return s2, ("R-PASS-LOOP", {"free": fid, "loop": lid,
                                        "inward": not inward})
        s2 = _set_free(s, fid, region=dst)
        s2, did = _add_loop(s2, j, b.get("orient", CCW), dst, (fid,),
                            lid=b.get("debris_id"))
        return s2, ("R-PASS-LOOP", {"free": fid, "loop": lid,
                                    "inward": not inward, "debris": did})
    # debris-consuming reverse reading: f sits wrapped on the dst side and
    # passes back to src, unwinding the debris through the loop.
    if debris not in s.loops:
        raise NotApplicable(f"no debris loop {debris}")
    dl = s.loops[debris]
    if dl.label != j or dl.parent != src:
        raise NotApplicable("debris loop does not match the passage")
    _loop_is_plain(s, debris)
    kids, items = _loop_contents(s, debris)
    if kids or items != [fid]:
        raise NotApplicable("debris loop must enclose exactly the free edge")
    if abs(i - j) != 1:
        raise NotApplicable("debris passage needs labels at distance 1")
    s2 = _delete_loop(s, debris)
    s2 = _set_free(s2, fid, region=dst)
    return s2, ("R-PASS-LOOP", {"free": fid, "loop": lid, "inward": not inward,
                                "orient": dl.orient, "debris_id": debris})


def _enum_pass(s: CoveringState):
    out = []
    for fid, f in s.frees.items():
        for lid, lp in s.loops.items():
            if lp.label == f.label:
                continue
            if f.region == lp.parent:
                out.append({"free": fid, "loop": lid, "inward": True})
            if f.region == lid:
                out.append({"free": fid, "loop": lid, "inward": False})
            if abs(lp.label - f.label) == 1 and f.region not in (lid, lp.parent):
                dl = s.loops.get(f.region)
                if dl is not None and dl.label == lp.label \
                        and not s.loop_has_crossings(f.region):
                    kids, items = _loop_contents(s, f.region)
                    if not kids and items == [fid]:
                        if dl.parent == lp.parent:
                            out.append({"free": fid, "loop": lid,
                                        "inward": True, "debris": f.region})
                        if dl.parent == lid:
                            out.append({"free": fid, "loop": lid,
                                        "inward": False, "debris": f.region})
    return out


_register(Rule("R-PASS-LOOP",
               "free edge crosses a loop boundary (debris at distance 1)",
               True, _apply_pass, _enum_pass))


# ---------------------------------------------------------------------------
# R-SWAP-UNDER-LOOP


def _apply_swap(s: CoveringState, b: dict):
    lid = _loop(s, b)
    lp = s.loops[lid]
    _loop_is_plain(s, lid)
    kids, items = _loop_contents(s, lid)
    if kids or len(items) != 1 or items[0] not in s.frees:
        raise NotApplicable("loop must enclose exactly one free edge")
    fid = items[0]
    i, j = s.frees[fid].label, lp.label
    if abs(i - j) != 1:
        raise NotApplicable("swap requires labels at distance 1")
    loops = dict(s.loops)
    loops[lid] = Loop(i, lp.orient, lp.parent)
    s2 = s.replace_parts(loops=loops)
    s2 = _set_free(s2, fid, label=j)
    return s2, ("R-SWAP-UNDER-LOOP", {"loop": lid})


def _enum_swap(s: CoveringState):
    out = []
    for lid, lp in s.loops.items():
        if s.loop_has_crossings(lid):
            continue
        kids, items = _loop_contents(s, lid)
        if (not kids and len(items) == 1 and items[0] in s.frees
                and abs(s.frees[items[0]].label - lp.label) == 1):
            out.append({"loop": lid})
    return out


_register(Rule("R-SWAP-UNDER-LOOP",
               "f_i under a j-loop becomes f_j under an i-loop (|i-j|=1)",
               True, _apply_swap, _enum_swap))


# ---------------------------------------------------------------------------
# R-COLLAR


def _apply_collar(s: CoveringState, b: dict):
    hid = _handle(s, b)
    h = s.handles[hid]
    mode = b.get("mode", "split")
    rec = h.record
    if mode == "split":
        if len(rec.cocore) != 1 or len(rec.core) != 0:
            raise NotApplicable("collar split needs h(s_{i+1}, e)")
        letter = rec.cocore.letters[0]
        if letter < 2:
            raise NotApplicable("collar split needs a positive letter >= 2")
        i = letter - 1
        s2, outer = _add_loop(s, i, CCW, h.region, (), lid=b.get("outer_id"))
        s2, inner = _add_loop(s2, letter, CCW, outer, (), lid=b.get("inner_id"))
        s2 = _set_handle(s2, hid, (i,), (), region=inner)
        return s2, ("R-COLLAR", {"handle": hid, "mode": "merge"})
    if mode == "merge":
        if len(rec.cocore) != 1 or len(rec.core) != 0:
            raise NotApplicable("collar merge needs h(s_i, e)")
        i = rec.cocore.letters[0]
        if i < 1 or i + 1 > s.degree - 1:
            raise NotApplicable("collar merge would leave the label range")
        inner = h.region
        if inner == ROOT:
            raise NotApplicable("handle is not inside a collar")
        il = s.loops[inner]
        kids, items = _loop_contents(s, inner)
        if il.label != i + 1 or il.orient != CCW or kids or items != [hid]:
            raise NotApplicable("inner collar loop does not match")
        _loop_is_plain(s, inner)
        outer = il.parent
        if outer == ROOT:
            raise NotApplicable("no outer collar loop")
        ol = s.loops[outer]
        okids, oitems = _loop_contents(s, outer)
        if ol.label != i or ol.orient != CCW or okids != [inner] or oitems:
            raise NotApplicable("outer collar loop does not match")
        _loop_is_plain(s, outer)
        s2 = _delete_loop(s, inner)
        s2 = _delete_loop(s2, outer)
        s2 = _set_handle(s2, hid, (i + 1,), (), region=ol.parent)
        return s2, ("R-COLLAR", {"handle": hid, "mode": "split",
                                 "outer_id": outer, "inner_id": inner})
    raise NotApplicable(f"unknown mode {mode!r}")


def _enum_collar(s: CoveringState):
    out = []
    for hid, h in s.handles.items():
        rec = h.record
        if len(rec.cocore) == 1 and len(rec.core) == 0:
            if rec.cocore.letters[0] >= 2:
                out.append({"handle": hid, "mode": "split"})
            try:
                _apply_collar(s, {"handle": hid, "mode": "merge"})
            except NotApplicable:
                pass
            else:
                out.append({"handle": hid, "mode": "merge"})
    return out


_register(Rule("R-COLLAR",
               "h(s_{i+1},e) ~ h(s_i,e) inside nested collar loops i+1, i",
               True, _apply_collar, _enum_collar))


# ---------------------------------------------------------------------------
# R-ERASE (free edge deletes / inserts one matching handle letter)


def _apply_erase(s: CoveringState, b: dict):
    fid = _free(s, b)
    hid = _handle(s, b)
    f, h = s.frees[fid], s.handles[hid]
    _same_region(s, f.region, h.region)
    side = _need(b, "side")
    if side not in ("a", "b"):
        raise NotApplicable("side must be 'a' or 'b'")
    mode = b.get("mode", "delete")
    a, bw = list(h.record.cocore.letters), list(h.record.core.letters)
    wrd = a if side == "a" else bw
    pos = int(_need(b, "pos"))
    if mode == "delete":
        if not 0 <= pos < len(wrd):
            raise NotApplicable("position out of range")
        letter = wrd[pos]
        if abs(letter) != f.label:
            raise NotApplicable(
                f"letter {letter} does not match free edge label {f.label}")
        del wrd[pos]
        inverse = ("R-ERASE", {"free": fid, "handle": hid, "side": side,
                               "mode": "insert", "pos": pos,
                               "sign": 1 if letter > 0 else -1})
    elif mode == "insert":
        if not 0 <= pos <= len(wrd):
            raise NotApplicable("position out of range")
        sign = int(b.get("sign", 1))
        if sign not in (1, -1):
            raise NotApplicable("sign must be +-1")
        wrd.insert(pos, sign * f.label)
        inverse = ("R-ERASE", {"free": fid, "handle": hid, "side": side,
                               "mode": "delete", "pos": pos})
    else:
        raise NotApplicable(f"unknown mode {mode!r}")
    na, nb = (tuple(wrd), tuple(bw)) if side == "a" else (tuple(a), tuple(wrd))
    if not braid.commute(_word(s, na), _word(s, nb)):
        raise NotApplicable("edit would break handle word commutativity")
    # A letter adjacent to a cancellation partner would free-reduce away in
    # the stored record and the recorded inverse position would dangle.
    if braid.free_reduce(_word(s, na)).letters != na \
            or braid.free_reduce(_word(s, nb)).letters != nb:
        raise NotApplicable("edit would not leave a free-reduced word")
    s2 = _set_handle(s, hid, na, nb)
    return s2, inverse


def _enum_erase(s: CoveringState):
    out = []
    for fid, f in s.frees.items():
        for hid, h in s.handles.items():
            if h.region != f.region:
                continue
            for side, wrd in (("a", h.record.cocore), ("b", h.record.core)):
                for pos, letter in enumerate(wrd.letters):
                    if abs(letter) == f.label:
                        out.append({"free": fid, "handle": hid, "side": side,
                                    "mode": "delete", "pos": pos})
                for sign in (1, -1):
                    out.append({"free": fid, "handle": hid, "side": side,
                                "mode": "insert", "pos": len(wrd.letters),
                                "sign": sign})
    return out


_register(Rule("R-ERASE",
               "a free edge eliminates or lays one matching handle loop",
               True, _apply_erase, _enum_erase))


# ---------------------------------------------------------------------------
# R-CORE-REWRITE / R-COCORE-REWRITE


def _apply_rewrite(side: str):
    def apply(s: CoveringState, b: dict):
        hid = _handle(s, b)
        rec = s.handles[hid].record
        new = tuple(int(x) for x in _need(b, "new"))
        neww = _word(s, new)
        if braid.free_reduce(neww).letters != new:
            raise NotApplicable("replacement word must be free-reduced")
        old = rec.core if side == "b" else rec.cocore
        if not braid.words_equal(old, neww):
            raise NotApplicable("replacement word is not braid-equal")
        if side == "b":
            s2 = _set_handle(s, hid, rec.cocore.letters, new)
        else:
            s2 = _set_handle(s, hid, new, rec.core.letters)
        rid = "R-CORE-REWRITE" if side == "b" else "R-COCORE-REWRITE"
        return s2, (rid, {"handle": hid, "new": old.letters})
    return apply


_register(Rule("R-CORE-REWRITE",
               "replace the core word by a braid-equal word",
               True, _apply_rewrite("b"), lambda s: []))
_register(Rule("R-COCORE-REWRITE",
               "replace the cocore word by a braid-equal word",
               True, _apply_rewrite("a"), lambda s: []))


# ---------------------------------------------------------------------------
# R-L4-1


def _apply_l41(s: CoveringState, b: dict):
    fid = _free(s, b)
    hid = _handle(s, b)
    f, h = s.frees[fid], s.handles[hid]
    _same_region(s, f.region, h.region)
    variant = _need(b, "variant")
    rev = bool(b.get("rev", False))
    a, bw = h.record.cocore.letters, h.record.core.letters
    if variant == "a":
        if not rev:
            # f_i + h(s_j, s_k^eps) -> f_j + h(e, s_i s_k^eps)
            if len(a) != 1 or a[0] < 0 or len(bw) != 1:
                raise NotApplicable("need h(s_j, s_k^eps)")
            j, k = a[0], abs(bw[0])
            i = f.label
            if abs(i - j) != 1 or abs(j - k) <= 1:
                raise NotApplicable("label pattern |i-j|=1, |j-k|>1 required")
            s2 = _set_free(s, fid, label=j)
            s2 = _set_handle(s2, hid, (), (i, bw[0]))
            return s2, ("R-L4-1", {"free": fid, "handle": hid,
                                   "variant": "a", "rev": True})
        # f_j + h(e, s_i s_k^eps) -> f_i + h(s_j, s_k^eps)
        if len(a) != 0 or len(bw) != 2 or bw[0] < 0:
            raise NotApplicable("need h(e, s_i s_k^eps)")
        i, k = bw[0], abs(bw[1])
        j = f.label
        if abs(i - j) != 1 or abs(j - k) <= 1:
            raise NotApplicable("label pattern |i-j|=1, |j-k|>1 required")
        s2 = _set_free(s, fid, label=i)
        s2 = _set_handle(s2, hid, (j,), (bw[1],))
        return s2, ("R-L4-1", {"free": fid, "handle": hid,
                               "variant": "a", "rev": False})
    if variant == "b":
        if not rev:
            # f_i + h(s_k, s_j^eps) -> f_j + h(s_i s_k, e)
            if len(a) != 1 or a[0] < 0 or len(bw) != 1:
                raise NotApplicable("need h(s_k, s_j^eps)")
            k, j = a[0], abs(bw[0])
            i = f.label
            if abs(i - j) != 1 or abs(j - k) <= 1:
                raise NotApplicable("label pattern |i-j|=1, |j-k|>1 required")
            eps = 1 if bw[0] > 0 else -1
            s2 = _set_free(s, fid, label=j)
            s2 = _set_handle(s2, hid, (i, k), ())
            return s2, ("R-L4-1", {"free": fid, "handle": hid, "variant": "b",
                                   "rev": True, "sign": eps})
        # f_j + h(s_i s_k, e) -> f_i + h(s_k, s_j^eps)
        if len(a) != 2 or a[0] < 0 or a[1] < 0 or len(bw) != 0:
            raise NotApplicable("need h(s_i s_k, e)")
        i, k = a
        j = f.label
        eps = int(b.get("sign", 1))
        if eps not in (1, -1):
            raise NotApplicable("sign must be +-1")
        if abs(i - j) != 1 or abs(j - k) <= 1:
            raise NotApplicable("label pattern |i-j|=1, |j-k|>1 required")
        s2 = _set_free(s, fid, label=i)
        s2 = _set_handle(s2, hid, (k,), (eps * j,))
        return s2, ("R-L4-1", {"free": fid, "handle": hid,
                               "variant": "b", "rev": False})
    raise NotApplicable(f"unknown variant {variant!r}")


def _enum_l41(s: CoveringState):
    out = []
    for fid, f in s.frees.items():
        for hid, h in s.handles.items():
            if h.region != f.region:
                continue
            for variant in ("a", "b"):
                for rev in (False, True):
                    binding = {"free": fid, "handle": hid,
                               "variant": variant, "rev": rev}
                    cands = [binding]
                    if variant == "b" and rev:
                        cands = [dict(binding, sign=1), dict(binding, sign=-1)]
                    for cand in cands:
                        try:
                            _apply_l41(s, cand)
                        except NotApplicable:
                            continue
                        out.append(cand)
    return out


_register(Rule("R-L4-1",
               "f_i + h(s_j,s_k^e) ~ f_j + h(e, s_i s_k^e) and the "
               "cocore-side mate",
               True, _apply_l41, _enum_l41))


# ---------------------------------------------------------------------------
# R-L4-12 (five displayed relations, |i-j|=1, |j-k|>1)


def _apply_l412(s: CoveringState, b: dict):
    variant = _need(b, "variant")
    pid = _free(s, b, "pivot")
    mid = _free(s, b, "mover")
    if pid == mid:
        raise NotApplicable("pivot and mover must differ")
    pivot, mover = s.frees[pid], s.frees[mid]
    i = pivot.label
    rev = bool(b.get("rev", False))

    if variant == "a":
        cid = _free(s, b, "comp")
        if cid in (pid, mid):
            raise NotApplicable("companion must be a third free edge")
        comp = s.frees[cid]
        _same_region(s, pivot.region, mover.region, comp.region)
        j = comp.label
        if mover.label != i or abs(i - j) != 1:
            raise NotApplicable("need f_i + f_i + f_j with |i-j|=1")
        s2 = _set_free(s, mid, label=j)
        return s2, ("R-L4-12", {"variant": "a", "pivot": cid, "mover": mid,
                                "comp": pid})

    cid = _handle(s, b, "comp")
    comp = s.handles[cid]
    _same_region(s, pivot.region, mover.region, comp.region)
    a, bw = comp.record.cocore.letters, comp.record.core.letters

    def done(s2, j_new, a2, b2, rev2, extra=None):
        s3 = _set_free(s2, mid, label=j_new)
        s3 = _set_handle(s3, cid, a2, b2)
        inv = {"variant": variant, "pivot": pid, "mover": mid, "comp": cid,
               "rev": rev2}
        if extra:
            inv.update(extra)
        return s3, ("R-L4-12", inv)

    if variant == "b":
        # f_i+f_i+h(s_j,e) <-> f_i+f_j+h(e,e)
        if not rev:
            if mover.label != i or len(a) != 1 or a[0] < 0 or len(bw) != 0:
                raise NotApplicable("need f_i + f_i + h(s_j, e)")
            j = a[0]
            if abs(i - j) != 1:
                raise NotApplicable("|i-j|=1 required")
            return done(s, j, (), (), True)
        if len(a) != 0 or len(bw) != 0 or abs(i - mover.label) != 1:
            raise NotApplicable("need f_i + f_j + h(e,e) with |i-j|=1")
        j = mover.label
        return done(s, i, (j,), (), False)
    if variant == "c":
        # f_i+f_i+h(s_j,s_k^e) <-> f_i+f_j+h(e,s_k^e)
        if not rev:
            if mover.label != i or len(a) != 1 or a[0] < 0 or len(bw) != 1:
                raise NotApplicable("need f_i + f_i + h(s_j, s_k^eps)")
            j, k = a[0], abs(bw[0])
            if abs(i - j) != 1 or abs(j - k) <= 1:
                raise NotApplicable("labels must satisfy |i-j|=1, |j-k|>1")
            return done(s, j, (), bw, True)
        if len(a) != 0 or len(bw) != 1 or abs(i - mover.label) != 1:
            raise NotApplicable("need f_i + f_j + h(e, s_k^eps)")
        j, k = mover.label, abs(bw[0])
        if abs(j - k) <= 1:
            raise NotApplicable("|j-k|>1 required")
        return done(s, i, (j,), bw, False)
    if variant == "d":
        # f_i+f_i+h(e,s_j^e) <-> f_i+f_j+h(e,e)
        if not rev:
            if mover.label != i or len(a) != 0 or len(bw) != 1:
                raise NotApplicable("need f_i + f_i + h(e, s_j^eps)")
            j = abs(bw[0])
            if abs(i - j) != 1:
                raise NotApplicable("|i-j|=1 required")
            eps = 1 if bw[0] > 0 else -1
            return done(s, j, (), (), True, {"sign": eps})
        if len(a) != 0 or len(bw) != 0 or abs(i - mover.label) != 1:
            raise NotApplicable("need f_i + f_j + h(e,e) with |i-j|=1")
        j = mover.label
        eps = int(b.get("sign", 1))
        if eps not in (1, -1):
            raise NotApplicable("sign must be +-1")
        return done(s, i, (), (eps * j,), False)
    if variant == "e":
        # f_i+f_i+h(s_k,s_j^e) <-> f_i+f_j+h(s_k,e)
        if not rev:
            if mover.label != i or len(a) != 1 or a[0] < 0 or len(bw) != 1:
                raise NotApplicable("need f_i + f_i + h(s_k, s_j^eps)")
            k, j = a[0], abs(bw[0])
            if abs(i - j) != 1 or abs(j - k) <= 1:
                raise NotApplicable("labels must satisfy |i-j|=1, |j-k|>1")
            eps = 1 if bw[0] > 0 else -1
            return done(s, j, a, (), True, {"sign": eps})
        if len(a) != 1 or a[0] < 0 or len(bw) != 0 or abs(i - mover.label) != 1:
            raise NotApplicable("need f_i + f_j + h(s_k, e)")
        j, k = mover.label, a[0]
        if abs(j - k) <= 1:
            raise NotApplicable("|j-k|>1 required")
        eps = int(b.get("sign", 1))
        if eps not in (1, -1):
            raise NotApplicable("sign must be +-1")
        return done(s, i, a, (eps * j,), False)
    raise NotApplicable(f"unknown variant {variant!r}")


def _enum_l412(s: CoveringState):
    out = []
    frees = sorted(s.frees)
    for pid in frees:
        for mid in frees:
            if mid == pid:
                continue
            for cid in frees:
                if cid in (pid, mid):
                    continue
                cand = {"variant": "a", "pivot": pid, "mover": mid, "comp": cid}
                try:
                    _apply_l412(s, cand)
                except NotApplicable:
                    continue
                out.append(cand)
            for cid in sorted(s.handles):
                for variant in ("b", "c", "d", "e"):
                    for rev in (False, True):
                        base = {"variant": variant, "pivot": pid, "mover": mid,
                                "comp": cid, "rev": rev}
                        cands = [base]
                        if rev and variant in ("d", "e"):
                            cands = [dict(base, sign=1), dict(base, sign=-1)]
                        for cand in cands:
                            try:
                                _apply_l412(s, cand)
                            except NotApplicable:
                                continue
                            out.append(cand)
    return out


_register(Rule("R-L4-12",
               "duplicate free-edge relabelings f_i+f_i+X_j ~ f_i+f_j+X'",
               True, _apply_l412, _enum_l412))


# ---------------------------------------------------------------------------
# R-L4-8


def _l48_carrier_kind(s: CoveringState, eid: str) -> str:
    if eid in s.frees:
        return "free"
    if eid in s.handles:
        if s.handles[eid].record.shape() == "double":
            return "double"
        raise NotApplicable(f"{eid} is not a double-loop handle")
    raise NotApplicable(f"unknown carrier {eid}")


def _apply_l48(s: CoveringState, b: dict):
    mid = _free(s, b, "mover")
    tid = _need(b, "target")
    aid = _need(b, "anchor")
    if len({mid, tid, aid}) != 3:
        raise NotApplicable("mover, target and anchor must be distinct")
    mover = s.frees[mid]
    tkind = _l48_carrier_kind(s, tid)
    akind = _l48_carrier_kind(s, aid)
    if tkind == "free" and akind == "free":
        raise NotApplicable("at least one of target/anchor must be a handle")
    _same_region(s, mover.region, _region_of(s, tid), _region_of(s, aid))
    i = mover.label
    tlabels = {x for x in _carried_labels(s, tid) if abs(x - i) == 1}
    if "target_label" in b:
        tlabels &= {int(b["target_label"])}
    if not tlabels:
        raise NotApplicable("target carries no label adjacent to the mover")
    j = min(tlabels)
    if i not in _carried_labels(s, aid):
        raise NotApplicable("anchor does not carry the mover's label")
    s2 = _set_free(s, mid, label=j)
    return s2, ("R-L4-8", {"mover": mid, "target": aid, "anchor": tid,
                           "target_label": i})


def _enum_l48(s: CoveringState):
    out = []
    carriers = sorted(s.frees) + sorted(
        hid for hid, h in s.handles.items() if h.record.shape() == "double")
    for mid in sorted(s.frees):
        for tid in carriers:
            for aid in carriers:
                if len({mid, tid, aid}) != 3:
                    continue
                cand = {"mover": mid, "target": tid, "anchor": aid}
                try:
                    _apply_l48(s, cand)
                except NotApplicable:
                    continue
                out.append(cand)
    return out


_register(Rule("R-L4-8",
               "relabel a free edge across |i-j|=1 held by fixed doubles",
               True, _apply_l48, _enum_l48))


# ---------------------------------------------------------------------------
# R-L4-2


def _apply_l42(s: CoveringState, b: dict):
    if s.degree < 4:
        raise NotApplicable("needs degree >= 4")
    fid = _free(s, b)
    h1 = _handle(s, b, "h1")
    h2 = _handle(s, b, "h2")
    if h1 == h2:
        raise NotApplicable("h1 and h2 must differ")
    f = s.frees[fid]
    _same_region(s, f.region, s.handles[h1].region, s.handles[h2].region)
    rev = bool(b.get("rev", False))
    a1, b1 = s.handles[h1].record.cocore.letters, s.handles[h1].record.core.letters
    a2, b2 = s.handles[h2].record.cocore.letters, s.handles[h2].record.core.letters
    if not rev:
        # f_i + h(s_k, s_j^eps) + h(e,e) -> f_j + h(s_k,e) + h(s_i,e)
        if len(a1) != 1 or a1[0] < 0 or len(b1) != 1:
            raise NotApplicable("h1 must be h(s_k, s_j^eps)")
        if a2 or b2:
            raise NotApplicable("h2 must be h(e,e)")
        k, j = a1[0], abs(b1[0])
        i = f.label
        eps = 1 if b1[0] > 0 else -1
        if abs(i - j) != 1 or abs(j - k) <= 1:
            raise NotApplicable("labels must satisfy |i-j|=1, |j-k|>1")
        s2 = _set_free(s, fid, label=j)
        s2 = _set_handle(s2, h1, (k,), ())
        s2 = _set_handle(s2, h2, (i,), ())
        return s2, ("R-L4-2", {"free": fid, "h1": h1, "h2": h2,
                               "rev": True, "sign": eps})
    # f_j + h(s_k,e) + h(s_i,e) -> f_i + h(s_k, s_j^eps) + h(e,e)
    if len(a1) != 1 or a1[0] < 0 or b1 or len(a2) != 1 or a2[0] < 0 or b2:
        raise NotApplicable("rev needs h(s_k,e) and h(s_i,e)")
    k, i = a1[0], a2[0]
    j = f.label
    eps = int(b.get("sign", 1))
    if eps not in (1, -1):
        raise NotApplicable("sign must be +-1")
    if abs(i - j) != 1 or abs(j - k) <= 1:
        raise NotApplicable("labels must satisfy |i-j|=1, |j-k|>1")
    s2 = _set_free(s, fid, label=i)
    s2 = _set_handle(s2, h1, (k,), (eps * j,))
    s2 = _set_handle(s2, h2, (), ())
    return s2, ("R-L4-2", {"free": fid, "h1": h1, "h2": h2, "rev": False})


def _enum_l42(s: CoveringState):
    out = []
    for fid in sorted(s.frees):
        for h1 in sorted(s.handles):
            for h2 in sorted(s.handles):
                if h1 == h2:
                    continue
                for rev in (False, True):
                    base = {"free": fid, "h1": h1, "h2": h2, "rev": rev}
                    cands = [base] if not rev else [dict(base, sign=1),
                                                    dict(base, sign=-1)]
                    for cand in cands:
                        try:
                            _apply_l42(s, cand)
                        except NotApplicable:
                            continue
                        out.append(cand)
    return out


_register(Rule("R-L4-2",
               "f_i + h(s_k,s_j^e) + h(e,e) ~ f_j + h(s_k,e) + h(s_i,e)",
               True, _apply_l42, _enum_l42))


# ---------------------------------------------------------------------------
# R-L4-3


def _apply_l43(s: CoveringState, b: dict):
    if s.degree < 4:
        raise NotApplicable("needs degree >= 4")
    fa = _free(s, b, "fa")
    fb = _free(s, b, "fb")
    hid = _handle(s, b)
    if fa == fb:
        raise NotApplicable("fa and fb must differ")
    i = s.frees[fa].label
    if s.frees[fb].label != i + 1:
        raise NotApplicable("need f_i and f_{i+1}")
    if i + 2 > s.degree - 1:
        raise NotApplicable("i+2 exceeds the label range")
    _same_region(s, s.frees[fa].region, s.frees[fb].region,
                 s.handles[hid].region)
    a, bw = s.handles[hid].record.cocore.letters, s.handles[hid].record.core.letters
    rev = bool(b.get("rev", False))
    if not rev:
        if a or len(bw) != 1 or abs(bw[0]) != i + 2:
            raise NotApplicable("need h(e, s_{i+2}^eps)")
        eps = 1 if bw[0] > 0 else -1
        s2 = _set_handle(s, hid, (i + 2,), ())
        return s2, ("R-L4-3", {"fa": fa, "fb": fb, "handle": hid,
                               "rev": True, "sign": eps})
    if bw or len(a) != 1 or a[0] != i + 2:
        raise NotApplicable("rev needs h(s_{i+2}, e)")
    eps = int(b.get("sign", 1))
    if eps not in (1, -1):
        raise NotApplicable("sign must be +-1")
    s2 = _set_handle(s, hid, (), (eps * (i + 2),))
    return s2, ("R-L4-3", {"fa": fa, "fb": fb, "handle": hid, "rev": False})


def _enum_l43(s: CoveringState):
    out = []
    for fa in sorted(s.frees):
        for fb in sorted(s.frees):
            if fa == fb:
                continue
            for hid in sorted(s.handles):
                for rev in (False, True):
                    base = {"fa": fa, "fb": fb, "handle": hid, "rev": rev}
                    cands = [base] if not rev else [dict(base, sign=1),
                                                    dict(base, sign=-1)]
                    for cand in cands:
                        try:
                            _apply_l43(s, cand)
                        except NotApplicable:
                            continue
                        out.append(cand)
    return out


_register(Rule("R-L4-3",
               "f_i + f_{i+1} + h(e,s_{i+2}^e) ~ f_i + f_{i+1} + h(s_{i+2},e)",
               True, _apply_l43, _enum_l43))


# ---------------------------------------------------------------------------
# R-L4-4


def _apply_l44(s: CoveringState, b: dict):
    fid = _free(s, b)
    h1 = _handle(s, b, "h1")
    h2 = _handle(s, b, "h2")
    if h1 == h2:
        raise NotApplicable("h1 and h2 must differ")
    f = s.frees[fid]
    _same_region(s, f.region, s.handles[h1].region, s.handles[h2].region)
    i = f.label
    if i + 2 > s.degree - 1:
        raise NotApplicable("i+2 exceeds the label range")
    variant = _need(b, "variant")
    rev = bool(b.get("rev", False))
    a1, b1 = s.handles[h1].record.cocore.letters, s.handles[h1].record.core.letters
    a2, b2 = s.handles[h2].record.cocore.letters, s.handles[h2].record.core.letters

    def is_core(h_a, h_b, lab):
        return not h_a and len(h_b) == 1 and abs(h_b[0]) == lab

    def is_cocore(h_a, h_b, lab):
        return not h_b and len(h_a) == 1 and h_a[0] == lab

    if not rev:
        if variant == "a":
            ok = is_core(a1, b1, i + 1) and is_core(a2, b2, i + 2)
        elif variant == "b":
            ok = is_core(a1, b1, i + 1) and is_cocore(a2, b2, i + 2)
        elif variant == "c":
            ok = is_cocore(a1, b1, i + 1) and is_core(a2, b2, i + 2)
        else:
            raise NotApplicable(f"unknown variant {variant!r}")
        if not ok:
            raise NotApplicable(f"handles do not match variant {variant!r}")
        s1 = 1 if (b1 and b1[0] > 0) else -1 if b1 else 1
        s2sign = 1 if (b2 and b2[0] > 0) else -1 if b2 else 1
        st = _set_handle(s, h1, (i + 1,), ())
        st = _set_handle(st, h2, (i + 2,), ())
        return st, ("R-L4-4", {"free": fid, "h1": h1, "h2": h2,
                               "variant": variant, "rev": True,
                               "sign1": s1, "sign2": s2sign})
    if not (is_cocore(a1, b1, i + 1) and is_cocore(a2, b2, i + 2)):
        raise NotApplicable("rev needs h(s_{i+1},e) + h(s_{i+2},e)")
    e1 = int(b.get("sign1", 1))
    e2 = int(b.get("sign2", 1))
    if e1 not in (1, -1) or e2 not in (1, -1):
        raise NotApplicable("signs must be +-1")
    if variant == "a":
        st = _set_handle(s, h1, (), (e1 * (i + 1),))
        st = _set_handle(st, h2, (), (e2 * (i + 2),))
    elif variant == "b":
        st = _set_handle(s, h1, (), (e1 * (i + 1),))
        st = _set_handle(st, h2, (i + 2,), ())
    elif variant == "c":
        st = _set_handle(s, h1, (i + 1,), ())
        st = _set_handle(st, h2, (), (e2 * (i + 2),))
    else:
        raise NotApplicable(f"unknown variant {variant!r}")
    return st, ("R-L4-4", {"free": fid, "h1": h1, "h2": h2,
                           "variant": variant, "rev": False})


def _enum_l44(s: CoveringState):
    out = []
    for fid in sorted(s.frees):
        for h1 in sorted(s.handles):
            for h2 in sorted(s.handles):
                if h1 == h2:
                    continue
                for variant in ("a", "b", "c"):
                    for rev in (False, True):
                        base = {"free": fid, "h1": h1, "h2": h2,
                                "variant": variant, "rev": rev}
                        cands = [base]
                        if rev:
                            cands = [dict(base, sign1=x, sign2=y)
                                     for x in (1, -1) for y in (1, -1)]
                        for cand in cands:
                            try:
                                _apply_l44(s, cand)
                            except NotApplicable:
                                continue
                            out.append(cand)
    return out


_register(Rule("R-L4-4",
               "straighten h(e,s_{i+1}^e)/h(e,s_{i+2}^d) pairs beside f_i",
               True, _apply_l44, _enum_l44))


# ---------------------------------------------------------------------------
# R-ADD-HANDLE (one-way, consumes budget)


def _apply_add(s: CoveringState, b: dict):
    region = b.get("region", ROOT)
    if region != ROOT and region not in s.loops:
        raise NotApplicable(f"no region {region}")
    label = b.get("label")
    if label is not None:
        label = int(label)
        if not 1 <= label <= s.degree - 1:
            raise NotApplicable(f"label {label} out of range")
        rec = HandleRecord(_word(s, (label,)), _word(s, ()))
    else:
        rec = HandleRecord(_word(s, ()), _word(s, ()))
    hid = b.get("handle_id") or s.fresh_id("h")
    if hid in s.handles:
        raise NotApplicable(f"handle id {hid} already in use")
    handles = dict(s.handles)
    handles[hid] = HandleItem(rec, region)
    return s.replace_parts(handles=handles), None


def _enum_add(s: CoveringState):
    out = []
    for region in s.regions():
        out.append({"region": region, "label": None})
        for lab in range(1, s.degree):
            out.append({"region": region, "label": lab})
    return out


_register(Rule("R-ADD-HANDLE",
               "add h(e,e) or h(s_i,e) in a chosen region (budgeted)",
               False, _apply_add, _enum_add))


# ---------------------------------------------------------------------------
# driver API


def apply_rule(s: CoveringState, rule_id: str, binding: dict) -> CoveringState:
    """Apply one rule instance; raises NotApplicable on bad bindings."""
    state, _ = apply_rule_with_inverse(s, rule_id, binding)
    return state


def apply_rule_with_inverse(s: CoveringState, rule_id: str, binding: dict):
    if rule_id not in RULES:
        raise NotApplicable(f"unknown rule {rule_id!r}")
    return RULES[rule_id].apply(s, binding)


def applicable(s: CoveringState, include_add: bool = True) -> list[Step]:
    """Enumerate applicable rule instances (finite families only).

    The word-rewriting rules have unboundedly many instances and are not
    enumerated; they are reachable through explicit bindings.
    """
    out: list[Step] = []
    for rid in sorted(RULES):
        if rid == "R-ADD-HANDLE" and not include_add:
            continue
        for binding in RULES[rid].enumerate(s):
            out.append((rid, binding))
    return out


# ---------------------------------------------------------------------------
# derivations


@dataclass
class Derivation:
    """A replayable certificate: start state, justified steps, end state."""

    start: CoveringState
    steps: list[Step] = field(default_factory=list)
    end: CoveringState | None = None

    def handles_added(self) -> int:
        return sum(1 for rid, _ in self.steps if rid == "R-ADD-HANDLE")


@dataclass
class ReplayReport:
    ok: bool
    step_results: list[str]
    final: CoveringState | None
    message: str = ""


def replay(d: Derivation, strict: bool = True) -> ReplayReport:
    """Apply each step in sequence and compare the result to ``d.end``.

    With ``strict`` a failure raises StepFailed/EndMismatch; otherwise
    the report carries the failure.
    """
    state = d.start
    results = []
    for idx, (rid, binding) in enumerate(d.steps):
        try:
            state = apply_rule(state, rid, binding)
        except NotApplicable as exc:
            if strict:
                raise StepFailed(idx, str(exc)) from exc
            results.append(f"step {idx} {rid}: FAILED ({exc})")
            return ReplayReport(False, results, None, f"step {idx} failed")
        bad = validate_state(state)
        if bad:
            msg = f"invalid state after step {idx}: {bad}"
            if strict:
                raise StepFailed(idx, msg)
            results.append(f"step {idx} {rid}: {msg}")
            return ReplayReport(False, results, None, msg)
        results.append(f"step {idx} {rid}: ok")
    if d.end is not None and not states_equal(state, d.end):
        diff = (serialize_state(normalize(state))
                + "--- expected ---\n"
                + serialize_state(normalize(d.end)))
        if strict:
            raise EndMismatch(diff)
        return ReplayReport(False, results, state, "end state mismatch")
    return ReplayReport(True, results, state)


def derive(start: CoveringState, steps: list[Step]) -> Derivation:
    """Run the steps, validating as we go, and return the derivation."""
    d = Derivation(start, list(steps), None)
    report = replay(d)
    d.end = report.final
    return d


def reversed_derivation(d: Derivation) -> Derivation:
    """Inverse steps in reverse order (every step must be bidirectional)."""
    state = d.start
    inverses: list[Step] = []
    for idx, (rid, binding) in enumerate(d.steps):
        state, inv = apply_rule_with_inverse(state, rid, binding)
        if inv is None:
            raise StepFailed(idx, f"{rid} has no inverse")
        inverses.append(inv)
    return Derivation(state, list(reversed(inverses)), d.start)


# ---------------------------------------------------------------------------
# step (de)serialization for derivation files


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "none"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return v
    if isinstance(v, tuple):
        return ",".join(_format_value(x) for x in v) if v else "()"
    raise ValueError(f"cannot serialize binding value {v!r}")


def format_step(step: Step) -> str:
    rid, binding = step
    parts = [f"step {rid}"]
    for k in sorted(binding):
        parts.append(f"{k}={_format_value(binding[k])}")
    return " ".join(parts)


_INT_KEYS = {"label", "sign", "sign1", "sign2", "pos", "orient", "target_label"}
_BOOL_KEYS = {"rev", "inward"}
_TUPLE_KEYS = {"enclose", "new"}


def parse_step(line: str, lineno: int | None = None) -> Step:
    toks = line.split()
    if len(toks) < 2 or toks[0] != "step":
        raise ParseError("expected 'step <rule> k=v ...'", lineno)
    rid = toks[1]
    binding: dict = {}
    for tok in toks[2:]:
        if "=" not in tok:
            raise ParseError(f"expected key=value, got {tok!r}", lineno)
        k, v = tok.split("=", 1)
        if k in _BOOL_KEYS:
            binding[k] = v == "true"
        elif k in _INT_KEYS:
            binding[k] = None if v == "none" else int(v)
        elif k in _TUPLE_KEYS:
            if v in ("()", ""):
                binding[k] = ()
            else:
                items = v.split(",")
                if all(x.lstrip("-").isdigit() for x in items):
                    binding[k] = tuple(int(x) for x in items)
                else:
                    binding[k] = tuple(items)
        else:
            binding[k] = None if v == "none" else v
    return rid, binding
