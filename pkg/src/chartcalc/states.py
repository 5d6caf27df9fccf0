"""Covering states: the symbolic algebra of free edges, loops and 1-handles.

A :class:`CoveringState` describes a branched covering surface-knot far
from any chart activity other than free edges, chart loops and 1-handles
with chart loops:

* a rooted forest of loops (each node a loop with a label and an
  orientation); the interior of each loop, minus its children, is a
  *region*, as is the root disk itself;
* items placed in regions: free edges ``f_i`` and 1-handles ``h(a, b)``
  (cocore word ``a``, orientation-reversed core word ``b``, which must
  commute);
* a multiset of crossing records between loop pairs; two closed curves in
  a disk meet an even number of times and chart crossings force their
  labels more than 1 apart, so each record carries an even positive count
  and a far label pair.

States are immutable values; rewrite rules copy.  ``normalize`` produces
a canonical representative so that states are equal iff their normal
forms serialize identically.

Text format (round-trips exactly)::

    degree 4
    loop l1 label=2 orient=ccw parent=root
    free 1
    free 3 region=l1
    handle a=s2 b=e region=root
    cross l1 l2 count=2

``free`` and ``handle`` ids are positional (``f1``, ``f2``, ... and
``h1``, ``h2``, ... in file order); an explicit ``id=`` field overrides
when ids are not contiguous.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

from chartcalc import braid
from chartcalc.braid import BraidWord
from chartcalc.errors import ParseError

ROOT = "root"

CCW = 1
CW = -1


@dataclass(frozen=True)
class HandleRecord:
    """A 1-handle h(a, b): cocore word ``a`` and core word ``b``.

    Words are stored free-reduced.  The chart on the handle only closes
    up when a and b commute, so commutativity is part of validity
    (checked by :func:`validate_state`, not here, to keep construction
    cheap).
    """

    cocore: BraidWord
    core: BraidWord

    def __post_init__(self):
        if self.cocore.degree != self.core.degree:
            raise ValueError("cocore and core words must share a degree")
        object.__setattr__(self, "cocore", braid.free_reduce(self.cocore))
        object.__setattr__(self, "core", braid.free_reduce(self.core))

    @property
    def degree(self) -> int:
        return self.cocore.degree

    def shape(self) -> str:
        """Classify against the recognized handle shapes.

        Returns one of ``empty`` h(e,e), ``cocore_single`` h(s_i^±,e),
        ``core_single`` h(e,s_j^±), ``double`` h(s_i^±,s_j^±) with
        |i-j|>1, or ``general``.
        """
        la, lb = len(self.cocore), len(self.core)
        if la == 0 and lb == 0:
            return "empty"
        if la == 1 and lb == 0:
            return "cocore_single"
        if la == 0 and lb == 1:
            return "core_single"
        if la == 1 and lb == 1:
            i = abs(self.cocore.letters[0])
            j = abs(self.core.letters[0])
            if abs(i - j) > 1:
                return "double"
        return "general"

    def letters(self) -> tuple[int, ...]:
        return self.cocore.letters + self.core.letters

    def carries(self, label: int) -> bool:
        """True iff some chart loop of the handle has this label."""
        return any(abs(x) == label for x in self.letters())


def handle(degree: int, a: tuple[int, ...] = (), b: tuple[int, ...] = ()) -> HandleRecord:
    return HandleRecord(BraidWord(degree, a), BraidWord(degree, b))


@dataclass(frozen=True)
class Loop:
    label: int
    orient: int = CCW  # CCW=+1, CW=-1
    parent: str = ROOT


@dataclass(frozen=True)
class FreeEdge:
    label: int
    region: str = ROOT


@dataclass(frozen=True)
class HandleItem:
    record: HandleRecord
    region: str = ROOT


@dataclass(frozen=True)
class CoveringState:
    degree: int
    loops: dict[str, Loop] = field(default_factory=dict)
    frees: dict[str, FreeEdge] = field(default_factory=dict)
    handles: dict[str, HandleItem] = field(default_factory=dict)
    # frozenset({loop_id, loop_id}) -> even positive crossing count
    crossings: dict[frozenset, int] = field(default_factory=dict)

    # -- accessors ---------------------------------------------------

    def regions(self) -> list[str]:
        return [ROOT] + sorted(self.loops)

    def loop_children(self, region: str) -> list[str]:
        return sorted(lid for lid, lp in self.loops.items() if lp.parent == region)

    def items_in(self, region: str) -> list[str]:
        out = [fid for fid, f in self.frees.items() if f.region == region]
        out += [hid for hid, h in self.handles.items() if h.region == region]
        return sorted(out)

    def loop_has_crossings(self, lid: str) -> bool:
        return any(lid in pair for pair in self.crossings)

    def handle_count(self) -> int:
        return len(self.handles)

    def free_count(self) -> int:
        return len(self.frees)

    def fresh_id(self, prefix: str) -> str:
        pool = {"l": self.loops, "f": self.frees, "h": self.handles}[prefix]
        n = 0
        for k in pool:
            if k.startswith(prefix) and k[len(prefix):].isdigit():
                n = max(n, int(k[len(prefix):]))
        return f"{prefix}{n + 1}"

    # -- structural edits (return new states; used by the rules module)

    def with_loops(self, loops) -> CoveringState:
        return replace(self, loops=dict(loops))

    def replace_parts(self, *, loops=None, frees=None, handles=None, crossings=None) -> CoveringState:
        return CoveringState(
            self.degree,
            dict(self.loops if loops is None else loops),
            dict(self.frees if frees is None else frees),
            dict(self.handles if handles is None else handles),
            dict(self.crossings if crossings is None else crossings),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, CoveringState):
            return NotImplemented
        return (
            self.degree == other.degree
            and self.loops == other.loops
            and self.frees == other.frees
            and self.handles == other.handles
            and self.crossings == other.crossings
        )

    def __hash__(self):
        return hash(serialize_state(normalize(self)))


# ---------------------------------------------------------------------------
# validity


def validate_state(s: CoveringState) -> list[str]:
    """Return the list of invariant violations (empty iff valid)."""
    out: list[str] = []
    nmax = s.degree - 1
    for lid, lp in s.loops.items():
        if not 1 <= lp.label <= nmax:
            out.append(f"loop {lid}: label {lp.label} out of range 1..{nmax}")
        if lp.orient not in (CCW, CW):
            out.append(f"loop {lid}: bad orientation {lp.orient}")
        if lp.parent != ROOT and lp.parent not in s.loops:
            out.append(f"loop {lid}: parent {lp.parent} does not exist")
    # parent links must form a forest
    for lid in s.loops:
        seen = {lid}
        cur = s.loops[lid].parent
        while cur != ROOT:
            if cur in seen or cur not in s.loops:
                out.append(f"loop {lid}: parent chain broken or cyclic")
                break
            seen.add(cur)
            cur = s.loops[cur].parent
    for fid, f in s.frees.items():
        if not 1 <= f.label <= nmax:
            out.append(f"free {fid}: label {f.label} out of range 1..{nmax}")
        if f.region != ROOT and f.region not in s.loops:
            out.append(f"free {fid}: region {f.region} does not exist")
    for hid, h in s.handles.items():
        if h.region != ROOT and h.region not in s.loops:
            out.append(f"handle {hid}: region {h.region} does not exist")
        if h.record.degree != s.degree:
            out.append(f"handle {hid}: word degree {h.record.degree} != {s.degree}")
            continue
        for x in h.record.letters():
            if not 1 <= abs(x) <= nmax:
                out.append(f"handle {hid}: letter {x} out of range")
        if not braid.commute(h.record.cocore, h.record.core):
            out.append(f"handle {hid}: cocore and core words do not commute")
    for pair, count in s.crossings.items():
        ids = sorted(pair)
        if len(ids) != 2:
            out.append(f"crossing {ids}: needs two distinct loops")
            continue
        if not all(i in s.loops for i in ids):
            out.append(f"crossing {ids}: unknown loop")
            continue
        if count <= 0 or count % 2 != 0:
            out.append(f"crossing {ids}: count {count} must be even and positive")
        la, lb = s.loops[ids[0]].label, s.loops[ids[1]].label
        if abs(la - lb) <= 1:
            out.append(
                f"crossing {ids}: labels ({la},{lb}) must differ by more than 1"
            )
    return out


# ---------------------------------------------------------------------------
# recognized global forms


def is_simplified(s: CoveringState) -> bool:
    """Free edges plus handles shaped h(s_i^±, e) or h(e, e); no loops."""
    if s.loops:
        return False
    return all(
        h.record.shape() in ("empty", "cocore_single") for h in s.handles.values()
    )


def is_weak_simplified(s: CoveringState) -> bool:
    """Free edges plus handles shaped h(s_i^±,e), h(s_i^±,s_j^±) with
    |i-j|>1, or h(e,e); no loops."""
    if s.loops:
        return False
    return all(
        h.record.shape() in ("empty", "cocore_single", "double")
        for h in s.handles.values()
    )


# ---------------------------------------------------------------------------
# serialization


def _orient_str(o: int) -> str:
    return "ccw" if o == CCW else "cw"


def _parse_orient(tok: str, line: int) -> int:
    if tok == "ccw":
        return CCW
    if tok == "cw":
        return CW
    raise ParseError(f"bad orientation {tok!r}", line)


def serialize_state(s: CoveringState) -> str:
    """Emit the line-oriented text format (see module docstring)."""
    lines = [f"degree {s.degree}"]

    def sort_key(eid: str):
        prefix = eid[0]
        rest = eid[1:]
        return (int(rest) if rest.isdigit() else 10**9, eid)

    for lid in sorted(s.loops, key=sort_key):
        lp = s.loops[lid]
        lines.append(
            f"loop {lid} label={lp.label} orient={_orient_str(lp.orient)} parent={lp.parent}"
        )
    for k, fid in enumerate(sorted(s.frees, key=sort_key), start=1):
        f = s.frees[fid]
        parts = [f"free {f.label}"]
        if f.region != ROOT:
            parts.append(f"region={f.region}")
        if fid != f"f{k}":
            parts.append(f"id={fid}")
        lines.append(" ".join(parts))
    for k, hid in enumerate(sorted(s.handles, key=sort_key), start=1):
        h = s.handles[hid]
        parts = [
            f"handle a={braid.format_word(h.record.cocore)}"
            f" b={braid.format_word(h.record.core)} region={h.region}"
        ]
        if hid != f"h{k}":
            parts.append(f"id={hid}")
        lines.append(" ".join(parts))
    for pair in sorted(s.crossings, key=lambda p: tuple(sorted(p))):
        a, b = sorted(pair)
        lines.append(f"cross {a} {b} count={s.crossings[pair]}")
    return "\n".join(lines) + "\n"


def parse_state(text: str) -> CoveringState:
    degree: int | None = None
    loops: dict[str, Loop] = {}
    frees: dict[str, FreeEdge] = {}
    handles: dict[str, HandleItem] = {}
    crossings: dict[frozenset, int] = {}
    nfree = nhandle = 0

    def kv(tokens: list[str], line: int) -> dict[str, str]:
        out = {}
        for tok in tokens:
            if "=" not in tok:
                raise ParseError(f"expected key=value, got {tok!r}", line)
            k, v = tok.split("=", 1)
            out[k] = v
        return out

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        kind = toks[0]
        if kind == "degree":
            if len(toks) != 2 or not toks[1].isdigit():
                raise ParseError("degree takes one integer", lineno)
            degree = int(toks[1])
        elif kind == "loop":
            if degree is None:
                raise ParseError("degree must come first", lineno)
            if len(toks) < 2:
                raise ParseError("loop needs an id", lineno)
            lid = toks[1]
            opts = kv(toks[2:], lineno)
            try:
                label = int(opts.pop("label"))
            except KeyError:
                raise ParseError("loop needs label=", lineno) from None
            orient = _parse_orient(opts.pop("orient", "ccw"), lineno)
            parent = opts.pop("parent", ROOT)
            if opts:
                raise ParseError(f"unknown loop fields {sorted(opts)}", lineno)
            if lid in loops:
                raise ParseError(f"duplicate loop id {lid}", lineno)
            loops[lid] = Loop(label, orient, parent)
        elif kind == "free":
            if degree is None:
                raise ParseError("degree must come first", lineno)
            if len(toks) < 2 or not toks[1].isdigit():
                raise ParseError("free needs a label", lineno)
            label = int(toks[1])
            opts = kv(toks[2:], lineno)
            region = opts.pop("region", ROOT)
            nfree += 1
            fid = opts.pop("id", f"f{nfree}")
            if opts:
                raise ParseError(f"unknown free fields {sorted(opts)}", lineno)
            if fid in frees:
                raise ParseError(f"duplicate free id {fid}", lineno)
            frees[fid] = FreeEdge(label, region)
        elif kind == "handle":
            if degree is None:
                raise ParseError("degree must come first", lineno)
            opts = kv(toks[1:], lineno)
            try:
                a = braid.parse_word(opts.pop("a"), degree)
                b = braid.parse_word(opts.pop("b"), degree)
            except KeyError:
                raise ParseError("handle needs a= and b=", lineno) from None
            except ParseError as exc:
                raise ParseError(str(exc), lineno) from None
            region = opts.pop("region", ROOT)
            nhandle += 1
            hid = opts.pop("id", f"h{nhandle}")
            if opts:
                raise ParseError(f"unknown handle fields {sorted(opts)}", lineno)
            if hid in handles:
                raise ParseError(f"duplicate handle id {hid}", lineno)
            handles[hid] = HandleItem(HandleRecord(a, b), region)
        elif kind == "cross":
            if len(toks) != 4:
                raise ParseError("cross takes two loop ids and count=", lineno)
            opts = kv(toks[3:], lineno)
            try:
                count = int(opts.pop("count"))
            except KeyError:
                raise ParseError("cross needs count=", lineno) from None
            pair = frozenset((toks[1], toks[2]))
            if len(pair) != 2:
                raise ParseError("cross needs two distinct loops", lineno)
            if pair in crossings:
                raise ParseError("duplicate crossing record", lineno)
            crossings[pair] = count
        else:
            raise ParseError(f"unknown line kind {kind!r}", lineno)
    if degree is None:
        raise ParseError("missing degree line")
    state = CoveringState(degree, loops, frees, handles, crossings)
    problems = validate_state(state)
    if problems:
        raise ParseError("invalid state: " + "; ".join(problems))
    return state


# ---------------------------------------------------------------------------
# canonical form


def _handle_key(h: HandleItem) -> tuple:
    return (h.record.cocore.letters, h.record.core.letters)


def normalize(s: CoveringState) -> CoveringState:
    """Canonical representative: canonical ids and orderings.

    Loops are renamed l1, l2, ... in a deterministic traversal that sorts
    sibling subtrees by a structural signature; frees and handles are
    renamed in signature order.  Among same-signature sibling loops the
    id assignment minimizing the serialized crossing records is chosen,
    so isomorphic states always normalize to identical values.
    """

    # structural signatures, crossing-blind
    sig_cache: dict[str, tuple] = {}

    def loop_sig(lid: str) -> tuple:
        if lid in sig_cache:
            return sig_cache[lid]
        lp = s.loops[lid]
        child_sigs = sorted(loop_sig(c) for c in s.loop_children(lid))
        free_sigs = sorted(
            f.label for f in s.frees.values() if f.region == lid
        )
        handle_sigs = sorted(
            _handle_key(h) for h in s.handles.values() if h.region == lid
        )
        sig = (lp.label, lp.orient, tuple(child_sigs), tuple(free_sigs), tuple(handle_sigs))
        sig_cache[lid] = sig
        return sig

    # Sibling lists sorted by signature; equal-signature runs are the only
    # ambiguity.  A tie permutation reorders such a run, and the traversal
    # then carries each loop's whole subtree with it.
    groups: list[list[str]] = []  # equal-signature sibling groups

    def sorted_kids(region: str, collect: bool) -> list[str]:
        kids = s.loop_children(region)
        kids.sort(key=loop_sig)
        if collect:
            i = 0
            while i < len(kids):
                j = i
                while j + 1 < len(kids) and loop_sig(kids[j + 1]) == loop_sig(kids[i]):
                    j += 1
                if j > i:
                    groups.append(kids[i : j + 1])
                i = j + 1
        return kids

    def traversal(reorder: dict[str, str]) -> list[str]:
        """Depth-first order with tie runs permuted via ``reorder``."""
        order: list[str] = []

        def visit(region: str):
            for k in sorted_kids(region, collect=False):
                k = reorder.get(k, k)
                order.append(k)
                visit(k)

        visit(ROOT)
        return order

    # first pass: discover tie groups
    def discover(region: str):
        for k in sorted_kids(region, collect=True):
            discover(k)

    discover(ROOT)

    def build(assignment: dict[str, str], order: list[str]) -> CoveringState:
        loops = {}
        for lid in order:
            lp = s.loops[lid]
            parent = ROOT if lp.parent == ROOT else assignment[lp.parent]
            loops[assignment[lid]] = Loop(lp.label, lp.orient, parent)
        frees = {}
        fs = sorted(
            s.frees.values(),
            key=lambda f: (f.label, ROOT if f.region == ROOT else assignment[f.region]),
        )
        for k, f in enumerate(fs, start=1):
            region = ROOT if f.region == ROOT else assignment[f.region]
            frees[f"f{k}"] = FreeEdge(f.label, region)
        handles = {}
        hs = sorted(
            s.handles.values(),
            key=lambda h: (
                _handle_key(h),
                ROOT if h.region == ROOT else assignment[h.region],
            ),
        )
        for k, h in enumerate(hs, start=1):
            region = ROOT if h.region == ROOT else assignment[h.region]
            handles[f"h{k}"] = HandleItem(h.record, region)
        crossings = {
            frozenset((assignment[a], assignment[b])): c
            for (a, b), c in ((tuple(p), c) for p, c in s.crossings.items())
        }
        return CoveringState(s.degree, loops, frees, handles, crossings)

    order = traversal({})
    base = {lid: f"l{k}" for k, lid in enumerate(order, start=1)}
    if not s.crossings or not groups:
        return build(base, order)

    # Try permutations within equal-signature groups to pin down ids in the
    # presence of crossing records.  Groups stay tiny in practice.
    best = None
    best_key = None
    group_perms = [list(itertools.permutations(g)) for g in groups]
    for choice in itertools.product(*group_perms):
        reorder: dict[str, str] = {}
        for g, perm in zip(groups, choice):
            for slot, image in zip(g, perm):
                reorder[slot] = image
        order2 = traversal(reorder)
        assignment = {lid: f"l{k}" for k, lid in enumerate(order2, start=1)}
        cand = build(assignment, order2)
        key = serialize_state(cand)
        if best_key is None or key < best_key:
            best, best_key = cand, key
    return best


def states_equal(s1: CoveringState, s2: CoveringState) -> bool:
    return serialize_state(normalize(s1)) == serialize_state(normalize(s2))
