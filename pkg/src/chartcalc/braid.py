"""Braid words over B_N and a complete solution to their word problem.

Words are sequences of signed Artin generators: the integer ``+i`` stands
for sigma_i and ``-i`` for its inverse, with indices in ``1..N-1``.  The
empty word is the identity ``e``.

Text syntax: generators are written ``s<i>`` with a trailing apostrophe
for the inverse, separated by whitespace, e.g. ``s1 s2' s3``; the empty
word prints as ``e``.  The degree is carried separately.

Permutation convention
----------------------
``permutation_image`` sends sigma_i to the transposition (i, i+1) and
composes the letters of a word as functions applied right to left:
``image(w)[x]`` is ``t1(t2(...tn(x)))`` for ``w = s1 s2 ... sn``.
Equivalently, stacking braid diagrams left to right, ``image(w)[x]`` is
the strand position at the *top* that ends at position ``x`` at the
bottom.  Under this convention ``s1 s2`` in B_3 maps 1 -> 2 -> 3 -> 1.
The same convention is used by chart boundary-word extraction.

Word problem
------------
``words_equal`` first refutes via the permutation image, then decides
equality by Dehornoy handle reduction of ``w1 * invert(w2)``: a word is
trivial in B_N iff handle reduction terminates with the empty word.  A
handle is a subword ``sigma_i^e u sigma_i^-e`` whose interior ``u`` uses
only generators of index > i; reducing it removes the flanking pair and
rewrites each interior ``sigma_{i+1}^d`` to
``sigma_{i+1}^-e sigma_i^d sigma_{i+1}^e``.  Reduction sequences always
terminate, but a configurable step cap converts pathological inputs into
an explicit :class:`~chartcalc.errors.WordProblemUndecided` rather than a
long stall.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

from chartcalc.errors import ParseError, WordProblemUndecided

DEFAULT_STEP_CAP = 10**6

_LETTER_RE = re.compile(r"^s(\d+)(')?$")


@dataclass(frozen=True)
class BraidWord:
    """A word in the Artin generators of B_degree.

    ``letters`` holds signed indices; ``+i`` is sigma_i, ``-i`` its
    inverse.  Instances are immutable and safe to share.
    """

    degree: int
    letters: tuple[int, ...] = ()

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError(f"degree must be >= 1, got {self.degree}")
        for x in self.letters:
            if x == 0 or not 1 <= abs(x) <= self.degree - 1:
                raise ValueError(
                    f"letter {x} out of range for degree {self.degree}"
                )
        object.__setattr__(self, "letters", tuple(self.letters))

    def __len__(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return format_word(self)

    def is_identity_word(self) -> bool:
        """True iff the word is syntactically empty (not merely trivial)."""
        return not self.letters

    def concat(self, other: BraidWord) -> BraidWord:
        if other.degree != self.degree:
            raise ValueError("cannot concatenate words of different degree")
        return BraidWord(self.degree, self.letters + other.letters)

    def __mul__(self, other: BraidWord) -> BraidWord:
        return self.concat(other)


def word(degree: int, *letters: int) -> BraidWord:
    """Convenience constructor: ``word(3, 1, -2)`` is ``s1 s2'`` in B_3."""
    return BraidWord(degree, tuple(letters))


def parse_word(text: str, degree: int) -> BraidWord:
    """Parse the ``s1 s2' s3`` syntax; ``e`` (or empty) is the identity."""
    text = text.strip()
    if text in ("", "e"):
        return BraidWord(degree, ())
    letters = []
    for tok in text.split():
        m = _LETTER_RE.match(tok)
        if not m:
            raise ParseError(f"bad generator {tok!r} (expected s<i> or s<i>')")
        idx = int(m.group(1))
        if not 1 <= idx <= degree - 1:
            raise ParseError(f"generator index {idx} out of range 1..{degree - 1}")
        letters.append(-idx if m.group(2) else idx)
    return BraidWord(degree, tuple(letters))


def format_word(w: BraidWord) -> str:
    if not w.letters:
        return "e"
    return " ".join(f"s{abs(x)}" + ("'" if x < 0 else "") for x in w.letters)


def free_reduce(w: BraidWord) -> BraidWord:
    """Cancel adjacent sigma_i^e sigma_i^-e pairs to a fixpoint."""
    out: list[int] = []
    for x in w.letters:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return BraidWord(w.degree, tuple(out))


def invert(w: BraidWord) -> BraidWord:
    """Reverse the letter order and flip every sign."""
    return BraidWord(w.degree, tuple(-x for x in reversed(w.letters)))


def conjugate(w: BraidWord, i: int, sign: int = 1) -> BraidWord:
    """Return sigma_i^sign * w * sigma_i^-sign, free-reduced."""
    if not 1 <= i <= w.degree - 1:
        raise ValueError(f"index {i} out of range for degree {w.degree}")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    return free_reduce(BraidWord(w.degree, (sign * i,) + w.letters + (-sign * i,)))


@dataclass(frozen=True)
class Permutation:
    """A bijection on ``{1..degree}``; ``images[k]`` is the image of k+1."""

    degree: int
    images: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.images) != list(range(1, self.degree + 1)):
            raise ValueError(f"images {self.images} are not a bijection on 1..{self.degree}")

    def __call__(self, x: int) -> int:
        return self.images[x - 1]

    @classmethod
    def identity(cls, degree: int) -> Permutation:
        return cls(degree, tuple(range(1, degree + 1)))

    def is_identity(self) -> bool:
        return all(self.images[k] == k + 1 for k in range(self.degree))


def permutation_image(w: BraidWord) -> Permutation:
    """Image of ``w`` in the symmetric group (see module docstring for the
    composition convention)."""
    # Letters act right to left, so scan the word from its last letter.
    images = list(range(1, w.degree + 1))
    for x in reversed(w.letters):
        i = abs(x)
        # Transposition (i, i+1) applied after what has been built so far.
        for k in range(w.degree):
            if images[k] == i:
                images[k] = i + 1
            elif images[k] == i + 1:
                images[k] = i
    return Permutation(w.degree, tuple(images))


def _find_handle(letters: list[int]) -> tuple[int, int] | None:
    """Locate the handle whose closing letter comes first.

    Returns positions (p, q) with letters[p] = -letters[q], equal index i,
    and every interior letter of index > i.  Scanning for the earliest
    closing position keeps reduction close to Dehornoy's original strategy.
    """
    # last_seen[i] = position of the most recent sigma_i^{+-} occurrence.
    last_seen: dict[int, int] = {}
    for q, x in enumerate(letters):
        i = abs(x)
        p = last_seen.get(i)
        if p is not None and letters[p] == -x:
            # interior letters all have index > i by construction: any
            # letter of index < i between p and q would have cleared
            # last_seen[i] below.
            return p, q
        # Occurrences of index <= i invalidate pending openings of index >= i.
        for j in list(last_seen):
            if j > i:
                del last_seen[j]
        last_seen[i] = q
    return None


def _reduce_handle(letters: list[int], p: int, q: int) -> list[int]:
    i = abs(letters[p])
    e = 1 if letters[p] > 0 else -1
    mid: list[int] = []
    for x in letters[p + 1 : q]:
        if abs(x) == i + 1:
            d = 1 if x > 0 else -1
            mid.extend([-e * (i + 1), d * i, e * (i + 1)])
        else:
            mid.append(x)
    return letters[:p] + mid + letters[q + 1 :]


def handle_reduce(w: BraidWord, step_cap: int = DEFAULT_STEP_CAP) -> BraidWord:
    """Reduce ``w`` to a handle-free word equal to it in B_N.

    The result is empty iff ``w`` represents the identity.  Raises
    :class:`WordProblemUndecided` if ``step_cap`` reductions do not reach
    a handle-free word.
    """
    letters = list(free_reduce(w).letters)
    for _ in range(step_cap):
        found = _find_handle(letters)
        if found is None:
            return BraidWord(w.degree, tuple(letters))
        letters = _reduce_handle(letters, *found)
        # Free reduction is itself a handle reduction; doing it eagerly
        # keeps intermediate words short.
        reduced = list(free_reduce(BraidWord(w.degree, tuple(letters))).letters)
        letters = reduced
    raise WordProblemUndecided(
        f"handle reduction did not terminate within {step_cap} steps",
        stats={"step_cap": step_cap, "residual_length": len(letters)},
    )


def is_trivial(w: BraidWord, step_cap: int = DEFAULT_STEP_CAP) -> bool:
    """True iff ``w`` equals the identity in B_N."""
    if not permutation_image(w).is_identity():
        return False
    return len(handle_reduce(w, step_cap=step_cap)) == 0


def words_equal(w1: BraidWord, w2: BraidWord, step_cap: int = DEFAULT_STEP_CAP) -> bool:
    """Decide w1 = w2 in B_N.

    The permutation image refutes fast; otherwise handle reduction of
    ``w1 * invert(w2)`` decides.
    """
    if w1.degree != w2.degree:
        raise ValueError("words_equal requires equal degree")
    if w1.letters == w2.letters:
        return True
    if permutation_image(w1).images != permutation_image(w2).images:
        return False
    return is_trivial(free_reduce(w1.concat(invert(w2))), step_cap=step_cap)


def commute(w1: BraidWord, w2: BraidWord, step_cap: int = DEFAULT_STEP_CAP) -> bool:
    """True iff w1 w2 = w2 w1 in B_N."""
    return words_equal(w1.concat(w2), w2.concat(w1), step_cap=step_cap)


def all_words(degree: int, max_len: int) -> itertools.chain:
    """Iterate every word over B_degree of length <= max_len (test helper)."""
    alphabet = [s * i for i in range(1, degree) for s in (1, -1)]
    return itertools.chain.from_iterable(
        (BraidWord(degree, p) for p in itertools.product(alphabet, repeat=n))
        for n in range(max_len + 1)
    )
