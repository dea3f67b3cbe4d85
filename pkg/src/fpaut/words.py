r"""Reduced words in a free product and the boundary of infinite words.

Elements of G = H_1 * ... * H_r * F_q are written as alternating-reduced
syllable sequences: a syllable is either a signed free generator or a
non-identity factor element, no two adjacent factor syllables share a
factor, and no free letter is adjacent to its inverse.  The free product
length |w| is the syllable count.

The boundary attached to the decomposition is modeled by lazily extended
infinite reduced words (Ray).  Its metric is d(A, B) = exp(-|A /\ B|) where
A /\ B is the longest common initial subword, with d(A, A) = 0.  At a
finite probe depth equality of rays is not decidable, so distance queries
can return a value flagged as a truncated upper bound.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import NamedTuple

from .errors import ParseError, PreconditionError, StagnationError, ValidationError
from .factors import FactorElement, FactorGroup, _free_reduce


@dataclass(frozen=True)
class FreeLetter:
    """A signed free generator: gen is 1-based, sign is +1 or -1."""

    gen: int
    sign: int

    def inverse(self):
        return FreeLetter(self.gen, -self.sign)

    def sort_key(self):
        return (0, self.gen, 0 if self.sign > 0 else 1)


def syllable_key(s):
    if isinstance(s, FreeLetter):
        return s.sort_key()
    return (1,) + s.sort_key()


class Word:
    """An immutable reduced word; construct via FreeProduct.reduce/parse."""

    __slots__ = ("syllables", "_hash")

    def __init__(self, syllables=()):
        self.syllables = tuple(syllables)
        self._hash = None

    def __len__(self):
        return len(self.syllables)

    def __iter__(self):
        return iter(self.syllables)

    def __getitem__(self, i):
        return self.syllables[i]

    def __eq__(self, other):
        return isinstance(other, Word) and self.syllables == other.syllables

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.syllables)
        return self._hash

    def __bool__(self):
        return bool(self.syllables)

    def __repr__(self):
        return f"Word<{len(self.syllables)} syllables>"

    def sort_key(self):
        return tuple(syllable_key(s) for s in self.syllables)

    def is_prefix_of(self, other: "Word") -> bool:
        return self.syllables == other.syllables[: len(self.syllables)]


EMPTY_WORD = Word(())


class BoundaryDistance(NamedTuple):
    value: float
    truncated: bool


class FreeProduct:
    """The group G together with its fixed decomposition.

    All word arithmetic lives here because multiplying factor syllables
    needs the factor models.  Values produced are immutable and shareable.
    """

    def __init__(self, factors, free_names):
        self.factors = tuple(factors)
        self.free_names = tuple(free_names)
        self.free_rank = len(self.free_names)
        if self.free_rank + len(self.factors) < 1:
            raise ValidationError("decomposition is trivial")
        for i, f in enumerate(self.factors, start=1):
            if f.id != i:
                raise ValidationError(f"factor {f.name} has id {f.id}, expected {i}")
        names = list(self.free_names)
        for f in self.factors:
            names.extend(f.generator_names)
        if len(set(names)) != len(names):
            raise ValidationError("generator names must be globally unique")
        for n in self.free_names:
            if not n or not n[0].islower():
                raise ValidationError(f"free generator name {n!r} must start lowercase")

    def factor(self, fid: int) -> FactorGroup:
        if not 1 <= fid <= len(self.factors):
            raise ValidationError(f"no factor with id {fid}")
        return self.factors[fid - 1]

    # -- construction ------------------------------------------------------

    def free_letter(self, name_or_index, sign=1) -> FreeLetter:
        if isinstance(name_or_index, str):
            idx = self.free_names.index(name_or_index) + 1
        else:
            idx = name_or_index
        if not 1 <= idx <= self.free_rank:
            raise ValidationError(f"no free generator {name_or_index!r}")
        return FreeLetter(idx, sign)

    def generator_words(self):
        """Single-syllable words for every free and factor generator."""
        out = [Word((FreeLetter(i, 1),)) for i in range(1, self.free_rank + 1)]
        for f in self.factors:
            out.extend(Word((FactorElement(f.id, p),)) for p in f.generator_payloads())
        return out

    # -- reduction ----------------------------------------------------------

    def _push(self, stack, syl, counter=None):
        """Push one syllable onto a reduced stack, folding cancellations.

        counter, when given, is a one-element list accumulating junction
        reduction events: a free pair cancellation counts 1, a factor merge
        counts 1, and a merge that produces the identity counts 2.
        Returns True when the syllable interacted with the stack.
        """
        if isinstance(syl, FreeLetter):
            if stack and isinstance(stack[-1], FreeLetter) and \
                    stack[-1].gen == syl.gen and stack[-1].sign == -syl.sign:
                stack.pop()
                if counter is not None:
                    counter[0] += 1
                return True
            stack.append(syl)
            return False
        # factor syllable
        if stack and isinstance(stack[-1], FactorElement) and \
                stack[-1].factor_id == syl.factor_id:
            group = self.factor(syl.factor_id)
            merged = group.mul(stack[-1].payload, syl.payload)
            stack.pop()
            if merged is None:
                if counter is not None:
                    counter[0] += 2
            else:
                stack.append(FactorElement(syl.factor_id, merged))
                if counter is not None:
                    counter[0] += 1
            return True
        stack.append(syl)
        return False

    def reduce(self, raw) -> Word:
        """The unique reduced word equal to the product of ``raw`` in G."""
        stack = []
        for syl in raw:
            self._validate_syllable(syl)
            self._push(stack, syl)
        return Word(stack)

    def _validate_syllable(self, syl):
        if isinstance(syl, FreeLetter):
            if not (1 <= syl.gen <= self.free_rank and syl.sign in (1, -1)):
                raise ValidationError(f"bad free letter {syl!r}")
        elif isinstance(syl, FactorElement):
            self.factor(syl.factor_id).validate_payload(syl.payload)
        else:
            raise ValidationError(f"not a syllable: {syl!r}")

    def concat(self, u: Word, v: Word):
        """reduce(u v) together with the junction cancellation amount.

        The amount counts elementary reductions at the junction: each free
        pair cancellation is 1, each factor merge is 1, and a merge that
        dies to the identity is 2 (merge, then delete).  Once a syllable of
        v lands without interacting the junction is closed; v being reduced,
        nothing later can interact either.
        """
        stack = list(u.syllables)
        events = 0
        active = True
        for syl in v.syllables:
            if not active:
                stack.append(syl)
                continue
            if isinstance(syl, FreeLetter):
                if stack and isinstance(stack[-1], FreeLetter) and \
                        stack[-1].gen == syl.gen and stack[-1].sign == -syl.sign:
                    stack.pop()
                    events += 1
                    continue
                stack.append(syl)
                active = False
            else:
                if stack and isinstance(stack[-1], FactorElement) and \
                        stack[-1].factor_id == syl.factor_id:
                    group = self.factor(syl.factor_id)
                    merged = group.mul(stack[-1].payload, syl.payload)
                    stack.pop()
                    if merged is None:
                        events += 2
                        continue
                    stack.append(FactorElement(syl.factor_id, merged))
                    events += 1
                    active = False
                else:
                    stack.append(syl)
                    active = False
        return Word(stack), events

    def inverse(self, w: Word) -> Word:
        out = []
        for syl in reversed(w.syllables):
            if isinstance(syl, FreeLetter):
                out.append(syl.inverse())
            else:
                group = self.factor(syl.factor_id)
                out.append(FactorElement(syl.factor_id, group.inv(syl.payload)))
        return Word(out)

    # -- boundary operations -------------------------------------------------

    def _prefix_syllables(self, x, depth):
        if isinstance(x, Word):
            return x.syllables[:depth]
        return x.prefix(depth).syllables

    def common_prefix(self, a, b, depth: int) -> Word:
        """The operation /\\ truncated at the probe depth.

        Accepts Words and Rays; for Rays both sides must extend to the probe
        depth (a malformed extender surfaces as StagnationError).
        """
        xs = self._prefix_syllables(a, depth)
        ys = self._prefix_syllables(b, depth)
        n = 0
        for s, t in zip(xs, ys):
            if s != t:
                break
            n += 1
        return Word(xs[:n])

    def boundary_distance(self, a, b, depth: int) -> BoundaryDistance:
        """d(A, B) = exp(-|A /\\ B|); flagged truncated when the probe depth
        was exhausted without finding a disagreement between distinct rays."""
        xs = self._prefix_syllables(a, depth)
        ys = self._prefix_syllables(b, depth)
        n = 0
        for s, t in zip(xs, ys):
            if s != t:
                break
            n += 1
        both_words = isinstance(a, Word) and isinstance(b, Word)
        if both_words and a == b:
            return BoundaryDistance(0.0, False)
        exhausted = n == len(xs) == len(ys) and n == depth
        if exhausted:
            return BoundaryDistance(math.exp(-n), True)
        return BoundaryDistance(math.exp(-n), False)

    # -- cyclic reduction and hyperbolicity -----------------------------------

    def _cyclically_reduced(self, w: Word) -> bool:
        if len(w) <= 1:
            return True
        first, last = w.syllables[0], w.syllables[-1]
        if isinstance(first, FreeLetter) and isinstance(last, FreeLetter):
            return not (first.gen == last.gen and first.sign == -last.sign)
        if isinstance(first, FactorElement) and isinstance(last, FactorElement):
            return first.factor_id != last.factor_id
        return True

    def cyclic_reduce(self, w: Word):
        """Split w = c . core . c^-1 with the core cyclically reduced (no
        cancellation or merge between its last and first syllable)."""
        core = self.reduce(w.syllables)
        conj = []
        while len(core) >= 2 and not self._cyclically_reduced(core):
            head = core.syllables[0]
            conj.append(head)
            core, _ = self.concat(Word(core.syllables[1:]), Word((head,)))
        return core, self.reduce(conj)

    def is_hyperbolic(self, w: Word) -> bool:
        """True iff w acts hyperbolically on every tree of the relative outer
        space: the cyclically reduced core has length >= 2 or is one free
        letter.  A single factor syllable fixes the non-free vertex."""
        core, _ = self.cyclic_reduce(w)
        if len(core) == 0:
            return False
        if len(core) >= 2:
            return True
        return isinstance(core.syllables[0], FreeLetter)

    # -- rays ------------------------------------------------------------------

    def rational_ray(self, u: Word) -> "Ray":
        """The boundary point u^infinity = lim u^k for hyperbolic u,
        realized as conjugator . core^infinity of the cyclic reduction."""
        if not self.is_hyperbolic(u):
            raise PreconditionError(
                "rational_ray: elliptic or trivial word has no boundary limit")
        core, conj = self.cyclic_reduce(u)
        return self.ultimately_periodic_ray(conj, core,
                                            label=f"rational({self.format_word(u)})")

    def ultimately_periodic_ray(self, head: Word, period: Word, label="up-ray") -> "Ray":
        """The ray head . period^infinity (period must be hyperbolic).

        Since period = conj . core . conj^-1 with a cyclically reduced core,
        the ray equals (head . conj) . core^infinity.  Cancellation between
        the base and the periodic part is absorbed up front: copies of the
        core are pushed until one lands without any interaction, after which
        every later copy junction is the clean (core end, core start) pair.
        Prefixes are then exact concatenations, trivially nested.
        """
        core, conj = self.cyclic_reduce(period)
        if not core or (len(core) == 1 and isinstance(core.syllables[0], FactorElement)):
            raise PreconditionError(
                "ultimately periodic ray needs a hyperbolic period")
        base, _ = self.concat(head, conj)
        stack = list(base.syllables)
        stable = None
        for _ in range(len(base) + len(core) + 8):
            before = len(stack)
            for s in core.syllables:
                self._push(stack, s)
            if len(stack) == before + len(core) and \
                    tuple(stack[-len(core):]) == core.syllables:
                stable = tuple(stack)
                break
        if stable is None:
            raise StagnationError(f"ray {label}: period failed to stabilize")

        def extend(current, target):
            needed = max(target, len(current) + 1)
            reps = max(1, (needed - len(stable)) // len(core) + 1)
            return Word(stable + core.syllables * reps)

        return Ray(self, extend, label=label)

    def detect_rational(self, x: "Ray", depth: int, max_period: int):
        """Search the depth-prefix for eventual periodicity with period
        length <= max_period.  The periodic tail must cover at least half
        the probe depth (and two full periods), so a positive answer rests
        on substantial evidence; it remains evidence, not proof.  A negative
        answer is exhaustive up to these bounds."""
        prefix = x.prefix(depth).syllables
        n = len(prefix)
        for ell in range(1, max_period + 1):
            for start in range(0, min(n - 2 * ell, n // 2) + 1):
                if all(prefix[i] == prefix[i + ell] for i in range(start, n - ell)):
                    return Word(prefix[start:start + ell])
        return None

    # -- text ----------------------------------------------------------------

    def parse_word(self, text: str) -> Word:
        """Whitespace-separated syllables: free letters ``b1`` / ``B1``
        (capital first letter = inverse), factor elements ``a^3@1`` with a
        1-based factor id.  ``()`` denotes the empty word."""
        text = text.strip()
        if text in ("", "()"):
            return EMPTY_WORD
        raw = []
        for tok in text.split():
            raw.append(self.parse_syllable(tok))
        return self.reduce(raw)

    def parse_syllable(self, tok: str):
        if "@" in tok:
            payload_text, _, fid_text = tok.rpartition("@")
            try:
                fid = int(fid_text)
            except ValueError:
                raise ParseError(f"bad factor id in {tok!r}") from None
            group = self.factor(fid)
            return FactorElement(fid, group.parse_payload(payload_text))
        if not tok:
            raise ParseError("empty token")
        sign = -1 if tok[0].isupper() else 1
        name = tok[0].lower() + tok[1:]
        if name not in self.free_names:
            raise ParseError(f"unknown free generator {tok!r}")
        return FreeLetter(self.free_names.index(name) + 1, sign)

    def format_syllable(self, syl) -> str:
        if isinstance(syl, FreeLetter):
            name = self.free_names[syl.gen - 1]
            return name if syl.sign > 0 else name[0].upper() + name[1:]
        group = self.factor(syl.factor_id)
        return f"{group.format_payload(syl.payload)}@{syl.factor_id}"

    def format_word(self, w: Word) -> str:
        if not w:
            return "()"
        return " ".join(self.format_syllable(s) for s in w.syllables)

    # -- randomness (seeded property probes) ----------------------------------

    def random_syllable(self, rng: random.Random, avoid=None):
        """A random syllable that neither cancels nor merges with ``avoid``."""
        while True:
            kinds = ["free"] * self.free_rank + ["factor"] * len(self.factors)
            kind = rng.choice(kinds)
            if kind == "free":
                syl = FreeLetter(rng.randrange(1, self.free_rank + 1),
                                 rng.choice((1, -1)))
                if isinstance(avoid, FreeLetter) and \
                        avoid.gen == syl.gen and avoid.sign == -syl.sign:
                    continue
            else:
                f = rng.choice(self.factors)
                if isinstance(avoid, FactorElement) and avoid.factor_id == f.id:
                    continue
                if f.is_finite:
                    payload = rng.choice(f.elements())
                else:
                    length = rng.randrange(1, 3)
                    letters = []
                    for _ in range(length):
                        letters.append((rng.randrange(1, f.rank + 1), rng.choice((1, -1))))
                    payload = _free_reduce(tuple(letters))
                    if not payload:
                        continue
                syl = FactorElement(f.id, payload)
            return syl

    def random_reduced_word(self, rng: random.Random, length: int) -> Word:
        syls = []
        for _ in range(length):
            prev = syls[-1] if syls else None
            syls.append(self.random_syllable(rng, avoid=prev))
        w = Word(syls)
        assert len(self.reduce(syls)) == length, "random word was not reduced"
        return w


class Ray:
    """A point of the boundary: a lazily extended infinite reduced word.

    The extender must return a strictly longer reduced word whose prefix
    agrees with the current one; violations surface as StagnationError or
    ValidationError, never silently.  Extension mutates only the memo
    buffer, so a Ray should be confined to one thread at a time; reads of
    already materialized prefixes are safe.
    """

    def __init__(self, group: FreeProduct, extender, label="ray"):
        self._G = group
        self._extender = extender
        self._buffer = EMPTY_WORD
        self.label = label

    def __repr__(self):
        return f"Ray<{self.label}, {len(self._buffer)} materialized>"

    def materialized(self) -> Word:
        return self._buffer

    def prefix(self, n: int) -> Word:
        """The first n syllables (extending as needed)."""
        guard = 0
        while len(self._buffer) < n:
            new = self._extender(self._buffer, n)
            if len(new) <= len(self._buffer):
                raise StagnationError(
                    f"ray {self.label}: extender made no progress",
                    probe_depth=len(self._buffer))
            if not self._buffer.is_prefix_of(new):
                raise ValidationError(
                    f"ray {self.label}: extension is not nested")
            self._buffer = new
            guard += 1
            if guard > 10000:
                raise StagnationError(
                    f"ray {self.label}: runaway extension loop",
                    probe_depth=len(self._buffer))
        return Word(self._buffer.syllables[:n])

    def syllable(self, i: int):
        """1-based syllable access."""
        return self.prefix(i).syllables[i - 1]


def word_ray(group: FreeProduct, w: Word, label="word") -> Ray:
    """Degenerate helper: a 'ray' that stops at a finite word (used for
    comparing a boundary image against a finite probe)."""

    def extend(current, target):
        if len(current) >= len(w):
            raise StagnationError(f"finite word of length {len(w)} exhausted",
                                  probe_depth=len(current))
        return w

    return Ray(group, extend, label=label)
