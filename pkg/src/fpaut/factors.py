"""Elliptic factor groups and their automorphisms.

A free product decomposition G = H_1 * ... * H_r * F_q needs concrete,
decidable models for the factors H_i: they supply the factor syllables of
reduced words and the twist data of automorphisms preserving the factor
system.  Three kinds are supported:

* cyclic(m)       -- Z/m, payload is the exponent in 1..m-1,
* finite table    -- any finite group given by its multiplication table,
                     payload is the element index (index 0 is the identity),
* free(k)         -- a free group of rank k, payload is a freely reduced
                     tuple of (generator, sign) letters.

Identity elements are never materialized as payloads: every operation that
can produce the identity returns None instead, so a FactorElement is
non-trivial by construction and word reduction can delete the syllable.
"""

from __future__ import annotations

from dataclasses import dataclass
from collections import deque

from .errors import ParseError, ValidationError


@dataclass(frozen=True)
class FactorElement:
    """A non-identity element of the factor with index ``factor_id``."""

    factor_id: int
    payload: object

    def sort_key(self):
        p = self.payload
        key = p if isinstance(p, tuple) else (p,)
        return (self.factor_id, key)


def _free_reduce(letters):
    out = []
    for g, s in letters:
        if out and out[-1][0] == g and out[-1][1] == -s:
            out.pop()
        else:
            out.append((g, s))
    return tuple(out)


def _free_invert(letters):
    return tuple((g, -s) for g, s in reversed(letters))


class FactorGroup:
    """Common interface of the three factor kinds.

    ``id`` is the 1-based index of the factor inside the decomposition and
    is what word syntax refers to (``a^3@1``).
    """

    kind = "abstract"
    is_finite = False

    def __init__(self, fid: int, name: str, generator_names):
        self.id = fid
        self.name = name
        self.generator_names = tuple(generator_names)
        if not self.generator_names:
            raise ValidationError(f"factor {name}: needs at least one generator")

    # -- payload algebra -------------------------------------------------

    def mul(self, x, y):
        raise NotImplementedError

    def inv(self, x):
        raise NotImplementedError

    def validate_payload(self, x):
        raise NotImplementedError

    def hom_image(self, images, x):
        """Image of payload ``x`` under the homomorphism sending generator i
        to ``images[i]`` (an image of None denotes the identity)."""
        raise NotImplementedError

    def elements(self):
        """All non-identity payloads; only finite kinds can enumerate."""
        raise NotImplementedError(f"{self.kind} factor cannot enumerate elements")

    def generator_payloads(self):
        raise NotImplementedError

    def sample_nontrivial(self):
        """Canonical non-identity payload (used as a witness turn)."""
        return self.generator_payloads()[0]

    # -- text ------------------------------------------------------------

    def parse_payload(self, text):
        raise NotImplementedError

    def format_payload(self, x):
        raise NotImplementedError

    # -- helpers ---------------------------------------------------------

    def element(self, payload) -> FactorElement:
        self.validate_payload(payload)
        return FactorElement(self.id, payload)

    def __repr__(self):
        return f"<{self.kind} factor {self.name} (id {self.id})>"


class CyclicFactor(FactorGroup):
    kind = "cyclic"
    is_finite = True

    def __init__(self, fid, name, modulus, generator_name="a"):
        if modulus < 2:
            raise ValidationError(f"factor {name}: cyclic modulus must be >= 2")
        super().__init__(fid, name, [generator_name])
        self.modulus = modulus

    def mul(self, x, y):
        r = (x + y) % self.modulus
        return r or None

    def inv(self, x):
        return self.modulus - x

    def validate_payload(self, x):
        if not isinstance(x, int) or not 0 < x < self.modulus:
            raise ValidationError(
                f"factor {self.name}: bad cyclic payload {x!r}")

    def hom_image(self, images, x):
        g = images[0]
        if g is None:
            return None
        r = (g * x) % self.modulus
        return r or None

    def elements(self):
        return list(range(1, self.modulus))

    def generator_payloads(self):
        return (1,)

    def parse_payload(self, text):
        name = self.generator_names[0]
        if text == name:
            return 1
        if text.startswith(name + "^"):
            try:
                k = int(text[len(name) + 1:])
            except ValueError:
                raise ParseError(f"bad exponent in {text!r}") from None
            k %= self.modulus
            if k == 0:
                raise ParseError(f"{text!r} is the identity; identity syllables are not allowed")
            return k
        raise ParseError(f"cannot parse {text!r} in cyclic factor {self.name}")

    def format_payload(self, x):
        name = self.generator_names[0]
        return name if x == 1 else f"{name}^{x}"


class TableFactor(FactorGroup):
    """Finite group given by its full multiplication table.

    ``element_names[0]`` names the identity; ``table[i][j]`` is the index of
    element i * element j.  Group axioms are verified by exhaustion at
    construction time.
    """

    kind = "table"
    is_finite = True

    def __init__(self, fid, name, element_names, table, generator_names=None):
        n = len(element_names)
        if n < 2:
            raise ValidationError(f"factor {name}: table group must have size >= 2")
        if len(set(element_names)) != n:
            raise ValidationError(f"factor {name}: duplicate element names")
        if len(table) != n or any(len(row) != n for row in table):
            raise ValidationError(f"factor {name}: table must be {n}x{n}")
        self.element_names = tuple(element_names)
        self.table = tuple(tuple(row) for row in table)
        self.size = n
        self._check_group_axioms(name)
        if generator_names is None:
            generator_names = self._default_generators()
        super().__init__(fid, name, generator_names)
        self._gen_indices = tuple(self.element_names.index(g) for g in self.generator_names)
        self._expressions = self._generator_expressions(name)

    def _check_group_axioms(self, name):
        n = self.size
        rng = range(n)
        for i in rng:
            if self.table[0][i] != i or self.table[i][0] != i:
                raise ValidationError(f"factor {name}: element 0 is not an identity")
        for i in rng:
            if not any(self.table[i][j] == 0 for j in rng):
                raise ValidationError(f"factor {name}: element {i} has no inverse")
        for i in rng:
            for j in rng:
                for k in rng:
                    if self.table[self.table[i][j]][k] != self.table[i][self.table[j][k]]:
                        raise ValidationError(
                            f"factor {name}: associativity fails at ({i},{j},{k})")

    def _default_generators(self):
        return tuple(n for n in self.element_names[1:])

    def _generator_expressions(self, name):
        # BFS over generator multiplication: expression of each element as a
        # word in the generators, needed to push homomorphisms around.
        expr = {0: ()}
        queue = deque([0])
        while queue:
            i = queue.popleft()
            for g in self._gen_indices:
                j = self.table[i][g]
                if j not in expr:
                    expr[j] = expr[i] + (g,)
                    queue.append(j)
        if len(expr) != self.size:
            raise ValidationError(
                f"factor {name}: declared generators do not generate the group")
        return expr

    def mul(self, x, y):
        r = self.table[x][y]
        return r or None

    def inv(self, x):
        for j in range(self.size):
            if self.table[x][j] == 0:
                return j
        raise AssertionError("inverse vanished after axiom check")

    def validate_payload(self, x):
        if not isinstance(x, int) or not 0 < x < self.size:
            raise ValidationError(f"factor {self.name}: bad table payload {x!r}")

    def hom_image(self, images, x):
        gen_image = dict(zip(self._gen_indices, images))
        acc = None
        for g in self._expressions[x]:
            img = gen_image[g]
            if img is None:
                continue
            acc = img if acc is None else self.mul(acc, img)
            # mul may return None (identity); keep folding
        return acc

    def elements(self):
        return list(range(1, self.size))

    def generator_payloads(self):
        return self._gen_indices

    def parse_payload(self, text):
        try:
            idx = self.element_names.index(text)
        except ValueError:
            raise ParseError(f"unknown element {text!r} of table factor {self.name}") from None
        if idx == 0:
            raise ParseError(f"{text!r} is the identity; identity syllables are not allowed")
        return idx

    def format_payload(self, x):
        return self.element_names[x]


class FreeFactor(FactorGroup):
    """Finitely generated free group; payloads are freely reduced words."""

    kind = "free"
    is_finite = False

    def __init__(self, fid, name, rank, generator_names=None):
        if rank < 1:
            raise ValidationError(f"factor {name}: free rank must be >= 1")
        if generator_names is None:
            generator_names = [f"x{i}" for i in range(1, rank + 1)]
        if len(generator_names) != rank:
            raise ValidationError(f"factor {name}: need {rank} generator names")
        super().__init__(fid, name, generator_names)
        self.rank = rank

    def mul(self, x, y):
        r = _free_reduce(x + y)
        return r or None

    def inv(self, x):
        return _free_invert(x)

    def validate_payload(self, x):
        if not isinstance(x, tuple) or not x:
            raise ValidationError(f"factor {self.name}: bad free payload {x!r}")
        for g, s in x:
            if not (1 <= g <= self.rank and s in (1, -1)):
                raise ValidationError(f"factor {self.name}: bad letter {(g, s)!r}")
        if _free_reduce(x) != x:
            raise ValidationError(f"factor {self.name}: payload not freely reduced: {x!r}")

    def hom_image(self, images, x):
        out = []
        for g, s in x:
            img = images[g - 1]
            if img is None:
                continue
            out.extend(img if s == 1 else _free_invert(img))
        r = _free_reduce(tuple(out))
        return r or None

    def generator_payloads(self):
        return tuple(((i, 1),) for i in range(1, self.rank + 1))

    def parse_payload(self, text):
        letters = []
        for atom in text.split("*"):
            if "^" in atom:
                gname, _, exp = atom.partition("^")
                try:
                    k = int(exp)
                except ValueError:
                    raise ParseError(f"bad exponent in {atom!r}") from None
            else:
                gname, k = atom, 1
            if gname not in self.generator_names:
                raise ParseError(
                    f"unknown generator {gname!r} of free factor {self.name}")
            g = self.generator_names.index(gname) + 1
            if k == 0:
                continue
            s = 1 if k > 0 else -1
            letters.extend([(g, s)] * abs(k))
        r = _free_reduce(tuple(letters))
        if not r:
            raise ParseError(f"{text!r} is the identity; identity syllables are not allowed")
        return r

    def format_payload(self, x):
        atoms = []
        i = 0
        while i < len(x):
            g, s = x[i]
            j = i
            while j < len(x) and x[j] == (g, s):
                j += 1
            k = (j - i) * s
            name = self.generator_names[g - 1]
            atoms.append(name if k == 1 else f"{name}^{k}")
            i = j
        return "*".join(atoms)


# -- module-level operations ----------------------------------------------

def elem_mul(group: FactorGroup, x: FactorElement, y: FactorElement):
    """Group product of two factor elements; None marks the identity."""
    if x.factor_id != y.factor_id or x.factor_id != group.id:
        raise ValidationError(
            f"elem_mul: factor mismatch ({x.factor_id} vs {y.factor_id} in group {group.id})")
    p = group.mul(x.payload, y.payload)
    return None if p is None else FactorElement(group.id, p)


@dataclass(frozen=True)
class FactorAutomorphism:
    """An isomorphism between two factors given by generator images, with a
    declared inverse (invertibility is never decided, only verified)."""

    source: FactorGroup
    target: FactorGroup
    images: tuple
    inv_images: tuple
    name: str = ""

    def __post_init__(self):
        if len(self.images) != len(self.source.generator_payloads()):
            raise ValidationError(f"factor aut {self.name}: wrong number of images")
        if len(self.inv_images) != len(self.target.generator_payloads()):
            raise ValidationError(f"factor aut {self.name}: wrong number of inverse images")
        for img in self.images:
            if img is not None:
                self.target.validate_payload(img)
        for img in self.inv_images:
            if img is not None:
                self.source.validate_payload(img)

    def apply(self, x: FactorElement):
        """Image of x; None when the image is trivial (possible only when the
        declared data is not actually an automorphism)."""
        if x.factor_id != self.source.id:
            raise ValidationError(
                f"factor aut {self.name}: element of factor {x.factor_id} "
                f"fed to map from factor {self.source.id}")
        p = self.target.hom_image(self.images, x.payload)
        return None if p is None else FactorElement(self.target.id, p)

    def apply_payload(self, p):
        return self.target.hom_image(self.images, p)

    def inverse(self) -> "FactorAutomorphism":
        return FactorAutomorphism(self.target, self.source, self.inv_images,
                                  self.images, name=f"{self.name}^-1")

    def compose(self, inner: "FactorAutomorphism") -> "FactorAutomorphism":
        """self o inner (apply inner first)."""
        if inner.target is not self.source:
            raise ValidationError("factor aut composition: target/source mismatch")
        images = tuple(
            None if p is None else self.source.hom_image(self.images, p)
            for p in inner.images)
        inv_images = tuple(
            None if p is None else self.target.hom_image(inner.inv_images, p)
            for p in self.inv_images)
        return FactorAutomorphism(inner.source, self.target, images, inv_images,
                                  name=f"{self.name}*{inner.name}")

    @staticmethod
    def identity(group: FactorGroup) -> "FactorAutomorphism":
        gens = group.generator_payloads()
        return FactorAutomorphism(group, group, gens, gens, name=f"id_{group.name}")


def apply_factor_aut(aut: FactorAutomorphism, x: FactorElement):
    return aut.apply(x)


def verify_factor_aut(aut: FactorAutomorphism):
    """Check that the declared inverse really inverts the map.

    Returns (True, None) or (False, witness string).  Both compositions must
    fix every generator; finite kinds are additionally checked bijective by
    enumerating images.
    """
    src, tgt = aut.source, aut.target
    for gp in src.generator_payloads():
        img = tgt.hom_image(aut.images, gp)
        back = None if img is None else src.hom_image(aut.inv_images, img)
        if back != gp:
            got = "identity" if back is None else src.format_payload(back)
            return False, (f"{src.format_payload(gp)} -> "
                           f"{got} under inverse(map(.))")
    for gp in tgt.generator_payloads():
        img = src.hom_image(aut.inv_images, gp)
        back = None if img is None else tgt.hom_image(aut.images, img)
        if back != gp:
            got = "identity" if back is None else tgt.format_payload(back)
            return False, (f"{tgt.format_payload(gp)} -> "
                           f"{got} under map(inverse(.))")
    if src.is_finite:
        if not tgt.is_finite or len(src.elements()) != len(tgt.elements()):
            return False, "finite source mapped to incompatible target"
        seen = set()
        for p in src.elements():
            img = tgt.hom_image(aut.images, p)
            if img is None or img in seen:
                witness = src.format_payload(p)
                return False, f"not injective at {witness}"
            seen.add(img)
    return True, None
