"""Shared fixtures: the two desk instances built programmatically.

Instance A ("cyclic5"): Z/5 * F(b1, b2) with phi: b1 -> b2 a, b2 -> b1 b2,
a fixed.  Instance B ("f2factor"): F(a1, a2) * F(b1, b2) with the same free
images and a1 in place of a.  The CLI-facing tests parse the bundled
instance files instead and cross-check against these.
"""

import pytest

from fpaut.factors import CyclicFactor, FactorAutomorphism, FreeFactor
from fpaut.words import FreeProduct
from fpaut.autos import FactorAction, FpAutomorphism
from fpaut.words import EMPTY_WORD


@pytest.fixture(scope="session")
def GA():
    return FreeProduct([CyclicFactor(1, "G1", 5, "a")], ["b1", "b2"])


@pytest.fixture(scope="session")
def GB():
    return FreeProduct([FreeFactor(1, "G1", 2, ["a1", "a2"])], ["b1", "b2"])


def _twist_only(G, twist, inv_twist, name):
    w = G.parse_word
    free = (w("b1"), w("b2"))
    actions = {1: FactorAction(1, EMPTY_WORD, twist)}
    inv_actions = {1: FactorAction(1, EMPTY_WORD, inv_twist)}
    return FpAutomorphism(G, free, actions, inverse_data=(free, inv_actions),
                          name=name)


@pytest.fixture(scope="session")
def phiA(GA):
    w = GA.parse_word
    f1 = GA.factors[0]
    ident = FactorAutomorphism.identity(f1)
    free = (w("b2 a@1"), w("b1 b2"))
    actions = {1: FactorAction(1, EMPTY_WORD, ident)}
    inv_free = (w("b2 a@1 B1"), w("b1 a^4@1"))
    inv_actions = {1: FactorAction(1, EMPTY_WORD, ident)}
    return FpAutomorphism(GA, free, actions,
                          inverse_data=(inv_free, inv_actions), name="phiA")


@pytest.fixture(scope="session")
def psi_sq(GA):
    """a -> a^2 on the cyclic factor, free generators fixed."""
    f1 = GA.factors[0]
    twist = FactorAutomorphism(f1, f1, (2,), (3,), name="sq")
    return _twist_only(GA, twist, twist.inverse(), "psi2")


@pytest.fixture(scope="session")
def phiB(GB):
    w = GB.parse_word
    f1 = GB.factors[0]
    ident = FactorAutomorphism.identity(f1)
    free = (w("b2 a1@1"), w("b1 b2"))
    actions = {1: FactorAction(1, EMPTY_WORD, ident)}
    inv_free = (w("b2 a1@1 B1"), w("b1 a1^-1@1"))
    inv_actions = {1: FactorAction(1, EMPTY_WORD, ident)}
    return FpAutomorphism(GB, free, actions,
                          inverse_data=(inv_free, inv_actions), name="phiB")


@pytest.fixture(scope="session")
def psiB(GB):
    """a1 -> a1, a2 -> a2 a1: fixes every letter of the instance-B ray."""
    f1 = GB.factors[0]
    twist = FactorAutomorphism(f1, f1, (((1, 1),), ((2, 1), (1, 1))),
                               (((1, 1),), ((2, 1), (1, -1))), name="shear")
    return _twist_only(GB, twist, twist.inverse(), "psiB")


@pytest.fixture(scope="session")
def psiB_swap(GB):
    f1 = GB.factors[0]
    swap = FactorAutomorphism(f1, f1, (((2, 1),), ((1, 1),)),
                              (((2, 1),), ((1, 1),)), name="swap")
    return _twist_only(GB, swap, swap.inverse(), "psiswap")


def oracle_ray_prefix(phi, seed_word, m, n):
    """Independent ray oracle: iterate phi^m on the seed word, check that
    successive images are nested, and return the first n syllables."""
    g = phi.power(m)
    w = seed_word
    for _ in range(4096):
        nxt = g.apply(w)
        assert w.is_prefix_of(nxt), "oracle: iterates are not nested"
        if len(nxt) == len(w):
            raise AssertionError("oracle: iteration stopped growing")
        w = nxt
        if len(w) >= n:
            from fpaut.words import Word
            return Word(w.syllables[:n])
    raise AssertionError("oracle: did not reach requested depth")
