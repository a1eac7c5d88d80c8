"""Noncommutative quaternion monomials (words) in |q_i|^2-factored normal form.

A word over variables q_1..q_n and their conjugates is stored as

    w = prod_i |q_i|^(2*alpha_i) * tail

where the tail is a reduced letter sequence: no two adjacent letters multiply
to a modulus factor.  Letters are signed integers, +i for q_i and -i for its
conjugate.  The moduli |q_i|^2 are real-valued, so they commute with
everything and can always be pulled to the front; the normal form is unique
(reduction order does not matter) and evaluation-preserving.

The canonical total order on words — ascending degree, then lexicographic on
(alpha, tail) with q_1 < conj(q_1) < q_2 < conj(q_2) < ... — fixes every
downstream matrix and constraint ordering.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .hquat import ONE, Quaternion


@dataclass(frozen=True)
class Word:
    """A monomial in normal form: modulus exponents plus a reduced tail."""

    n: int
    alpha: tuple
    tail: tuple

    @staticmethod
    def empty(n: int) -> "Word":
        return Word(n, (0,) * n, ())

    @property
    def degree(self) -> int:
        return 2 * sum(self.alpha) + len(self.tail)

    def sort_key(self):
        return (
            self.degree,
            self.alpha,
            tuple((abs(letter), letter < 0) for letter in self.tail),
        )

    def __lt__(self, other: "Word") -> bool:
        return self.sort_key() < other.sort_key()

    def variables(self) -> frozenset:
        """Indices of the variables this word touches (1-based)."""
        from_alpha = {i + 1 for i, a in enumerate(self.alpha) if a > 0}
        from_tail = {abs(letter) for letter in self.tail}
        return frozenset(from_alpha | from_tail)

    def __repr__(self) -> str:  # compact, e.g. |q1|^2.q1.~q2
        factors = [f"|q{i + 1}|^{2 * a}" for i, a in enumerate(self.alpha) if a > 0]
        factors += [(f"q{letter}" if letter > 0 else f"~q{-letter}") for letter in self.tail]
        return ".".join(factors) if factors else "1"


def normalize(seq: Sequence[int], n: int) -> Word:
    """Normal form of a raw letter sequence.

    Adjacent conjugate pairs (q_i, ~q_i) or (~q_i, q_i) are extracted into the
    modulus exponent vector until the tail is reduced; a stack pass implements
    every reduction order at once (the rewriting is confluent).
    """
    alpha = [0] * n
    stack: list = []
    for letter in seq:
        v = abs(letter)
        if not (1 <= v <= n):
            raise ValueError(f"letter {letter} references a variable outside 1..{n}")
        if stack and stack[-1] == -letter:
            stack.pop()
            alpha[v - 1] += 1
        else:
            stack.append(letter)
    return Word(n, tuple(alpha), tuple(stack))


def word_mul(a: Word, b: Word) -> Word:
    """Product of two words: moduli add, tails concatenate and reduce."""
    if a.n != b.n:
        raise ValueError(f"ambient dimension mismatch: {a.n} vs {b.n}")
    merged = normalize(list(a.tail) + list(b.tail), a.n)
    alpha = tuple(x + y + z for x, y, z in zip(a.alpha, b.alpha, merged.alpha))
    return Word(a.n, alpha, merged.tail)


def involution(w: Word) -> Word:
    """Reverse the tail and conjugate each letter; moduli are untouched."""
    return Word(w.n, w.alpha, tuple(-letter for letter in reversed(w.tail)))


def is_self_adjoint(w: Word) -> bool:
    return w.tail == tuple(-letter for letter in reversed(w.tail))


def canonical_rep(w: Word):
    """The representative of the involution pair {w, w*}: the smaller word.

    Returns (rep, was_conjugated); both members of a pair map to the same rep.
    """
    wstar = involution(w)
    if wstar.sort_key() < w.sort_key():
        return wstar, True
    return w, False


def basis(
    n: int,
    d: int,
    kind: str = "vars_only",
    support: Optional[Iterable[int]] = None,
) -> list:
    """All normalized words of degree <= d in the canonical order.

    kind "vars_only" uses unconjugated letters only (the [q]_d monomial
    vector); "mixed" uses both q_i and conj(q_i) (the [q, conj q]_d vector),
    with normalization merging sequences that differ by modulus extraction.
    support restricts the letter alphabet to a subset of variables, as the
    clique-local bases of the sparse relaxation require.
    """
    if d < 0:
        raise ValueError("degree bound must be nonnegative")
    if kind not in ("vars_only", "mixed"):
        raise ValueError(f"unknown basis kind {kind!r}")
    vars_in = sorted(set(support)) if support is not None else list(range(1, n + 1))
    if any(not (1 <= v <= n) for v in vars_in):
        raise ValueError("support references variables outside 1..n")
    if kind == "vars_only":
        letters = [v for v in vars_in]
    else:
        letters = [s * v for v in vars_in for s in (1, -1)]
    seen = set()
    for length in range(0, d + 1):
        for seq in itertools.product(letters, repeat=length):
            seen.add(normalize(seq, n))
    return sorted(seen, key=lambda w: w.sort_key())


def eval_word(w: Word, point: Sequence[Quaternion]) -> Quaternion:
    """Substitute quaternion values: modulus powers times the tail product."""
    if len(point) != w.n:
        raise ValueError(f"point has {len(point)} entries, word expects {w.n}")
    scale = 1.0
    for idx, a in enumerate(w.alpha):
        if a:
            scale *= point[idx].modulus_sq() ** a
    acc = ONE
    for letter in w.tail:
        q = point[abs(letter) - 1]
        acc = acc * (q.conj() if letter < 0 else q)
    return acc * scale
