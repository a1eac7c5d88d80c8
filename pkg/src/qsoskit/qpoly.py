"""Symmetric quaternion polynomials with canonical coefficient storage.

A symmetric polynomial is a real-valued function of quaternion variables of
the form

    f(q) = sum_u Re(c_u * u(q)),

where u ranges over reduced words and c_u are quaternion coefficients.  Since
Re(c u) = Re(conj(c) u*) pointwise, the terms for a word and its involution
carry the same information; we therefore store one coefficient per canonical
representative:

* self-adjoint words (u = u*) take a real coefficient and contribute
  Re(c_u * u(q)) once;
* a non-self-adjoint representative u stores the folded coefficient of the
  pair {u, u*} and contributes 2 Re(c_u * u(q)).

Raw (coefficient, word) pairs in arbitrary orientation are folded onto this
storage by `accumulate_term`:  a self-adjoint word keeps only Re(coeff), a
representative adds coeff/2, and a conjugated word adds conj(coeff)/2 to its
representative.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .hquat import QMatrix, Quaternion, is_hermitian
from .words import (
    Word,
    canonical_rep,
    eval_word,
    involution,
    is_self_adjoint,
    word_mul,
)

_ZERO = Quaternion(0.0)


def accumulate_term(terms: dict, coeff: Quaternion, w: Word) -> None:
    """Fold one raw (coeff, word) pair into a canonical coefficient dict."""
    rep, conjugated = canonical_rep(w)
    if is_self_adjoint(rep):
        add = Quaternion(coeff.r)
    elif conjugated:
        add = coeff.conj() * 0.5
    else:
        add = coeff * 0.5
    if rep in terms:
        terms[rep] = terms[rep] + add
    else:
        terms[rep] = add


def _prune(terms: dict) -> dict:
    return {u: c for u, c in terms.items() if c != _ZERO}


@dataclass
class SymPoly:
    """A symmetric quaternion polynomial in n variables.

    `terms` maps canonical representative words to quaternion coefficients;
    self-adjoint words carry real coefficients.  Instances are treated as
    immutable; operations return new polynomials.
    """

    n: int
    terms: dict = field(default_factory=dict)

    @staticmethod
    def zero(n: int) -> "SymPoly":
        return SymPoly(n, {})

    @staticmethod
    def constant(n: int, value: float) -> "SymPoly":
        if value == 0.0:
            return SymPoly.zero(n)
        return SymPoly(n, {Word.empty(n): Quaternion(float(value))})

    @staticmethod
    def from_raw(n: int, pairs) -> "SymPoly":
        """Build from raw (coefficient, word) pairs in any orientation."""
        terms: dict = {}
        for coeff, w in pairs:
            if w.n != n:
                raise ValueError(f"word over {w.n} variables in a {n}-variable polynomial")
            accumulate_term(terms, coeff, w)
        return SymPoly(n, _prune(terms))

    def raw_terms(self) -> list:
        """Expand back to involution-symmetric raw pairs, sorted for determinism."""
        out = []
        for u in sorted(self.terms, key=Word.sort_key):
            c = self.terms[u]
            out.append((c, u))
            if not is_self_adjoint(u):
                out.append((c.conj(), involution(u)))
        return out

    @property
    def degree(self) -> int:
        return max((u.degree for u in self.terms), default=0)

    def support(self) -> list:
        return sorted(self.terms, key=Word.sort_key)

    def eval(self, point) -> float:
        """Evaluate at a list of n quaternions; the value is real."""
        total = 0.0
        for u, c in self.terms.items():
            v = eval_word(u, point)
            re = c.r * v.r - c.i * v.i - c.j * v.j - c.k * v.k
            total += re if is_self_adjoint(u) else 2.0 * re
        return total

    def add(self, other: "SymPoly") -> "SymPoly":
        if self.n != other.n:
            raise ValueError("cannot add polynomials over different variable counts")
        terms = dict(self.terms)
        for u, c in other.terms.items():
            terms[u] = terms[u] + c if u in terms else c
        return SymPoly(self.n, _prune(terms))

    def scale(self, s: float) -> "SymPoly":
        s = float(s)
        if s == 0.0:
            return SymPoly.zero(self.n)
        return SymPoly(self.n, {u: c * s for u, c in self.terms.items()})

    def __add__(self, other: "SymPoly") -> "SymPoly":
        return self.add(other)

    def __sub__(self, other: "SymPoly") -> "SymPoly":
        return self.add(other.scale(-1.0))

    def __neg__(self) -> "SymPoly":
        return self.scale(-1.0)


def from_gram(wvec, q: QMatrix) -> SymPoly:
    """Expand the Gram sandwich Re(w(x)* Q w(x)) into canonical terms.

    Requires a Hermitian Q whose side matches len(wvec); the result collects
    the raw terms (Q_{kl}, w_l w_k*) over all entries.
    """
    if not wvec:
        raise ValueError("empty word vector")
    n = wvec[0].n
    if any(w.n != n for w in wvec):
        raise ValueError("word vector mixes variable counts")
    if q.rows != q.cols or q.rows != len(wvec):
        raise ValueError(f"Gram matrix is {q.rows}x{q.cols}, expected {len(wvec)}x{len(wvec)}")
    if not is_hermitian(q, 1e-10):
        raise ValueError("Gram matrix is not Hermitian")
    stars = [involution(w) for w in wvec]
    terms: dict = {}
    for k in range(len(wvec)):
        for ell in range(len(wvec)):
            accumulate_term(terms, q[k, ell], word_mul(wvec[ell], stars[k]))
    return SymPoly(n, _prune(terms))


def coe(p: SymPoly, word_basis) -> list:
    """Coefficient vector of p against a list of canonical representatives.

    Raises if p has a term whose representative is missing from the basis.
    """
    index = {u: t for t, u in enumerate(word_basis)}
    out = [_ZERO] * len(word_basis)
    for u, c in p.terms.items():
        if u not in index:
            raise ValueError(f"term {u!r} has no slot in the given basis")
        out[index[u]] = c
    return out


def is_real_coeff(p: SymPoly, tol: float = 1e-12) -> bool:
    """True when every stored coefficient is real within tol."""
    return all(abs(c.i) + abs(c.j) + abs(c.k) <= tol for c in p.terms.values())


def is_central(p: SymPoly) -> bool:
    """True when every term is a product of squared moduli |q_i|^2 only."""
    return all(u.tail == () for u in p.terms)


def real_poly_mul(g: SymPoly, p: SymPoly) -> SymPoly:
    """Left-multiply p by a real-coefficient polynomial g.

    The raw expansion of the product takes pairs (g_t * c_u, t u) over the
    involution-symmetric raw terms of both factors.  Because g's raw
    expansion is conjugate-symmetric with real coefficients, the result
    evaluates to g(point) * p(point) pointwise.
    """
    if g.n != p.n:
        raise ValueError("variable counts differ")
    if not is_real_coeff(g):
        raise ValueError("multiplier must have real coefficients")
    terms: dict = {}
    for gc, t in g.raw_terms():
        for pc, u in p.raw_terms():
            accumulate_term(terms, pc * gc.r, word_mul(t, u))
    return SymPoly(p.n, _prune(terms))
