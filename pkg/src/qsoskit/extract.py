"""Moment-matrix assembly, rank-one extraction, and candidate certification.

The realized relaxation carries one equality row per (representative word,
quaternion component) pair; the solver's dual vector therefore encodes a
linear functional on words.  Recombining the four component rows of a
representative u gives a quaternion y_u; the moment value is y_u itself when
u is self-adjoint and y_u / 2 otherwise (the canonical coefficient convention
stores half of each conjugate pair on the representative), and moments extend
to conjugated words through y_{u*} = conj(y_u).  The moment matrix over a
word vector (w_k) has entries M[k, l] = y_{w_l w_k*}, so a feasible point
with monomial vector v_k = w_k(point) yields the rank-one matrix
M = v v*.  Rank-one extraction reverses that: the top eigenvector of a
numerically rank-one M, gauge-fixed by a right unit quaternion so its leading
coordinate is real and nonnegative (when the basis opens with the empty word,
whose moment is pinned to 1, that coordinate lands at 1), is the monomial
vector of a candidate minimizer, and `certify` checks the candidate against
the bound by direct evaluation.

Problems whose value is unchanged by a global right unit factor q_i -> q_i s
(see `is_gauge_invariant`) determine minimizers only up to that factor, so at
the optimum the degree-one moments y_{q_i} are undetermined: the moment
matrix over a basis containing the empty word has a face of optimal
completions and is rank one only by accident.  For such problems, assemble
the moment matrix over the degree-one words alone and extract from that
principal submatrix; the gauge the extraction fixes is exactly the symmetry.
"""

import math
from dataclasses import dataclass

from .hquat import QMatrix, Quaternion, eig_hermitian, fro_norm, hermitian_part
from .relax import objective_poly
from .words import Word, canonical_rep, involution, is_self_adjoint, normalize, word_mul

_ONE = Quaternion(1.0)


@dataclass(frozen=True)
class Certificate:
    """Outcome of checking a candidate minimizer against a lower bound.

    gap = objective_at_candidate - bound; constraint_residuals hold the
    inequality violations max(0, -g) and equality magnitudes |h|; rank_report
    is (numerical rank, eigenvalue ratios) of the moment matrix the candidate
    was read from, when one was available.
    """

    bound: float
    candidate: tuple | None
    objective_at_candidate: float
    constraint_residuals: tuple
    gap: float
    rank_report: tuple
    tight: bool


def _outer(vals) -> QMatrix:
    m = QMatrix.zeros(len(vals), len(vals))
    for r, vr in enumerate(vals):
        for c, vc in enumerate(vals):
            m.set_entry(r, c, vr * vc.conj())
    return m


def assemble_moment(q, sol, rmap, basis=None, tol: float = 1e-8) -> QMatrix:
    """The quaternion moment matrix encoded by a solved realization's dual.

    `q` is the quaternion SDP the realization came from, `sol` the solution of
    the realized problem, and `rmap` its RealizationMap; `basis` (default: the
    word vector of the first Gram block) indexes the returned matrix via
    M[k, l] = y_{w_l w_k*}.  Dual components of dropped rows are zero.  The
    result is checked to be Hermitian with empty-word moment 1, both within
    10*tol; a reduced basis yields the corresponding principal submatrix.
    """
    if sol.status not in ("optimal", "near_optimal"):
        raise ValueError(f"cannot assemble moments from a {sol.status!r} solution")
    if sol.y is None or len(sol.y) != len(rmap.row_kinds):
        raise ValueError("dual vector does not match the realization map")
    parts: dict = {}
    for val, kind in zip(sol.y, rmap.row_kinds):
        if kind[0] == "con":
            _, k, part = kind
            parts.setdefault(k, [0.0, 0.0, 0.0, 0.0])[part] = float(val)
    moments: dict = {}
    for k, con in enumerate(q.constraints):
        yu = Quaternion(*parts.get(k, (0.0, 0.0, 0.0, 0.0)))
        if is_self_adjoint(con.word):
            moments[con.word] = yu
        else:
            yu = yu * 0.5
            moments[con.word] = yu
            moments[involution(con.word)] = yu.conj()
    y1 = moments.get(Word.empty(q.n))
    if y1 is None:
        raise ValueError("the relaxation carries no empty-word constraint to normalize against")
    if abs(y1 - _ONE) > 10 * tol:
        raise ValueError(f"empty-word moment {y1} is not 1 within 10*tol")
    if basis is None:
        basis = next(b.words for b in q.blocks if b.words is not None)
    basis = list(basis)
    stars = [involution(w) for w in basis]
    m = QMatrix.zeros(len(basis), len(basis))
    for k in range(len(basis)):
        for l in range(len(basis)):
            rep, conjed = canonical_rep(word_mul(basis[l], stars[k]))
            val = moments.get(rep)
            if val is None:
                raise ValueError(
                    f"moment for word {word_mul(basis[l], stars[k])!r} is not determined by the relaxation"
                )
            m.set_entry(k, l, val.conj() if conjed else val)
    if fro_norm(m - m.conj_t()) > 10 * tol * (1 + fro_norm(m)):
        raise ValueError("assembled moment matrix is not Hermitian within 10*tol")
    return m


def rank_one_extract(m: QMatrix, tol: float = 1e-6):
    """The monomial vector of a numerically rank-one moment matrix, or None.

    Decides rank-one-ness by the eigenvalue ratio lambda_2 / lambda_max <= tol
    (None otherwise).  The top eigenvector, rescaled to the top eigenvalue's
    magnitude, is right-multiplied by the unit quaternion conj(v0)/|v0| so its
    leading coordinate becomes real and nonnegative -- a pure gauge choice
    that leaves v v* unchanged, so the reconstruction ||M - v v*|| / ||M||
    (required within 10*tol) holds for any basis, including the degree-one
    sub-basis of a gauge-invariant problem where |v0| differs from 1.  A
    leading coordinate below 1e-6 in magnitude is an extraction failure
    (raised), distinct from a rank failure (None).
    """
    if m.rows != m.cols:
        raise ValueError("moment matrix must be square")
    h = hermitian_part(m)
    evals, vecs = eig_hermitian(h)
    lam_max = float(evals[-1])
    if lam_max <= 0.0:
        return None
    lam2 = max(float(evals[-2]), 0.0) if len(evals) > 1 else 0.0
    if lam2 > tol * lam_max:
        return None
    col = vecs.column(m.rows - 1)
    root = math.sqrt(lam_max)
    v = [col[r, 0] * root for r in range(m.rows)]
    v0 = v[0]
    if abs(v0) < 1e-6:
        raise ValueError(
            "rank-one moment matrix has a vanishing leading entry; no point can be read off"
        )
    gauge = v0.conj() * (1.0 / abs(v0))
    v = tuple(x * gauge for x in v)
    res = fro_norm(h - _outer(v)) / max(fro_norm(h), 1e-300)
    if res > 10 * tol:
        raise ValueError(f"rank-one reconstruction residual {res:.3e} exceeds 10*tol")
    return v


def moment_rank_report(m: QMatrix, tol: float = 1e-6) -> tuple:
    """(numerical rank, descending eigenvalue ratios) of a Hermitian matrix.

    Ratios are clipped at zero and normalized by the top eigenvalue; the rank
    counts ratios above tol.  An (numerically) zero or negative-semidefinite
    matrix reports rank 0.
    """
    evals, _ = eig_hermitian(hermitian_part(m))
    lam_max = float(evals[-1]) if len(evals) else 0.0
    if lam_max <= 0.0:
        return 0, tuple(0.0 for _ in evals)
    ratios = tuple(max(float(ev), 0.0) / lam_max for ev in evals[::-1])
    return sum(1 for r in ratios if r > tol), ratios


def read_point(v, basis, n: int) -> tuple:
    """Candidate coordinates from a monomial vector: v at the degree-one words."""
    lookup = {w: idx for idx, w in enumerate(basis)}
    out = []
    for i in range(1, n + 1):
        w = normalize([i], n)
        if w not in lookup:
            raise ValueError(f"basis lacks the degree-one word for variable {i}")
        out.append(v[lookup[w]])
    return tuple(out)


def certify(p, bound: float, candidate, tol: float = 1e-6, rank_report=()) -> Certificate:
    """Evaluate a candidate against a lower bound by direct substitution.

    Declares the relaxation tight when the gap is at most tol*(1+|bound|) and
    every constraint residual is at most tol.  candidate None produces a
    certificate with nan gap that is never tight.
    """
    if candidate is None:
        nan = float("nan")
        return Certificate(float(bound), None, nan, (), nan, tuple(rank_report), False)
    if len(candidate) != p.n:
        raise ValueError(f"candidate has {len(candidate)} coordinates for {p.n} variables")
    point = list(candidate)
    val = objective_poly(p).eval(point)
    residuals = [max(0.0, -g.eval(point)) for g in p.ineqs]
    residuals += [abs(h.eval(point)) for h in p.eqs]
    gap = float(val) - float(bound)
    tight = gap <= tol * (1 + abs(bound)) and all(r <= tol for r in residuals)
    return Certificate(
        float(bound), tuple(candidate), float(val), tuple(residuals), gap, tuple(rank_report), tight
    )


def gauge_align(candidate, reference) -> tuple:
    """Right-multiply a vector by the unit quaternion best aligning it to a reference.

    Minimizes sum |candidate_i s - reference_i|^2 over unit s: the maximizer of
    Re conj(s) w for w = sum conj(candidate_i) reference_i is s = w / |w|.
    A vanishing overlap w leaves the candidate unchanged.
    """
    if len(candidate) != len(reference):
        raise ValueError("candidate and reference length mismatch")
    w = Quaternion(0.0)
    for qh, t in zip(candidate, reference):
        w = w + qh.conj() * t
    a = abs(w)
    if a < 1e-12:
        return tuple(candidate)
    s = w * (1.0 / a)
    return tuple(qh * s for qh in candidate)


def _term_gauge_invariant(w: Word, c: Quaternion) -> bool:
    tail = w.tail
    if not tail:
        return True
    signs = [1 if letter > 0 else -1 for letter in tail]
    if any(a == b for a, b in zip(signs, signs[1:])):
        return False
    if signs[0] > 0:
        return signs[-1] < 0
    if signs[-1] > 0:
        imag = math.sqrt(c.i * c.i + c.j * c.j + c.k * c.k)
        return imag <= 1e-12 * (1.0 + abs(c))
    return False


def is_gauge_invariant(p) -> bool:
    """Whether the problem's value is unchanged by q_i -> q_i s for unit s.

    Substituting a global right unit factor fixes every |q_i|^2 outright, and
    a tail survives exactly when its signs alternate: each q_a s s-bar q-bar_b
    junction collapses, so a plain-to-conjugate tail (q_a ... q-bar_b) is
    invariant for any coefficient, while a conjugate-to-plain tail turns into
    s-bar (...) s and survives the real-part pairing only when its coefficient
    is real.  Any other tail shape breaks invariance for generic unit s.
    Eigenvalue-style objectives and relative-rotation measurements have this
    symmetry; their minimizers are determined only up to the gauge, which is
    why extraction should use the degree-one principal moment submatrix.
    """
    for poly in (objective_poly(p), *p.ineqs, *p.eqs):
        for w, c in poly.terms.items():
            if not _term_gauge_invariant(w, c):
                return False
    return True
