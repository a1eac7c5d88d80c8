"""QSOS relaxation builders: dense, sparse, strengthened, and the real baseline.

A quaternion polynomial optimization problem

    minimize f(q)  subject to  g_i(q) >= 0,  h_j(q) = 0

is relaxed at order d by the certificate ansatz

    f - lambda = w_d* G0 w_d + sum_i g_i (w_{d-d_i}* G_i w_{d-d_i})
                             + sum_j h_j (w_{d-e_j}* H_j w_{d-e_j}),

with G0, G_i Hermitian PSD and H_j Hermitian free (split H_j+ - H_j-), all
over word vectors w_r.  Expanding every sandwich into reduced words and
matching coefficients per canonical representative u turns the ansatz into
linear constraints on the block matrices; maximizing lambda = lam+ - lam-
gives the relaxation value.  The matching data is kept quaternion-valued
(one quaternion equation per representative) in a QSDP; the realize module
turns it into a real SDP.

Multiplier coefficients must be real: real scalars are central in the
quaternions, which is what makes the sandwich expansion a legitimate
left-coefficient computation.  Both validity cases (all-real data, or
constraints in the squared moduli only) satisfy this; anything else still
builds if its constraints have real coefficients, but only after an explicit
warning that the lower-bound guarantee may not apply.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .hquat import QMatrix, Quaternion
from .qpoly import SymPoly, from_gram, is_central, is_real_coeff
from .sdp import RealSDP
from .words import (
    Word,
    basis,
    canonical_rep,
    involution,
    is_self_adjoint,
    word_mul,
)

_COEFF_TOL = 1e-12


@dataclass(frozen=True)
class RelaxOptions:
    """Knobs for the relaxation builders.

    d is the relaxation order (must be at least the degree floor d_min);
    basis_kind picks the word vector ([q]_d vs [q, conj q]_d); case_override
    silences the warning emitted when neither validity case applies.
    """

    d: int
    basis_kind: str = "vars_only"
    sparse: bool = False
    strengthen: bool = False
    real_gram: bool = False
    chordal: str = "greedy_min_degree"
    case_override: bool = False


@dataclass
class QPOP:
    """A quaternion polynomial problem: objective, inequalities, equalities.

    The objective is a SymPoly or a Gram pair (word list, Hermitian QMatrix);
    case_tag, when given, is checked against the coefficient contents.
    """

    n: int
    objective: object
    ineqs: list = field(default_factory=list)
    eqs: list = field(default_factory=list)
    case_tag: str | None = None


@dataclass(frozen=True)
class QBlock:
    """One PSD block of the quaternion SDP.

    words is None for the scalar lambda blocks; mult holds the raw
    (real coefficient, word) multiplier terms sandwiching this block
    (the unit polynomial for Gram blocks, +/-h_j for the Hermitian split).
    real_only marks blocks whose imaginary parts are pinned to zero in the
    realization (the real-Gram restriction).
    """

    role: str
    words: tuple | None
    mult: tuple
    src: int | None = None
    real_only: bool = False

    @property
    def dim(self) -> int:
        return 1 if self.words is None else len(self.words)


@dataclass(frozen=True)
class QConstraint:
    """Coefficient-matching equation for one canonical representative.

    entries are (block, row, col, a) with functional sum conj(a)*X[row,col];
    rhs is the objective's canonical coefficient at `word` (real for
    self-adjoint words).
    """

    word: Word
    entries: tuple
    rhs: Quaternion


@dataclass
class QSDP:
    """Standard-form quaternion SDP: max <C,X> s.t. A_u(X) = b_u, X block-PSD."""

    n: int
    d: int
    basis_kind: str
    blocks: tuple
    constraints: tuple
    c_entries: tuple
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def block_dims(self) -> list:
        return [b.dim for b in self.blocks]

    def rhs_vector(self) -> list:
        return [c.rhs for c in self.constraints]


def objective_poly(p: QPOP) -> SymPoly:
    """The objective as a SymPoly, expanding a Gram pair if necessary."""
    if isinstance(p.objective, SymPoly):
        return p.objective
    wvec, q = p.objective
    return from_gram(list(wvec), q)


def degree_floor(p: QPOP) -> int:
    """d_min = max(ceil(deg f / 2), d_1..d_t, e_1..e_s)."""
    f = objective_poly(p)
    floor = (f.degree + 1) // 2
    for g in list(p.ineqs) + list(p.eqs):
        floor = max(floor, (g.degree + 1) // 2)
    return max(floor, 0)


def compute_case(p: QPOP) -> str:
    """Which validity case the coefficient data falls in."""
    f = objective_poly(p)
    cons = list(p.ineqs) + list(p.eqs)
    if is_real_coeff(f) and all(is_real_coeff(g) for g in cons):
        return "real_coeff"
    if all(is_central(g) for g in cons):
        return "modulus_only"
    return "other"


def _check_case(p: QPOP, opts: RelaxOptions) -> None:
    computed = compute_case(p)
    if p.case_tag is not None and p.case_tag != computed:
        warnings.warn(
            f"declared case_tag {p.case_tag!r} but the coefficients indicate {computed!r}"
        )
    if computed == "other" and not opts.case_override:
        warnings.warn(
            "neither validity case applies (coefficients are not all real and the "
            "constraints are not all in the squared moduli); the relaxation is built "
            "but its lower-bound guarantee may not hold"
        )


def _real_raws(g: SymPoly, what: str) -> tuple:
    """Multiplier raw terms as (float, Word); rejects quaternion coefficients."""
    out = []
    for c, t in g.raw_terms():
        if abs(c.i) + abs(c.j) + abs(c.k) > _COEFF_TOL:
            raise ValueError(f"{what} must have real coefficients to act as a multiplier")
        out.append((c.r, t))
    return tuple(out)


def _structure_blocks(p: QPOP, opts: RelaxOptions, support=None) -> list:
    """The lambda and Gram/Hermitian blocks of the dense relaxation."""
    n, d = p.n, opts.d
    blocks = [
        QBlock("lambda_plus", None, ()),
        QBlock("lambda_minus", None, ()),
        QBlock(
            "gram_G0",
            tuple(basis(n, d, opts.basis_kind, support=support)),
            ((1.0, Word.empty(n)),),
        ),
    ]
    for i, g in enumerate(p.ineqs):
        di = (g.degree + 1) // 2
        blocks.append(
            QBlock(
                "gram_Gi",
                tuple(basis(n, d - di, opts.basis_kind, support=support)),
                _real_raws(g, f"inequality {i + 1}"),
                src=i,
            )
        )
    for j, h in enumerate(p.eqs):
        ej = (h.degree + 1) // 2
        words = tuple(basis(n, d - ej, opts.basis_kind, support=support))
        raws = _real_raws(h, f"equality {j + 1}")
        blocks.append(QBlock("herm_Hj_plus", words, raws, src=j))
        blocks.append(QBlock("herm_Hj_minus", words, tuple((-c, t) for c, t in raws), src=j))
    return blocks


def _match_blocks(n: int, blocks: list) -> dict:
    """Accumulate the per-representative matching matrices over all blocks.

    Returns {rep: {block index: real matrix M}} with functional
    sum_{r,c} M[r,c] * X[r,c]; for self-adjoint representatives M is
    symmetrized, which realizes the one-real-equation collapse (only the
    real part of a Hermitian block is constrained there).
    """
    acc: dict = {}
    sa_cache: dict = {}
    for bi, block in enumerate(blocks):
        if block.words is None:
            continue
        wvec = list(block.words)
        nb = len(wvec)
        stars = [involution(w) for w in wvec]
        for g_t, t in block.mult:
            right = [[word_mul(t, word_mul(wvec[l], stars[k])) for l in range(nb)] for k in range(nb)]
            for k in range(nb):
                for l in range(nb):
                    v = right[k][l]
                    rep, conjed = canonical_rep(v)
                    per_block = acc.setdefault(rep, {})
                    m = per_block.get(bi)
                    if m is None:
                        m = per_block[bi] = np.zeros((nb, nb))
                    if rep not in sa_cache:
                        sa_cache[rep] = is_self_adjoint(rep)
                    if sa_cache[rep]:
                        m[k, l] += g_t
                    elif not conjed:
                        m[k, l] += 0.5 * g_t
                    else:
                        m[l, k] += 0.5 * g_t
    for rep, per_block in acc.items():
        if sa_cache[rep]:
            for bi, m in per_block.items():
                per_block[bi] = 0.5 * (m + m.T)
    return acc


def _assemble(p: QPOP, opts: RelaxOptions, blocks: list, meta: dict) -> QSDP:
    f = objective_poly(p)
    acc = _match_blocks(p.n, blocks)
    index = sorted(set(acc) | set(f.terms), key=Word.sort_key)
    one = Word.empty(p.n)
    constraints = []
    for u in index:
        entries = []
        if u == one:
            entries.append((0, 0, 0, Quaternion(1.0)))
            entries.append((1, 0, 0, Quaternion(-1.0)))
        for bi in sorted(acc.get(u, {})):
            m = acc[u][bi]
            for r, c in zip(*np.nonzero(m)):
                entries.append((bi, int(r), int(c), Quaternion(float(m[r, c]))))
        constraints.append(QConstraint(u, tuple(entries), f.terms.get(u, Quaternion(0.0))))
    c_entries = ((0, 0, 0, Quaternion(1.0)), (1, 0, 0, Quaternion(-1.0)))
    return QSDP(
        n=p.n,
        d=opts.d,
        basis_kind=opts.basis_kind,
        blocks=tuple(blocks),
        constraints=tuple(constraints),
        c_entries=c_entries,
        meta=meta,
    )


def _check_order(p: QPOP, opts: RelaxOptions) -> None:
    floor = degree_floor(p)
    if opts.d < floor:
        raise ValueError(f"relaxation order {opts.d} is below the degree floor d_min = {floor}")


def build_qsos(p: QPOP, opts: RelaxOptions) -> QSDP:
    """The dense QSOS relaxation of order opts.d as a quaternion SDP."""
    _check_order(p, opts)
    _check_case(p, opts)
    blocks = _structure_blocks(p, opts)
    return _assemble(p, opts, blocks, meta={"variant": "dense"})


# ---------------------------------------------------------------------------
# moment side


def _coerce_quat(v) -> Quaternion:
    return v if isinstance(v, Quaternion) else Quaternion(float(v))


def _moment_lookup(y: dict, w: Word) -> Quaternion:
    rep, conjed = canonical_rep(w)
    if rep not in y:
        raise ValueError(f"missing moment index {rep!r}")
    val = _coerce_quat(y[rep])
    return val.conj() if conjed else val


def _localizing(y: dict, g: SymPoly, wvec: list) -> QMatrix:
    nb = len(wvec)
    stars = [involution(w) for w in wvec]
    out = QMatrix.zeros(nb, nb)
    raws = g.raw_terms()
    for k in range(nb):
        for l in range(nb):
            mid = word_mul(wvec[l], stars[k])
            total = Quaternion(0.0)
            for c, t in raws:
                left = _moment_lookup(y, word_mul(t, mid))
                rightw = word_mul(mid, involution(t))
                right = _moment_lookup(y, rightw)
                total = total + (left + right) * (0.5 * c.r)
            out.set_entry(k, l, total)
    return out


def build_moment_matrices(y: dict, p: QPOP, opts: RelaxOptions):
    """Moment matrix, localizing matrices, and equality blocks for moments y.

    y maps canonical representative words to quaternion values (y_{u*} is
    read as the conjugate); entries are [M_d]_{k,l} = y_{w_l w_k*} and
    [M(g y)]_{k,l} = 1/2 sum_t g_t (y_{t w_l w_k*} + y_{w_l w_k* t*}).
    """
    n, d = p.n, opts.d
    wvec = basis(n, d, opts.basis_kind)
    md = QMatrix.zeros(len(wvec), len(wvec))
    stars = [involution(w) for w in wvec]
    for k in range(len(wvec)):
        for l in range(len(wvec)):
            md.set_entry(k, l, _moment_lookup(y, word_mul(wvec[l], stars[k])))
    localizing = []
    for g in p.ineqs:
        di = (g.degree + 1) // 2
        localizing.append(_localizing(y, g, basis(n, d - di, opts.basis_kind)))
    equality_blocks = []
    for h in p.eqs:
        ej = (h.degree + 1) // 2
        equality_blocks.append(_localizing(y, h, basis(n, d - ej, opts.basis_kind)))
    return md, localizing, equality_blocks


# ---------------------------------------------------------------------------
# correlative sparsity


def _poly_list(p: QPOP) -> list:
    return list(p.ineqs) + list(p.eqs)


def csp_graph(p: QPOP) -> dict:
    """Variable co-occurrence graph: objective per term, constraints whole."""
    adj = {v: set() for v in range(1, p.n + 1)}

    def link(vs):
        vs = sorted(vs)
        for a in range(len(vs)):
            for b in range(a + 1, len(vs)):
                adj[vs[a]].add(vs[b])
                adj[vs[b]].add(vs[a])

    f = objective_poly(p)
    for u in f.terms:
        link(u.variables())
    for g in _poly_list(p):
        vs = set()
        for u in g.terms:
            vs |= u.variables()
        link(vs)
    return adj


def chordal_cliques(g: dict) -> list:
    """Maximal cliques of a greedy min-degree chordal extension.

    Vertices are eliminated by current degree (lowest index breaking ties),
    neighborhoods are filled in, and the candidate cliques {v} + N(v) are
    filtered down to the maximal ones, kept in elimination order.
    """
    adj = {v: set(nbrs) for v, nbrs in g.items()}
    remaining = set(adj)
    candidates = []
    while remaining:
        v = min(remaining, key=lambda x: (len(adj[x] & remaining), x))
        nbrs = adj[v] & remaining
        nbrs.discard(v)
        candidates.append(sorted({v} | nbrs))
        for a in nbrs:
            adj[a] |= nbrs - {a}
        remaining.discard(v)
    out = []
    kept = []
    for c in candidates:
        cs = set(c)
        if any(cs <= k for k in kept):
            continue
        out.append(c)
        kept.append(cs)
    return out


def assign_constraints(cliques: list, p: QPOP):
    """Partition constraint indices over cliques: first covering clique wins."""
    clique_sets = [set(c) for c in cliques]

    def place(g, what, idx):
        vs = set()
        for u in g.terms:
            vs |= u.variables()
        for j, cs in enumerate(clique_sets):
            if vs <= cs:
                return j
        raise ValueError(f"{what} {idx + 1} is not covered by any clique")

    ineq_assign = [[] for _ in cliques]
    eq_assign = [[] for _ in cliques]
    for i, g in enumerate(p.ineqs):
        ineq_assign[place(g, "inequality", i)].append(i)
    for j, h in enumerate(p.eqs):
        eq_assign[place(h, "equality", j)].append(j)
    return ineq_assign, eq_assign


def build_sparse_qsos(p: QPOP, opts: RelaxOptions) -> QSDP:
    """Clique-decomposed QSOS relaxation over the chordal-extension cliques."""
    _check_order(p, opts)
    _check_case(p, opts)
    if opts.chordal != "greedy_min_degree":
        raise ValueError(f"unknown chordal extension strategy {opts.chordal!r}")
    n, d = p.n, opts.d
    cliques = chordal_cliques(csp_graph(p))
    ineq_assign, eq_assign = assign_constraints(cliques, p)
    blocks = [QBlock("lambda_plus", None, ()), QBlock("lambda_minus", None, ())]
    for c in cliques:
        blocks.append(
            QBlock("gram_G0", tuple(basis(n, d, opts.basis_kind, support=c)), ((1.0, Word.empty(n)),))
        )
    for i, g in enumerate(p.ineqs):
        cj = next(j for j, members in enumerate(ineq_assign) if i in members)
        di = (g.degree + 1) // 2
        blocks.append(
            QBlock(
                "gram_Gi",
                tuple(basis(n, d - di, opts.basis_kind, support=cliques[cj])),
                _real_raws(g, f"inequality {i + 1}"),
                src=i,
            )
        )
    for j, h in enumerate(p.eqs):
        cj = next(jj for jj, members in enumerate(eq_assign) if j in members)
        ej = (h.degree + 1) // 2
        words = tuple(basis(n, d - ej, opts.basis_kind, support=cliques[cj]))
        raws = _real_raws(h, f"equality {j + 1}")
        blocks.append(QBlock("herm_Hj_plus", words, raws, src=j))
        blocks.append(QBlock("herm_Hj_minus", words, tuple((-c, t) for c, t in raws), src=j))
    meta = {"variant": "sparse", "cliques": [list(c) for c in cliques]}
    return _assemble(p, opts, blocks, meta)


# ---------------------------------------------------------------------------
# strengthened variant


def build_strengthened(p: QPOP, opts: RelaxOptions) -> QSDP:
    """QSOS plus n extra Gram blocks over conjugate-prefixed word vectors.

    The objective must be in Gram form over [q]_k; each added block is
    indexed by conj(q_i) * basis(n, d, vars_only), whose sandwich products
    are plain words again, so the standard matching machinery applies.
    """
    if isinstance(p.objective, SymPoly):
        raise ValueError("the strengthened variant needs a Gram-form objective")
    _check_order(p, opts)
    _check_case(p, opts)
    n = p.n
    blocks = _structure_blocks(p, opts)
    plain = basis(n, opts.d, "vars_only")
    for i in range(1, n + 1):
        qbar = Word(n, (0,) * n, (-i,))
        words = tuple(word_mul(qbar, w) for w in plain)
        blocks.append(QBlock("strengthen_G0i", words, ((1.0, Word.empty(n)),), src=i - 1))
    return _assemble(p, opts, blocks, meta={"variant": "strengthened"})


# ---------------------------------------------------------------------------
# first-order real baseline for QCQPs


def gram_of_quadratic(p: SymPoly, n: int) -> QMatrix:
    """Hermitian M with p = [q]_1* M [q]_1 over [q]_1 = (1, q_1..q_n).

    Inverts the Gram expansion exactly on quadratics; any support outside
    {1, q_i, |q_i|^2, q_i conj(q_j)} means p is not a QCQP datum.
    """
    m = QMatrix.zeros(n + 1, n + 1)
    one = Word.empty(n)
    for u, c in p.terms.items():
        if u == one:
            m.set_entry(0, 0, Quaternion(c.r))
            continue
        if u.degree > 2 or sum(u.alpha) > 1:
            raise ValueError(f"term {u!r} is not quadratic in [q]_1")
        if len(u.tail) == 0:  # |q_i|^2
            i = next(t for t, a in enumerate(u.alpha) if a == 1) + 1
            m.set_entry(i, i, Quaternion(c.r))
        elif len(u.tail) == 1:
            letter = u.tail[0]
            if letter < 0:
                raise ValueError(f"unexpected canonical representative {u!r}")
            m.set_entry(0, letter, c)
            m.set_entry(letter, 0, c.conj())
        else:
            a, b = u.tail
            if not (a > 0 and b < 0 and abs(a) < abs(b)):
                raise ValueError(f"term {u!r} is not quadratic in [q]_1")
            i, j = a, -b
            m.set_entry(j, i, c)
            m.set_entry(i, j, c.conj())
    return m


def _gram_data(p: QPOP):
    f = objective_poly(p)
    q = gram_of_quadratic(f, p.n)
    ds = [gram_of_quadratic(g, p.n) for g in p.ineqs]
    fs = [gram_of_quadratic(h, p.n) for h in p.eqs]
    return q, ds, fs


def _is_real_matrix(m: QMatrix) -> bool:
    return max(float(np.max(np.abs(m.part(c)))) if m.rows else 0.0 for c in (1, 2, 3)) <= _COEFF_TOL


def _is_real_diagonal(m: QMatrix) -> bool:
    if not _is_real_matrix(m):
        return False
    r = m.part(0)
    return float(np.max(np.abs(r - np.diag(np.diag(r))))) <= _COEFF_TOL


def build_rsos1(p: QPOP) -> RealSDP:
    """First-order SOS relaxation of the real embedding of a QCQP.

    max lam s.t. Lam(Q) - lam Lam(E00) - sum a_i Lam(D_i) - sum b_j Lam(F_j)
    is PSD with a_i >= 0, b_j free; encoded with a diagonal variable block
    (lam+, lam-, a_i, b_j+, b_j-) and one PSD slack block, matched entrywise
    against Lam(Q) over the upper triangle.
    """
    from .hquat import lambda_embed

    q, ds, fs = _gram_data(p)
    if not (_is_real_matrix(q) and all(_is_real_matrix(m) for m in ds + fs)):
        if not all(_is_real_diagonal(m) for m in ds + fs):
            raise ValueError(
                "QCQP case conditions violated: either all matrices are real, or the "
                "constraint matrices are real diagonal"
            )
    n, t, s = p.n, len(ds), len(fs)
    dim = 4 * (n + 1)
    e00 = QMatrix.zeros(n + 1, n + 1)
    e00.set_entry(0, 0, Quaternion(1.0))
    lam_q = lambda_embed(q)
    lam_e = lambda_embed(e00)
    lam_d = [lambda_embed(m) for m in ds]
    lam_f = [lambda_embed(m) for m in fs]
    diag_size = 2 + t + 2 * s
    block_struct = [-diag_size, dim]
    b = []
    a_entries = []
    for r in range(dim):
        for c in range(r, dim):
            entries = []
            if lam_e[r, c] != 0.0:
                entries.append((0, 0, 0, float(lam_e[r, c])))
                entries.append((0, 1, 1, -float(lam_e[r, c])))
            for i, m in enumerate(lam_d):
                if m[r, c] != 0.0:
                    entries.append((0, 2 + i, 2 + i, float(m[r, c])))
            for j, m in enumerate(lam_f):
                if m[r, c] != 0.0:
                    entries.append((0, 2 + t + 2 * j, 2 + t + 2 * j, float(m[r, c])))
                    entries.append((0, 2 + t + 2 * j + 1, 2 + t + 2 * j + 1, -float(m[r, c])))
            entries.append((1, r, c, 1.0 if r == c else 0.5))
            a_entries.append(entries)
            b.append(float(lam_q[r, c]))
    c_entries = [(0, 0, 0, 1.0), (0, 1, 1, -1.0)]
    return RealSDP(block_struct, np.array(b), c_entries, a_entries)


# ---------------------------------------------------------------------------
# real-Gram restriction


def real_gram_restrict(q: QSDP) -> QSDP:
    """Mark every matrix block real-only (valid when all data is real)."""

    def entry_real(quat: Quaternion) -> bool:
        return abs(quat.i) + abs(quat.j) + abs(quat.k) <= _COEFF_TOL

    for con in q.constraints:
        if not entry_real(con.rhs) or not all(entry_real(a) for _, _, _, a in con.entries):
            raise ValueError("real-Gram restriction requires all-real coefficient data")
    blocks = tuple(
        QBlock(b.role, b.words, b.mult, b.src, real_only=b.words is not None) for b in q.blocks
    )
    meta = dict(q.meta)
    meta["real_gram"] = True
    return QSDP(q.n, q.d, q.basis_kind, blocks, q.constraints, q.c_entries, meta)
