"""Relaxation builder tests.

The central oracle: a built QSDP's constraint functionals, applied to an
arbitrary assignment of Hermitian blocks, must read off exactly the canonical
coefficients of

    sigma(X) = (lam+ - lam-) + sum_blocks  mult_b * (w_b* X_b w_b),

where the right side is expanded independently through from_gram and
real_poly_mul.  The right-hand sides must be the canonical coefficients of the
objective.  This pins the whole coefficient-matching construction against the
polynomial algebra without sharing any code path.
"""

import warnings

import numpy as np
import pytest

from qsoskit.hquat import QMatrix, Quaternion, hermitian_part, is_hermitian, is_psd, lambda_embed
from qsoskit.qpoly import SymPoly, from_gram, is_real_coeff, real_poly_mul
from qsoskit.relax import (
    QPOP,
    QSDP,
    RelaxOptions,
    assign_constraints,
    build_moment_matrices,
    build_qsos,
    build_rsos1,
    build_sparse_qsos,
    build_strengthened,
    chordal_cliques,
    csp_graph,
    gram_of_quadratic,
    objective_poly,
    real_gram_restrict,
)
from qsoskit.sdp import solve
from qsoskit.words import Word, basis, eval_word, involution, normalize, word_mul

Q0 = Quaternion(0.0)


def rand_quat(rng, scale=1.0):
    return Quaternion(*(scale * rng.standard_normal(4)))


def rand_hermitian(rng, dim):
    a = QMatrix.zeros(dim, dim)
    for r in range(dim):
        for c in range(dim):
            a.set_entry(r, c, rand_quat(rng))
    return hermitian_part(a)


def rand_real_sympoly(rng, n, deg):
    """Random real-coefficient symmetric polynomial with small support."""
    letters = [s * v for v in range(1, n + 1) for s in (1, -1)]
    pairs = []
    for _ in range(4):
        length = int(rng.integers(0, deg + 1))
        seq = [letters[int(rng.integers(len(letters)))] for _ in range(length)]
        w = normalize(seq, n)
        if w.degree > deg:
            continue
        pairs.append((Quaternion(float(rng.standard_normal())), w))
    pairs.append((Quaternion(1.0), Word.empty(n)))
    return SymPoly.from_raw(n, pairs)


def rand_central_sympoly(rng, n):
    """Random polynomial in the squared moduli only (degree <= 2)."""
    pairs = [(Quaternion(float(rng.standard_normal())), Word.empty(n))]
    for i in range(n):
        alpha = [0] * n
        alpha[i] = 1
        pairs.append((Quaternion(float(rng.standard_normal())), Word(n, tuple(alpha), ())))
    return SymPoly.from_raw(n, pairs)


def functional_value(entries, block_values):
    """<A_u, X> = sum conj(a) * X[r, c] over the sparse entries."""
    total = Q0
    for blk, r, c, a in entries:
        xb = block_values[blk]
        if isinstance(xb, QMatrix):
            total = total + a.conj() * xb[r, c]
        else:
            total = total + a.conj() * Quaternion(float(xb))
    return total


def sandwich_poly(q: QSDP, block_values) -> SymPoly:
    """Expand (lam+ - lam-) + sum_b mult_b * (w* X_b w) via the qpoly oracle."""
    lam = float(block_values[0]) - float(block_values[1])
    sigma = SymPoly.constant(q.n, lam)
    for blk, xb in enumerate(block_values):
        if not isinstance(xb, QMatrix):
            continue
        block = q.blocks[blk]
        base = from_gram(list(block.words), xb)
        mult = SymPoly.from_raw(q.n, [(Quaternion(c), t) for c, t in block.mult])
        sigma = sigma + real_poly_mul(mult, base)
    return sigma


def random_block_values(q: QSDP, rng):
    vals = []
    for block in q.blocks:
        if block.words is None:
            vals.append(float(rng.uniform(0.0, 2.0)))
        else:
            vals.append(rand_hermitian(rng, len(block.words)))
    return vals


def check_matching_against_oracle(q: QSDP, f: SymPoly, rng, trials=3):
    for _ in range(trials):
        vals = random_block_values(q, rng)
        sigma = sandwich_poly(q, vals)
        index = {c.word for c in q.constraints}
        for u in sigma.support():
            assert u in index, f"generated word {u!r} missing from the constraint index"
        for u in f.support():
            assert u in index, f"objective word {u!r} missing from the constraint index"
        for con in q.constraints:
            got = functional_value(con.entries, vals)
            want = sigma.terms.get(con.word, Q0)
            assert got.is_close(want, 1e-9), f"functional mismatch at {con.word!r}: {got} vs {want}"
        for con in q.constraints:
            want_b = f.terms.get(con.word, Q0)
            assert con.rhs.is_close(want_b, 1e-12)


# ---------------------------------------------------------------------------
# build_qsos


def test_degree_floor_enforced():
    n = 1
    f = SymPoly.from_raw(n, [(Quaternion(1.0), normalize([1, 1, -1, -1], n))])  # |q1|^4
    g = SymPoly.from_raw(n, [(Quaternion(1.0), normalize([1, -1], n))])
    p = QPOP(n, f, [g], [])
    with pytest.raises(ValueError, match="d_min"):
        build_qsos(p, RelaxOptions(d=1))
    q = build_qsos(p, RelaxOptions(d=2))
    assert q.d == 2
    # a degree-3 constraint pushes the floor to 2 even for a quadratic objective
    g3 = SymPoly.from_raw(n, [(Quaternion(0.5), normalize([1, 1, 1], n))])
    p3 = QPOP(n, SymPoly.from_raw(n, [(Quaternion(1.0), normalize([1, -1], n))]), [g3], [])
    with pytest.raises(ValueError, match="d_min"):
        build_qsos(p3, RelaxOptions(d=1))


def test_unconstrained_modulus_block_structure():
    # f = |q1|^2, d=1, vars_only: hand-checked blocks, constraints, rhs
    n = 1
    mod = normalize([1, -1], n)
    f = SymPoly.from_raw(n, [(Quaternion(1.0), mod)])
    q = build_qsos(QPOP(n, f, [], []), RelaxOptions(d=1, basis_kind="vars_only"))
    assert [b.role for b in q.blocks] == ["lambda_plus", "lambda_minus", "gram_G0"]
    assert q.block_dims == [1, 1, 2]
    assert list(q.blocks[2].words) == [Word.empty(n), normalize([1], n)]
    words = [c.word for c in q.constraints]
    assert words == [Word.empty(n), normalize([1], n), mod]
    con1, conq, conmod = q.constraints
    # u = 1: lam+ - lam- + G[0,0] = 0
    assert con1.entries == (
        (0, 0, 0, Quaternion(1.0)),
        (1, 0, 0, Quaternion(-1.0)),
        (2, 0, 0, Quaternion(1.0)),
    )
    assert con1.rhs == Q0
    # u = q1: G[0,1] picks up both orientations -> full weight on one slot
    assert conq.entries == ((2, 0, 1, Quaternion(1.0)),)
    assert conq.rhs == Q0
    # u = |q1|^2: diagonal Gram entry, rhs 1
    assert conmod.entries == ((2, 1, 1, Quaternion(1.0)),)
    assert conmod.rhs == Quaternion(1.0)
    assert q.c_entries == ((0, 0, 0, Quaternion(1.0)), (1, 0, 0, Quaternion(-1.0)))


def test_block_layout_with_constraints():
    rng = np.random.default_rng(5)
    n = 2
    f = rand_real_sympoly(rng, n, 2)
    g1 = rand_real_sympoly(rng, n, 2).add(
        SymPoly.from_raw(n, [(Quaternion(1.0), Word(n, (1, 0), ()))])  # pin deg 2
    )
    g2 = rand_central_sympoly(rng, n)
    h = rand_central_sympoly(rng, n)
    q = build_qsos(QPOP(n, f, [g1, g2], [h]), RelaxOptions(d=2, basis_kind="vars_only"))
    assert [b.role for b in q.blocks] == [
        "lambda_plus",
        "lambda_minus",
        "gram_G0",
        "gram_Gi",
        "gram_Gi",
        "herm_Hj_plus",
        "herm_Hj_minus",
    ]
    assert q.blocks[2].words == tuple(basis(n, 2, "vars_only"))
    assert q.blocks[3].words == tuple(basis(n, 1, "vars_only"))
    assert q.blocks[5].words == tuple(basis(n, 1, "vars_only"))
    # multiplier raws: G0 carries the unit, Hj- the negated equality
    assert q.blocks[2].mult == ((1.0, Word.empty(n)),)
    plus = dict((t, c) for c, t in q.blocks[5].mult)
    minus = dict((t, c) for c, t in q.blocks[6].mult)
    assert set(plus) == set(minus)
    assert all(abs(plus[t] + minus[t]) < 1e-15 for t in plus)
    # self-adjoint rhs are real, one constraint per canonical representative
    seen = set()
    for con in q.constraints:
        assert con.word not in seen
        seen.add(con.word)
        assert involution(con.word).sort_key() >= con.word.sort_key()
        if involution(con.word) == con.word:
            assert con.rhs.i == con.rhs.j == con.rhs.k == 0.0


def test_matching_matches_polynomial_oracle_real_case():
    rng = np.random.default_rng(11)
    for n, d, kind in [(1, 2, "mixed"), (2, 2, "vars_only"), (2, 1, "mixed")]:
        f = rand_real_sympoly(rng, n, 2)
        g = rand_real_sympoly(rng, n, 2)
        h = rand_central_sympoly(rng, n)
        p = QPOP(n, f, [g], [h])
        q = build_qsos(p, RelaxOptions(d=d, basis_kind=kind))
        check_matching_against_oracle(q, f, rng)


def test_matching_matches_polynomial_oracle_quaternion_objective():
    rng = np.random.default_rng(23)
    n = 2
    wvec = basis(n, 1, "vars_only")
    big = rand_hermitian(rng, len(wvec))
    f = from_gram(wvec, big)
    assert not is_real_coeff(f)
    p = QPOP(n, (wvec, big), [rand_central_sympoly(rng, n)], [])
    q = build_qsos(p, RelaxOptions(d=1, basis_kind="vars_only"))
    check_matching_against_oracle(q, f, rng)
    # quaternion right-hand sides appear on non-self-adjoint words
    assert any(abs(c.rhs.i) + abs(c.rhs.j) + abs(c.rhs.k) > 1e-12 for c in q.constraints)


def test_objective_support_outside_reach_is_kept_infeasible():
    # vars_only order-1 products never produce q1*q1; the matching row stays
    # with an empty functional and a nonzero rhs (honest infeasibility).
    n = 1
    f = SymPoly.from_raw(n, [(Quaternion(1.0), normalize([1, 1], n)), (Quaternion(1.0), normalize([-1, -1], n))])
    q = build_qsos(QPOP(n, f, [], []), RelaxOptions(d=1, basis_kind="vars_only"))
    row = [c for c in q.constraints if c.word == normalize([1, 1], n)]
    assert len(row) == 1
    assert row[0].entries == ()
    assert row[0].rhs == Quaternion(1.0)


def test_case_check_tags_and_warnings():
    rng = np.random.default_rng(7)
    n = 1
    freal = rand_real_sympoly(rng, n, 2)
    greal = rand_real_sympoly(rng, n, 2)
    central = rand_central_sympoly(rng, n)
    wvec = basis(n, 1, "vars_only")
    fquat = from_gram(wvec, rand_hermitian(rng, len(wvec)))

    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_qsos(QPOP(n, freal, [greal], []), RelaxOptions(d=2))  # Case 1, silent
        build_qsos(QPOP(n, fquat, [central], []), RelaxOptions(d=1))  # Case 2, silent

    # neither case: quaternion objective with a non-central real constraint
    with pytest.warns(UserWarning, match="neither"):
        build_qsos(QPOP(n, fquat, [greal], []), RelaxOptions(d=2))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_qsos(QPOP(n, fquat, [greal], []), RelaxOptions(d=2, case_override=True))

    # declared tag inconsistent with the coefficients
    with pytest.warns(UserWarning, match="case_tag"):
        build_qsos(QPOP(n, freal, [greal], [], case_tag="modulus_only"), RelaxOptions(d=2))


def test_quaternion_constraint_coefficients_rejected():
    n = 1
    f = SymPoly.from_raw(n, [(Quaternion(1.0), normalize([1, -1], n))])
    gq = SymPoly.from_raw(n, [(Quaternion(0.0, 1.0), normalize([1], n))])
    with pytest.warns(UserWarning):
        with pytest.raises(ValueError, match="real"):
            build_qsos(QPOP(n, f, [gq], []), RelaxOptions(d=1))


def test_build_is_deterministic():
    rng = np.random.default_rng(31)
    n = 2
    f = rand_real_sympoly(rng, n, 2)
    g = rand_central_sympoly(rng, n)
    p = QPOP(n, f, [g], [])
    opts = RelaxOptions(d=2, basis_kind="mixed")
    assert build_qsos(p, opts) == build_qsos(p, opts)


# ---------------------------------------------------------------------------
# moment matrices


def dirac_moments(point, n, words_needed):
    # Point-evaluation moments: y_u = conj(u(point)).  With the entry rule
    # M[k, l] = y_{w_l w_k*} this makes M_1 the rank-one matrix v v* for
    # v = (values of the basis words), which is PSD; the unconjugated
    # orientation would instead produce the entrywise conjugate, which is
    # not PSD over the quaternions.
    y = {}
    for w in words_needed:
        y[w] = eval_word(w, point).conj()
    return y


def all_product_reps(wvecs, extra_words):
    reps = set()
    for wvec in wvecs:
        stars = [involution(w) for w in wvec]
        for wk in stars:
            for wl in wvec:
                for t in extra_words:
                    prod = word_mul(t, word_mul(wl, wk))
                    reps.add(prod)
                    reps.add(involution(prod))
    out = set()
    for w in reps:
        rep, _ = canonical_rep_local(w)
        out.add(rep)
    return sorted(out, key=Word.sort_key)


def canonical_rep_local(w):
    ws = involution(w)
    return (ws, True) if ws.sort_key() < w.sort_key() else (w, False)


def test_moment_matrix_dirac_at_zero():
    n = 1
    f = SymPoly.from_raw(n, [(Quaternion(1.0), normalize([1, -1], n))])
    p = QPOP(n, f, [], [])
    opts = RelaxOptions(d=1, basis_kind="vars_only")
    wvec = basis(n, 1, "vars_only")
    reps = all_product_reps([wvec], [Word.empty(n)])
    y = {w: (Quaternion(1.0) if w == Word.empty(n) else Q0) for w in reps}
    m, loc, eqb = build_moment_matrices(y, p, opts)
    assert loc == [] and eqb == []
    for k in range(2):
        for l in range(2):
            want = Quaternion(1.0) if k == l == 0 else Q0
            assert m[k, l].is_close(want)


def test_moment_matrix_rank_one_from_point():
    rng = np.random.default_rng(13)
    n, d = 2, 1
    point = [rand_quat(rng, 0.7) for _ in range(n)]
    f = SymPoly.constant(n, 1.0)
    p = QPOP(n, f, [], [])
    opts = RelaxOptions(d=d, basis_kind="mixed")
    wvec = basis(n, d, "mixed")
    reps = all_product_reps([wvec], [Word.empty(n)])
    y = dirac_moments(point, n, reps)
    m, _, _ = build_moment_matrices(y, p, opts)
    vals = [eval_word(w, point) for w in wvec]
    for k in range(len(wvec)):
        for l in range(len(wvec)):
            want = vals[k] * vals[l].conj()
            assert m[k, l].is_close(want, 1e-10)
    assert is_hermitian(m, 1e-12)
    assert is_psd(m, 1e-8)


def test_localizing_with_unit_multiplier_equals_moment_matrix():
    rng = np.random.default_rng(17)
    n, d = 1, 2
    point = [rand_quat(rng, 0.5)]
    one = SymPoly.constant(n, 1.0)
    p = QPOP(n, one, [one], [])
    opts = RelaxOptions(d=d, basis_kind="mixed")
    wvec = basis(n, d, "mixed")
    reps = all_product_reps([wvec], [Word.empty(n)])
    y = dirac_moments(point, n, reps)
    m, loc, _ = build_moment_matrices(y, p, opts)
    assert len(loc) == 1
    for k in range(len(wvec)):
        for l in range(len(wvec)):
            assert loc[0][k, l].is_close(m[k, l], 1e-12)


def test_equality_block_scales_by_central_multiplier_at_dirac():
    rng = np.random.default_rng(19)
    n, d = 1, 2
    point = [rand_quat(rng, 0.8)]
    mod = normalize([1, -1], n)
    h = SymPoly.from_raw(n, [(Quaternion(1.0), mod), (Quaternion(-1.0), Word.empty(n))])
    p = QPOP(n, SymPoly.constant(n, 1.0), [], [h])
    opts = RelaxOptions(d=d, basis_kind="vars_only")
    wvec = basis(n, d, "vars_only")
    sub = basis(n, d - 1, "vars_only")
    reps = all_product_reps([wvec, sub], [Word.empty(n), mod])
    y = dirac_moments(point, n, reps)
    _, _, eqb = build_moment_matrices(y, p, opts)
    assert len(eqb) == 1
    hval = h.eval(point)
    psub = QPOP(n, SymPoly.constant(n, 1.0), [], [])
    msub, _, _ = build_moment_matrices(y, psub, RelaxOptions(d=d - 1, basis_kind="vars_only"))
    for k in range(len(sub)):
        for l in range(len(sub)):
            assert eqb[0][k, l].is_close(msub[k, l] * hval, 1e-10)


def test_moment_matrix_missing_index_raises():
    n = 1
    p = QPOP(n, SymPoly.constant(n, 1.0), [], [])
    opts = RelaxOptions(d=1, basis_kind="vars_only")
    y = {Word.empty(n): Quaternion(1.0)}  # missing q1 and |q1|^2
    with pytest.raises(ValueError, match="missing"):
        build_moment_matrices(y, p, opts)


# ---------------------------------------------------------------------------
# sparsity


def test_csp_graph_separable_objective_is_edgeless():
    n = 3
    pairs = [(Quaternion(1.0), Word(n, tuple(1 if t == i else 0 for t in range(n)), ())) for i in range(n)]
    f = SymPoly.from_raw(n, pairs)
    g = csp_graph(QPOP(n, f, [], []))
    assert set(g) == {1, 2, 3}
    assert all(not nbrs for nbrs in g.values())


def test_csp_graph_constraint_makes_clique():
    n = 4
    f = SymPoly.constant(n, 1.0)
    gcon = SymPoly.from_raw(
        n,
        [(Quaternion(1.0), normalize([1], n)), (Quaternion(1.0), normalize([2], n)), (Quaternion(1.0), normalize([3], n))],
    )
    g = csp_graph(QPOP(n, f, [gcon], []))
    assert g[1] == {2, 3} and g[2] == {1, 3} and g[3] == {1, 2} and g[4] == set()


def test_csp_graph_objective_terms_and_gram_form():
    n = 3
    # objective term q1 q2 links only {1,2}; q3 stays isolated
    f = SymPoly.from_raw(n, [(Quaternion(1.0), normalize([1, 2], n)), (Quaternion(1.0), normalize([3], n))])
    g = csp_graph(QPOP(n, f, [], []))
    assert g[1] == {2} and g[2] == {1} and g[3] == set()
    # Gram-form objective goes through the same conversion
    wvec = basis(2, 1, "vars_only")
    q = QMatrix.eye(len(wvec))
    g2 = csp_graph(QPOP(2, (wvec, q), [], []))
    assert set(g2) == {1, 2}


def test_chordal_cliques_examples():
    k4 = {v: {u for u in range(1, 5) if u != v} for v in range(1, 5)}
    assert chordal_cliques(k4) == [[1, 2, 3, 4]]
    edgeless = {1: set(), 2: set(), 3: set()}
    assert chordal_cliques(edgeless) == [[1], [2], [3]]
    path = {1: {2}, 2: {1, 3}, 3: {2}}
    assert chordal_cliques(path) == [[1, 2], [2, 3]]


def is_chordal_bruteforce(adj):
    """Repeatedly strip simplicial vertices (works for small graphs)."""
    adj = {v: set(n) for v, n in adj.items()}
    while adj:
        simplicial = None
        for v in sorted(adj):
            nbrs = adj[v]
            if all(b in adj[a] for a in nbrs for b in nbrs if a < b):
                simplicial = v
                break
        if simplicial is None:
            return False
        for a in adj[simplicial]:
            adj[a].discard(simplicial)
        del adj[simplicial]
    return True


def test_chordal_cliques_random_graphs_cover_and_chordal():
    rng = np.random.default_rng(41)
    for _ in range(20):
        n = int(rng.integers(3, 8))
        adj = {v: set() for v in range(1, n + 1)}
        for a in range(1, n + 1):
            for b in range(a + 1, n + 1):
                if rng.uniform() < 0.4:
                    adj[a].add(b)
                    adj[b].add(a)
        cliques = chordal_cliques(adj)
        assert cliques == chordal_cliques(adj)  # deterministic
        covered = {(a, b) for c in cliques for a in c for b in c if a < b}
        for a in range(1, n + 1):
            for b in adj[a]:
                if a < b:
                    assert (a, b) in covered
        # the union of clique edges is a chordal extension of the input
        ext = {v: set() for v in adj}
        for c in cliques:
            for a in c:
                for b in c:
                    if a != b:
                        ext[a].add(b)
        assert is_chordal_bruteforce(ext)
        # maximality inside the extension
        for c in cliques:
            for other in cliques:
                assert not (set(c) < set(other))


def test_assign_constraints_first_matching_clique():
    n = 3
    f = SymPoly.from_raw(n, [(Quaternion(1.0), normalize([1, 2], n)), (Quaternion(1.0), normalize([2, 3], n))])
    g_mid = SymPoly.from_raw(n, [(Quaternion(1.0), normalize([2], n))])  # fits both cliques
    g_right = SymPoly.from_raw(n, [(Quaternion(1.0), normalize([3], n))])
    h = SymPoly.from_raw(n, [(Quaternion(1.0), normalize([1], n))])
    p = QPOP(n, f, [g_mid, g_right], [h])
    cliques = chordal_cliques(csp_graph(p))
    assert cliques == [[1, 2], [2, 3]]
    ineq_assign, eq_assign = assign_constraints(cliques, p)
    assert ineq_assign == [[0], [1]]  # tie-break to the lower-indexed clique
    assert eq_assign == [[0], []]


def test_sparse_single_clique_degenerates_to_dense():
    rng = np.random.default_rng(43)
    n = 2
    f = SymPoly.from_raw(n, [(Quaternion(1.0), normalize([1, -2], n)), (Quaternion(0.5), Word.empty(n))])
    ball = SymPoly.from_raw(
        n,
        [(Quaternion(1.0), Word.empty(n))]
        + [(Quaternion(-1.0), Word(n, tuple(1 if t == i else 0 for t in range(n)), ())) for i in range(n)],
    )
    p = QPOP(n, f, [ball], [])
    opts = RelaxOptions(d=2, basis_kind="mixed", sparse=True)
    dense = build_qsos(p, RelaxOptions(d=2, basis_kind="mixed"))
    sparse = build_sparse_qsos(p, opts)
    assert sparse == dense
    assert sparse.meta["cliques"] == [[1, 2]]


def test_sparse_multi_clique_structure_and_oracle():
    rng = np.random.default_rng(47)
    n = 4
    f = SymPoly.from_raw(
        n,
        [(Quaternion(1.0), normalize([1, -2], n)), (Quaternion(-0.5), normalize([3, -4], n))],
    )

    def pair_norm(i, j):
        alpha_i = tuple(1 if t == i - 1 else 0 for t in range(n))
        alpha_j = tuple(1 if t == j - 1 else 0 for t in range(n))
        return SymPoly.from_raw(
            n,
            [
                (Quaternion(1.0), Word.empty(n)),
                (Quaternion(-1.0), Word(n, alpha_i, ())),
                (Quaternion(-1.0), Word(n, alpha_j, ())),
            ],
        )

    p = QPOP(n, f, [pair_norm(1, 2), pair_norm(3, 4)], [])
    q = build_sparse_qsos(p, RelaxOptions(d=1, basis_kind="vars_only", sparse=True))
    assert q.meta["cliques"] == [[1, 2], [3, 4]]
    roles = [b.role for b in q.blocks]
    assert roles == ["lambda_plus", "lambda_minus", "gram_G0", "gram_G0", "gram_Gi", "gram_Gi"]
    assert q.blocks[2].words == tuple(basis(n, 1, "vars_only", support=[1, 2]))
    assert q.blocks[3].words == tuple(basis(n, 1, "vars_only", support=[3, 4]))
    check_matching_against_oracle(q, f, rng)


# ---------------------------------------------------------------------------
# strengthened variant


def test_strengthened_adds_conjugate_prefixed_blocks():
    rng = np.random.default_rng(53)
    n = 1
    wvec = basis(n, 1, "vars_only")
    qm = rand_hermitian(rng, len(wvec))
    rm = QMatrix.from_parts(qm.part(0))  # real symmetric for the silent case
    f = from_gram(wvec, rm)
    ball = SymPoly.from_raw(
        n, [(Quaternion(1.0), Word.empty(n)), (Quaternion(-1.0), normalize([1, -1], n))]
    )
    p = QPOP(n, (wvec, rm), [ball], [])
    q = build_strengthened(p, RelaxOptions(d=1, basis_kind="vars_only", strengthen=True))
    roles = [b.role for b in q.blocks]
    assert roles == ["lambda_plus", "lambda_minus", "gram_G0", "gram_Gi", "strengthen_G0i"]
    extra = q.blocks[-1]
    assert list(extra.words) == [normalize([-1], n), normalize([-1, 1], n)]
    assert extra.mult == ((1.0, Word.empty(n)),)
    check_matching_against_oracle(q, f, rng)


def test_strengthened_accepts_equalities_and_requires_gram_objective():
    rng = np.random.default_rng(59)
    n = 2
    wvec = basis(n, 1, "vars_only")
    qm = QMatrix.from_parts(rand_hermitian(rng, len(wvec)).part(0))
    norm1 = SymPoly.from_raw(
        n, [(Quaternion(1.0), Word(n, (1, 0), ())), (Quaternion(-1.0), Word.empty(n))]
    )
    p = QPOP(n, (wvec, qm), [], [norm1])
    q = build_strengthened(p, RelaxOptions(d=1, strengthen=True))
    assert sum(b.role == "strengthen_G0i" for b in q.blocks) == n
    f = from_gram(wvec, qm)
    check_matching_against_oracle(q, f, rng)
    # SymPoly objective (no Gram form) is rejected for this variant
    with pytest.raises(ValueError, match="Gram"):
        build_strengthened(QPOP(n, f, [], [norm1]), RelaxOptions(d=1, strengthen=True))


# ---------------------------------------------------------------------------
# first-order real baseline


def test_gram_of_quadratic_inverts_from_gram():
    rng = np.random.default_rng(61)
    n = 2
    wvec = [Word.empty(n)] + [normalize([i], n) for i in range(1, n + 1)]
    m = rand_hermitian(rng, n + 1)
    p = from_gram(wvec, m)
    d = gram_of_quadratic(p, n)
    for r in range(n + 1):
        for c in range(n + 1):
            assert d[r, c].is_close(m[r, c], 1e-12)


def test_gram_of_quadratic_rejects_non_qcqp():
    n = 1
    cubic = SymPoly.from_raw(n, [(Quaternion(1.0), normalize([1, 1, 1], n))])
    with pytest.raises(ValueError, match="quadratic"):
        gram_of_quadratic(cubic, n)
    quartic = SymPoly.from_raw(n, [(Quaternion(1.0), Word(n, (2,), ()))])
    with pytest.raises(ValueError, match="quadratic"):
        gram_of_quadratic(quartic, n)


def test_rsos1_constant_objective_solves_to_one():
    n = 1
    f = SymPoly.constant(n, 1.0)
    p = QPOP(n, f, [], [])
    r = build_rsos1(p)
    dim = 4 * (n + 1)
    assert r.block_struct == [-2, dim]
    assert r.m == dim * (dim + 1) // 2
    sol = solve(r, 1e-9)
    assert sol.status == "optimal"
    assert abs(sol.primal_obj - 1.0) < 1e-6


def test_rsos1_rhs_is_lambda_embedding_of_objective():
    rng = np.random.default_rng(67)
    n = 2
    wvec = [Word.empty(n)] + [normalize([i], n) for i in range(1, n + 1)]
    m = rand_hermitian(rng, n + 1)
    p = QPOP(n, (wvec, m), [], [])
    r = build_rsos1(p)
    lam = lambda_embed(m)
    dim = 4 * (n + 1)
    idx = 0
    for row in range(dim):
        for col in range(row, dim):
            assert abs(r.b[idx] - lam[row, col]) < 1e-12
            idx += 1
    assert idx == r.m


def test_rsos1_case_conditions():
    rng = np.random.default_rng(71)
    n = 2
    wvec = [Word.empty(n)] + [normalize([i], n) for i in range(1, n + 1)]
    mq = rand_hermitian(rng, n + 1)  # genuinely quaternion
    ball = SymPoly.from_raw(
        n,
        [(Quaternion(1.0), Word.empty(n))]
        + [(Quaternion(-1.0), Word(n, tuple(1 if t == i else 0 for t in range(n)), ())) for i in range(n)],
    )
    # quaternion Q with diagonal real constraint Grams: accepted
    build_rsos1(QPOP(n, (wvec, mq), [ball], []))
    # quaternion Q with a non-diagonal real constraint: rejected
    offdiag = SymPoly.from_raw(n, [(Quaternion(1.0), normalize([1, -2], n))])
    with pytest.raises(ValueError, match="diagonal"):
        build_rsos1(QPOP(n, (wvec, mq), [offdiag], []))
    # real data with non-diagonal constraints: accepted (Case 1)
    mreal = QMatrix.from_parts(mq.part(0))
    build_rsos1(QPOP(n, (wvec, mreal), [offdiag], []))
    # quaternion constraint coefficients: rejected outright
    gq = SymPoly.from_raw(n, [(Quaternion(0.0, 1.0), normalize([1, -2], n))])
    with pytest.raises(ValueError):
        build_rsos1(QPOP(n, (wvec, mreal), [gq], []))


# ---------------------------------------------------------------------------
# real-Gram restriction


def test_real_gram_restrict_flags_blocks_and_guards_input():
    rng = np.random.default_rng(73)
    n = 1
    f = rand_real_sympoly(rng, n, 2)
    g = rand_central_sympoly(rng, n)
    q = build_qsos(QPOP(n, f, [g], []), RelaxOptions(d=2))
    rq = real_gram_restrict(q)
    for blk, rblk in zip(q.blocks, rq.blocks):
        if blk.words is None:
            assert not rblk.real_only
        else:
            assert rblk.real_only
    assert not any(b.real_only for b in q.blocks)  # source untouched
    assert rq.constraints == q.constraints

    wvec = basis(n, 1, "vars_only")
    fq = from_gram(wvec, rand_hermitian(rng, len(wvec)))
    qq = build_qsos(QPOP(n, fq, [g], []), RelaxOptions(d=1))
    with pytest.raises(ValueError, match="real"):
        real_gram_restrict(qq)


def test_objective_poly_accepts_both_forms():
    rng = np.random.default_rng(79)
    n = 1
    wvec = basis(n, 1, "vars_only")
    m = rand_hermitian(rng, len(wvec))
    p_gram = QPOP(n, (wvec, m), [], [])
    p_poly = QPOP(n, from_gram(wvec, m), [], [])
    a, b = objective_poly(p_gram), objective_poly(p_poly)
    assert a.support() == b.support()
    for u in a.support():
        assert a.terms[u].is_close(b.terms[u], 1e-12)
