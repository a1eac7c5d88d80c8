"""Real reformulations of quaternion SDPs, and the map back.

A Hermitian quaternion block H = R + I i + J j + K k embeds as the
symmetric real matrix

    Lambda(H) = [[R, -I, -J, -K],
                 [I,  R, -K,  J],
                 [J,  K,  R, -I],
                 [K, -J,  I,  R]],

which is PSD exactly when H is.  The naive path optimizes Y = Lambda(H)
directly, paying 6 nb^2 + 3 nb equality rows per block to pin the layout.
The economical path optimizes a free symmetric PSD X of the same size and
reads the would-be parts through the selectors

    R_X = X11 + X22 + X33 + X44,      I_X = X21 - X21' + X43 - X43',
    J_X = X31 - X31' - X42 + X42',    K_X = X41 - X41' + X32 - X32',

(primes are transposes, Xts the nb x nb subblocks).  Every quaternion
constraint sum conj(a) X[r,c] = b splits into at most four real rows, one
per component of the quaternion equation; rows whose functional is
identically zero on symmetric matrices are dropped when their right-hand
side component is zero too (a zero functional against a nonzero right-hand
side is kept, leaving the problem honestly infeasible).  Feasible points
map as X = Lambda(H)/4 (economical) or Y = Lambda(H) (naive), and any real
optimum returns as H* = R_X + I_X i + J_X j + K_X k (selectors on Y/4 for
the naive path) with the same objective value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hquat import QMatrix, Quaternion, hermitian_part
from .relax import QSDP
from .sdp import RealSDP, Solution


@dataclass(frozen=True)
class RealizationMap:
    """Bookkeeping from a realized real SDP back to the quaternion one.

    Quaternion block t lives in real block t: size 4 * q_dims[t] normally,
    q_dims[t] when reduced[t] (a real-restricted block realized economically
    carries only the real part, since its other components are identically
    zero).  row_kinds tags each real constraint row: ("con", k, part) is
    component `part` (0..3 = R/I/J/K) of quaternion constraint k;
    ("structure", t) pins the naive embedding layout of block t; ("pin", t)
    zeroes an imaginary selector entry of a real-restricted block on the
    naive path, which keeps the full embedding size.
    """

    mode: str
    q_dims: tuple
    row_kinds: tuple
    reduced: tuple = ()


def _weights(a: Quaternion):
    """Rows of the linear map h -> conj(a) * h on (R, I, J, K) components.

    Row `part` lists the coefficients that the four components of h carry
    in component `part` of the product, mirroring the trace inner product
    sum conj(a) * h entry by entry.
    """
    ar, ai, aj, ak = a.to_array()
    return (
        (ar, ai, aj, ak),
        (-ai, ar, ak, -aj),
        (-aj, -ak, ar, ai),
        (-ak, aj, -ai, ar),
    )


def _bump(w: dict, key, m: float) -> None:
    w[key] = w.get(key, 0.0) + m


def _place(w: dict, bi: int, sel: int, nb: int, r: int, c: int, m: float) -> None:
    """Add m * (selector sel)[r, c] to the functional dict w.

    Keys are (block, i, j) positions of the full (unsymmetrized) real
    coefficient matrix; sel indexes (R_X, I_X, J_X, K_X).
    """
    if m == 0.0:
        return
    if sel == 0:
        for t in range(4):
            _bump(w, (bi, t * nb + r, t * nb + c), m)
    elif sel == 1:
        _bump(w, (bi, nb + r, c), m)
        _bump(w, (bi, nb + c, r), -m)
        _bump(w, (bi, 3 * nb + r, 2 * nb + c), m)
        _bump(w, (bi, 3 * nb + c, 2 * nb + r), -m)
    elif sel == 2:
        _bump(w, (bi, 2 * nb + r, c), m)
        _bump(w, (bi, 2 * nb + c, r), -m)
        _bump(w, (bi, 3 * nb + r, nb + c), -m)
        _bump(w, (bi, 3 * nb + c, nb + r), m)
    else:
        _bump(w, (bi, 3 * nb + r, c), m)
        _bump(w, (bi, 3 * nb + c, r), -m)
        _bump(w, (bi, 2 * nb + r, nb + c), m)
        _bump(w, (bi, 2 * nb + c, nb + r), -m)


def _emit(w: dict) -> list:
    """Fold a functional dict onto the upper triangle.

    On symmetric X the positions (i, j) and (j, i) read the same variable,
    so the emitted entry is the average of the two accumulated weights
    (RealSDP counts off-diagonal entries twice); exact zeros vanish.
    """
    slots: dict = {}
    for (bi, i, j), m in w.items():
        if i == j:
            _bump(slots, (bi, i, j), m)
        elif i < j:
            _bump(slots, (bi, i, j), m / 2.0)
        else:
            _bump(slots, (bi, j, i), m / 2.0)
    return [(bi, i, j, float(m)) for (bi, i, j), m in sorted(slots.items()) if m != 0.0]


def _expand(entries, dims, part: int, scale: float, reduced=None) -> list:
    """Realize component `part` of the functional sum conj(a) X[r, c].

    A reduced block holds the real part of H alone, so only the R-component
    weight survives there (the other selectors multiply identically-zero
    components of H).
    """
    w: dict = {}
    for bi, r, c, a in entries:
        row = _weights(a)[part]
        if reduced is not None and reduced[bi]:
            _bump(w, (bi, r, c), row[0] * scale)
            continue
        for sel in range(4):
            _place(w, bi, sel, dims[bi], r, c, row[sel] * scale)
    return _emit(w)


def _structure_rows(bi: int, nb: int) -> list:
    """Equality rows forcing a symmetric 4nb block into the image of Lambda."""
    rows = []
    # the four diagonal blocks coincide
    for p in (1, 2, 3):
        for r in range(nb):
            for c in range(r, nb):
                w: dict = {}
                _bump(w, (bi, p * nb + r, p * nb + c), 1.0)
                _bump(w, (bi, r, c), -1.0)
                rows.append(_emit(w))
    # the first-column off-diagonal blocks are antisymmetric
    for p in (1, 2, 3):
        for r in range(nb):
            for c in range(r, nb):
                w = {}
                _bump(w, (bi, p * nb + r, c), 1.0)
                _bump(w, (bi, p * nb + c, r), 1.0)
                rows.append(_emit(w))
    # remaining blocks repeat them: Y43 = Y21, Y42 = -Y31, Y32 = Y41
    for r in range(nb):
        for c in range(nb):
            w = {}
            _bump(w, (bi, 3 * nb + r, 2 * nb + c), 1.0)
            _bump(w, (bi, nb + r, c), -1.0)
            rows.append(_emit(w))
            w = {}
            _bump(w, (bi, 3 * nb + r, nb + c), 1.0)
            _bump(w, (bi, 2 * nb + r, c), 1.0)
            rows.append(_emit(w))
            w = {}
            _bump(w, (bi, 2 * nb + r, nb + c), 1.0)
            _bump(w, (bi, 3 * nb + r, c), -1.0)
            rows.append(_emit(w))
    return rows


def _pin_rows(bi: int, nb: int) -> list:
    """Zero the I/J/K parts of a real-restricted block on the naive path.

    The naive embedding keeps the full 4nb size, so the imaginary parts are
    pinned entry by entry (the selectors are antisymmetric, hence the strict
    upper triangle suffices).  The economical path needs no pin rows: it
    realizes a real-restricted block as its nb-dim real part directly.
    """
    rows = []
    for r in range(nb):
        for c in range(r + 1, nb):
            for sel in (1, 2, 3):
                w: dict = {}
                _bump(w, (bi, sel * nb + r, c), 1.0)
                rows.append(_emit(w))
    return rows


def _realize(q: QSDP, naive: bool):
    dims = [b.dim for b in q.blocks]
    reduced = [bool(b.real_only) and not naive for b in q.blocks]
    scale = 0.25 if naive else 1.0
    a_entries: list = []
    b_vals: list = []
    kinds: list = []
    for k, con in enumerate(q.constraints):
        rhs = con.rhs.to_array()
        for part in range(4):
            entries = _expand(con.entries, dims, part, scale, reduced)
            if not entries and rhs[part] == 0.0:
                continue
            a_entries.append(entries)
            b_vals.append(float(rhs[part]))
            kinds.append(("con", k, part))
    if naive:
        for bi, nb in enumerate(dims):
            for entries in _structure_rows(bi, nb):
                a_entries.append(entries)
                b_vals.append(0.0)
                kinds.append(("structure", bi))
        for bi, (blk, nb) in enumerate(zip(q.blocks, dims)):
            if blk.real_only:
                for entries in _pin_rows(bi, nb):
                    a_entries.append(entries)
                    b_vals.append(0.0)
                    kinds.append(("pin", bi))
    c_entries = _expand(q.c_entries, dims, 0, scale, reduced)
    struct = [nb if red else 4 * nb for nb, red in zip(dims, reduced)]
    p = RealSDP(struct, np.array(b_vals, dtype=float), c_entries, a_entries)
    mode = "naive" if naive else "economical"
    rmap = RealizationMap(mode, tuple(dims), tuple(kinds), tuple(reduced))
    return p, rmap


def to_real_economical(q: QSDP):
    """Realize with free PSD blocks and selector-expanded rows (no structure rows)."""
    return _realize(q, naive=False)


def to_real_naive(q: QSDP):
    """Realize on Y = Lambda(H) with explicit layout-pinning equality rows."""
    return _realize(q, naive=True)


def recover_quaternion(sol: Solution, rmap: RealizationMap) -> list:
    """Assemble the quaternion blocks H* from a solved realization.

    Economical solutions read the selectors on X; naive ones on Y/4.  The
    result is Hermitian by construction (the R selector of a symmetric
    matrix is symmetric, the others antisymmetric) and PSD up to solver
    tolerance whenever the real solution is.
    """
    if sol.X is None:
        raise ValueError(f"solution carries no primal blocks (status {sol.status!r})")
    if len(sol.X) != len(rmap.q_dims):
        raise ValueError(f"expected {len(rmap.q_dims)} real blocks, got {len(sol.X)}")
    scale = 0.25 if rmap.mode == "naive" else 1.0
    reduced = rmap.reduced or (False,) * len(rmap.q_dims)
    out = []
    for x, nb, red in zip(sol.X, rmap.q_dims, reduced):
        x = np.asarray(x, dtype=float)
        if red:
            if x.shape != (nb, nb):
                raise ValueError(f"expected a {nb} x {nb} real block, got {x.shape}")
            out.append(QMatrix.from_parts((x + x.T) / 2.0))
            continue
        if x.shape != (4 * nb, 4 * nb):
            raise ValueError(f"expected a {4 * nb} x {4 * nb} real block, got {x.shape}")

        def bl(t, s):
            return x[t * nb : (t + 1) * nb, s * nb : (s + 1) * nb]

        r = (bl(0, 0) + bl(1, 1) + bl(2, 2) + bl(3, 3)) * scale
        i = (bl(1, 0) - bl(1, 0).T + bl(3, 2) - bl(3, 2).T) * scale
        j = (bl(2, 0) - bl(2, 0).T - bl(3, 1) + bl(3, 1).T) * scale
        k = (bl(3, 0) - bl(3, 0).T + bl(2, 1) - bl(2, 1).T) * scale
        out.append(QMatrix.from_parts(r, i, j, k))
    return out


def adjoint_apply(q: QSDP, y) -> list:
    """The adjoint herm(sum_u A_u y_u) of the constraint map, per block.

    Satisfies <adjoint(y), H>_R = sum_u Re(conj(y_u) A_u(H)) for every
    Hermitian H, which is how the dual multipliers act on the primal side.
    """
    y = list(y)
    if len(y) != len(q.constraints):
        raise ValueError(f"{len(y)} multipliers for {len(q.constraints)} constraints")
    acc = [QMatrix.zeros(b.dim, b.dim) for b in q.blocks]
    for yu, con in zip(y, q.constraints):
        for bi, r, c, a in con.entries:
            acc[bi].set_entry(r, c, acc[bi][r, c] + a * yu)
    return [hermitian_part(m) for m in acc]
