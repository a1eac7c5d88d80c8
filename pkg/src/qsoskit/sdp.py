"""Real block-diagonal SDP container, SDPA files, and the Clarabel backend.

The problem form is

    maximize   <C, X>
    subject to <A_k, X> = b_k   (k = 1..m),   X block-PSD,

with signed block sizes: +d is a dense PSD block, -d a diagonal
(componentwise nonnegative) block.  Matrices are stored as sparse entry
lists (block, i, j, value) over the upper triangle with 0-based indices;
an off-diagonal entry stands for the symmetric pair, so its contribution
to <A, X> is 2 * value * X[i, j].

The solver hands Clarabel the dual problem

    minimize   b^T y   subject to   Z = sum_k y_k A_k - C,   Z block-PSD,

as an LMI in y: per cone, rows are the scaled upper triangle (svec) with
A_cl[:, k] = -svec(A_k) and b_cl = -svec(C).  Clarabel then returns y as
its variable x, svec(X) as the cone dual z, and svec(Z) as the slack s.

`solve` optionally runs a second polishing pass over the optimal face:
holding b^T y <= opt + eps as an extra scalar cone row, it minimizes a
generic linear functional <R, sum_k y_k A_k> induced by a caller-chosen
direction R on one block, which lands y on an extreme point of the face
(used to force rank-one moment matrices when the optimum is non-unique).
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

_SQRT2 = np.sqrt(2.0)

# the backend keeps a dense scaling block per PSD cone (svec-triangle squared
# doubles); refuse cones whose scaling alone would exhaust the machine
_WORKSPACE_LIMIT_BYTES = int(
    os.environ.get("QSOSKIT_WORKSPACE_BYTES", 2 * 1024**3)
)


@dataclass
class RealSDP:
    """max <C,X> s.t. <A_k,X> = b_k over signed diagonal blocks."""

    block_struct: list
    b: np.ndarray
    c_entries: list = field(default_factory=list)
    a_entries: list = field(default_factory=list)

    @property
    def m(self) -> int:
        return len(self.b)


@dataclass
class Solution:
    status: str  # optimal | near_optimal | infeasible_or_unbounded | numerical_failure
    X: list | None
    y: np.ndarray | None
    Z: list | None
    primal_obj: float
    dual_obj: float
    residuals: dict


@dataclass
class PolishSpec:
    """Extreme-point polishing request for `solve`.

    `direction` is a symmetric matrix (PSD block) or vector (diagonal block)
    on block `block`; `slack` is the relative width of the optimality cap.
    """

    block: int
    direction: np.ndarray
    slack: float = 1e-7


def validate(p: RealSDP) -> list:
    """Return a list of findings (empty means structurally sound).

    Structural defects (bad shapes, out-of-range indices, non-finite data)
    make the problem unusable and cause `solve`/`export_sdpa` to raise.
    Findings prefixed with 'note:' are advisory — duplicate entries (which
    every consumer sums) and constraints with no entries at all — and do
    not block solving.
    """
    findings = []
    if not p.block_struct:
        findings.append("empty block structure")
    for t, d in enumerate(p.block_struct):
        if int(d) == 0:
            findings.append(f"block {t}: zero-sized block")
    if len(p.a_entries) != len(p.b):
        findings.append(f"{len(p.a_entries)} constraint matrices for {len(p.b)} right-hand sides")
    if not np.all(np.isfinite(np.asarray(p.b, dtype=float))):
        findings.append("non-finite right-hand side")
    seen = set()
    for which, entries in [("C", p.c_entries)] + [
        (f"A_{k+1}", ent) for k, ent in enumerate(p.a_entries)
    ]:
        if which != "C" and not entries:
            findings.append(f"note: {which}: constraint has no entries")
        for blk, i, j, val in entries:
            if not 0 <= blk < len(p.block_struct):
                findings.append(f"{which}: block index {blk} out of range")
                continue
            d = abs(int(p.block_struct[blk]))
            if not (0 <= i <= j < d):
                findings.append(f"{which}: entry ({i},{j}) outside upper triangle of size {d}")
                continue
            if p.block_struct[blk] < 0 and i != j:
                findings.append(f"{which}: off-diagonal entry ({i},{j}) in diagonal block {blk}")
            if not np.isfinite(val):
                findings.append(f"{which}: non-finite value at block {blk} entry ({i},{j})")
            key = (which, blk, i, j)
            if key in seen:
                findings.append(f"note: {which}: duplicate entry at block {blk} ({i},{j}); consumers sum duplicates")
            seen.add(key)
    return findings


def _require_valid(p: RealSDP) -> None:
    """Raise ValueError on the structural (non-advisory) findings."""
    fatal = [f for f in validate(p) if not f.startswith("note:")]
    if fatal:
        raise ValueError("; ".join(fatal))


def _block_rows(block_struct) -> list:
    """svec row counts per block."""
    return [d * (d + 1) // 2 if d > 0 else -d for d in block_struct]


def _tri_index(i: int, j: int) -> int:
    """Position of upper-triangle entry (i <= j) in column-stacked svec order."""
    return j * (j + 1) // 2 + i


def _svec_rows(block_struct, entries):
    """Yield (row, svec_value) pairs for an entry list."""
    offsets = np.cumsum([0] + _block_rows(block_struct))
    for blk, i, j, val in entries:
        if block_struct[blk] > 0:
            row = offsets[blk] + _tri_index(i, j)
            yield row, (val * _SQRT2 if i != j else val)
        else:
            yield offsets[blk] + i, val


def _unpack_blocks(block_struct, vec):
    """Inverse of svec over all blocks: dense symmetric matrices / vectors."""
    out = []
    pos = 0
    for d in block_struct:
        if d > 0:
            seg = vec[pos : pos + d * (d + 1) // 2]
            mat = np.zeros((d, d))
            t = 0
            for j in range(d):
                for i in range(j + 1):
                    if i == j:
                        mat[i, j] = seg[t]
                    else:
                        mat[i, j] = mat[j, i] = seg[t] / _SQRT2
                    t += 1
            out.append(mat)
            pos += d * (d + 1) // 2
        else:
            out.append(np.array(vec[pos : pos - d]))
            pos += -d
    return out


def _dense_blocks(block_struct, entries, out=None, scale=1.0):
    """Accumulate an entry list into dense symmetric blocks."""
    if out is None:
        out = [np.zeros((d, d)) if d > 0 else np.zeros(-d) for d in block_struct]
    for blk, i, j, val in entries:
        if block_struct[blk] > 0:
            out[blk][i, j] += scale * val
            if i != j:
                out[blk][j, i] += scale * val
        else:
            out[blk][i] += scale * val
    return out


def entry_inner(block_struct, entries, blocks) -> float:
    """<A, X> for an entry list against dense blocks."""
    total = 0.0
    for blk, i, j, val in entries:
        if block_struct[blk] > 0:
            total += val * blocks[blk][i, j] * (2.0 if i != j else 1.0)
        else:
            total += val * blocks[blk][i]
    return total


def _min_eig(block_struct, blocks) -> float:
    worst = np.inf
    for d, blk in zip(block_struct, blocks):
        if d > 0:
            worst = min(worst, float(np.linalg.eigvalsh(blk)[0]))
        else:
            worst = min(worst, float(np.min(blk)) if len(blk) else np.inf)
    return worst


def _fro(blocks) -> float:
    return max((float(np.linalg.norm(b)) for b in blocks), default=0.0)


def _clarabel_raw(block_struct, c_entries, a_entries, q_vec, tol):
    """Run Clarabel on min q^T y s.t. sum_k y_k A_k - C block-PSD."""
    import clarabel

    m = len(a_entries)
    nrows = sum(_block_rows(block_struct))
    rows, cols, vals = [], [], []
    for k, entries in enumerate(a_entries):
        for row, sval in _svec_rows(block_struct, entries):
            rows.append(row)
            cols.append(k)
            vals.append(-sval)
    a_cl = sp.coo_matrix((vals, (rows, cols)), shape=(nrows, m)).tocsc()
    b_cl = np.zeros(nrows)
    for row, sval in _svec_rows(block_struct, c_entries):
        b_cl[row] -= sval
    cones = []
    for d in block_struct:
        if d > 0:
            cones.append(clarabel.PSDTriangleConeT(d))
        else:
            cones.append(clarabel.NonnegativeConeT(-d))
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    solver = clarabel.DefaultSolver(sp.csc_matrix((m, m)), np.asarray(q_vec, dtype=float), a_cl, b_cl, cones, settings)
    raw = solver.solve()
    status = _map_status(raw.status, clarabel)
    if status in ("optimal", "near_optimal"):
        return status, np.array(raw.x), np.array(raw.z), np.array(raw.s)
    return status, None, None, None


def _map_status(status, clarabel) -> str:
    ss = clarabel.SolverStatus
    if status == ss.Solved:
        return "optimal"
    if status == ss.AlmostSolved:
        return "near_optimal"
    if status in (ss.PrimalInfeasible, ss.DualInfeasible, ss.AlmostPrimalInfeasible, ss.AlmostDualInfeasible):
        return "infeasible_or_unbounded"
    return "numerical_failure"


def _assemble_solution(p: RealSDP, status, y, x_blocks, z_blocks) -> Solution:
    primal = entry_inner(p.block_struct, p.c_entries, x_blocks)
    dual = float(np.dot(p.b, y))
    bscale = 1.0 + float(np.max(np.abs(p.b))) if len(p.b) else 1.0
    eq = max(
        (abs(entry_inner(p.block_struct, ent, x_blocks) - bk) for ent, bk in zip(p.a_entries, p.b)),
        default=0.0,
    )
    x_viol = max(0.0, -_min_eig(p.block_struct, x_blocks))
    lin = _dense_blocks(p.block_struct, p.c_entries, scale=-1.0)
    for yk, ent in zip(y, p.a_entries):
        _dense_blocks(p.block_struct, ent, out=lin, scale=float(yk))
    for d_lin, z_blk in zip(lin, z_blocks):
        d_lin -= z_blk
    c_scale = 1.0 + _fro(_dense_blocks(p.block_struct, p.c_entries)) + _fro(z_blocks)
    residuals = {
        "primal_feas": max(eq / bscale, x_viol / (1.0 + _fro(x_blocks))),
        "dual_feas": max(_fro(lin) / c_scale, max(0.0, -_min_eig(p.block_struct, z_blocks)) / (1.0 + _fro(z_blocks))),
        "gap": abs(primal - dual) / (1.0 + abs(primal)),
    }
    return Solution(status, x_blocks, y, z_blocks, primal, dual, residuals)


def solve(p: RealSDP, tol: float = 1e-8, polish: PolishSpec | None = None) -> Solution:
    """Solve with the Clarabel backend (the only one shipped).

    Honors QSOSKIT_SOLVER, which must name 'clarabel' if set.  With a
    `polish` spec, a second pass pins the objective to the first-pass
    optimum and drives y to an extreme point of the optimal face; the primal
    block matrices are kept from the first pass.
    """
    backend = os.environ.get("QSOSKIT_SOLVER", "clarabel").strip().lower()
    if backend != "clarabel":
        raise ValueError(f"unsupported solver backend {backend!r}; this build ships 'clarabel' only")
    _require_valid(p)
    if p.m == 0:
        # no constraints: the optimum is 0 at X = 0 when C has no positive
        # direction, and the problem is unbounded otherwise (Clarabel cannot
        # take a zero-variable model)
        c_blocks = _dense_blocks(p.block_struct, p.c_entries)
        top = -_min_eig(p.block_struct, [-blk for blk in c_blocks])
        if top <= tol:
            x0 = [np.zeros((d, d)) if d > 0 else np.zeros(-d) for d in p.block_struct]
            return _assemble_solution(p, "optimal", np.zeros(0), x0, [-blk for blk in c_blocks])
        nan = float("nan")
        return Solution(
            "infeasible_or_unbounded", None, None, None, nan, nan,
            {"primal_feas": nan, "dual_feas": nan, "gap": nan},
        )
    for d in p.block_struct:
        if d > 0 and 8 * (d * (d + 1) // 2) ** 2 > _WORKSPACE_LIMIT_BYTES:
            raise ValueError(
                f"a PSD block of dimension {d} needs more scaling workspace than the "
                f"{_WORKSPACE_LIMIT_BYTES >> 30} GiB the backend can be given here; shrink the "
                "basis, decompose by sparsity, or restrict real-coefficient data to real Gram "
                "blocks"
            )
    status, y, z_vec, s_vec = _clarabel_raw(p.block_struct, p.c_entries, p.a_entries, p.b, tol)
    if y is None:
        nan = float("nan")
        return Solution(status, None, None, None, nan, nan, {"primal_feas": nan, "dual_feas": nan, "gap": nan})
    x_blocks = _unpack_blocks(p.block_struct, z_vec)
    z_blocks = _unpack_blocks(p.block_struct, s_vec)
    sol = _assemble_solution(p, status, y, x_blocks, z_blocks)
    if polish is None:
        return sol
    return _polish(p, sol, polish, tol)


def _polish(p: RealSDP, sol: Solution, spec: PolishSpec, tol: float) -> Solution:
    d = p.block_struct[spec.block]
    direction = np.asarray(spec.direction, dtype=float)
    q2 = np.zeros(p.m)
    for k, entries in enumerate(p.a_entries):
        for blk, i, j, val in entries:
            if blk != spec.block:
                continue
            if d > 0:
                q2[k] += val * direction[i, j] * (2.0 if i != j else 1.0)
            else:
                q2[k] += val * direction[i]
    cap = sol.dual_obj + spec.slack * (1.0 + abs(sol.dual_obj))
    extra = len(p.block_struct)
    bs2 = list(p.block_struct) + [-1]
    c2 = list(p.c_entries) + [(extra, 0, 0, -cap)]
    a2 = [list(ent) + [(extra, 0, 0, -float(bk))] for ent, bk in zip(p.a_entries, p.b)]
    status2, y2, _, s2 = _clarabel_raw(bs2, c2, a2, q2, tol)
    if y2 is None:
        return sol
    z2 = _unpack_blocks(p.block_struct, s2[: sum(_block_rows(p.block_struct))])
    return _assemble_solution(p, sol.status, y2, sol.X, z2)


# ---------------------------------------------------------------------------
# SDPA sparse format (.dat-s); our problem form is exactly its dual side,
# so F_0 = C, F_k = A_k and the cost vector is b.


def _canonical_entries(p: RealSDP):
    merged: dict = {}
    for k, entries in [(0, p.c_entries)] + [(k + 1, ent) for k, ent in enumerate(p.a_entries)]:
        for blk, i, j, val in entries:
            key = (k, blk, i, j)
            merged[key] = merged.get(key, 0.0) + float(val)
    return sorted((k, *rest, v) for (k, *rest), v in merged.items() if v != 0.0)


def export_sdpa(p: RealSDP, sink=None) -> str:
    """Serialize deterministically; identical problems export byte-identically.

    `sink` may be a file-like object (written to), a filesystem path, or
    None; the rendered text is returned in every case.
    """
    _require_valid(p)
    lines = [
        str(p.m),
        str(len(p.block_struct)),
        " ".join(str(int(d)) for d in p.block_struct),
        " ".join("%.16e" % float(v) for v in p.b),
    ]
    for k, blk, i, j, val in _canonical_entries(p):
        lines.append(f"{k} {blk + 1} {i + 1} {j + 1} {'%.16e' % val}")
    text = "\n".join(lines) + "\n"
    if sink is not None:
        if hasattr(sink, "write"):
            sink.write(text)
        else:
            with open(sink, "w") as fh:
                fh.write(text)
    return text


_NUM = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eEdD][+-]?\d+)?$")


def _tokenize(text: str):
    toks = []
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped[0] in '*"':
            continue
        for tok in re.sub(r"[{}(),]", " ", stripped).split():
            if _NUM.match(tok):
                toks.append((tok.replace("d", "e").replace("D", "E"), lineno))
    return toks


class _TokenStream:
    def __init__(self, toks):
        self.toks = toks
        self.pos = 0
        self.last_line = 1

    def take(self, what: str) -> tuple:
        if self.pos >= len(self.toks):
            raise ValueError(f"line {self.last_line}: unexpected end of file, expected {what}")
        tok, line = self.toks[self.pos]
        self.pos += 1
        self.last_line = line
        return tok, line

    def take_int(self, what: str) -> int:
        tok, line = self.take(what)
        val = float(tok)
        if val != int(val):
            raise ValueError(f"line {line}: expected integer {what}, got {tok}")
        return int(val)

    def take_float(self, what: str) -> float:
        tok, _ = self.take(what)
        return float(tok)

    def remaining(self) -> int:
        return len(self.toks) - self.pos


def import_sdpa(source) -> RealSDP:
    """Parse .dat-s content, tolerating braces, commas, and comment lines.

    `source` may be the file content as a string, a file-like object, or a
    filesystem path (os.PathLike).
    """
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, os.PathLike):
        with open(source) as fh:
            text = fh.read()
    else:
        text = source
    stream = _TokenStream(_tokenize(text))
    if not stream.toks:
        raise ValueError("line 1: unexpected end of file, expected integer mDIM")
    m = stream.take_int("mDIM")
    nblocks = stream.take_int("nBLOCK")
    if m < 0 or nblocks <= 0:
        raise ValueError(f"line {stream.last_line}: invalid dimensions m={m}, nblocks={nblocks}")
    block_struct = [stream.take_int(f"size of block {t + 1}") for t in range(nblocks)]
    if any(d == 0 for d in block_struct):
        raise ValueError(f"line {stream.last_line}: zero-sized block")
    b = np.array([stream.take_float(f"b[{k + 1}]") for k in range(m)])
    c_entries: list = []
    a_entries: list = [[] for _ in range(m)]
    while stream.remaining():
        if stream.remaining() < 5:
            raise ValueError(f"line {stream.toks[-1][1]}: incomplete entry (need 'k blk i j value')")
        k = stream.take_int("matrix index")
        blk = stream.take_int("block index")
        i = stream.take_int("row index")
        j = stream.take_int("column index")
        val = stream.take_float("entry value")
        line = stream.last_line
        if not 0 <= k <= m:
            raise ValueError(f"line {line}: matrix index {k} outside 0..{m}")
        if not 1 <= blk <= nblocks:
            raise ValueError(f"line {line}: block index {blk} outside 1..{nblocks}")
        d = abs(block_struct[blk - 1])
        if not (1 <= i <= d and 1 <= j <= d):
            raise ValueError(f"line {line}: entry ({i},{j}) outside block of size {d}")
        if i > j:
            i, j = j, i
        if block_struct[blk - 1] < 0 and i != j:
            raise ValueError(f"line {line}: off-diagonal entry in diagonal block {blk}")
        target = c_entries if k == 0 else a_entries[k - 1]
        target.append((blk - 1, i - 1, j - 1, val))
    return RealSDP(block_struct, b, c_entries, a_entries)
