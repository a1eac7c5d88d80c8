"""Command-line front end: generate, solve, export, and benchmark.

Subcommands
-----------
gen     write a seeded instance to a JSON file
solve   build the relaxation for an instance file, solve it, report bounds
        (optionally against the first-order real baseline or the naive
        realization, and optionally with rank-one extraction)
export  write the realized real SDP in SDPA sparse format (.dat-s)
bench   run seeded trials of a family across methods and tabulate opt/time

Instance JSON schema
--------------------
{
  "n": int,
  "terms":  [{"coeff": [r,i,j,k], "alpha": [..], "tail": [signed ints]}, ..],
  "gram":   {"basis_kind": "vars_only"|"mixed", "k": int,
             "Q": [[[r,i,j,k], ..], ..]}            (optional),
  "ineqs":  [[term, ..], ..],
  "eqs":    [[term, ..], ..],
  "meta":   {..}
}
Terms are canonical representatives (tail letters +i for q_i, -i for its
conjugate; alpha counts extracted |q_i|^2 factors).  A self-adjoint term
contributes Re(coeff) * word; any other term contributes 2 Re(coeff * word),
its conjugate pair's other half being implicit.  When "gram" is present the
objective is reconstructed as the Gram pair over the stated standard basis;
"terms" always holds the expanded polynomial.

Exit status is 0 iff every requested solve ends optimal or near-optimal;
otherwise a machine-readable {"error": ...} JSON line is printed and the
status is 1.  The QSOSKIT_SOLVER environment variable selects the conic
backend; only "clarabel" is compiled in.
"""

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

from .apps import FAMILIES, Instance, InstanceSpec, generate
from .extract import (
    assemble_moment,
    certify,
    is_gauge_invariant,
    moment_rank_report,
    rank_one_extract,
    read_point,
)
from .hquat import QMatrix, Quaternion
from .qpoly import SymPoly
from .relax import (
    QPOP,
    RelaxOptions,
    build_qsos,
    build_rsos1,
    build_sparse_qsos,
    build_strengthened,
    degree_floor,
    objective_poly,
    real_gram_restrict,
)
from .realize import to_real_economical, to_real_naive
from .sdp import export_sdpa, import_sdpa, solve
from .words import Word, basis, canonical_rep, is_self_adjoint, normalize

OK_STATUSES = ("optimal", "near_optimal")
BENCH_METHODS = ("qsos", "qsos_strengthened", "rsos1", "sparse")


class CliError(Exception):
    def __init__(self, kind: str, message: str, **extra):
        super().__init__(message)
        self.payload = {"type": kind, "message": message, **extra}


def _check_backend() -> None:
    backend = os.environ.get("QSOSKIT_SOLVER", "").strip()
    if backend and backend != "clarabel":
        raise CliError("backend", f"unknown solver backend {backend!r}; compiled in: clarabel")


# ---------------------------------------------------------------------------
# instance (de)serialization


def _quat_list(q: Quaternion) -> list:
    return [q.r, q.i, q.j, q.k]


def _term_obj(w: Word, c: Quaternion) -> dict:
    return {"coeff": _quat_list(c), "alpha": list(w.alpha), "tail": list(w.tail)}


def _poly_terms(f: SymPoly) -> list:
    return [_term_obj(w, f.terms[w]) for w in sorted(f.terms, key=Word.sort_key)]


def _term_from_obj(n: int, obj: dict):
    coeff = Quaternion(*(float(v) for v in obj["coeff"]))
    seq = []
    for i, a in enumerate(obj["alpha"], start=1):
        seq += [i, -i] * int(a)
    seq += [int(t) for t in obj["tail"]]
    w = normalize(seq, n)
    rep, conjed = canonical_rep(w)
    if conjed or rep != w:
        raise ValueError(f"term {obj['tail']} is not in canonical orientation")
    if is_self_adjoint(w) and abs(coeff.i) + abs(coeff.j) + abs(coeff.k) > 0.0:
        raise ValueError("self-adjoint terms must carry real coefficients")
    return w, coeff


def _poly_from_terms(n: int, items: list) -> SymPoly:
    terms = {}
    for obj in items:
        w, c = _term_from_obj(n, obj)
        if w in terms:
            raise ValueError("duplicate term in instance file")
        terms[w] = c
    return SymPoly(n, terms)


def _standard_gram(objective, n: int):
    """(basis_kind, k, Q) when the Gram words are a full standard basis."""
    if isinstance(objective, SymPoly):
        return None
    words, q = objective
    words = tuple(words)
    k = max((w.degree for w in words), default=0)
    for kind in ("vars_only", "mixed"):
        if words == tuple(basis(n, k, kind)):
            return kind, k, q
    return None


def _jsonable(value):
    if isinstance(value, Quaternion):
        return _quat_list(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if hasattr(value, "item"):  # numpy scalars
        return value.item()
    return value


def instance_to_obj(inst: Instance) -> dict:
    pop = inst.pop
    obj = {
        "n": pop.n,
        "terms": _poly_terms(objective_poly(pop)),
        "ineqs": [_poly_terms(g) for g in pop.ineqs],
        "eqs": [_poly_terms(h) for h in pop.eqs],
        "meta": _jsonable(
            {
                "family": inst.spec.family,
                "seed": inst.spec.seed,
                "extra": inst.spec.extra,
                **inst.meta,
            }
        ),
    }
    std = _standard_gram(pop.objective, pop.n)
    if std is not None:
        kind, k, q = std
        obj["gram"] = {
            "basis_kind": kind,
            "k": k,
            "Q": [[_quat_list(q[r, c]) for c in range(q.cols)] for r in range(q.rows)],
        }
    return obj


def obj_to_pop(obj: dict):
    n = int(obj["n"])
    objective = _poly_from_terms(n, obj.get("terms", []))
    if "gram" in obj:
        g = obj["gram"]
        words = basis(n, int(g["k"]), g["basis_kind"])
        rows = g["Q"]
        if len(rows) != len(words) or any(len(r) != len(words) for r in rows):
            raise ValueError("gram matrix shape does not match the stated basis")
        q = QMatrix.zeros(len(words), len(words))
        for r, row in enumerate(rows):
            for c, quad in enumerate(row):
                q.set_entry(r, c, Quaternion(*(float(v) for v in quad)))
        objective = (tuple(words), q)
    ineqs = [_poly_from_terms(n, t) for t in obj.get("ineqs", [])]
    eqs = [_poly_from_terms(n, t) for t in obj.get("eqs", [])]
    return QPOP(n, objective, ineqs, eqs), obj.get("meta", {})


def render_instance(inst: Instance) -> str:
    return json.dumps(instance_to_obj(inst), sort_keys=True, indent=2) + "\n"


def load_instance(path: str):
    with open(path) as fh:
        return obj_to_pop(json.load(fh))


# ---------------------------------------------------------------------------
# relaxation plumbing shared by solve/export/bench


def _parse_orders(text, pop) -> list:
    if text is None:
        return [degree_floor(pop)]
    if ".." in text:
        lo, hi = text.split("..", 1)
        orders = list(range(int(lo), int(hi) + 1))
    else:
        orders = [int(text)]
    if not orders or any(d < 1 for d in orders):
        raise ValueError(f"bad relaxation order {text!r}")
    return orders


def _resolve_basis(flag, meta) -> str:
    if flag:
        return {"q": "vars_only", "mixed": "mixed"}[flag]
    kind = meta.get("basis_kind", "vars_only")
    return kind if kind in ("vars_only", "mixed") else "vars_only"


def build_realized(pop, d, basis_kind="vars_only", sparse=False, strengthen=False, real_gram=False):
    """QSDP + economical realization for one relaxation order."""
    opts = RelaxOptions(d=d, basis_kind=basis_kind, sparse=sparse, strengthen=strengthen)
    if strengthen:
        q = build_strengthened(pop, opts)
    elif sparse:
        q = build_sparse_qsos(pop, opts)
    else:
        q = build_qsos(pop, opts)
    if real_gram:
        q = real_gram_restrict(q)
    r, rmap = to_real_economical(q)
    return q, r, rmap


def _extract_record(pop, q, sol, rmap, tol) -> dict:
    words = list(next(b.words for b in q.blocks if b.words is not None))
    if is_gauge_invariant(pop):
        # A global right unit factor leaves the problem unchanged, so the
        # degree-one moments are undetermined at the optimum; extract from the
        # principal submatrix over degree-one words, where the optimum is
        # rank one whenever the minimizer is unique up to the gauge.
        degree_one = [w for w in words if w.degree == 1]
        if degree_one:
            words = degree_one
    m = assemble_moment(q, sol, rmap, basis=words)
    rank, ratios = moment_rank_report(m, tol=1e-6)
    record = {"rank": rank, "trailing_ratio": ratios[1] if len(ratios) > 1 else 0.0}
    try:
        vec = rank_one_extract(m, tol=1e-5)
    except ValueError as err:
        record.update(candidate=None, note=str(err))
        return record
    if vec is None:
        record["candidate"] = None
        return record
    point = read_point(vec, words, pop.n)
    cert = certify(pop, sol.primal_obj, point, tol=max(tol, 1e-6))
    record.update(
        candidate=[_quat_list(v) for v in point],
        objective_at_candidate=cert.objective_at_candidate,
        gap=cert.gap,
        residual_max=max(cert.constraint_residuals, default=0.0),
        tight=cert.tight,
    )
    return record


def _solve_row(pop, meta, d, args) -> dict:
    kind = _resolve_basis(args.basis, meta)
    t0 = time.perf_counter()
    q, r, rmap = build_realized(
        pop, d, kind, sparse=args.sparse, strengthen=args.strengthen, real_gram=args.real_gram
    )
    sol = solve(r, tol=args.tol)
    row = {
        "order": d,
        "basis": kind,
        "status": sol.status,
        "bound": sol.primal_obj,
        "m": r.m,
        "blocks": [int(b) for b in r.block_struct],
        "time_s": time.perf_counter() - t0,
    }
    if args.compare == "rsos1":
        t1 = time.perf_counter()
        ref = solve(build_rsos1(pop), tol=args.tol)
        row["compare"] = {
            "method": "rsos1",
            "status": ref.status,
            "bound": ref.primal_obj,
            "diff": abs(sol.primal_obj - ref.primal_obj),
            "time_s": time.perf_counter() - t1,
        }
    elif args.compare == "naive-realization":
        t1 = time.perf_counter()
        rn, _ = to_real_naive(q)
        ref = solve(rn, tol=args.tol)
        row["compare"] = {
            "method": "naive-realization",
            "status": ref.status,
            "bound": ref.primal_obj,
            "diff": abs(sol.primal_obj - ref.primal_obj),
            "time_s": time.perf_counter() - t1,
        }
    if args.extract:
        if args.sparse:
            raise CliError("usage", "extraction needs the dense relaxation (drop --sparse)")
        if sol.status in OK_STATUSES:
            row["extraction"] = _extract_record(pop, q, sol, rmap, args.tol)
    return row


def _emit_solve(rows, fmt, out) -> None:
    if fmt == "json":
        out.write(json.dumps({"rows": rows}, sort_keys=True) + "\n")
        return
    if fmt == "csv":
        cols = ["order", "basis", "status", "bound", "m", "time_s"]
        extra = []
        if any("compare" in r for r in rows):
            extra += ["compare_bound", "compare_diff"]
        if any("extraction" in r for r in rows):
            extra += ["extract_rank", "extract_gap", "extract_tight"]
        w = csv.writer(out)
        w.writerow(cols + extra)
        for r in rows:
            line = [r[c] for c in cols]
            if "compare_bound" in extra:
                cmp_rec = r.get("compare", {})
                line += [cmp_rec.get("bound", ""), cmp_rec.get("diff", "")]
            if "extract_rank" in extra:
                ext = r.get("extraction", {})
                line += [ext.get("rank", ""), ext.get("gap", ""), ext.get("tight", "")]
            w.writerow(line)
        return
    for r in rows:
        out.write(
            f"order={r['order']} basis={r['basis']} status={r['status']} "
            f"bound={r['bound']:.10g} m={r['m']} time={r['time_s']:.3f}s\n"
        )
        if "compare" in r:
            c = r["compare"]
            out.write(
                f"  {c['method']}: status={c['status']} bound={c['bound']:.10g} "
                f"diff={c['diff']:.3e}\n"
            )
        if "extraction" in r:
            e = r["extraction"]
            if e.get("candidate") is None:
                out.write(f"  extract: rank={e['rank']} no rank-one candidate\n")
            else:
                out.write(
                    f"  extract: rank={e['rank']} gap={e['gap']:.3e} "
                    f"residual={e['residual_max']:.3e} tight={e['tight']}\n"
                )


# ---------------------------------------------------------------------------
# subcommands


def _spec_from_args(args) -> InstanceSpec:
    if args.family not in FAMILIES:
        raise CliError("usage", f"unknown family {args.family!r}; choose one of {FAMILIES}")
    extra = {}
    if args.clique is not None:
        extra["clique"] = args.clique
    if args.classes is not None:
        extra["classes"] = args.classes
    if args.counts is not None:
        extra["counts"] = tuple(int(v) for v in args.counts.split(","))
    if args.lam is not None:
        extra["lam"] = args.lam
    if args.p is not None:
        extra["p"] = args.p
    if args.noise is not None:
        extra["noise"] = args.noise
    if args.constraint is not None:
        extra["constraint"] = args.constraint
    return InstanceSpec(args.family, args.n, args.seed, extra)


def cmd_gen(args) -> int:
    inst = generate(_spec_from_args(args))
    text = render_instance(inst)
    if args.out == "-":
        sys.stdout.write(text)
        return 0
    path = args.out or f"{args.family}_n{args.n}_s{args.seed}.json"
    with open(path, "w") as fh:
        fh.write(text)
    print(path)
    return 0


def cmd_solve(args) -> int:
    pop, meta = load_instance(args.instance)
    orders = _parse_orders(args.order, pop)
    if args.jobs > 1 and len(orders) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(lambda d: _solve_row(pop, meta, d, args), orders))
    else:
        rows = [_solve_row(pop, meta, d, args) for d in orders]
    _emit_solve(rows, args.format, sys.stdout)
    bad = [r for r in rows if r["status"] not in OK_STATUSES]
    bad += [r for r in rows if r.get("compare", {}).get("status", "optimal") not in OK_STATUSES]
    if bad:
        print(json.dumps({"error": {"type": "solve_failed", "rows": bad}}, sort_keys=True))
        return 1
    return 0


def cmd_export(args) -> int:
    if args.format != "sdpa":
        raise CliError("usage", "export writes SDPA sparse files; use --format sdpa")
    pop, meta = load_instance(args.instance)
    d = _parse_orders(args.order, pop)[0]
    kind = _resolve_basis(args.basis, meta)
    _, r, _ = build_realized(
        pop, d, kind, sparse=args.sparse, strengthen=args.strengthen, real_gram=args.real_gram
    )
    stem = os.path.splitext(os.path.basename(args.instance))[0]
    path = args.out or f"{stem}_d{d}.dat-s"
    export_sdpa(r, path)
    print(path)
    return 0


def _bench_methods(text) -> list:
    methods = [m.strip() for m in text.split(",") if m.strip()]
    for m in methods:
        if m not in BENCH_METHODS:
            raise CliError("usage", f"unknown method {m!r}; choose from {BENCH_METHODS}")
    return methods


def _bench_cell(pop, meta, method, d, tol):
    t0 = time.perf_counter()
    try:
        if method == "rsos1":
            sol = solve(build_rsos1(pop), tol=tol)
        else:
            _, r, _ = build_realized(
                pop,
                d,
                _resolve_basis(None, meta),
                sparse=(method == "sparse"),
                strengthen=(method == "qsos_strengthened"),
            )
            sol = solve(r, tol=tol)
        return {"status": sol.status, "opt": sol.primal_obj, "time_s": time.perf_counter() - t0}
    except ValueError as err:
        return {"status": "error", "opt": float("nan"), "time_s": 0.0, "note": str(err)}


def cmd_bench(args) -> int:
    methods = _bench_methods(args.methods)
    base = _spec_from_args(args)
    specs = [
        InstanceSpec(base.family, base.n, base.seed + t, dict(base.extra))
        for t in range(args.trials)
    ]
    insts = [generate(s) for s in specs]  # generation excluded from timing

    def run(idx):
        inst = insts[idx]
        d = _parse_orders(args.order, inst.pop)[0]
        return [
            {"trial": idx, "seed": specs[idx].seed, "method": m}
            | _bench_cell(inst.pop, inst.meta, m, d, args.tol)
            for m in methods
        ]

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            rows = [cell for group in pool.map(run, range(len(insts))) for cell in group]
    else:
        rows = [cell for idx in range(len(insts)) for cell in run(idx)]
    if args.format == "csv":
        w = csv.writer(sys.stdout)
        w.writerow(["trial", "seed", "method", "status", "opt", "time_s"])
        for r in rows:
            w.writerow([r["trial"], r["seed"], r["method"], r["status"], r["opt"], r["time_s"]])
    else:
        for r in rows:
            print(
                f"trial={r['trial']} seed={r['seed']} method={r['method']:17s} "
                f"status={r['status']:12s} opt={r['opt']:< 14.8g} time={r['time_s']:.3f}s"
            )
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_spec_flags(sub) -> None:
    sub.add_argument("--family", required=True, help="instance family")
    sub.add_argument("--n", type=int, required=True, help="number of quaternion variables")
    sub.add_argument("--seed", type=int, default=0, help="64-bit instance seed")
    sub.add_argument("--clique", type=int, help="clique size (ne5/ne6)")
    sub.add_argument("--classes", type=int, help="class count (qmmc)")
    sub.add_argument("--counts", help="comma-separated per-class sample counts (qmmc)")
    sub.add_argument("--lam", type=float, help="scatter trade-off (qmmc)")
    sub.add_argument("--p", type=float, help="edge probability (sync)")
    sub.add_argument("--noise", type=float, help="measurement noise level (sync)")
    sub.add_argument("--constraint", choices=["ball", "norm"], help="variant override (ne1_quat)")


def _add_relax_flags(sub) -> None:
    sub.add_argument("--order", help="relaxation order d, or an a..b range")
    sub.add_argument("--basis", choices=["q", "mixed"], help="Gram basis (default: instance meta)")
    sub.add_argument("--sparse", action="store_true", help="clique-decomposed relaxation")
    sub.add_argument("--strengthen", action="store_true", help="add conjugate-prefixed blocks")
    sub.add_argument("--real-gram", action="store_true", help="restrict Gram blocks to real entries")
    sub.add_argument("--tol", type=float, default=1e-8, help="solver tolerance")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qsoskit", description=__doc__.split("\n")[0])
    sp = ap.add_subparsers(dest="command", required=True)

    gen = sp.add_parser("gen", help="generate an instance JSON file")
    _add_spec_flags(gen)
    gen.add_argument("--out", "-o", help="output path ('-' for stdout)")
    gen.set_defaults(func=cmd_gen)

    sv = sp.add_parser("solve", help="solve an instance file")
    sv.add_argument("instance", help="instance JSON path")
    _add_relax_flags(sv)
    sv.add_argument("--compare", choices=["rsos1", "naive-realization"])
    sv.add_argument("--extract", action="store_true", help="attempt rank-one extraction")
    sv.add_argument("--format", choices=["text", "json", "csv"], default="text")
    sv.add_argument("--jobs", type=int, default=1, help="parallel workers across orders")
    sv.set_defaults(func=cmd_solve)

    ex = sp.add_parser("export", help="export the realized SDP as SDPA sparse")
    ex.add_argument("instance", help="instance JSON path")
    _add_relax_flags(ex)
    ex.add_argument("--format", choices=["text", "json", "csv", "sdpa"], default="sdpa")
    ex.add_argument("--out", "-o", help="output path (default: <instance>_d<order>.dat-s)")
    ex.set_defaults(func=cmd_export)

    bn = sp.add_parser("bench", help="seeded trials across methods (reporting only)")
    _add_spec_flags(bn)
    _add_relax_flags(bn)
    bn.add_argument("--trials", type=int, default=3, help="number of seeded trials")
    bn.add_argument(
        "--methods", default="qsos", help="comma list from qsos,qsos_strengthened,rsos1,sparse"
    )
    bn.add_argument("--format", choices=["text", "csv"], default="text")
    bn.add_argument("--jobs", type=int, default=1, help="parallel workers across trials")
    bn.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        _check_backend()
        return args.func(args)
    except CliError as err:
        print(json.dumps({"error": err.payload}, sort_keys=True))
        return 1
    except (ValueError, OSError, json.JSONDecodeError) as err:
        print(json.dumps({"error": {"type": type(err).__name__, "message": str(err)}}, sort_keys=True))
        return 1


if __name__ == "__main__":
    sys.exit(main())
