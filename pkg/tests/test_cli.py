import csv
import io
import json
import math
import shutil
import subprocess
import sys

import pytest

from qsoskit.cli import load_instance, main, render_instance
from qsoskit.apps import InstanceSpec, generate
from qsoskit.hquat import Quaternion
from qsoskit.relax import objective_poly
from qsoskit.sdp import import_sdpa, solve


def run_cli(capsys, *argv):
    rc = main(list(argv))
    return rc, capsys.readouterr().out


def gen_file(capsys, tmp_path, family, n, seed, *flags):
    path = tmp_path / f"{family}_{n}_{seed}.json"
    rc, out = run_cli(
        capsys, "gen", "--family", family, "--n", str(n), "--seed", str(seed),
        "--out", str(path), *flags,
    )
    assert rc == 0
    assert out.strip() == str(path)
    return path


def fingerprint(pop):
    polys = [objective_poly(pop)] + list(pop.ineqs) + list(pop.eqs)
    return tuple(tuple(sorted(p.terms.items())) for p in polys)


def write_instance(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj) + "\n")
    return path


def term(coeff, alpha, tail):
    return {"coeff": list(coeff), "alpha": list(alpha), "tail": list(tail)}


def ball_terms(n):
    out = [term([1.0, 0, 0, 0], [0] * n, [])]
    for i in range(n):
        alpha = [0] * n
        alpha[i] = 1
        out.append(term([-1.0, 0, 0, 0], alpha, []))
    return out


def test_gen_is_byte_identical(capsys, tmp_path):
    a = gen_file(capsys, tmp_path, "ne1_ball", 3, 7)
    b = tmp_path / "again.json"
    rc, _ = run_cli(
        capsys, "gen", "--family", "ne1_ball", "--n", "3", "--seed", "7", "--out", str(b)
    )
    assert rc == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_stdout_and_unknown_family(capsys):
    rc, out = run_cli(capsys, "gen", "--family", "ne1_ball", "--n", "2", "--out", "-")
    assert rc == 0
    obj = json.loads(out)
    assert obj["n"] == 2
    assert obj["meta"]["family"] == "ne1_ball"

    rc, out = run_cli(capsys, "gen", "--family", "nope", "--n", "2", "--out", "-")
    assert rc == 1
    err = json.loads(out)["error"]
    assert err["type"] == "usage"
    assert "nope" in err["message"]


def test_instance_roundtrip_preserves_polynomials(capsys, tmp_path):
    path = gen_file(capsys, tmp_path, "ne1_ball", 3, 5)
    pop, meta = load_instance(str(path))
    direct = generate(InstanceSpec("ne1_ball", 3, 5))
    assert fingerprint(pop) == fingerprint(direct.pop)
    assert meta["family"] == "ne1_ball"
    assert meta["seed"] == 5
    # the degree-one standard-basis objective travels as a Gram pair
    assert "gram" in json.loads(path.read_text())
    assert not isinstance(pop.objective, type(objective_poly(pop)))

    # qmmc's Gram words lack the empty word: terms-only serialization
    qpath = gen_file(capsys, tmp_path, "qmmc", 3, 1)
    assert "gram" not in json.loads(qpath.read_text())
    qpop, _ = load_instance(str(qpath))
    qdirect = generate(InstanceSpec("qmmc", 3, 1))
    assert fingerprint(qpop) == fingerprint(qdirect.pop)


def test_render_matches_cli_output(capsys, tmp_path):
    path = gen_file(capsys, tmp_path, "ne3_norm", 2, 3)
    inst = generate(InstanceSpec("ne3_norm", 2, 3))
    assert path.read_text() == render_instance(inst)


def test_gen_sync_records_ground_truth(capsys, tmp_path):
    path = gen_file(capsys, tmp_path, "sync", 6, 1, "--noise", "0.0", "--p", "0.4")
    obj = json.loads(path.read_text())
    meta = obj["meta"]
    assert meta["noise"] == 0.0
    assert len(meta["truth"]) == 6
    assert all(len(t) == 4 for t in meta["truth"])
    assert meta["num_edges"] == len(meta["edges"])
    for t in meta["truth"]:
        assert math.hypot(*t) == pytest.approx(1.0, abs=1e-12)


def test_gen_clique_meta(capsys, tmp_path):
    path = gen_file(capsys, tmp_path, "ne5", 20, 2, "--clique", "5")
    meta = json.loads(path.read_text())["meta"]
    assert len(meta["cliques"]) == 4
    assert sorted(v for c in meta["cliques"] for v in c) == list(range(1, 21))


def test_solve_text_output(capsys, tmp_path):
    path = gen_file(capsys, tmp_path, "ne1_ball", 2, 0)
    rc, out = run_cli(capsys, "solve", str(path))
    assert rc == 0
    assert "order=1" in out
    assert "status=optimal" in out


def test_solve_compare_rsos1(capsys, tmp_path):
    path = gen_file(capsys, tmp_path, "ne1_norm", 3, 4)
    rc, out = run_cli(capsys, "solve", str(path), "--compare", "rsos1", "--format", "json")
    assert rc == 0
    (row,) = json.loads(out)["rows"]
    assert row["status"] == "optimal"
    cmp_rec = row["compare"]
    assert cmp_rec["method"] == "rsos1"
    assert cmp_rec["status"] in ("optimal", "near_optimal")
    assert cmp_rec["diff"] <= 1e-5 * (1 + abs(row["bound"]))


def test_solve_compare_naive_realization(capsys, tmp_path):
    path = gen_file(capsys, tmp_path, "ne1_quat", 2, 6)
    rc, out = run_cli(
        capsys, "solve", str(path), "--compare", "naive-realization", "--format", "json"
    )
    assert rc == 0
    (row,) = json.loads(out)["rows"]
    assert row["compare"]["diff"] <= 1e-6 * (1 + abs(row["bound"]))


def test_solve_extract_tight_on_handwritten_instance(capsys, tmp_path):
    # the stored term means 2 Re(a q1): min over the unit ball is -2|a|,
    # attained only at -conj(a)/|a|, so the moment optimum is rank one
    a = Quaternion(0.5, 0.2, -0.3, 0.6)
    obj = {
        "n": 1,
        "terms": [term([a.r, a.i, a.j, a.k], [0], [1])],
        "ineqs": [ball_terms(1)],
        "eqs": [],
        "meta": {},
    }
    path = write_instance(tmp_path, "linear_ball.json", obj)
    rc, out = run_cli(capsys, "solve", str(path), "--extract", "--format", "json")
    assert rc == 0
    (row,) = json.loads(out)["rows"]
    assert row["bound"] == pytest.approx(-2 * abs(a), abs=1e-7)
    ext = row["extraction"]
    assert ext["rank"] == 1
    assert ext["tight"] is True
    assert abs(ext["gap"]) <= 1e-6
    assert ext["residual_max"] <= 1e-6
    want = a.conj() * (-1.0 / abs(a))
    got = Quaternion(*ext["candidate"][0])
    assert abs(got - want) < 1e-4


def test_solve_extract_gauge_invariant_instance(capsys, tmp_path):
    path = gen_file(capsys, tmp_path, "sync", 4, 3, "--p", "0.4", "--noise", "0.0")
    meta = json.loads(path.read_text())["meta"]
    rc, out = run_cli(capsys, "solve", str(path), "--extract", "--format", "json")
    assert rc == 0
    (row,) = json.loads(out)["rows"]
    assert row["bound"] == pytest.approx(-meta["num_edges"], abs=1e-5)
    ext = row["extraction"]
    assert ext["rank"] == 1
    assert ext["tight"] is True
    assert len(ext["candidate"]) == 4


def test_loader_rejects_malformed_terms(capsys, tmp_path):
    base = {"n": 1, "ineqs": [], "eqs": [], "meta": {}}
    cases = [
        ("noncanon.json", [term([1.0, 0, 0, 0], [0], [-1])], "canonical"),
        (
            "dup.json",
            [term([1.0, 0, 0, 0], [0], [1]), term([0.5, 0, 0, 0], [0], [1])],
            "duplicate",
        ),
        ("imagsa.json", [term([0.0, 1.0, 0, 0], [1], [])], "real coefficients"),
    ]
    for name, terms, needle in cases:
        path = write_instance(tmp_path, name, {**base, "terms": terms})
        rc, out = run_cli(capsys, "solve", str(path))
        assert rc == 1
        err = json.loads(out)["error"]
        assert err["type"] == "ValueError"
        assert needle in err["message"]


def test_solve_failure_exit_code(capsys, tmp_path):
    # |q1|^2 + 1 = 0 is infeasible
    obj = {
        "n": 1,
        "terms": [term([1.0, 0, 0, 0], [0], [1])],
        "ineqs": [],
        "eqs": [[term([1.0, 0, 0, 0], [1], []), term([1.0, 0, 0, 0], [0], [])]],
        "meta": {},
    }
    path = write_instance(tmp_path, "infeasible.json", obj)
    rc, out = run_cli(capsys, "solve", str(path))
    assert rc == 1
    err = json.loads(out.strip().splitlines()[-1])["error"]
    assert err["type"] == "solve_failed"
    assert err["rows"][0]["status"] not in ("optimal", "near_optimal")


def test_order_range_and_default(capsys, tmp_path):
    path = gen_file(capsys, tmp_path, "ne3_ball", 1, 0)
    rc, out = run_cli(capsys, "solve", str(path), "--format", "json")
    assert rc == 0
    (row,) = json.loads(out)["rows"]
    assert row["order"] == 2  # quartic objective: the degree floor

    rc, out = run_cli(capsys, "solve", str(path), "--order", "2..3", "--format", "json")
    assert rc == 0
    rows = json.loads(out)["rows"]
    assert [r["order"] for r in rows] == [2, 3]
    assert rows[0]["bound"] <= rows[1]["bound"] + 1e-6 * (1 + abs(rows[0]["bound"]))

    # an order below the degree floor is a clean error, not a crash
    rc, out = run_cli(capsys, "solve", str(path), "--order", "1")
    assert rc == 1
    assert "degree floor" in json.loads(out)["error"]["message"]


def test_solve_jobs_matches_serial(capsys, tmp_path):
    path = gen_file(capsys, tmp_path, "ne3_norm", 1, 1)
    rc, serial = run_cli(capsys, "solve", str(path), "--order", "2..3", "--format", "json")
    assert rc == 0
    rc, parallel = run_cli(
        capsys, "solve", str(path), "--order", "2..3", "--format", "json", "--jobs", "2"
    )
    assert rc == 0
    srows = json.loads(serial)["rows"]
    prows = json.loads(parallel)["rows"]
    for s, p in zip(srows, prows):
        assert s["order"] == p["order"]
        assert s["bound"] == pytest.approx(p["bound"], abs=1e-9)


def test_sparse_extract_usage_error(capsys, tmp_path):
    path = gen_file(capsys, tmp_path, "ne5", 10, 0, "--clique", "5")
    rc, out = run_cli(capsys, "solve", str(path), "--sparse", "--extract")
    assert rc == 1
    err = json.loads(out)["error"]
    assert err["type"] == "usage"
    assert "dense" in err["message"]


def test_solve_csv_format(capsys, tmp_path):
    path = gen_file(capsys, tmp_path, "ne1_ball", 2, 2)
    rc, out = run_cli(capsys, "solve", str(path), "--compare", "rsos1", "--format", "csv")
    assert rc == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["order", "basis", "status", "bound", "m", "time_s", "compare_bound", "compare_diff"]
    assert rows[1][2] == "optimal"
    assert float(rows[1][7]) <= 1e-5 * (1 + abs(float(rows[1][3])))


def test_export_roundtrip(capsys, tmp_path):
    path = gen_file(capsys, tmp_path, "ne1_ball", 2, 9)
    out_path = tmp_path / "inst.dat-s"
    rc, out = run_cli(capsys, "export", str(path), "--out", str(out_path))
    assert rc == 0
    assert out.strip() == str(out_path)

    imported = import_sdpa(out_path)
    sol_imported = solve(imported, tol=1e-8)

    from qsoskit.cli import build_realized

    pop, meta = load_instance(str(path))
    _, r, _ = build_realized(pop, 1, "vars_only")
    sol_direct = solve(r, tol=1e-8)
    assert sol_imported.primal_obj == pytest.approx(sol_direct.primal_obj, abs=1e-7)

    # exporting the imported problem reproduces the file byte for byte
    from qsoskit.sdp import export_sdpa

    second = tmp_path / "again.dat-s"
    export_sdpa(imported, str(second))
    assert out_path.read_bytes() == second.read_bytes()


def test_export_rejects_other_formats(capsys, tmp_path):
    path = gen_file(capsys, tmp_path, "ne1_ball", 2, 9)
    rc, out = run_cli(capsys, "export", str(path), "--format", "csv")
    assert rc == 1
    assert json.loads(out)["error"]["type"] == "usage"


def test_bench_csv_reports_methods_and_errors(capsys):
    rc, out = run_cli(
        capsys, "bench", "--family", "ne1_ball", "--n", "2", "--seed", "3",
        "--trials", "2", "--methods", "qsos,rsos1", "--format", "csv",
    )
    assert rc == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 4
    assert {r["method"] for r in rows} == {"qsos", "rsos1"}
    by_trial = {}
    for r in rows:
        assert r["status"] in ("optimal", "near_optimal")
        by_trial.setdefault(r["trial"], {})[r["method"]] = float(r["opt"])
    for opts in by_trial.values():
        assert opts["qsos"] == pytest.approx(opts["rsos1"], abs=1e-5 * (1 + abs(opts["qsos"])))

    # a method that cannot handle the family reports an error row, exit 0
    rc, out = run_cli(
        capsys, "bench", "--family", "ne3_ball", "--n", "1", "--trials", "1",
        "--methods", "qsos,rsos1", "--format", "csv",
    )
    assert rc == 0
    rows = {r["method"]: r for r in csv.DictReader(io.StringIO(out))}
    assert rows["qsos"]["status"] == "optimal"
    assert rows["rsos1"]["status"] == "error"
    assert math.isnan(float(rows["rsos1"]["opt"]))


def test_bench_jobs_matches_serial(capsys):
    argv = [
        "bench", "--family", "ne1_norm", "--n", "2", "--seed", "1",
        "--trials", "2", "--methods", "qsos", "--format", "csv",
    ]
    rc, serial = run_cli(capsys, *argv)
    assert rc == 0
    rc, parallel = run_cli(capsys, *argv, "--jobs", "2")
    assert rc == 0
    srows = list(csv.DictReader(io.StringIO(serial)))
    prows = list(csv.DictReader(io.StringIO(parallel)))
    assert len(srows) == len(prows) == 2
    for s, p in zip(srows, prows):
        assert (s["trial"], s["seed"], s["method"], s["status"]) == (
            p["trial"], p["seed"], p["method"], p["status"],
        )
        assert float(s["opt"]) == pytest.approx(float(p["opt"]), abs=1e-9)


def test_backend_env_guard(capsys, tmp_path, monkeypatch):
    path = gen_file(capsys, tmp_path, "ne1_ball", 2, 0)
    monkeypatch.setenv("QSOSKIT_SOLVER", "sdpa")
    rc, out = run_cli(capsys, "solve", str(path))
    assert rc == 1
    err = json.loads(out)["error"]
    assert err["type"] == "backend"
    assert "clarabel" in err["message"]

    monkeypatch.setenv("QSOSKIT_SOLVER", "clarabel")
    rc, _ = run_cli(capsys, "solve", str(path))
    assert rc == 0


def test_module_and_console_entrypoints(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "qsoskit.cli", "gen", "--family", "ne1_ball", "--n", "2", "--out", "-"],
        capture_output=True, text=True,
    )
    assert res.returncode == 0
    assert json.loads(res.stdout)["n"] == 2

    exe = shutil.which("qsoskit")
    assert exe is not None
    res = subprocess.run([exe, "gen", "--family", "ne1_ball", "--n", "2", "--out", "-"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["n"] == 2
