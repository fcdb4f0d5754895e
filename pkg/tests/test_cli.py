import hashlib
import subprocess
import sys

import numpy as np
import pytest

from pqt.cli import main
from pqt.vecio import read_vecs

SMALL = ["--k1", "4", "--k2", "4", "--w", "2", "--p-line", "8", "--table-len", "512", "--iters", "10"]


def _sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture
def data(tmp_path):
    db, q = tmp_path / "db.fvecs", tmp_path / "q.fvecs"
    assert main(["synth", "--out", str(db), "--queries", str(q), "--n", "1500", "--nq", "60",
                 "--dim", "16", "--blobs", "6", "--sigma", "8", "--seed", "3"]) == 0
    return tmp_path, db, q


def test_end_to_end(data, capsys):
    tmp, db, q = data
    idx = tmp / "i.pqt"
    before = {p: _sha(p) for p in (db, q)}
    assert main(["build", "--db", str(db), "--out", str(idx), *SMALL]) == 0
    capsys.readouterr()
    assert main(["bench", "--index", str(idx), "--db", str(db), "--queries", str(q), "--out", str(tmp / "r.json")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("recall@1=")
    assert "ms_reranking=" in out and "split_traversal=" in out
    assert (tmp / "r.json").exists()
    assert before == {p: _sha(p) for p in (db, q)}


def test_query_writes_k_columns(data):
    tmp, db, q = data
    idx = tmp / "i.pqt"
    assert main(["build", "--db", str(db), "--out", str(idx), *SMALL]) == 0
    out = tmp / "res.ivecs"
    assert main(["query", "--index", str(idx), "--db", str(db), "--queries", str(q), "--out", str(out), "--k", "7"]) == 0
    ids = read_vecs(out)
    assert ids.ids.shape == (60, 7)
    dists = read_vecs(tmp / "res.dist.fvecs")
    assert dists.data.shape == (60, 7)
    assert np.all(np.diff(dists.data, axis=1) >= 0)


def test_query_without_db_notes_and_pads(data, capsys):
    tmp, db, q = data
    idx = tmp / "i.pqt"
    assert main(["build", "--db", str(db), "--out", str(idx), *SMALL, "--budget", "3"]) == 0
    out = tmp / "res.ivecs"
    assert main(["query", "--index", str(idx), "--queries", str(q), "--out", str(out), "--k", "5"]) == 0
    assert "re-ranking disabled" in capsys.readouterr().err
    ids = read_vecs(out).ids
    assert np.all(ids[:, 3:] == -1)


def test_bench_reproducible(data, capsys):
    tmp, db, q = data
    runs = []
    for threads in ("1", "3"):
        idx = tmp / f"i{threads}.pqt"
        assert main(["build", "--db", str(db), "--out", str(idx), *SMALL, "--threads", threads]) == 0
        capsys.readouterr()
        assert main(["bench", "--index", str(idx), "--db", str(db), "--queries", str(q), "--threads", threads]) == 0
        lines = capsys.readouterr().out.splitlines()
        runs.append([ln for ln in lines if not ln.startswith(("ms_", "split_"))])
    assert runs[0] == runs[1]
    assert (tmp / "i1.pqt").read_bytes() == (tmp / "i3.pqt").read_bytes()


def test_train_then_build(data):
    tmp, db, q = data
    cb = tmp / "cb.pqt"
    assert main(["train", "--train", str(db), "--out", str(cb), *SMALL]) == 0
    assert main(["build", "--db", str(db), "--index", str(cb), "--out", str(tmp / "a.pqt")]) == 0
    assert main(["build", "--db", str(db), "--out", str(tmp / "b.pqt"), *SMALL]) == 0
    a = _query_ids(tmp, "a.pqt", db, q)
    b = _query_ids(tmp, "b.pqt", db, q)
    assert np.array_equal(a, b)


def _query_ids(tmp, name, db, q):
    out = tmp / f"{name}.ivecs"
    assert main(["query", "--index", str(tmp / name), "--db", str(db), "--queries", str(q), "--out", str(out)]) == 0
    return read_vecs(out).ids


def test_gt_command(data):
    tmp, db, q = data
    out = tmp / "gt.ivecs"
    assert main(["gt", "--db", str(db), "--queries", str(q), "--out", str(out), "--k", "4"]) == 0
    gt = read_vecs(out)
    assert gt.ids.shape == (60, 4)
    X, Y = read_vecs(db).vectors.astype(np.float64), read_vecs(q).vectors.astype(np.float64)
    assert gt.ids[0, 0] == np.argmin(((X - Y[0]) ** 2).sum(axis=1))


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    [],
    ["build", "--db", "missing.fvecs"],
    ["build", "--db", "missing.fvecs", "--out", "x.pqt", "--w", "40"],
    ["build", "--db", "missing.fvecs", "--out", "x.pqt", "--p-line", "3"],
    ["build", "--db", "missing.fvecs", "--out", "x.pqt", "--index", "a", "--train", "b"],
    ["query", "--index", "i", "--queries", "q", "--out", "o", "--k", "0"],
])
def test_usage_errors_exit_1(argv, capsys):
    assert main(argv) == 1
    assert capsys.readouterr().err.strip()


def test_data_errors_exit_2(data, capsys):
    tmp, db, q = data
    assert main(["build", "--db", str(tmp / "nope.fvecs"), "--out", str(tmp / "x.pqt")]) == 2
    bad = tmp / "bad.fvecs"
    bad.write_bytes(db.read_bytes()[:-3])
    assert main(["build", "--db", str(bad), "--out", str(tmp / "x.pqt")]) == 2
    assert "offset" in capsys.readouterr().err
    junk = tmp / "junk.pqt"
    junk.write_bytes(b"garbage!" * 4)
    assert main(["query", "--index", str(junk), "--queries", str(q), "--out", str(tmp / "o.ivecs")]) == 2
    other = tmp / "other.fvecs"
    assert main(["synth", "--out", str(other), "--n", "10", "--dim", "8"]) == 0
    assert main(["gt", "--db", str(db), "--queries", str(other), "--out", str(tmp / "g.ivecs")]) == 2
    assert "pqt" in capsys.readouterr().err


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "pqt.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "synth" in res.stdout
