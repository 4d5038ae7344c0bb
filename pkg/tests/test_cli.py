import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from qnc.cli import main
from qnc.data import bundled_iris, load_csv, write_csv, write_idx


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def vectors(tmp_path):
    x = tmp_path / "x.json"
    y = tmp_path / "y.txt"
    x.write_text("[0.1, 0.5, 0.2, 0.7]")
    y.write_text("0.3, 0.1\n0.4 0.2\n")
    return x, y


@pytest.fixture
def iris_csv(tmp_path):
    path = tmp_path / "iris.csv"
    write_csv(bundled_iris(), path, "species")
    return path


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_loader_compile(vectors, tmp_path, capsys):
    x, _ = vectors
    angles, circuit = tmp_path / "a.json", tmp_path / "c.json"
    code, out, _ = run(["loader", "compile", "--x", x, "--emit-angles", angles,
                        "--emit-circuit", circuit], capsys)
    assert code == 0
    tree = json.loads(angles.read_text())
    assert tree["dimension"] == 4 and len(tree["theta"]) == 3
    c = json.loads(circuit.read_text())
    assert c["qubits"] == 4 and c["metadata"]["rbs_count"] == 3
    assert c["layers"][0] == [{"kind": "X", "qubits": [0]}]
    code, out, _ = run(["loader", "compile", "--x", x, "--optimized"], capsys)
    assert code == 0 and json.loads(out)["metadata"]["native_tqg_count"] is None


def test_distance_same_vector(vectors, capsys):
    x, _ = vectors
    code, out, _ = run(["distance", "--x", x, "--y", x, "--shots", 200, "--seed", 1], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["estimate"]["l_hat"] == 0.0
    assert report["seed"] == 1 and report["config"]["shots"] == 200


def test_distance_reproducible(vectors, tmp_path, capsys):
    x, y = vectors
    outs = []
    for i in range(2):
        out, shots = tmp_path / f"d{i}.json", tmp_path / f"s{i}.json"
        args = ["distance", "--x", x, "--y", y, "--shots", 1000, "--noise", "0.03,0.96",
                "--seed", 5, "--out", out]
        if i == 0:
            args += ["--emit-shots", shots]
        assert run(args, capsys)[0] == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    record = json.loads((tmp_path / "s0.json").read_text())
    assert record["total"] == 1000 and record["mode"] == "full-readout"


def test_distance_exact_and_unmitigated(vectors, capsys):
    x, y = vectors
    code, out, _ = run(["distance", "--x", x, "--y", y, "--exact"], capsys)
    xv, yv = np.array([0.1, 0.5, 0.2, 0.7]), np.array([0.3, 0.1, 0.4, 0.2])
    assert json.loads(out)["estimate"]["l_hat"] == pytest.approx(np.linalg.norm(xv - yv), abs=1e-7)
    code, out, _ = run(["distance", "--x", x, "--y", y, "--shots", 100, "--unmitigated"], capsys)
    assert code == 0 and json.loads(out)["estimate"]["mitigated"] is False


@pytest.mark.parametrize("extra", [["--shots", "5", "--exact"], ["--exact", "--mitigated", "--unmitigated"], []])
def test_exclusive_flags_rejected(vectors, extra, capsys):
    x, y = vectors
    with pytest.raises(SystemExit) as exc:
        main(["distance", "--x", str(x), "--y", str(y)] + extra)
    assert exc.value.code == 2


def test_emit_shots_needs_shots(vectors, tmp_path, capsys):
    x, y = vectors
    code, _, err = run(["distance", "--x", x, "--y", y, "--exact", "--emit-shots", tmp_path / "s"], capsys)
    assert code == 1 and "--emit-shots" in err


def test_classify_iris_exact(iris_csv, tmp_path, capsys):
    out = tmp_path / "r.json"
    before = digest(iris_csv)
    code, _, _ = run(["classify", "--train", iris_csv, "--label-column", "species", "--exact",
                      "--out", out], capsys)
    assert code == 0
    report = json.loads(out.read_text())
    assert report["classical"]["truth"]["accuracy"] == pytest.approx(0.927, abs=0.007)
    assert report["quantum"]["agreement_with_classical"] == 1.0
    assert report["seed"] == 0 and report["config"]["exact"] is True
    assert digest(iris_csv) == before


def test_classify_workers_do_not_change_output(iris_csv, tmp_path, capsys, monkeypatch):
    texts = []
    for workers in ("1", "4"):
        monkeypatch.setenv("QNC_WORKERS", workers)
        out = tmp_path / f"r{workers}.json"
        args = ["classify", "--train", iris_csv, "--label-column", "species", "--shots", 200,
                "--noise", "0.03,0.96", "--seed", 2, "--out", out]
        assert run(args, capsys)[0] == 0
        texts.append(out.read_bytes())
    assert texts[0] == texts[1]


def test_synth_gen_deterministic(tmp_path, capsys):
    a, b, meta = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "m.json"
    assert run(["synth-gen", "--k", 4, "--d", 8, "--seed", 7, "--out", a, "--meta", meta], capsys)[0] == 0
    assert run(["synth-gen", "--k", 4, "--d", 8, "--seed", 7, "--out", b], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    ds = load_csv(a)
    assert ds.points.shape == (40, 8)
    assert len(json.loads(meta.read_text())["provenance"]["centroids"]) == 4


def test_error_exit_codes(tmp_path, vectors, capsys):
    code, _, err = run(["classify", "--train", tmp_path / "missing.csv", "--exact"], capsys)
    assert code == 3 and "missing.csv" in err
    bad = tmp_path / "bad.csv"
    bad.write_text("a,label\nfoo,x\n")
    code, _, err = run(["classify", "--train", bad, "--exact"], capsys)
    assert code == 4 and "row 2" in err
    code, _, err = run(["synth-gen", "--k", 50, "--d", 2, "--min-sep", 1.5], capsys)
    assert code == 5 and "infeasible" in err
    zero = tmp_path / "zero.json"
    zero.write_text("[0, 0]")
    code, _, err = run(["distance", "--x", zero, "--y", zero, "--exact"], capsys)
    assert code == 1


def test_starvation_exit_code(tmp_path, capsys):
    x = tmp_path / "x.json"
    x.write_text(json.dumps([0.3] * 8))
    codes = {run(["distance", "--x", x, "--y", x, "--shots", 1, "--noise", "0,1e-9",
                  "--seed", s], capsys)[0] for s in range(5)}
    assert 6 in codes and codes <= {0, 6}


def test_pca_and_ingest(tmp_path, capsys):
    src = tmp_path / "s.csv"
    assert run(["synth-gen", "--k", 3, "--d", 8, "--seed", 1, "--out", src], capsys)[0] == 0
    out, meta = tmp_path / "p.csv", tmp_path / "p.json"
    assert run(["pca", "--input", src, "--q", 3, "--out", out, "--meta", meta], capsys)[0] == 0
    assert load_csv(out, pad=False).dimension == 3
    assert json.loads(meta.read_text())["kept"] == 3

    sub = tmp_path / "sub.csv"
    assert run(["ingest", "--csv", src, "--per-class", 4, "--seed", 2, "--out", sub], capsys)[0] == 0
    assert np.bincount(load_csv(sub).labels).tolist() == [4, 4, 4]

    images = np.random.default_rng(0).integers(0, 256, (6, 2, 2), dtype=np.uint8)
    write_idx(images, np.array([0, 1, 0, 1, 0, 1]), tmp_path / "i", tmp_path / "l", compress=True)
    code, out_text, _ = run(["ingest", "--images", tmp_path / "i", "--labels", tmp_path / "l"], capsys)
    assert code == 0 and out_text.splitlines()[0] == "x0,x1,x2,x3,label"
    assert len(out_text.splitlines()) == 7
    assert run(["ingest", "--images", tmp_path / "i"], capsys)[0] == 1


def test_report_and_noise_fit(tmp_path, capsys):
    pairs = tmp_path / "pairs.csv"
    assert run(["report", "--noise", "0.03,0.96", "--seed", 0, "--out", pairs], capsys)[0] == 0
    lines = pairs.read_text().splitlines()
    assert lines[0] == "c_sim,c_exp,n,m,mitigated" and len(lines) == 41
    code, out, _ = run(["noise-fit", "--pairs", pairs], capsys)
    fit = json.loads(out)
    assert code == 0 and set(fit) >= {"slope", "intercept", "fidelity"}
    assert fit["fidelity"] == pytest.approx(0.96, abs=0.01) and fit["m"] == 30
    assert run(["noise-fit", "--pairs", pairs, "--m", 12], capsys)[0] == 1

    bare = tmp_path / "bare.csv"
    bare.write_text("c_sim,c_exp\n0,0.1\n1,0.4\n")
    code, out, _ = run(["noise-fit", "--pairs", bare, "--m", 30], capsys)
    assert json.loads(out)["fidelity"] == pytest.approx(0.3 ** (1 / 30))
    assert run(["noise-fit", "--pairs", bare], capsys)[0] == 1

    mitigated = tmp_path / "mit.csv"
    assert run(["report", "--estimator", "mitigated", "--count", 5, "--out", mitigated], capsys)[0] == 0
    assert run(["noise-fit", "--pairs", mitigated], capsys)[0] == 1


def test_console_entry_point(vectors):
    x, _ = vectors
    proc = subprocess.run([sys.executable, "-m", "qnc.cli", "distance", "--x", str(x), "--y", str(x),
                           "--exact"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["estimate"]["l_hat"] == 0.0
