import io
import json

import numpy as np
import pytest

from ergodec import serialize
from ergodec.cli import main
from ergodec.decomposition import ergodic_decompose
from ergodec.oracle import generate_planted

LAPLACIAN = {"space": {"ids": ["a", "b"], "weights": [1, 1]}, "matrix": [[1, -1], [-1, 1]]}
TWO_BLOCKS = {
    "space": {"ids": ["a", "b", "c", "d"], "weights": [0.5, 0.5, 1.5, 1.5]},
    "edges": [["a", "b", 1], ["c", "d", 1]],
}


def run(*argv, env=None):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def write(tmp_path):
    def _write(name, doc):
        path = tmp_path / name
        path.write_text(doc if isinstance(doc, str) else serialize.dumps(doc))
        return path

    return _write


def planted_files(write, seed=3):
    inst = generate_planted(2, [2, 3], seed=seed)
    return (
        write("form1.json", serialize.form_to_json(inst.form1)),
        write("form2.json", serialize.form_to_json(inst.form2)),
        write("iso.json", serialize.iso_to_json(inst.iso)),
        inst,
    )


def test_validate_ok(write):
    code, out, _ = run("validate", write("f.json", LAPLACIAN))
    assert code == 0
    assert json.loads(out)["passed"] is True


def test_validate_sign_violation(write):
    bad = dict(LAPLACIAN, matrix=[[1, 1], [1, 1]])
    code, out, _ = run("validate", write("f.json", bad))
    assert code == 1
    report = json.loads(out)
    assert report["sign_violation_at"] in (["a", "b"], ["b", "a"])


def test_truncated_json(write):
    code, _, err = run("validate", write("f.json", '{"space": {"ids": ['))
    assert code == 2
    assert "line 1" in json.loads(err)["message"]


def test_decompose_two_blocks(write):
    code, out, _ = run("decompose", write("f.json", TWO_BLOCKS))
    assert code == 0
    doc = json.loads(out)
    assert doc["labels"] == {"a": 0, "b": 0, "c": 1, "d": 1}
    assert doc["nu"] == [0.5, 0.5]


def test_decompose_irreducible(write):
    code, out, _ = run("decompose", write("f.json", LAPLACIAN))
    assert code == 0 and len(json.loads(out)["components"]) == 1


def test_decompose_invalid_form(write):
    code, _, err = run("decompose", write("f.json", dict(LAPLACIAN, matrix=[[1, 1], [1, 1]])))
    assert code == 1
    assert json.loads(err)["error"] == "ValidationError"


def test_factorize_and_adjoint(write):
    code, out, _ = run("factorize", write("m.json", {"matrix": [[0, 2], [1, 0]]}))
    assert code == 0
    assert json.loads(out) == {"h": {"0": 2.0, "1": 1.0}, "tau": {"0": "1", "1": "0"}}

    dom = write("d.json", {"ids": ["a", "b"], "weights": [1, 4]})
    cod = write("c.json", {"ids": ["p", "q"], "weights": [1, 1]})
    iso = write("i.json", {"h": {"p": 2, "q": 1}, "tau": {"p": "b", "q": "a"}})
    code, out, _ = run("adjoint", iso, "--domain", dom, "--codomain", cod)
    assert code == 0
    np.testing.assert_allclose(json.loads(out)["matrix"], [[0, 1], [0.5, 0]])


def test_factorize_names_row(write):
    code, _, err = run("factorize", write("m.json", {"matrix": [[1, 1], [0, 1]]}))
    assert code == 1
    assert "row 0" in json.loads(err)["message"]


def test_identity_intertwine(write):
    f = write("f.json", LAPLACIAN)
    iso = write("i.json", {"h": {"a": 1, "b": 1}, "tau": {"a": "a", "b": "b"}})
    code, out, _ = run("intertwine", f, f, iso)
    assert code == 0
    report = json.loads(out)
    assert report["passed"] and report["settings"]["times"] == [0.1, 1.0, 10.0]


def test_pipeline_round_trip(write, tmp_path):
    f1, f2, iso, inst = planted_files(write)
    dec = tmp_path / "dec.json"
    di = tmp_path / "di.json"
    assert run("decompose", f1, "--out", dec)[0] == 0
    assert run("decompose-intertwiner", dec, f2, iso, "--form1", f1, "--out", di)[0] == 0
    code, out, _ = run("assemble", di)
    assert code == 0
    assert out == iso.read_text()


def test_match_h_is_nu_ratio(write, tmp_path):
    f = write("f.json", TWO_BLOCKS)
    d1, d2 = tmp_path / "u.json", tmp_path / "m.json"
    run("decompose", f, "--out", d1)
    run("decompose", f, "--nu-mode", "mass", "--out", d2)
    code, out, _ = run("match", d1, d2)
    assert code == 0
    doc = json.loads(out)
    nu1 = json.loads(d1.read_text())["nu"]
    nu2 = json.loads(d2.read_text())["nu"]
    assert doc["rho"] == {"0": 0, "1": 1}
    assert [doc["h"][str(i)] for i in range(2)] == pytest.approx([b / a for a, b in zip(nu1, nu2)])


def test_tolerance_from_environment(write, monkeypatch):
    f = write("f.json", LAPLACIAN)
    monkeypatch.setenv("ERGODEC_TOL", "1e-6")
    code, out, _ = run("validate", f)
    assert json.loads(out)["settings"]["tolerance"] == 1e-6
    code, out, _ = run("validate", f, "--tol", "1e-3")
    assert json.loads(out)["settings"]["tolerance"] == 1e-3
    monkeypatch.setenv("ERGODEC_TOL", "oops")
    assert run("validate", f)[0] == 2


def test_non_unitary_iso_is_hypothesis_failure(write, tmp_path):
    f1, f2, iso, inst = planted_files(write)
    dec = tmp_path / "dec.json"
    run("decompose", f1, "--out", dec)
    doc = json.loads(iso.read_text())
    doc["h"] = {k: 3 * v for k, v in doc["h"].items()}
    code, _, err = run("decompose-intertwiner", dec, f2, write("bad.json", doc))
    assert code == 1
    assert json.loads(err)["error"] == "HypothesisError"


def test_pretty_output(write):
    code, out, _ = run("validate", write("f.json", LAPLACIAN), "--pretty")
    assert code == 0 and out.startswith("{\n  ")


MALFORMED = {
    "truncated": '{"space": ',
    "not_object": "[1, 2, 3]",
    "nan": '{"space": {"ids": ["a"], "weights": [NaN]}, "matrix": [[1]]}',
    "missing_space": '{"matrix": [[1]]}',
    "string_weight": '{"space": {"ids": ["a"], "weights": ["x"]}, "matrix": [[1]]}',
    "negative_weight": '{"space": {"ids": ["a"], "weights": [-1]}, "matrix": [[1]]}',
    "duplicate_ids": '{"space": {"ids": ["a", "a"], "weights": [1, 1]}, "matrix": [[1, 0], [0, 1]]}',
    "ragged": '{"space": {"ids": ["a", "b"], "weights": [1, 1]}, "matrix": [[1, 0], [0]]}',
    "wrong_shape": '{"space": {"ids": ["a", "b"], "weights": [1, 1]}, "matrix": [[1]]}',
    "unknown_edge_point": '{"space": {"ids": ["a"], "weights": [1]}, "edges": [["a", "z", 1]]}',
    "bool_entry": '{"space": {"ids": ["a"], "weights": [1]}, "matrix": [[true]]}',
    "binary": "\udcff",
}


@pytest.mark.parametrize("name", sorted(MALFORMED))
def test_malformed_corpus_exits_2(tmp_path, name):
    path = tmp_path / "in.json"
    path.write_bytes(MALFORMED[name].encode("utf-8", "surrogateescape"))
    code, out, err = run("validate", path)
    assert code == 2, err
    assert out == ""
    assert json.loads(err)["error"] == "input"


@pytest.mark.parametrize(
    "argv",
    [
        ["validate", "/nonexistent/file.json"],
        ["frobnicate"],
        [],
        ["validate", "x.json", "--times", "0,1"],
        ["validate", "x.json", "--tol", "-1"],
        ["adjoint", "x.json"],
    ],
)
def test_bad_invocations_exit_2(argv):
    assert run(*argv)[0] == 2
