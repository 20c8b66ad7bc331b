import json

import numpy as np
import pytest

from jsrcert import cli
from jsrcert.errors import DocumentError
from jsrcert.words import MatrixSet


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    report = json.loads(out) if out.strip().startswith("{") else None
    return code, report, err


def write_doc(tmp_path, doc, name="set.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return str(path)


def base_doc():
    return {"schema_version": "1", "dim": 2,
            "matrices": [{"name": "A", "rows": [[1, 1], [0, 1]]},
                         {"name": "B", "rows": [["1", "0"], ["1", "1"]]}]}


# -- documents -------------------------------------------------------------------


def test_fmt_round_trips_doubles():
    rng = np.random.default_rng(0)
    for x in rng.normal(size=200) * 10.0 ** rng.integers(-30, 30, 200):
        assert float(cli.fmt(float(x))) == x
    assert cli.fmt(float("inf")) == "inf" and cli.fmt(float("nan")) == "nan"


def test_set_document_round_trip():
    rng = np.random.default_rng(1)
    m = MatrixSet(tuple(rng.normal(size=(3, 3)) for _ in range(3)))
    back, model = cli.parse_document(json.loads(json.dumps(cli.set_document(m))))
    assert model is None and back.names == m.names
    assert all(np.array_equal(x, y) for x, y in zip(back.members, m.members))
    assert cli.set_hash(back) == cli.set_hash(m)


@pytest.mark.parametrize("mutate,message", [
    (lambda d: d.update(schema_version="2"), "schema_version"),
    (lambda d: d.update(dim=3), "matrix A has 2 rows, expected 3"),
    (lambda d: d["matrices"][1]["rows"][1].append(4), "matrix B row 2 has 3 entries, expected 2"),
    (lambda d: d["matrices"][1].update(name="A"), "matrices[1].name: duplicate matrix name 'A'"),
    (lambda d: d["matrices"][0]["rows"][0].__setitem__(1, "x"), "matrix A row 1 column 2"),
    (lambda d: d["matrices"][0]["rows"][0].__setitem__(1, True), "expected a number"),
    (lambda d: d["matrices"][0]["rows"][0].__setitem__(1, "inf"), "non-finite"),
    (lambda d: d.update(matrices=[]), "matrices: expected a non-empty list"),
    (lambda d: d.update(kozyakin={"a": 1, "b": 1, "c": 1, "d": 2}), "do not match"),
    (lambda d: d.update(kozyakin={"a": 1, "b": 1, "c": 1}), "kozyakin.d: missing"),
])
def test_parse_errors_name_the_field(mutate, message):
    doc = base_doc()
    mutate(doc)
    with pytest.raises(DocumentError, match=message.replace("[", r"\[").replace("]", r"\]")):
        cli.parse_document(doc)


def test_kozyakin_block_alone_builds_the_pair():
    mset, model = cli.parse_document({"schema_version": "1", "kozyakin": {"a": "1", "b": 1, "c": 1, "d": 1}})
    assert model.alpha == 1.0 and np.array_equal(mset[1], [[1, 1], [0, 1]])


def test_json_syntax_error_has_position(tmp_path):
    path = write_doc(tmp_path, '{"schema_version": "1",\n  "dim": 2,,}')
    with pytest.raises(DocumentError, match=r"set.json:2:12:"):
        cli.load_document(path)


def test_fixtures_listed_and_loadable():
    names = cli.fixture_names()
    assert {"example2", "example6", "prop5", "kozyakin_unit"} <= set(names)
    for name in names:
        cli.parse_set(f"fixture:{name}")
    with pytest.raises(DocumentError, match="unknown fixture"):
        cli.load_document("fixture:nope")


# -- exit codes ---------------------------------------------------------------------


def test_bounds_complete_and_partial(tmp_path, capsys):
    code, rep, _ = run(["bounds", "fixture:example2", "--no-figures"], capsys)
    assert code == 0 and rep["body"]["status"] == "complete"
    b = rep["body"]["bounds"]
    assert float(b["upper"]) - float(b["lower"]) <= 1e-9
    rng = np.random.default_rng(5)
    hard = cli.set_document(MatrixSet(tuple(rng.uniform(-2, 2, (3, 3)) for _ in range(3))))
    code, rep, _ = run(["bounds", write_doc(tmp_path, hard), "--budget", "10", "--tol", "1e-12",
                        "--no-figures"], capsys)
    assert code == 2 and rep["body"]["status"] == "partial"


def test_invalid_inputs_exit_4(tmp_path, capsys):
    doc = base_doc()
    doc["matrices"][1]["rows"][1] = [1]
    code, rep, err = run(["bounds", write_doc(tmp_path, doc)], capsys)
    assert code == 4 and rep is None and "row 2 has 1 entries" in err
    code, _, err = run(["kozyakin", "--a", "1.5", "--b", "1", "--c", "1", "--d", "1"], capsys)
    assert code == 4 and "a <= 1 violated" in err
    code, _, err = run(["bounds", "fixture:example2", "--tol", "-1"], capsys)
    assert code == 4


def test_certify_exit_codes(capsys):
    code, rep, _ = run(["certify", "fixture:example2", "--no-figures"], capsys)
    assert code == 0
    crits = [c["criterion"] for c in rep["body"]["certificates"]]
    assert "Thm1" in crits
    code, rep, _ = run(["certify", "fixture:example6", "--no-figures"], capsys)
    assert code == 3 and rep["body"]["certificates"] == []


def test_certify_reports_inconsistency(monkeypatch, capsys):
    from jsrcert import criteria

    real = criteria.certify

    def corrupt(*a, **kw):
        certs = real(*a, **kw)
        for c in certs:
            c.value *= 1.5
        return certs

    monkeypatch.setattr(criteria, "certify", corrupt)
    code, rep, _ = run(["certify", "fixture:prop5", "--no-figures"], capsys)
    assert code == 1 and rep["body"]["status"] == "cross-validation failure"
    assert "Prop5" in rep["body"]["error"]


def test_kozyakin_command(capsys):
    code, rep, _ = run(["kozyakin", "--a", "1", "--b", "1", "--c", "1", "--d", "1",
                        "--horizon", "20000", "--no-figures"], capsys)
    assert code == 0
    cert = rep["body"]["certificates"][0]
    assert cert["criterion"] == "Kozyakin" and cert["word"] == [1, 2]
    code, rep, _ = run(["kozyakin", "--a", "0.5", "--b", "1", "--c", "2", "--d", "0.5",
                        "--alpha", "0.56", "--qmax", "4", "--horizon", "20000", "--no-figures"], capsys)
    assert code == 3 and rep["body"]["status"] == "undecided"
    code, _, err = run(["kozyakin", "--a", "1"], capsys)
    assert code == 4


def test_verify_round_trip_and_tampering(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert cli.main(["certify", "fixture:prop5", "--out", str(out), "--no-figures"]) == 0
    capsys.readouterr()
    code, rep, _ = run(["verify", str(out), "fixture:prop5"], capsys)
    assert code == 0 and rep["body"]["status"] == "verified"
    code, rep, _ = run(["verify", str(out), "fixture:example2"], capsys)
    assert code == 1 and any("set" in f for f in rep["body"]["failed"])
    report = json.loads(out.read_text())
    report["body"]["certificates"][0]["value"] = "0.9"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(report))
    code, rep, _ = run(["verify", str(bad), "fixture:prop5"], capsys)
    assert code == 1
    # a re-hashed forgery still fails on the re-run detector
    report["body_sha256"] = cli.sha256(report["body"])
    bad.write_text(json.dumps(report))
    code, rep, _ = run(["verify", str(bad), "fixture:prop5"], capsys)
    assert code == 1


def test_output_independent_of_threads(capsys):
    _, r1, _ = run(["certify", "fixture:example2", "--threads", "1", "--no-figures"], capsys)
    _, r4, _ = run(["certify", "fixture:example2", "--threads", "4", "--no-figures"], capsys)
    assert r1["body_sha256"] == r4["body_sha256"] and r1["body"] == r4["body"]
    assert r4["runtime"]["threads"] == 4
    assert r1["body_sha256"] == cli.sha256(r1["body"])


def test_figures_written_next_to_output(tmp_path, capsys):
    out = tmp_path / "rep" / "unit.json"
    code = cli.main(["kozyakin", "fixture:kozyakin_unit", "--horizon", "20000", "--out", str(out)])
    assert code == 0
    pngs = sorted(p.name for p in out.parent.glob("*.png"))
    assert pngs == ["unit_bounds.png", "unit_bracket.png", "unit_frequency.png", "unit_unit_ball.png"]
    assert all((out.parent / p).stat().st_size > 1000 for p in pngs)
    figdir = tmp_path / "figs"
    cli.main(["bounds", "fixture:example2", "--figures", str(figdir)])
    capsys.readouterr()
    assert (figdir / "bounds_bounds.png").exists()


def test_fixtures_command(capsys):
    assert cli.main(["fixtures"]) == 0
    assert "example2" in capsys.readouterr().out.split()
