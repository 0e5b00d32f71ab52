from __future__ import annotations

import json

import pytest

from wiregeom.cli import run


def _run(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_help(capsys):
    code, out, _ = _run(capsys, "scan", "--help")
    assert code == 0 and "--grid" in out


def test_nc_classify_commutative(capsys):
    code, out, _ = _run(capsys, "nc-classify", "--model", "honeycomb", "--phi", "0")
    assert code == 0 and json.loads(out)["result"]["case"] == "commutative"


def test_report_embeds_config(capsys):
    _, out, _ = _run(capsys, "nc-classify", "--model", "D", "--phi", "1/2,1/2,1/2", "--seed", "4")
    cfg = json.loads(out)["config"]
    assert cfg["command"] == "nc-classify" and cfg["seed"] == 4 and cfg["params"]["phi"] == "1/2,1/2,1/2"


def test_usage_errors(capsys):
    assert _run(capsys, "bands")[0] == 2
    assert _run(capsys, "bands", "--model", "P", "--grid", "-1")[0] == 2
    assert _run(capsys, "nc-classify", "--model", "honeycomb")[0] == 2
    assert _run(capsys, "charges", "--model", "G", "--format", "csv")[0] == 2


def test_domain_errors(capsys, tmp_path):
    code, _, err = _run(capsys, "chern", "--model", "D", "--axis", "0")
    assert code == 1 and "slicing inapplicable" in err
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x"}')
    code, _, err = _run(capsys, "validate", "--model", str(bad))
    assert code == 1 and "dim" in err
    code, _, err = _run(capsys, "nc-burnside", "--model", "honeycomb", "--flux", "0.5")
    assert code == 1 and "rational" in err


def test_validate_file(capsys, tmp_path):
    from wiregeom.model import builtin, dump_model

    path = tmp_path / "g.json"
    path.write_text(dump_model(builtin("G")))
    code, out, _ = _run(capsys, "validate", "--model", str(path))
    assert code == 0 and json.loads(out)["result"]["first_betti"] == 3


def test_bands_csv_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["bands", "--model", "honeycomb", "--grid", "5", "--format", "csv", "-o", str(a)]) == 0
    assert run(["bands", "--model", "honeycomb", "--grid", "5", "--format", "csv", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes() and len(a.read_text().splitlines()) == 26


def test_charges_sum_zero(capsys):
    code, out, _ = _run(capsys, "charges", "--model", "G", "--axis", "2")
    assert code == 0 and json.loads(out)["result"]["total"] == [0, 0, 0, 0]


def test_stability_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["stability", "--model", "G", "--epsilon", "0.01", "--seed", "1"]
    assert run(args + ["-o", str(a)]) == 0 and run(args + ["--threads", "1", "-o", str(b)]) == 0
    da, db = json.loads(a.read_text()), json.loads(b.read_text())
    assert da["result"] == db["result"] and da["result"]["protected"]


def test_butterfly_csv(capsys):
    code, out, _ = _run(capsys, "butterfly", "--model", "honeycomb", "--max-q", "3", "--format", "csv")
    assert code == 0 and out.startswith("p,q,eigenvalue")


def test_nc_burnside_report(capsys):
    code, out, _ = _run(capsys, "nc-burnside", "--model", "honeycomb", "--phi", "1/5")
    res = json.loads(out)["result"]
    assert code == 0 and res["numeric_rank"] == [100, 100, 100] and res["agree"]
