import json

import numpy as np
import pytest

from tentfit.cli import EXIT_DEGENERATE, EXIT_OK, EXIT_PARSE, main
from tentfit.errors import ParseError
from tentfit.io import format_points, parse_points, read_points, write_points


def test_parse_points():
    X = parse_points("0,1\n\n 2.5 , -3\n")
    assert np.array_equal(X, [[0, 1], [2.5, -3]])
    assert parse_points("x1,x2\n1,2\n").shape == (1, 2)
    assert parse_points("").shape[0] == 0
    for bad in ("1,a\n", "1,2\n3\n", "1,nan\n", "1,inf\n"):
        with pytest.raises(ParseError):
            parse_points(bad)
    with pytest.raises(ParseError):
        parse_points("1,2\n", d=3)


def test_format_roundtrip(tmp_path, rng):
    X = rng.normal(size=(10, 3))
    p = tmp_path / "x.csv"
    write_points(p, X, header=True)
    assert np.array_equal(read_points(p), X)
    assert format_points(np.empty((0, 2)), header=True, d=2) == "x1,x2\n"


def test_read_binary(tmp_path):
    p = tmp_path / "b.csv"
    p.write_bytes(b"\xff\xfe\x00\x01")
    with pytest.raises(ParseError):
        read_points(p)


FIT = ["--epsilon", "0.1", "--seed", "3", "--max-iters", "5", "--sampler-delta", "0.06", "--normalizer-delta", "0.05"]


@pytest.fixture(scope="module")
def model_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "pts.csv").write_text("0\n1\n")
    out = d / "m.json"
    rep = d / "r.json"
    assert main(["fit", "--input", str(d / "pts.csv"), "--output", str(out), "--report", str(rep)] + FIT) == EXIT_OK
    report = json.loads(rep.read_text())
    assert report["K"] == 5 and report["seed"] == 3 and report["warnings"]
    return out


def test_eval_and_loglik(model_file, tmp_path, capsys):
    assert main(["eval", "--model", str(model_file), "--point", "0.5;7"]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("density=") and "NEGATIVE_INFINITY" in out[1]
    pts = tmp_path / "q.csv"
    pts.write_text("0.25\n0.75\n")
    assert main(["loglik", "--model", str(model_file), "--input", str(pts)]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("total ") and len(lines) == 3


def test_sample(model_file, tmp_path, capsys):
    assert main(["sample", "--model", str(model_file), "--count", "0", "--seed", "1"]) == EXIT_OK
    assert capsys.readouterr().out == "x1\n"
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["sample", "--model", str(model_file), "--count", "20", "--seed", "2", "--output", str(p)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    X = read_points(a)
    assert X.shape == (20, 1) and np.all((X >= 0) & (X <= 1))


def test_exit_codes(tmp_path, model_file):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\nfoo,3\n")
    assert main(["fit", "--input", str(bad), "--output", str(tmp_path / "o.json")] + FIT) == EXIT_PARSE
    line = tmp_path / "line.csv"
    line.write_text("0,0\n1,1\n2,2\n")
    assert main(["fit", "--input", str(line), "--output", str(tmp_path / "o.json")] + FIT) == EXIT_DEGENERATE
    junk = tmp_path / "junk.json"
    junk.write_text('{"schema_version": "nope"}')
    assert main(["eval", "--model", str(junk), "--point", "0"]) == EXIT_PARSE
    assert main(["eval", "--model", str(model_file), "--point", "abc"]) == EXIT_PARSE
