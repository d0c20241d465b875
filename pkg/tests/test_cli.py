import io

import pytest

from kcycles import cli
from kcycles.coupling import phi_map


def test_exact_tv_first_row(tmp_path):
    out = tmp_path / "tv.csv"
    assert cli.main(["--experiment", "exact-tv", "--n", "5", "--k", "2", "--t-grid", "0:10:11",
                     "--seed", "1", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# kcycles ")
    assert lines[1] == "t,d_exact"
    t, d = lines[2].split(",")
    assert float(t) == 0 and float(d) == pytest.approx(1 - 1 / 120, abs=1e-11)
    assert len(lines) == 13


def test_size_error(tmp_path):
    assert cli.main(["--experiment", "exact-tv", "--n", "20", "--k", "2", "--seed", "1",
                     "--out", str(tmp_path / "x.csv")]) == 3


@pytest.mark.parametrize("args", [
    ["--experiment", "exact-tv", "--n", "5", "--k", "2"],               # no seed
    ["--experiment", "mix-profile", "--n", "1", "--seed", "1"],
    ["--experiment", "coupling", "--n", "50", "--k", "60", "--seed", "1"],
    ["--experiment", "hypergraph", "--n", "50", "--seed", "1", "--t-grid", "5,1"],
    ["--experiment", "nope"],
    ["--n", "5"],
])
def test_invalid_configs(args):
    assert cli.main(args) == 1


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    out = tmp_path / "h.csv"
    cfg.write_text(f"# settings\nexperiment = hypergraph\nn = 60\nk = 3\nreps = 4\n"
                   f"seed = 9\nt-grid = 1,50,200\nout = {out}\n")
    assert cli.main(["--config", str(cfg), "--reps", "6"]) == 0
    lines = out.read_text().splitlines()
    assert "reps=6" in lines[0] and lines[2].split(",")[1] == "6"
    cfg.write_text("experiment hypergraph\n")
    assert cli.main(["--config", str(cfg)]) == 1


@pytest.mark.parametrize("exp,extra", [
    ("mix-profile", ["--n", "60", "--reps", "30", "--t-grid", "0:2tmix:5"]),
    ("exact-tv", ["--n", "6", "--k", "3", "--t-grid", "0,1,2tmix"]),
    ("coloring", ["--n", "256", "--chi", "0.5", "--t-grid", "0:300:4"]),
    ("coupling", ["--n", "128", "--chi", "0.5", "--reps", "4", "--threads", "2"]),
    ("hypergraph", ["--n", "80", "--reps", "10", "--t-grid", "0:1.5tmix:4"]),
])
def test_same_seed_same_bytes(tmp_path, exp, extra):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["--experiment", exp, "--seed", "42", *extra]
    assert cli.main(base + ["--out", str(a)]) == 0
    assert cli.main(base + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0].startswith("# kcycles") and "," in lines[1]


def test_selftest_passes(capsys):
    assert cli.main(["--experiment", "selftest"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == len(cli.SUITES)
    assert "group_oracle" in out


def test_selftest_catches_broken_phi(monkeypatch):
    def off_by_one(a, b, n, v):
        w = phi_map(a, b, n, v)
        return w - 1 if w == b else w
    monkeypatch.setattr(cli, "phi_map", off_by_one)
    buf = io.StringIO()
    assert not cli.selftest(buf)
    assert "FAIL phi_bijection" in buf.getvalue()
