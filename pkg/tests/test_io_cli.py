import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cointsub import cli, fixtures
from cointsub import io as cio
from cointsub.errors import ConfigError, DataError
from cointsub.processes import SeriesPair


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(finite, finite, finite), min_size=2, max_size=30))
def test_series_csv_round_trip(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("rt") / "s.csv"
    x, y, u = (np.array(c) for c in zip(*rows))
    cio.write_series(path, SeriesPair(x, y, u))
    ds = cio.read_dataset(path)
    np.testing.assert_array_equal(ds.x, x)
    np.testing.assert_array_equal(ds.y, y)
    np.testing.assert_array_equal(ds.u, u)
    np.testing.assert_array_equal(ds.index, np.arange(1, x.size + 1))
    assert b"\r" not in path.read_bytes()


def test_manifest_round_trip(tmp_path):
    m = cio.RunManifest("simulate", {"process": {"d": 0.1, "n": 500}}, 7, "0.1.0",
                        "t0", "t1", ["simulate", "--seed", "7"])
    p = m.write(tmp_path / "m.json")
    assert cio.RunManifest.read(p) == m
    assert cio.manifest_path(tmp_path / "a.csv").name == "a.csv.manifest.json"


@pytest.mark.parametrize("text,msg", [
    ("", "empty"),
    ("1,2,3\n4,5,6\n", "header"),
    ("k,x,y\n1,2,3\n1,3,4\n", "strictly increasing"),
    ("k,x,y\n1,2,\n2,3,4\n", "missing value"),
    ("k,x,y\n1,2,nan\n2,3,4\n", "non-finite"),
    ("k,x,y\n1,2,abc\n", "not a number"),
    ("k,a,y\n1,2,3\n", "no column"),
    ("k,x,y\n1,2\n", "expected 3 fields"),
])
def test_read_dataset_errors(tmp_path, text, msg):
    with pytest.raises(DataError, match=msg):
        cio.read_dataset(_write(tmp_path / "d.csv", text))


def test_read_dataset_logs_and_min_n(tmp_path):
    p = _write(tmp_path / "d.csv", "year,gdp,co2\n1950,10,2\n1951,20,4\n")
    ds = cio.read_dataset(p, "gdp", "co2", log_x=True, log_y=True)
    np.testing.assert_allclose(ds.x, np.log([10, 20]))
    with pytest.raises(DataError, match="at least"):
        cio.read_dataset(p, "gdp", "co2", min_n=10)
    with pytest.raises(DataError):
        cio.read_dataset(_write(tmp_path / "n.csv", "k,x,y\n1,-1,2\n2,1,2\n"), log_x=True)
    with pytest.raises(DataError):
        cio.read_dataset(tmp_path / "missing.csv")


@pytest.mark.parametrize("body,field", [
    ("[process]\nd = 0.7\n", "process.d"),
    ("[process]\nmemory = slm\nd = 0.2\n", "process.lambda"),
    ("[process]\nr = two\n", "process.r"),
    ("[process]\ncolour = red\n", "process.colour"),
    ("[process]\nerrors = garch\n", "process.errors"),
    ("[process]\nsigma = 0\n", "process.sigma"),
    ("[extra]\nx = 1\n", "extra"),
])
def test_config_errors_name_field(tmp_path, body, field):
    cp = cio.read_config(_write(tmp_path / "c.ini", body))
    with pytest.raises(ConfigError) as info:
        vals, _, _ = cio.simulate_from_config(cp)
        cio.process_from_values(vals)
    assert info.value.field == field
    assert str(info.value).startswith(field)


def test_suite_config(tmp_path):
    body = ("[suite]\nreps = 3\nn = 80\ntrunc = 50\nblocks = 8,16\n"
            "[cell:a]\ntests = snu-parametric, portmanteau\nd = 0.3\n"
            "[cell:b]\nmemory = slm\nlambda = 0.2\ngen_model = b4\n")
    cells = cio.suite_from_config(cio.read_config(_write(tmp_path / "s.ini", body)))
    assert [c.label for c in cells] == ["a", "b"]
    assert cells[0].process.d == 0.3 and cells[0].reps == 3 and len(cells[0].tests) == 2
    assert cells[1].process.kind == "SLM" and cells[1].gen_model == "B4"
    assert cells[0].process.coeffs == "power"
    bad = _write(tmp_path / "t.ini", "[cell:a]\ntests = wild\n")
    with pytest.raises(ConfigError, match="cell:a.tests"):
        cio.suite_from_config(cio.read_config(bad))
    assert len(cio.suite_from_config(cio.read_config(_write(tmp_path / "p.ini",
                                                             "[suite]\npreset = desk\nreps = 2\n")))) == 12


# ------------------------------------------------------------------ CLI


def _run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_simulate_deterministic_with_manifest(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert _run(capsys, "simulate", "--seed", 5, "--n", 60, "--out", a)[0] == 0
    assert _run(capsys, "simulate", "--seed", 5, "--n", 60, "--out", b)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    m = cio.RunManifest.read(cio.manifest_path(a))
    assert m.command == "simulate" and m.seed == 5 and m.config["process"]["n"] == 60
    assert a.read_text().splitlines()[0] == "k,x,y,u,y_minus_f"


def test_simulate_default_length(tmp_path, capsys):
    out = tmp_path / "d.csv"
    _run(capsys, "simulate", "--seed", 1, "--out", out)
    assert cio.read_dataset(out).n == 500


def test_simulate_manifest_reproduces(tmp_path, capsys):
    cfg = _write(tmp_path / "c.ini", "[process]\nn = 40\nseed = 9\nd = 0.3\n[model]\ngen_model = b3\n")
    first = tmp_path / "1.csv"
    assert _run(capsys, "simulate", cfg, "--out", first)[0] == 0
    argv = cio.RunManifest.read(cio.manifest_path(first)).argv
    second = tmp_path / "2.csv"
    argv[argv.index("--out") + 1] = str(second)
    assert _run(capsys, *argv)[0] == 0
    assert first.read_bytes() == second.read_bytes()


def test_simulate_sigma_zero(tmp_path, capsys):
    cfg = _write(tmp_path / "c.ini", "[process]\nn = 50\nsigma = 1e-300\n")
    out = tmp_path / "s.csv"
    _run(capsys, "simulate", cfg, "--out", out)
    col = np.loadtxt(out, delimiter=",", skiprows=1)[:, 4]
    assert np.all(np.abs(col) < 1e-290)
    code, _, err = _run(capsys, "simulate", "--sigma", 0, "--out", out)
    assert code == 2 and "process.sigma" in err


def test_exit_codes(tmp_path, capsys):
    bad_cfg = _write(tmp_path / "c.ini", "[process]\nd = 2\n")
    assert _run(capsys, "simulate", bad_cfg, "--out", tmp_path / "o.csv")[0] == 2
    assert _run(capsys, "test", tmp_path / "missing.csv")[0] == 3
    const = _write(tmp_path / "k.csv", "k,x,y\n" + "".join(f"{i},1.5,{i}\n" for i in range(1, 31)))
    code, _, err = _run(capsys, "test", const, "--hypothesis", "quadratic", "--blocks", "5")
    assert code == 4 and "error" in err
    with pytest.raises(SystemExit) as info:
        cli.main(["test"])
    assert info.value.code == 2


def test_test_command_outputs(tmp_path, capsys):
    out = tmp_path / "o.jsonl"
    code, text, _ = _run(capsys, "test", fixtures.ckc_standin_path(), "--blocks", "10,20",
                         "--out", out)
    assert code == 0 and "SNU" in text
    recs = [json.loads(line) for line in out.read_text().splitlines()]
    assert [r["meta"]["b"] for r in recs] == [10, 20]
    assert all(0 <= r["pvalue"] <= 1 for r in recs)
    code, _, _ = _run(capsys, "test", fixtures.ckc_standin_path(), "--test", "p",
                      "--lags", "6,12", "--out", out)
    assert code == 0
    recs = [json.loads(line) for line in out.read_text().splitlines()]
    assert [r["meta"]["L"] for r in recs] == [6, 12]
    code, _, _ = _run(capsys, "test", fixtures.ckc_standin_path(), "--test", "mhm",
                      "--blocks", "10", "--memory", "slm", "--d", 0.4, "--lambda", 0.138)
    assert code == 0
    assert cio.RunManifest.read(cio.manifest_path(out)).config["test"] == "p"


def test_scan_blocks(tmp_path, capsys):
    out = tmp_path / "scan.csv"
    code, _, _ = _run(capsys, "scan-blocks", fixtures.ckc_standin_path(), "--b-range", "2:3",
                      "--out", out)
    assert code == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "b,pvalue" and len(rows) == 3
    flat = _write(tmp_path / "f.csv", "k,x,y\n" + "".join(f"{i},{i * 0.3},0\n" for i in range(1, 21)))
    assert _run(capsys, "scan-blocks", flat, "--b-range", "4:6")[0] == 4
    assert _run(capsys, "scan-blocks", flat, "--b-range", "1:6")[0] == 2
    code, text, _ = _run(capsys, "scan-blocks", fixtures.ckc_standin_path(), "--b-range", "10:20")
    assert code == 0 and "minimal-volatility block: b=" in text


def test_bandwidth(tmp_path, capsys):
    out = tmp_path / "bw.csv"
    code, text, _ = _run(capsys, "bandwidth", fixtures.ckc_standin_path(), "--grid", "0.37",
                         "--out", out)
    assert code == 0 and "h_opt=0.37 " in text
    assert len(out.read_text().splitlines()) == 2
    code, text, _ = _run(capsys, "bandwidth", fixtures.ckc_standin_path(), "--grid", "0.01:0.01:0.2")
    assert code == 0


def test_mc_empty_and_small(tmp_path, capsys):
    out = tmp_path / "mc.csv"
    empty = _write(tmp_path / "e.ini", "[suite]\nreps = 3\n")
    assert _run(capsys, "mc", empty, "--out", out)[0] == 0
    assert out.read_text() == ",".join(cli.RejectionTable.COLUMNS) + "\n"
    suite = _write(tmp_path / "s.ini", "[cell:tiny]\nn = 60\ntrunc = 30\nreps = 2\nblocks = 8\n"
                                       "tests = snu-parametric, portmanteau\n")
    samples = tmp_path / "samples.csv"
    assert _run(capsys, "mc", suite, "--out", out, "--samples", samples, "--seed", 3)[0] == 0
    rows = out.read_text().splitlines()
    assert len(rows) == 5
    assert len(samples.read_text().splitlines()) == 3
    cells = cio.RunManifest.read(cio.manifest_path(out)).config["cells"]
    assert cells[0]["base_seed"] == 3


# ------------------------------------------------------------- fixtures


def test_shipped_fixtures_match_generators():
    ds = fixtures.load_nonlinear_white()
    ref = fixtures.make_nonlinear_white()
    np.testing.assert_array_equal(ds.x, ref.x)
    np.testing.assert_array_equal(ds.y, ref.y)
    ck = fixtures.load_ckc_standin()
    ref = fixtures.make_ckc_standin()
    assert ck.n == 59 and ck.index[0] == 1950 and ck.index[-1] == 2008
    np.testing.assert_array_equal(ck.x, ref.x)
    np.testing.assert_array_equal(ck.y, ref.y)


def test_nonlinear_trend_values():
    assert fixtures.nonlinear_trend(0.0) == 5.0 - 0.60
    x = 1.7
    assert math.isclose(fixtures.nonlinear_trend(x), 5 + (0.55 * x - 0.6) * math.exp(-0.55 * x))


def test_ckc_lookup(tmp_path, monkeypatch):
    monkeypatch.delenv(fixtures.CKC_ENV, raising=False)
    assert fixtures.ckc_path("spain") is None
    monkeypatch.setenv(fixtures.CKC_ENV, str(tmp_path))
    assert fixtures.load_ckc("spain") is None
    _write(tmp_path / "spain.csv", "year,x,y\n1950,1,2\n1951,2,3\n")
    assert fixtures.load_ckc("Spain").n == 2


def _ckc_or_skip(country):
    if fixtures.ckc_path(country) is None:
        pytest.skip(f"{country} data not supplied (set {fixtures.CKC_ENV})")
    return fixtures.ckc_path(country)


def test_ckc_spain_snu_b44(capsys, tmp_path):
    path = _ckc_or_skip("spain")
    out = tmp_path / "o.jsonl"
    assert _run(capsys, "test", path, "--blocks", "44", "--out", out)[0] == 0
    assert json.loads(out.read_text())["pvalue"] == pytest.approx(0.938, abs=0.05)


def test_ckc_spain_portmanteau(capsys, tmp_path):
    path = _ckc_or_skip("spain")
    out = tmp_path / "o.jsonl"
    assert _run(capsys, "test", path, "--test", "p", "--lags", "6", "--out", out)[0] == 0
    assert json.loads(out.read_text())["pvalue"] == pytest.approx(0.051, abs=0.02)


def test_ckc_france_quadratic_rejects(capsys, tmp_path):
    path = _ckc_or_skip("france")
    out = tmp_path / "o.jsonl"
    assert _run(capsys, "test", path, "--hypothesis", "quadratic", "--blocks", "30",
                "--out", out)[0] == 0
    assert json.loads(out.read_text())["pvalue"] <= 0.01
