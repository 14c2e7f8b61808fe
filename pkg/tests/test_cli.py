import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from icos.cli import main
from icos.estimator import ICOS
from icos.experiments import bs_vix_chain, write_quotes
from icos.market_data import load_chain


@pytest.fixture(scope="module")
def files(tmp_path_factory, bs30_chain):
    d = tmp_path_factory.mktemp("cli")
    write_quotes(bs30_chain, d / "bs30.csv")
    write_quotes(bs_vix_chain(0.3, 23 / 365, seed=1), d / "near.csv")
    write_quotes(bs_vix_chain(0.3, 37 / 365, seed=2), d / "next.csv")
    panel = d / "panel"
    panel.mkdir()
    for day in ("2021-01-04", "2021-01-05"):
        write_quotes(bs_vix_chain(0.2, 23 / 365, seed=3), panel / f"{day}_near.csv")
        write_quotes(bs_vix_chain(0.2, 37 / 365, seed=4), panel / f"{day}_next.csv")
    return d


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_price_at_the_money(capsys, files):
    code, out, _ = run(capsys, "price", "--chain", files / "bs30.csv", "--at", 4000)
    assert code == 0
    r = rows(out)
    assert len(r) == 1 and list(r[0]) == ["point", "estimate", "std_err", "lo", "hi"]
    assert float(r[0]["estimate"]) == pytest.approx(137.21, abs=0.005)
    assert float(r[0]["lo"]) < float(r[0]["estimate"]) < float(r[0]["hi"])


def test_rnd_grid_matches_library_bit_for_bit(capsys, files):
    code, out, _ = run(capsys, "rnd", "--chain", files / "bs30.csv", "--points", 101)
    assert code == 0
    r = rows(out)
    assert len(r) == 101
    chain = load_chain(files / "bs30.csv")
    y = np.linspace(np.log(chain.alpha), np.log(chain.beta), 101)
    lib = ICOS().fit(chain).rnd(y)
    np.testing.assert_array_equal([float(x["point"]) for x in r], y)
    np.testing.assert_array_equal([float(x["estimate"]) for x in r], lib.value)
    np.testing.assert_array_equal([float(x["std_err"]) for x in r], lib.std_err)


def test_gamma_is_scaled_density(capsys, files):
    _, out, _ = run(capsys, "rnd", "--chain", files / "bs30.csv", "--at", 4000, "--gamma")
    _, dens, _ = run(capsys, "rnd", "--chain", files / "bs30.csv", "--at", 4000)
    g, f = float(rows(out)[0]["estimate"]), float(rows(dens)[0]["estimate"])
    assert g == pytest.approx(f * 4000 / 4000**2)
    from icos.models import BsModel
    from scipy.stats import norm

    bs = BsModel()
    d1 = 0.5 * 0.3 * np.sqrt(bs.maturity)
    assert g == pytest.approx(norm.pdf(d1) / (4000 * 0.3 * np.sqrt(bs.maturity)), rel=5e-3)


def test_delta_and_put(capsys, files):
    _, out, _ = run(capsys, "delta", "--chain", files / "bs30.csv", "--at", 4000, "--sine-terms", 25)
    assert float(rows(out)[0]["estimate"]) == pytest.approx(0.517 - 0.0064, abs=0.002)
    _, out, _ = run(capsys, "price", "--chain", files / "bs30.csv", "--at", 3800, "--right", "put")
    assert float(rows(out)[0]["estimate"]) == pytest.approx(56.86, abs=0.01)


def test_kernel_baseline(capsys, files):
    code, out, _ = run(capsys, "price", "--chain", files / "bs30.csv", "--at", 4000, "--baseline", "ks", "--ks-c", 0.2)
    assert code == 0
    r = rows(out)[0]
    assert float(r["estimate"]) == pytest.approx(137.21, abs=0.01) and r["std_err"] == "nan"
    code, out, _ = run(capsys, "rnd", "--chain", files / "bs30.csv", "--points", 5, "--baseline", "ks")
    assert code == 0 and len(rows(out)) == 5


def test_fit_summary(capsys, files):
    code, out, _ = run(capsys, "fit", "--chain", files / "bs30.csv")
    assert code == 0
    s = json.loads(out)
    assert s["n_terms"] == 14 and len(s["a_coeffs"]) == 14
    assert s["theta"]["c"] == pytest.approx(-0.125, abs=3e-3)
    code, out, _ = run(capsys, "fit", "--chain", files / "near.csv", "--terms", "auto")
    s = json.loads(out)
    assert s["order_trace"][-1]["N"] == s["n_terms"] + 1


def test_optimal_n_table(capsys, files):
    code, out, _ = run(capsys, "optimal-n", "--chain", files / "near.csv")
    assert code == 0
    r = rows(out)
    assert list(r[0]) == ["N", "a_bar", "s_a", "selected"]
    assert sum(x["selected"] == "1" for x in r) == 1


def test_vix_single_and_panel(capsys, files):
    code, out, _ = run(capsys, "vix", "--near", files / "near.csv", "--next", files / "next.csv")
    assert code == 0
    d = json.loads(out)
    assert d["vix"] == pytest.approx(30.0, abs=0.2)
    assert d["vix"] == pytest.approx(d["civ_hat"] + d["zeta_hat"] + d["xi_hat"], abs=1e-9)
    code, out, _ = run(capsys, "vix", "--panel", files / "panel", "--terms", 14)
    days = json.loads(out)
    assert [x["day"] for x in days] == ["2021-01-04", "2021-01-05"]
    assert days[0]["n_terms"] == [14, 14]


def test_simulate_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert run(capsys, "simulate", "--model", "bs", "--t", "30d", "--reps", 100, "--seed", 7, "--out", p)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    r = rows(a.read_text())
    assert r[0]["estimator"] == "call" and r[0]["reps"] == "100"
    c = tmp_path / "c.csv"
    run(capsys, "simulate", "--reps", 100, "--seed", 8, "--out", c)
    assert c.read_bytes() != a.read_bytes()


def test_seventeen_digits_and_pretty(capsys, files):
    _, out, _ = run(capsys, "price", "--chain", files / "bs30.csv", "--at", 4000)
    est = rows(out)[0]["estimate"]
    assert float(est) == float(format(float(est), ".17g")) and len(est.replace(".", "")) >= 15
    _, out, _ = run(capsys, "price", "--chain", files / "bs30.csv", "--at", 4000, "--pretty")
    assert rows(out)[0]["estimate"] == "137.206"


def test_global_options_before_or_after_subcommand(capsys, files):
    _, before, _ = run(capsys, "--pretty", "--terms", 10, "price", "--chain", files / "bs30.csv", "--at", 4000)
    _, after, _ = run(capsys, "price", "--chain", files / "bs30.csv", "--at", 4000, "--pretty", "--terms", 10)
    assert before == after and rows(before)[0]["estimate"].count(".") == 1 and len(rows(before)[0]["estimate"]) <= 8
    # the subcommand copy wins when both are given
    _, both, _ = run(capsys, "--terms", 10, "price", "--terms", 14, "--chain", files / "bs30.csv", "--at", 4000)
    _, plain, _ = run(capsys, "price", "--chain", files / "bs30.csv", "--at", 4000)
    assert both == plain


def test_config_file_and_override(capsys, files, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"terms": 10, "quad": "trap"}))
    _, from_cfg, _ = run(capsys, "price", "--chain", files / "bs30.csv", "--at", 4000, "--config", cfg)
    _, direct, _ = run(capsys, "price", "--chain", files / "bs30.csv", "--at", 4000, "--terms", 10, "--quad", "trap")
    _, override, _ = run(capsys, "price", "--chain", files / "bs30.csv", "--at", 4000, "--config", cfg, "--terms", 14,
                         "--quad", "simpson")
    _, default, _ = run(capsys, "price", "--chain", files / "bs30.csv", "--at", 4000)
    assert from_cfg == direct and override == default and from_cfg != default


@pytest.mark.parametrize(
    "argv, code, kind",
    [
        (["price", "--chain", "missing.csv"], 1, "FileNotFoundError"),
        (["price", "--bogus"], 2, "CliError"),
        (["frobnicate"], 2, "CliError"),
        (["price", "--chain", "x.csv", "--terms", "many"], 2, "CliError"),
        (["vix"], 2, "CliError"),
    ],
)
def test_errors_are_json_on_stderr(capsys, argv, code, kind):
    got, out, err = run(capsys, *argv)
    assert got == code and out == ""
    e = json.loads(err)
    assert e["error"] == kind and e["exit_code"] == code


def test_malformed_csv(capsys, tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("expiry_days,rate,forward,strike,right,bid,ask\n30,0,,abc,C,1,2\n")
    code, _, err = run(capsys, "price", "--chain", p)
    assert code == 1 and json.loads(err)["error"] == "ChainError"


def test_invalid_config(capsys, tmp_path, files):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    code, _, err = run(capsys, "price", "--chain", files / "bs30.csv", "--config", p)
    assert code == 1 and "invalid JSON" in json.loads(err)["message"]


def test_module_entry_point(files):
    r = subprocess.run([sys.executable, "-m", "icos", "price", "--chain", str(files / "bs30.csv"), "--at", "4000"],
                       capture_output=True, text=True, check=True)
    assert r.stdout.startswith("point,estimate")
