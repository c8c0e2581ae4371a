import csv
import json
import math

import pytest

from szegolab.cli import main


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_bands_csv(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["bands", "--potential", "cosine(1)", "--e-max", "3", "--out", str(out)]) == 0
    r = rows(out)
    assert r[0] == ["j", "k_j", "mu_j", "nu_j", "genuine_group_id"]
    assert r[1][:2] == ["1", "0"] and r[2][1] == "0.5"
    assert [x[4] for x in r[1:4]] == ["0", "1", "2"]


def test_bands_free_single_group(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["bands", "--potential", "zero", "--e-max", "5", "--out", str(out)]) == 0
    assert {x[4] for x in rows(out)[1:]} == {"0"}


def test_ids_csv(tmp_path):
    out = tmp_path / "i.csv"
    assert main(["ids", "--potential", "zero", "--mu", "1", "4", "--out", str(out)]) == 0
    r = rows(out)
    assert r[0] == ["mu", "N_mu"]
    assert float(r[1][1]) == pytest.approx(1 / math.pi) and float(r[2][1]) == pytest.approx(2 / math.pi)


def test_delta(capsys):
    assert main(["delta", "--potential", "zero", "--mu", "1"]) == 0
    out = capsys.readouterr().out
    delta = float(out.split("delta=")[1].split()[0])
    assert delta == pytest.approx(1.0, abs=1e-10)
    assert "bands=1..2" in out
    assert main(["delta", "--mu", "mid-gap:1"]) == 1


def test_widom(capsys):
    assert main(["widom", "--function", "p:1"]) == 0
    assert capsys.readouterr().out.strip() == f"{1 / math.pi**2:.12g}"
    assert main(["widom", "--function", "vn"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(1 / 3, abs=1e-11)
    assert main(["widom", "--function", "nonsense"]) == 1


def test_kernel_probe(tmp_path):
    out = tmp_path / "k.csv"
    code = main(["kernel-probe", "--potential", "zero", "--mu", "1", "--mode", "interior",
                 "--max-sep", "60", "--out", str(out), "--check"])
    assert code == 0
    r = rows(out)
    assert r[0] == ["sep", "envelope_amplitude"]
    assert r[-1][0] == "fitted_exponent" and abs(float(r[-1][1]) + 1) < 0.1
    # wrong mode for the evaluator is an error, not a failed check
    assert main(["kernel-probe", "--potential", "zero", "--mu", "1", "--mode", "gap-or-edge",
                 "--max-sep", "60", "--out", str(out)]) == 1


def test_kernel_probe_check_failure(tmp_path):
    out = tmp_path / "k.csv"
    code = main(["kernel-probe", "--potential", "zero", "--mu", "1", "--mode", "interior",
                 "--which", "R", "--max-sep", "60", "--out", str(out), "--check"])
    # R vanishes identically in the free case, so the exponent target is met
    assert code == 0
    code = main(["kernel-probe", "--potential", "cosine(1)", "--mu", "mid-band:2", "--mode", "interior",
                 "--which", "Pi", "--max-sep", "40", "--out", str(out), "--check"])
    assert code in (0, 2)


def test_lw_ref(tmp_path):
    out = tmp_path / "lw.csv"
    assert main(["lw-ref", "--n", "1", "--alphas", "20", "40", "--out", str(out)]) == 0
    r = rows(out)
    assert r[0] == ["alpha", "trace"]
    assert float(r[1][1]) == pytest.approx(math.log(41) / (4 * math.pi**2), abs=1e-6)
    assert [x[0] for x in r[3:]] == ["slope", "intercept", "target_slope"]
    assert main(["lw-ref", "--n", "1", "--alphas", "20", "40", "--out", str(out), "--tol", "1e-9"]) == 2


def test_sweep_and_fit(tmp_path, capsys):
    cfg = {
        "potential": {"preset": "zero"},
        "mu": 1.0,
        "alphas": [10, 15, 20, 25],
        "spacing": 0.125,
        "cutoff": 64,
        "functions": ["p:1"],
        "edge_tol": 1e-6,
        "touch_tol": 1e-9,
    }
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    prefix = tmp_path / "run"
    assert main(["sweep", "--config", str(path), "--out", str(prefix)]) == 0
    assert (tmp_path / "run.csv").exists() and (tmp_path / "run.report.json").exists()
    csvp = str(tmp_path / "run.csv")
    assert main(["fit", "--csv", csvp, "--function", "p:1", "--alpha-min", "5", "--json", str(tmp_path / "f.json")]) == 0
    assert json.loads((tmp_path / "f.json").read_text())["fits"][0]["function"] == "p:1"
    assert main(["fit", "--csv", csvp, "--function", "p:1", "--alpha-min", "5", "--tol", "1e-12"]) == 2
    assert main(["fit", "--csv", csvp, "--function", "p:1", "--alpha-min", "25"]) == 1
    assert main(["fit", "--csv", csvp, "--function", "p:1", "--alpha-min", "5", "--bound-window", "1"]) == 1


def test_sweep_bad_config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"potential": {"preset": "zero"}, "mu": 1, "alphas": [10], "functions": [], }))
    assert main(["sweep", "--config", str(path)]) == 1
