import json
import math

import pytest

from tarrylab import acceptance
from tarrylab.cli import QUICK, main, read_config_file


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write_coeffs(tmp_path, values, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(values))
    return str(p)


def test_eval_examples(tmp_path, capsys):
    code, out, _ = run(capsys, "eval", write_coeffs(tmp_path, [0] * 9), "--x", "0.3", "--y", "0.2")
    d = json.loads(out)
    assert code == 0 and d["F"] == 0.0 and d["I_real"] == pytest.approx(1.0)
    a8 = [0] * 9
    a8[7] = 1
    code, out, _ = run(capsys, "eval", write_coeffs(tmp_path, a8))
    assert json.loads(out)["I_abs"] < 1e-10
    a8[7] = 0.5
    code, out, _ = run(capsys, "eval", write_coeffs(tmp_path, a8), "--x", "1")
    d = json.loads(out)
    assert d["I_abs"] == pytest.approx(2 / math.pi, rel=1e-12)
    assert d["F"] == 0.5


def test_eval_bad_file_is_usage_error(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("[1,\n2,,]")
    with pytest.raises(SystemExit) as exc:
        main(["eval", str(path)])
    assert exc.value.code == 2
    assert "bad.json:2:" in capsys.readouterr().err


def test_tail_zero_samples_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["tail", "--samples", "0"])
    assert exc.value.code == 2


def test_gram_scan(tmp_path, capsys):
    out = str(tmp_path)
    code, text, _ = run(capsys, "gram-scan", "--threshold", "1e300", "--samples", "500", "--out", out)
    assert code == 0
    assert json.loads(text.splitlines()[0])["fraction_gram"] == 1.0
    fr = []
    for t in ("1e-2", "1e-4", "1e-8"):
        _, text, _ = run(capsys, "gram-scan", "--threshold", t, "--samples", "3000", "--out", out)
        fr.append(json.loads(text.splitlines()[0])["fraction_gram"])
    assert fr == sorted(fr, reverse=True)


def test_records_are_reproducible_and_skipped(tmp_path, capsys):
    out = str(tmp_path)
    args = ["shells", "--samples", "2000", "--seed", "4", "--out", out, "--format", "both"]
    run(capsys, *args)
    (rec,) = tmp_path.glob("shells-*.json")
    first = json.loads(rec.read_text())
    csv_text = rec.with_suffix(".csv").read_text()
    code, text, _ = run(capsys, *args)
    assert code == 0 and text.startswith("exists:")
    run(capsys, *args, "--force")
    second = json.loads(rec.read_text())
    assert first["outputs"] == second["outputs"]
    assert first["config"] == second["config"]
    assert rec.with_suffix(".csv").read_text() == csv_text
    assert first["config"]["seed"] == 4


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nsamples = 700\nseed = 9\nthreshold = 1e-3\n")
    assert read_config_file(cfg)["samples"] == "700"
    out = str(tmp_path / "runs")
    run(capsys, "gram-scan", "--config", str(cfg), "--out", out)
    run(capsys, "gram-scan", "--config", str(cfg), "--seed", "1", "--out", out)
    recs = sorted((tmp_path / "runs").glob("gram-scan-*.json"))
    seeds = sorted(json.loads(p.read_text())["config"]["seed"] for p in recs)
    assert seeds == [1, 9]
    for p in recs:
        assert json.loads(p.read_text())["outputs"]["n_samples"] == 700
    bad = tmp_path / "bad.cfg"
    bad.write_text("samples 5\n")
    with pytest.raises(SystemExit) as exc:
        main(["gram-scan", "--config", str(bad), "--out", out])
    assert exc.value.code == 2


def test_tail_and_fit_roundtrip(tmp_path, capsys):
    out = str(tmp_path)
    code, text, _ = run(capsys, "tail", "--family", "linear", "--k2", "4", "--samples", "1500",
                        "--radii", "10,20,40,80", "--out", out, "--format", "both")
    assert code == 0
    report = json.loads(text.splitlines()[0])
    assert report["verdict"]["status"] == "Converges"
    (rec,) = tmp_path.glob("tail-*.json")
    plot = rec.with_suffix(".plot.dat").read_text().splitlines()
    assert len(plot) == 5
    logR, logS = map(float, plot[1].split())
    assert logR == pytest.approx(math.log2(10.0))
    assert logS == pytest.approx(math.log2(report["shells"][0]["estimate"]))
    csv_lines = rec.with_suffix(".csv").read_text().splitlines()
    assert len(csv_lines) == 5
    header = csv_lines[0].split(",")
    row = dict(zip(header, csv_lines[1].split(",")))
    assert float(row["estimate"]) == report["shells"][0]["estimate"]
    code, text, _ = run(capsys, "fit", str(rec), "--out", out)
    refit = json.loads(text.splitlines()[0])
    assert code == 0
    assert refit["verdict"] == report["verdict"]
    assert refit["fit"] == report["fit"]


def test_tail_too_few_shells_is_numeric_failure(tmp_path, capsys):
    code, _, _ = run(capsys, "tail", "--family", "linear", "--samples", "50", "--radii", "10 20", "--out", str(tmp_path))
    assert code == 1


def test_tail_bad_family_exit_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["tail", "--family", "quartic", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_fit_rejects_non_tail_record(tmp_path, capsys):
    run(capsys, "gram-scan", "--samples", "100", "--out", str(tmp_path))
    (rec,) = tmp_path.glob("gram-scan-*.json")
    with pytest.raises(SystemExit) as exc:
        main(["fit", str(rec), "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_slab_and_report(tmp_path, capsys):
    out = str(tmp_path)
    code, text, _ = run(capsys, "slab", "--system", "plane", "--samples", "200000", "--out", out)
    assert code == 0
    est = json.loads(text.splitlines()[0])
    assert abs(est["value"] - 1.0) <= 4 * est["stderr"]
    code, text, _ = run(capsys, "slab", "--system", "tarry", "--samples", "20000", "--h-seq", "0.5 0.35 0.25",
                        "--out", out)
    assert code == 0
    assert json.loads(text.splitlines()[0])["system_id"] == "tarry"
    code, text, _ = run(capsys, "report", "--out", out)
    assert code == 0
    assert len(text.splitlines()) == 2


def test_oracles_quick(tmp_path, capsys, monkeypatch):
    # keep the smoke run cheap: skip the slow checks whose quick variants still take seconds
    keep = (acceptance.jacobian_fd, acceptance.cauchy_binet, acceptance.homogeneity, acceptance.matrix_bounds)
    monkeypatch.setattr(acceptance, "BATTERY", keep)
    assert "matrix_bounds" in QUICK
    code, text, _ = run(capsys, "oracles", "--quick", "--out", str(tmp_path))
    assert code == 0
    assert text.count("[PASS]") == 4
    monkeypatch.setattr(acceptance, "BATTERY", (acceptance.degeneracy,))
    code, text, _ = run(capsys, "oracles", "--quick", "--out", str(tmp_path), "--force")
    assert code == 1 and "[FAIL]" in text
