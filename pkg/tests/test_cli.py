import csv
import json

import numpy as np
import pytest

from commentdyn import __version__
from commentdyn import distributions as dist
from commentdyn import synthgen as sg
from commentdyn.cli import main
from commentdyn.report import config_hash


def read_table(path):
    lines = path.read_text().splitlines()
    header = [l for l in lines if l.startswith("#")]
    rows = list(csv.DictReader(l for l in lines if not l.startswith("#")))
    return header, rows


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--posts", "30", "--out", str(out), "--seed", "11"], environ={}) == 0
    return out / "corpus.jsonl"


def write_user_counts(path, counts):
    lines = [json.dumps({"kind": "post", "id": "p", "parent": None, "author": "ed", "ts": 0})]
    k = 0
    for u, n in enumerate(counts):
        for _ in range(int(n)):
            k += 1
            lines.append(json.dumps({"kind": "comment", "id": f"c{k}", "parent": "p",
                                     "author": f"user{u}", "ts": k}))
    path.write_text("\n".join(lines) + "\n")
    return path


def test_synth_writes_sidecar_and_honours_seed(small_corpus, capsys):
    truth = json.loads(small_corpus.with_name("corpus.truth.json").read_text())
    assert truth["spec"]["seed"] == 11 and truth["spec"]["n_posts"] == 30


def test_synth_reference_seed_echoed(tmp_path, capsys):
    assert main(["synth", "--posts", "3", "--out", str(tmp_path)], environ={}) == 0
    assert "seed 2006" in capsys.readouterr().out


def test_fit_outputs_and_headers(small_corpus, tmp_path, capsys):
    out = tmp_path / "fit"
    assert main(["fit", str(small_corpus), "--out", str(out), "--seed", "3"], environ={}) == 0
    assert "fraction eps<0.05" in capsys.readouterr().out
    names = {p.name for p in out.iterdir()}
    assert {"fits_ln.csv", "epsilon_hist_ln.csv", "epsilon_cdf_ln.csv", "param_hist_ln_mu1.csv",
            "param_hist_ln_sigma1.csv", "epsilon_by_hour_ln.csv"} <= names
    header, rows = read_table(out / "fits_ln.csv")
    assert header[0] == f"# commentdyn {__version__}" and header[1] == "# seed: 3"
    assert header[2].startswith("# config: ")
    assert list(rows[0])[:12] == ["post_id", "model", "mu1", "sigma1", "c", "mu2", "sigma2",
                                  "epsilon", "loglik", "converged", "median", "sigma_g"]
    assert len(rows) == 30


def test_fit_dln_beats_ln_on_reference(small_corpus, tmp_path):
    for model in ("ln", "dln"):
        assert main(["fit", str(small_corpus), "--model", model, "--out", str(tmp_path)], environ={}) == 0
    eps = {m: np.array([float(r["epsilon"]) for r in read_table(tmp_path / f"fits_{m}.csv")[1]])
           for m in ("ln", "dln")}
    assert np.mean(eps["dln"] < 0.02) >= np.mean(eps["ln"] < 0.02)


def test_fit_with_ks(small_corpus, tmp_path):
    assert main(["fit", str(small_corpus), "--ks", "--replicas", "20", "--out", str(tmp_path)],
                environ={}) == 0
    header, rows = read_table(tmp_path / "fits_ln.csv")
    assert any("bootstrap" in h for h in header)
    assert all(0 <= float(r["ks_p"]) <= 1 for r in rows)


def test_empty_input_exit_2_no_outputs(tmp_path, capsys):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    out = tmp_path / "never"
    for cmd in ("fit", "report", "users", "summary"):
        assert main([cmd, str(empty), "--out", str(out)], environ={}) == 2
        assert not out.exists()
    assert "no events" in capsys.readouterr().err


def test_malformed_input_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"kind": "post", "id": "p", "parent": null, "author": "a", "ts": 0}\n{oops\n')
    assert main(["summary", str(bad), "--out", str(tmp_path / "o")], environ={}) == 2
    assert "line 2" in capsys.readouterr().err


def test_users_refused_with_one_user(tmp_path, capsys):
    path = write_user_counts(tmp_path / "one.jsonl", [5])
    assert main(["users", str(path), "--out", str(tmp_path / "o")], environ={}) == 1
    assert "at least 2" in capsys.readouterr().err


def test_users_prefers_truncated_ln(tmp_path):
    counts = dist.TruncatedLogNormal(1.0, 2.0, 1).sample(3000, 5)
    counts = np.minimum(counts, 20_000)
    path = write_user_counts(tmp_path / "tln.jsonl", counts)
    out = tmp_path / "o"
    assert main(["users", str(path), "--out", str(out), "--replicas", "200"], environ={}) == 0
    rows = {r["model"]: r for r in read_table(out / "users_fits.csv")[1]}
    assert float(rows["truncated_ln"]["ks_p"]) > 0.01
    assert float(rows["powerlaw_mle"]["ks_p"]) < 0.001
    assert float(rows["powerlaw_regression"]["r"]) < 0


def test_users_power_law_not_rejected(tmp_path):
    counts = dist.PowerLaw(2.0, 1).sample(1500, 9)
    path = write_user_counts(tmp_path / "pl.jsonl", np.minimum(counts, 50_000))
    out = tmp_path / "o"
    assert main(["users", str(path), "--out", str(out), "--replicas", "200"], environ={}) == 0
    rows = {r["model"]: r for r in read_table(out / "users_fits.csv")[1]}
    assert float(rows["powerlaw_mle"]["ks_p"]) > 0.01


def test_cycles_and_forecast(small_corpus, tmp_path, capsys):
    assert main(["cycles", str(small_corpus), "--out", str(tmp_path)], environ={}) == 0
    header, rows = read_table(tmp_path / "cycles_comments_hour_of_day.csv")
    assert len(rows) == 24 and list(rows[0])[:3] == ["bin_index", "mean", "std"]
    assert main(["forecast", str(small_corpus), "--post", "p00001", "--tau", "240",
                 "--boot", "20", "--out", str(tmp_path)], environ={}) == 0
    assert "expected" in capsys.readouterr().out
    assert main(["forecast", str(small_corpus), "--post", "p00001", "--tau", "0.1",
                 "--out", str(tmp_path)], environ={}) == 1
    assert "larger tau" in capsys.readouterr().err


def test_environment_overrides(small_corpus, tmp_path):
    out = tmp_path / "env"
    assert main(["summary", str(small_corpus)], environ={"COMMENTDYN_OUT": str(out),
                                                          "COMMENTDYN_SEED": "9"}) == 0
    header, _ = read_table(out / "summary.csv")
    assert header[1] == "# seed: 9"
    # explicit flags win
    assert main(["summary", str(small_corpus), "--seed", "4", "--out", str(out)],
                environ={"COMMENTDYN_SEED": "9"}) == 0
    assert read_table(out / "summary.csv")[0][1] == "# seed: 4"
    with pytest.raises(SystemExit):
        main(["summary", str(small_corpus)], environ={"COMMENTDYN_SEED": "x"})


def test_ingest_normalizes(small_corpus, tmp_path):
    assert main(["ingest", str(small_corpus), "--out", str(tmp_path)], environ={}) == 0
    assert (tmp_path / "events.jsonl").read_text() == small_corpus.read_text()


def test_report_deterministic_and_floor_peak(small_corpus, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    argv = ["report", str(small_corpus), "--replicas", "30", "--seed", "2"]
    assert main(argv + ["--out", str(a)], environ={}) == 0
    assert main(argv + ["--out", str(b), "--workers", "2"], environ={}) == 0
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    stats = {r["key"]: r["value"] for r in read_table(a / "ici_stats.csv")[1]}
    assert int(stats["pdf_peak_minute"]) >= 2
    sections = read_table(a / "sections.csv")[1]
    assert {r["section"] for r in sections} == {"summary", "cycles", "fits_ln", "fits_dln", "users", "ici"}
    assert all(r["status"] == "ok" for r in sections)


def test_config_hash_ignores_out_and_workers():
    assert config_hash({"seed": 1, "out": "x", "workers": 4}) == config_hash({"seed": 1})
    assert config_hash({"seed": 1}) != config_hash({"seed": 2})
