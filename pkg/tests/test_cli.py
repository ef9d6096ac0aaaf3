import csv
import json

import pytest

from ahead import data
from ahead.cli import main

SYNTH = ["--distribution", "zipf", "--n", "5000", "--domain-side", "32", "--data-seed", "3"]


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestCli:
    def test_gen_data_then_run(self, tmp_path, capsys):
        cache = tmp_path / "d.bin"
        assert main(["gen-data", *SYNTH, "--out", str(cache)]) == 0
        assert len(data.load_cache(cache)) == 5000
        out = tmp_path / "r.csv"
        assert main(["run", "--method", "HIO", "--data", str(cache), "--epsilons", "1", "2",
                     "--reps", "2", "--n-queries", "20", "--seed", "1", "--out", str(out)]) == 0
        rows = read_rows(out)
        assert [float(r["epsilon"]) for r in rows] == [1.0, 2.0]
        assert "mean_mse" in capsys.readouterr().out

    def test_ingest(self, tmp_path, capsys):
        src = tmp_path / "in.csv"
        src.write_text("amount\n" + "".join(f"{v}\n" for v in range(100)))
        cache = tmp_path / "d.bin"
        assert main(["ingest", "--csv", str(src), "--columns", "amount", "--domain-side", "8",
                     "--truncation", "49", "--out", str(cache)]) == 0
        assert len(data.load_cache(cache)) == 50
        assert "retained 0.5000" in capsys.readouterr().out

    def test_sweep_and_report(self, tmp_path):
        a, b, merged = tmp_path / "a.csv", tmp_path / "b.json", tmp_path / "m.csv"
        assert main(["sweep", "--methods", "AHEAD-1d", "Uniform", *SYNTH, "--epsilons", "1",
                     "--reps", "1", "--n-queries", "10", "--seed", "2", "--out", str(a)]) == 0
        assert main(["sweep", "--method", "AHEAD-1d", "--theta-scales", "0.5", "2", *SYNTH,
                     "--reps", "1", "--n-queries", "10", "--seed", "2", "--out", str(b)]) == 0
        assert main(["report", str(a), str(b), "--out", str(merged)]) == 0
        methods = [r["method"] for r in read_rows(merged)]
        assert methods == ["AHEAD-1d", "Uniform", "AHEAD-1d(theta=0.5x)", "AHEAD-1d(theta=2x)"]

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"method": "DHT", "epsilons": [0.5], "n_repetitions": 1,
                                   "n_queries": 5,
                                   "data": {"distribution": "gaussian", "n": 3000,
                                            "domain_side": 16}}))
        out = tmp_path / "r.csv"
        assert main(["run", "--config", str(cfg), "--seed", "4", "--out", str(out)]) == 0
        (row,) = read_rows(out)
        assert row["method"] == "DHT" and row["domain"] == "16" and row["n"] == "3000"

    def test_seed_required(self):
        with pytest.raises(SystemExit) as exc:
            main(["run", "--method", "HIO", *SYNTH])
        assert exc.value.code == 2

    def test_error_line(self, tmp_path, capsys):
        code = main(["run", "--method", "AHEAD-2d", *SYNTH, "--reps", "1", "--seed", "1"])
        assert code == 1
        err = capsys.readouterr().err.strip()
        assert err.startswith("error: ConfigurationError:")

    def test_missing_cache(self, tmp_path, capsys):
        assert main(["run", "--method", "HIO", "--data", str(tmp_path / "nope.bin"),
                     "--seed", "1"]) == 1
        assert capsys.readouterr().err.startswith("error: IngestionError:")

    def test_bad_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{not json")
        assert main(["run", "--config", str(cfg), "--seed", "1"]) == 1
        assert "ConfigurationError" in capsys.readouterr().err
