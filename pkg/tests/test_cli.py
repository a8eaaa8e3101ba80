import json

import numpy as np
import pytest

from ris.cli import ConfigError, main, parse_config, run

SPIN_MODEL = {"spin": {"S": 1, "E": 2, "beta": 1, "b": [1, 0], "c": [1, 0], "tau": 1}}


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


class TestParseConfig:
    def test_minimal_spin_config(self):
        config = parse_config(json.dumps({"model": SPIN_MODEL,
                                          "experiment": "spin-oracle"}))
        assert config.experiment == "spin-oracle"
        assert config.spin_params.tau == 1.0
        assert config.model.dim == 4
        assert config.tolerances["oracle"] == 1e-9

    def test_missing_experiment(self):
        with pytest.raises(ConfigError) as err:
            parse_config(json.dumps({"model": SPIN_MODEL}))
        assert err.value.path == "$.experiment"

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError, match=r"\$\.experiment"):
            parse_config(json.dumps({"model": SPIN_MODEL, "experiment": "nope"}))

    def test_empty_lambdas(self):
        with pytest.raises(ConfigError, match=r"\$\.lambdas"):
            parse_config(json.dumps({"model": SPIN_MODEL,
                                     "experiment": "converge-lambda",
                                     "lambdas": []}))

    def test_non_hermitian_inline_matrix(self):
        doc = {"model": {"inline": {"h_s": [[0, [0, 1]], [[0, 1], 0]],
                                    "h_e": [[0, 0], [0, 1]],
                                    "v": [[0] * 4 for _ in range(4)],
                                    "beta": 1.0}},
               "experiment": "effective", "tau": 1.0}
        with pytest.raises(ConfigError, match="asymmetry"):
            parse_config(json.dumps(doc))

    def test_inline_model_roundtrips_through_echo(self):
        v = [[0.0, [0.25, -0.125], 0.0, 0.0],
             [[0.25, 0.125], 0.0, 0.0, 0.0],
             [0.0, 0.0, 0.0, [0.0, -1.0]],
             [0.0, 0.0, [0.0, 1.0], 0.0]]
        doc = {"model": {"inline": {"h_s": [[0, 0], [0, 1]],
                                    "h_e": [[0, 0], [0, 2]],
                                    "v": v, "beta": 0.5}},
               "experiment": "effective", "tau": 1.0}
        config = parse_config(json.dumps(doc))
        assert config.echo["model"]["inline"]["v"] == v
        # echo is itself a parseable config describing the same model
        reparsed = parse_config(json.dumps(config.echo))
        assert np.array_equal(reparsed.model.v, config.model.v)

    def test_dimension_cap(self, monkeypatch):
        monkeypatch.setenv("RIS_MAX_DIM", "2")
        with pytest.raises(ConfigError, match="cap"):
            parse_config(json.dumps({"model": SPIN_MODEL,
                                     "experiment": "spin-oracle"}))
        monkeypatch.setenv("RIS_MAX_DIM", "8")
        parse_config(json.dumps({"model": SPIN_MODEL, "experiment": "spin-oracle"}))

    def test_unknown_field_rejected(self):
        with pytest.raises(ConfigError, match=r"\$\.lambda"):
            parse_config(json.dumps({"model": SPIN_MODEL,
                                     "experiment": "spin-oracle",
                                     "lambda": [0.1]}))


class TestRun:
    def test_spin_oracle_passes(self, tmp_path):
        config = parse_config(json.dumps({"model": SPIN_MODEL,
                                          "experiment": "spin-oracle"}))
        out = tmp_path / "oracle.csv"
        assert run(config, out_path=str(out)) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "quantity,closed_form,pipeline,abs_diff"
        for line in lines[1:]:
            assert float(line.split(",")[-1]) <= 1e-9
        meta = json.loads((tmp_path / "oracle.meta.json").read_text())
        assert meta["version"]
        assert meta["config"]["experiment"] == "spin-oracle"

    def test_converge_lambda_csv_contract(self, tmp_path):
        doc = {"model": SPIN_MODEL, "experiment": "converge-lambda",
               "lambdas": [0.2, 0.1], "s_max": 1.0, "s_steps": 6}
        out = tmp_path / "cl.csv"
        assert run(parse_config(json.dumps(doc)), out_path=str(out)) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "parameter,s,error"
        rows = [tuple(map(float, line.split(","))) for line in lines[1:]]
        assert rows == sorted(rows)
        sups = {}
        for lam, s, err in rows:
            assert np.isfinite(err) and err >= 0
            sups[lam] = max(sups.get(lam, 0.0), err)
        assert sups[0.1] < sups[0.2]

    def test_parallel_determinism(self, tmp_path):
        doc = {"model": SPIN_MODEL, "experiment": "converge-lambda",
               "lambdas": [0.3, 0.2, 0.1], "s_max": 1.0, "s_steps": 5}
        config = parse_config(json.dumps(doc))
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        run(config, out_path=str(out1), jobs=1)
        run(config, out_path=str(out2), jobs=3)
        assert out1.read_bytes() == out2.read_bytes()

    def test_dyson_check(self, tmp_path):
        doc = {"model": SPIN_MODEL, "experiment": "dyson-check", "tau": 1.0,
               "dyson_times": [0.5], "dyson_orders": [2, 3]}
        out = tmp_path / "dyson.csv"
        assert run(parse_config(json.dumps(doc)), out_path=str(out)) == 0
        header, *rows = out.read_text().splitlines()
        assert header.startswith("order,lambda,t,truncation_error,bound")
        for line in rows:
            cells = line.split(",")
            assert float(cells[3]) <= float(cells[4])

    def test_asymptotic_columns(self, tmp_path):
        doc = {"model": SPIN_MODEL, "experiment": "asymptotic",
               "lambdas": [0.2, 0.1], "t_samples": [0.0, 0.5]}
        out = tmp_path / "asym.csv"
        assert run(parse_config(json.dumps(doc)), out_path=str(out)) == 0
        header, *rows = out.read_text().splitlines()
        assert header == ("lambda,t,rho_00_re,rho_00_im,rho_01_re,rho_01_im,"
                          "rho_10_re,rho_10_im,rho_11_re,rho_11_im,trace_distance")
        assert len(rows) == 4  # two lambdas, two sample times

    def test_converge_tau_pairs(self, tmp_path):
        doc = {"model": SPIN_MODEL, "experiment": "converge-tau",
               "lambdas": [1.0], "taus": [0.2, 0.1], "s_max": 1.0, "s_steps": 5}
        out = tmp_path / "ct.csv"
        assert run(parse_config(json.dumps(doc)), out_path=str(out)) == 0
        header, *rows = out.read_text().splitlines()
        assert header == "parameter,s,error"
        taus = {float(line.split(",")[0]) for line in rows}
        assert taus == {0.2, 0.1}

    def test_effective_fast_repetition(self, tmp_path):
        doc = {"model": SPIN_MODEL, "experiment": "effective",
               "regime": "fast-repetition", "tau": 1.0}
        out = tmp_path / "eff.csv"
        assert run(parse_config(json.dumps(doc)), out_path=str(out)) == 0
        meta = json.loads((tmp_path / "eff.meta.json").read_text())
        assert meta["regime"] == "fast-repetition"
        header, *rows = out.read_text().splitlines()
        assert header == "row,col,entry_re,entry_im"
        assert len(rows) == 16

    def test_kato_metadata(self, tmp_path):
        doc = {"model": SPIN_MODEL, "experiment": "kato",
               "eps": [0.04, 0.02, 0.01]}
        out = tmp_path / "kato.csv"
        assert run(parse_config(json.dumps(doc)), out_path=str(out)) == 0
        meta = json.loads((tmp_path / "kato.meta.json").read_text())
        assert meta["commutator_norm"] <= 1e-8
        assert meta["extrapolation_stable"] is True


class TestMain:
    def test_cli_happy_path(self, tmp_path, capsys):
        path = write_config(tmp_path, {"model": SPIN_MODEL,
                                       "experiment": "spin-oracle"})
        out = tmp_path / "res.csv"
        assert main(["spin-oracle", "--config", str(path), "--out", str(out)]) == 0
        assert out.exists()

    def test_cli_schema_error_exit_code(self, tmp_path, capsys):
        path = write_config(tmp_path, {"model": SPIN_MODEL})
        assert main(["spin-oracle", "--config", str(path)]) == 1
        assert "$.experiment" in capsys.readouterr().err

    def test_cli_experiment_mismatch(self, tmp_path, capsys):
        path = write_config(tmp_path, {"model": SPIN_MODEL,
                                       "experiment": "spin-oracle"})
        assert main(["kato", "--config", str(path)]) == 1

    def test_cli_missing_file(self, capsys):
        assert main(["spin-oracle", "--config", "/nonexistent.json"]) == 1
