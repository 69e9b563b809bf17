import csv
import json

import numpy as np
import pytest

from simplexpop.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from simplexpop.experiment import OUTPUT_DIR_ENV, SCHEMA_VERSION, load_checkpoint


def write_config(path, out, num_cards=3, seed=1, **trainer):
    trainer = {"epsilon": 0.5, "max_population": 4, "grid_resolution": 4, **trainer}
    cfg = {"schema_version": SCHEMA_VERSION, "game": {"num_cards": num_cards}, "trainer": trainer,
           "output_dir": str(out), "seed": seed}
    path.write_text(json.dumps(cfg))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def k3_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("k3")
    cfg = write_config(root / "cfg.json", root / "run")
    assert main(["train", str(cfg)]) == EXIT_OK
    return root / "run"


def test_train_outputs(k3_run):
    for name in ("checkpoint.json", "config.json", "exploitability.csv", "history.csv"):
        assert (k3_run / name).is_file()
    data = json.loads((k3_run / "checkpoint.json").read_text())
    assert data["schema_version"] == SCHEMA_VERSION
    assert data["finished"] is True
    assert read_csv(k3_run / "exploitability.csv")[0] == ["iteration", "value"]
    assert read_csv(k3_run / "history.csv")[0] == ["iteration", "population_size", "gain", "expanded"]
    ckpt = load_checkpoint(k3_run / "checkpoint.json")
    assert len(ckpt.snapshot) == len(data["policies"])


def test_train_is_byte_identical(tmp_path, k3_run):
    cfg = write_config(tmp_path / "cfg.json", tmp_path / "again")
    assert main(["train", str(cfg)]) == EXIT_OK
    assert (tmp_path / "again" / "checkpoint.json").read_bytes() == (k3_run / "checkpoint.json").read_bytes()


def test_out_flag_beats_env_beats_config(tmp_path, monkeypatch):
    cfg = write_config(tmp_path / "cfg.json", tmp_path / "from_config", num_cards=2)
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / "from_env"))
    assert main(["train", str(cfg)]) == EXIT_OK
    assert (tmp_path / "from_env" / "checkpoint.json").is_file()
    assert main(["train", str(cfg), "--out", str(tmp_path / "from_flag")]) == EXIT_OK
    assert (tmp_path / "from_flag" / "checkpoint.json").is_file()
    assert not (tmp_path / "from_config").exists()


def test_eval_exact_and_montecarlo_share_schema(tmp_path, k3_run):
    ckpt = str(k3_run / "checkpoint.json")
    assert main(["eval", ckpt, "--levels", "0.5,2", "--samples", "4", "--out", str(tmp_path / "ex")]) == EXIT_OK
    assert main(["eval", ckpt, "--levels", "0.5,2", "--samples", "4", "--mode", "montecarlo",
                 "--episodes", "8", "--out", str(tmp_path / "mc")]) == EXIT_OK
    ex, mc = read_csv(tmp_path / "ex" / "any_mixture.csv"), read_csv(tmp_path / "mc" / "any_mixture.csv")
    assert ex[0] == mc[0] == ["level", "alpha", "H", "candidate", "mean_return", "stderr"]
    assert len(ex) == len(mc) == 1 + 2 * 4
    expl = read_csv(tmp_path / "ex" / "exploitability.csv")
    assert expl[0] == ["iteration", "value"] and float(expl[-1][1]) >= 0


def test_eval_without_store(tmp_path, k3_run):
    data = json.loads((k3_run / "checkpoint.json").read_text())
    data["store"]["anchors"], data["store"]["policies"], data["store"]["grid"] = [], [], None
    data["config"]["abr_kind"] = "tabular_q"  # no exact fill gets re-attached
    bare = tmp_path / "bare.json"
    bare.write_text(json.dumps(data))
    assert main(["eval", str(bare), "--levels", "1", "--samples", "3", "--out", str(tmp_path)]) == EXIT_OK
    rows = {r[3]: r[4] for r in read_csv(tmp_path / "any_mixture.csv")[1:]}
    assert rows["informed"] == "nan" and rows["exact_br"] != "nan"


def test_posterior_trace(tmp_path, k3_run):
    ckpt = str(k3_run / "checkpoint.json")
    assert main(["posterior-trace", ckpt, "--episodes", "5", "--out", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "posterior_trace.csv")
    n = len(load_checkpoint(ckpt).snapshot)
    assert rows[0] == ["episode", "turn", "true_opponent", *[f"posterior_{j}" for j in range(n)]]
    body = rows[1:]
    assert len(body) == 5 * 4
    for r in body:
        post = np.array([float(x) for x in r[3:]])
        assert post.sum() == pytest.approx(1.0, abs=1e-12)
        if r[1] == "0":
            assert np.allclose(post, 1 / n)
    assert main(["posterior-trace", ckpt, "--prior", "0.2", "--out", str(tmp_path)]) == EXIT_USAGE


def test_posterior_trace_is_deterministic(tmp_path, k3_run):
    ckpt = str(k3_run / "checkpoint.json")
    for run in ("a", "b"):
        assert main(["posterior-trace", ckpt, "--episodes", "6", "--seed", "3", "--out", str(tmp_path / run)]) == 0
    assert (tmp_path / "a" / "posterior_trace.csv").read_bytes() == (tmp_path / "b" / "posterior_trace.csv").read_bytes()


def test_posterior_trace_elimination_column(tmp_path):
    # K=3 exact run: slot 1 is deterministic point matching; some uniform-player episodes rule it out
    cfg = write_config(tmp_path / "cfg.json", tmp_path / "run", epsilon=0.0)
    assert main(["train", str(cfg)]) == EXIT_OK
    ckpt = str(tmp_path / "run" / "checkpoint.json")
    assert main(["posterior-trace", ckpt, "--episodes", "40", "--out", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "posterior_trace.csv")[1:]
    assert any(float(r[4]) == 0.0 for r in rows if r[1] != "0")


def test_rpp(tmp_path, k3_run, capsys):
    cfg = write_config(tmp_path / "cfg.json", tmp_path / "other", seed=7, epsilon=0.0)
    assert main(["train", str(cfg)]) == EXIT_OK
    a, b = str(k3_run / "checkpoint.json"), str(tmp_path / "other" / "checkpoint.json")
    capsys.readouterr()
    assert main(["rpp", a, a, "--out", str(tmp_path)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "0.0"
    main(["rpp", a, b, "--out", str(tmp_path)])
    ab = float(capsys.readouterr().out)
    main(["rpp", b, a, "--out", str(tmp_path)])
    ba = float(capsys.readouterr().out)
    assert ab == pytest.approx(-ba, abs=1e-9)
    assert read_csv(tmp_path / "rpp.csv")[0] == ["i", "j", "value"]


def test_rpp_spec_mismatch_is_runtime_error(tmp_path, k3_run):
    cfg = write_config(tmp_path / "cfg.json", tmp_path / "k2", num_cards=2)
    assert main(["train", str(cfg)]) == EXIT_OK
    assert main(["rpp", str(k3_run / "checkpoint.json"), str(tmp_path / "k2" / "checkpoint.json")]) == EXIT_RUNTIME


def test_jsd(tmp_path, k3_run):
    a = str(k3_run / "checkpoint.json")
    assert main(["jsd", a, a, "--episodes", "16", "--opponent", "1", "--out", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "jsd.csv")
    assert rows[0] == ["i", "j", "value"]
    for i, j, v in rows[1:]:
        if i == j:
            assert float(v) == 0.0
    curve = read_csv(tmp_path / "divergence_curve.csv")
    assert curve[0] == ["turn", "weighted", "continuing"] and len(curve) == 1 + 4
    assert main(["jsd", a, a, "--opponent", "99", "--out", str(tmp_path)]) == EXIT_USAGE


def test_usage_errors(tmp_path, k3_run):
    assert main([]) == EXIT_USAGE
    assert main(["train", str(tmp_path / "missing.json")]) == EXIT_USAGE
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"x": 1}))
    assert main(["eval", str(bad)]) == EXIT_USAGE
    assert main(["eval", str(k3_run / "checkpoint.json"), "--levels", ","]) == EXIT_USAGE
    assert main(["eval", str(k3_run / "checkpoint.json"), "--mode", "bogus"]) == EXIT_USAGE
    wrong = json.loads((k3_run / "checkpoint.json").read_text())
    wrong["schema_version"] = 999
    bad.write_text(json.dumps(wrong))
    assert main(["posterior-trace", str(bad)]) == EXIT_USAGE
