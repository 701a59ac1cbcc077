import math
import os

import numpy as np
import pytest

from kinbayes import cli, formats
from kinbayes.errors import ConfigError, IngestionError
from kinbayes.network import MICHAELIS_MENTEN, michaelis_menten

from .conftest import BUNDLE


@pytest.fixture
def iso_model(tmp_path):
    p = tmp_path / "iso.txt"
    p.write_text("species: A B\nreaction: A -> B\ninit: A=1 B=0\n")
    return str(p)


def _run(*argv):
    return cli.main([str(a) for a in argv])


def test_bundle_observations():
    obs = formats.load_observations(os.path.join(BUNDLE, "observations.csv"), michaelis_menten())
    assert obs.n_intervals == 10
    np.testing.assert_array_equal(obs.states[1], [71, 219, 49, 33])


@pytest.mark.parametrize(
    "body, match",
    [
        ("time,E,S\n0,120,301\n", "need at least 2 observations"),
        ("time,E,S\n10,71,219\n0,120,301\n", "increasing"),
        ("time,E,S\n0,120,301\n10,-1,219\n", "negative"),
        ("time,E\n0,120\n10,71\n", "S|P"),
        ("E,S\n120,301\n71,219\n", "time"),
        ("time,E,S\n0,120,301\n10,71\n", "fields"),
    ],
)
def test_ingestion_errors(tmp_path, body, match):
    p = tmp_path / "d.csv"
    p.write_text(body)
    with pytest.raises(IngestionError, match=match):
        formats.load_observations(p, michaelis_menten())


def test_config_parsing(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("seed = 3  # comment\n\nmode=fast\n")
    assert formats.read_key_value(p) == {"seed": "3", "mode": "fast"}
    p.write_text("just words\n")
    with pytest.raises(ConfigError):
        formats.read_key_value(p)


def test_priors_and_lists():
    pri = cli.parse_priors("improper", 3)
    assert all(p.improper for p in pri)
    pri = cli.parse_priors("1:2, improper", 2)
    assert (pri[0].alpha, pri[0].beta) == (1.0, 2.0) and pri[1].improper
    for bad in ("1", "a:b", "1:1,1:1"):
        with pytest.raises(ConfigError):
            cli.parse_priors(bad, 3)
    assert cli.parse_floats("0.1", 3, "theta_init") == (0.1, 0.1, 0.1)
    with pytest.raises(ConfigError):
        cli.parse_floats("0.1,0", 2)


def test_oracle_isomerization(iso_model, capsys):
    assert _run("oracle", "--model", iso_model, "--theta", "1", "--t", "1") == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "state_tuple,probability"
    row = [r for r in out if r.startswith("(0 1)")][0]
    assert float(row.split(",")[1]) == pytest.approx(0.632121, abs=1e-6)


def test_oracle_endpoint_and_bridge(iso_model, capsys):
    assert _run("oracle", "--model", iso_model, "--theta", "1", "--t", "1", "--end", "A=0,B=1") == 0
    assert capsys.readouterr().out.splitlines()[1].startswith("(0 1),0.6321")
    assert _run("oracle", "--model", iso_model, "--theta", "1", "--t", "2", "--end", "0,1",
                "--bridge-at", "1") == 0
    rows = capsys.readouterr().out.splitlines()[1:]
    assert sum(float(r.split(",")[1]) for r in rows) == pytest.approx(1.0)


def test_bench_amdahl(capsys):
    assert _run("bench", "amdahl", "--P", "1", "--C", "4") == 0
    assert float(capsys.readouterr().out) == 4.0
    assert _run("bench", "amdahl", "--P", "2", "--C", "4") == cli.EXIT_CONFIG


def test_bench_sweep(tmp_path):
    model = tmp_path / "b.txt"
    model.write_text("species: A\nreaction: 0 -> A\n")
    out = tmp_path / "sweep.csv"
    assert _run("bench", "sweep", "--model", model, "--theta", "1", "--index", "0", "--values", "0.5,1",
                "--start", "0", "--end", "1", "--t-end", "1", "--replicates", "5",
                "--timing-repeats", "1", "--workers", "1,2", "--out", out) == 0
    lines = out.read_text().splitlines()
    assert any(line.startswith("# host_cores:") for line in lines)
    body = [line for line in lines if not line.startswith("#")]
    assert body[0] == "grid_value,workers,mean_attempts,mean_time,efficiency"
    assert len(body) == 5


def test_simulate(tmp_path):
    model = os.path.join(BUNDLE, "model.txt")
    out = tmp_path / "sim"
    assert _run("simulate", "--model", model, "--theta", "0.001,0.2,0.1", "--t-end", "100",
                "--seed", "2", "--observe-every", "10", "--out", out) == 0
    table = formats.load_observations(out / "observations_0.csv", michaelis_menten())
    E, S = table.states[:, 0], table.states[:, 1]
    assert table.n_intervals == 10
    # like the bundled data: enzyme dips early then recovers, substrate is consumed
    assert E[1] < E[0] - 20 and E[-1] > E[1]
    assert S[-1] < S[0] / 3
    assert (out / "path_0.csv").read_text().count("\n") > 100


def test_simulate_edge_cases(tmp_path, iso_model):
    out = tmp_path / "none"
    assert _run("simulate", "--model", iso_model, "--theta", "1", "--t-end", "1", "--n-paths", "0",
                "--out", out) == 0
    assert not out.exists()
    assert _run("simulate", "--model", iso_model, "--theta", "1", "--t-end", "-1") == cli.EXIT_CONFIG


def test_simulate_runaway(tmp_path):
    model = tmp_path / "r.txt"
    model.write_text("species: A\nreaction: A -> 2A\ninit: A=50\n")
    assert _run("simulate", "--model", model, "--theta", "1", "--t-end", "10", "--max-events", "100",
                "--out", tmp_path / "o") == cli.EXIT_RUNAWAY


def test_simulate_deterministic(tmp_path, iso_model):
    for d in ("a", "b"):
        _run("simulate", "--model", iso_model, "--theta", "1", "--t-end", "3", "--n-paths", "3",
             "--out", tmp_path / d)
    for k in range(3):
        assert (tmp_path / "a" / f"path_{k}.csv").read_bytes() == (tmp_path / "b" / f"path_{k}.csv").read_bytes()


def test_model_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("species: A\nreaction: A -> C\n")
    data = tmp_path / "d.csv"
    data.write_text("time,A\n0,1\n1,1\n")
    assert _run("infer", "--model", bad, "--data", data) == cli.EXIT_INGESTION
    assert _run("infer", "--model", tmp_path / "missing.txt", "--data", data) == cli.EXIT_CONFIG


def _chain_files(tmp_path):
    model = tmp_path / "chain.txt"
    model.write_text("species: A B C\nreaction conv: A -> B\nreaction leak: B -> C\n")
    data = tmp_path / "chain.csv"
    data.write_text("time,A,B,C\n0,10,0,0\n1,5,5,0\n")
    return model, data


def test_infer_improper_exit(tmp_path, capsys):
    model, data = _chain_files(tmp_path)
    code = _run("infer", "--model", model, "--data", data, "--theta-init", "1,0.01", "--iterations", "3",
                "--output", tmp_path / "o")
    assert code == cli.EXIT_IMPROPER
    assert "leak" in capsys.readouterr().err


def test_infer_infeasible_exit(tmp_path):
    model, _ = _chain_files(tmp_path)
    data = tmp_path / "bad.csv"
    data.write_text("time,A,B,C\n0,10,0,0\n1,10,0,1\n")
    # no conservation law is declared, so only sampling can find this impossible
    code = _run("infer", "--model", model, "--data", data, "--max-attempts", "64", "--iterations", "1",
                "--output", tmp_path / "o")
    assert code == cli.EXIT_INFEASIBLE


def test_infer_zero_iterations(tmp_path):
    model, data = _chain_files(tmp_path)
    out = tmp_path / "o"
    assert _run("infer", "--model", model, "--data", data, "--prior", "1:1", "--output", out) == 0
    lines = (out / "summary.csv").read_text().splitlines()
    assert [line for line in lines if not line.startswith("#")] == ["quantity,mean,q0.025,q0.5,q0.975"]
    assert lines[0].startswith("# tool: kinbayes")
    assert any(line.startswith("# config_hash:") for line in lines)


def test_config_file_and_flag_override(tmp_path):
    model, data = _chain_files(tmp_path)
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"model = {model.name}\ndata = {data.name}\nprior = 1:1\niterations = 4\n"
                   "burn_in = 1\nseed = 9\noutput = never\n")
    out = tmp_path / "flag"
    assert _run("infer", "--config", cfg, "--iterations", "6", "--output", out) == 0
    _, post = formats.read_posterior(out / "posterior.csv")
    assert post.shape == (6, 5) and np.all(np.isnan(post[:, 4]))
    cfg.write_text("bogus = 1\n")
    assert _run("infer", "--config", cfg) == cli.EXIT_CONFIG
    cfg.write_text(f"model = {model.name}\ndata = {data.name}\niterations = 2\nthin = 5\n")
    assert _run("infer", "--config", cfg) == cli.EXIT_CONFIG


def test_infer_outputs_and_diagnose(tmp_path, capsys):
    model, data = _chain_files(tmp_path)
    out = tmp_path / "o"
    assert _run("infer", "--model", model, "--data", data, "--prior", "1:1", "--iterations", "30",
                "--burn-in", "2", "--output", out) == 0
    for name in ("posterior.csv", "streams.csv", "summary.csv", "telemetry.csv"):
        assert (out / name).exists()
    header, post = formats.read_posterior(out / "posterior.csv")
    assert header == ["iteration", "theta_1", "theta_2", "K_D", "K_M"]
    samples = formats.load_samples(out / "posterior.csv", out / "streams.csv")
    assert len(samples) == 30 and len(samples[0].stream_states) == 1
    summary = [line for line in (out / "summary.csv").read_text().splitlines() if not line.startswith("#")]
    assert [line.split(",")[0] for line in summary] == ["quantity", "theta_1", "theta_2", "K_D"]

    assert _run("diagnose", "gr", out / "posterior.csv", out / "posterior.csv") == 0
    rows = dict(line.split(",") for line in capsys.readouterr().out.splitlines()[1:])
    assert float(rows["theta_1"]) == pytest.approx(math.sqrt(29 / 30))

    assert _run("diagnose", "histogram", out / "posterior.csv", "--bins", "4", "--out", tmp_path / "h") == 0
    hist = (tmp_path / "h" / "hist_theta_1.csv").read_text().splitlines()
    assert hist[0] == "bin_left,bin_right,count" and len(hist) == 5

    bands = tmp_path / "bands.csv"
    assert _run("diagnose", "bands", "--model", model, "--data", data, "--posterior", out / "posterior.csv",
                "--streams", out / "streams.csv", "--grid-step", "0.25", "--out", bands) == 0
    lines = bands.read_text().splitlines()
    assert lines[0] == "time,species,lower,median,upper"
    assert lines[1] == "0.0,A,10.0,10.0,10.0"
    assert lines[-1] == "1.0,C,0.0,0.0,0.0"


def test_corrupt_stream_sidecar(tmp_path, capsys):
    model, data = _chain_files(tmp_path)
    out = tmp_path / "o"
    _run("infer", "--model", model, "--data", data, "--prior", "1:1", "--iterations", "3", "--output", out)
    text = (out / "streams.csv").read_text().splitlines()
    last = text[-1]
    text[-1] = last[:-1] + ("0" if last[-1] != "0" else "1")
    (out / "streams.csv").write_text("\n".join(text) + "\n")
    code = _run("diagnose", "bands", "--model", model, "--data", data, "--posterior", out / "posterior.csv",
                "--streams", out / "streams.csv", "--out", tmp_path / "b.csv")
    assert code == cli.EXIT_INGESTION
    assert "checksum" in capsys.readouterr().err


def test_exit_codes_disjoint():
    codes = [code for _, code in cli.EXIT_CODES]
    assert len(codes) == len(set(codes))
    assert set(codes) | {cli.EXIT_OK} == {0, 1, 2, 3, 4, 5, 6}


def test_bundle_config_matches_model():
    cfg = formats.read_key_value(os.path.join(BUNDLE, "infer.cfg"))
    assert cfg["prior"] == "improper"
    assert (cfg["burn_in"], cfg["iterations"]) == ("2000", "8000")
    with open(os.path.join(BUNDLE, "model.txt")) as fh:
        assert fh.read().strip() == MICHAELIS_MENTEN.strip()
