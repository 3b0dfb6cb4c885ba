import json

import numpy as np
import pytest

from seqmc.cli import main

CONFIG = """
[energy]
seed = 7
vocab_size = 3
length = 3

[sampler]
epochs = 12
burn_in = 3
chains = 2
master_seed = 11
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text(CONFIG)
    return str(path)


def test_sample_writes_run_dir(config_file, tmp_path, capsys):
    code = main(["sample", "--config", config_file, "--out", str(tmp_path / "runs")])
    assert code == 0
    out = capsys.readouterr().out
    assert "acceptance rate" in out
    run_dirs = list((tmp_path / "runs").iterdir())
    assert len(run_dirs) == 1
    assert (run_dirs[0] / "trace.csv").exists()


def test_sample_rejects_bad_config(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[sampler]\nnot_a_key = 1\n")
    assert main(["sample", "--config", str(bad)]) == 2


def test_sample_rejects_bad_override(config_file):
    assert main(["sample", "--config", config_file, "--set", "sampler.nope=1"]) == 2


def test_oracle_within_tolerance(config_file, capsys):
    assert main(["oracle", "--config", config_file]) == 0
    assert "stationarity TV" in capsys.readouterr().out


def test_oracle_export_csvs(config_file, tmp_path):
    out = tmp_path / "exports"
    assert main(["oracle", "--config", config_file, "--export", str(out)]) == 0
    kernel_lines = (out / "kernel.csv").read_text().splitlines()
    assert kernel_lines[0] == "row,col,value"
    assert len(kernel_lines) == 1 + 27 * 27
    target_lines = (out / "target.csv").read_text().splitlines()
    assert target_lines[0] == "index,value"
    assert len(target_lines) == 1 + 27
    total = sum(float(line.split(",")[1]) for line in target_lines[1:])
    assert abs(total - 1.0) <= 1e-9
    assert (out / "stationary.csv").exists()


def test_oracle_block_kernel_flow(config_file):
    code = main(["oracle", "--config", config_file,
                 "--set", "energy.vocab_size=2",
                 "--set", "proposal.block_mode=fixed",
                 "--set", "proposal.block_size=2"])
    assert code == 0


def test_oracle_violation_exit_code(config_file):
    # the degenerate sampler misses the raw target by a wide margin
    code = main(["oracle", "--config", config_file,
                 "--set", "sampler.algorithm=deg_gibbs"])
    assert code == 4


def test_compare_emits_joined_trace(config_file, tmp_path, capsys):
    out_dir = tmp_path / "cmp"
    assert main(["compare", "--config", config_file, "--out", str(out_dir)]) == 0
    lines = (out_dir / "compare.csv").read_text().splitlines()
    assert lines[1].startswith("sampler,chain_id,")
    samplers = {line.split(",")[0] for line in lines[2:]}
    assert samplers == {"mh-raw", "mh-norm", "deg-gibbs"}
    # every variant contributes chains * epochs * length rows
    assert len(lines) == 2 + 3 * 2 * 12 * 3
    out = capsys.readouterr().out
    assert "deg-gibbs: acceptance 1.0000" in out


def test_counterexample_builtin(capsys):
    assert main(["counterexample"]) == 0
    out = capsys.readouterr().out
    assert f"{np.log(99):.12f}"[:10] in out


def test_counterexample_user_tables(tmp_path, capsys):
    tables = {"c12": [[0.5, 0.5], [0.5, 0.5]], "c21": [[0.5, 0.5], [0.5, 0.5]]}
    path = tmp_path / "tables.json"
    path.write_text(json.dumps(tables))
    assert main(["counterexample", "--tables", str(path)]) == 0
    assert "consistency gap: 0.0" in capsys.readouterr().out


def test_remote_endpoint_failure_exit_code(config_file):
    code = main(["sample", "--config", config_file,
                 "--set", "energy.model=remote",
                 "--set", "energy.endpoint=tcp:127.0.0.1:1"])
    assert code == 3


def test_convenience_flags_override_config(config_file, tmp_path, capsys):
    code = main(["sample", "--config", config_file, "--algorithm", "deg_gibbs",
                 "--epochs", "8", "--chains", "1",
                 "--out", str(tmp_path / "runs")])
    assert code == 0
    assert "acceptance rate: 1.0000" in capsys.readouterr().out
    run_dir = next((tmp_path / "runs").iterdir())
    rows = (run_dir / "trace.csv").read_text().splitlines()
    assert len(rows) == 2 + 1 * 8 * 3


def test_file_backend_round_trip(tmp_path, capsys):
    import seqmc

    model_path = tmp_path / "model.sqmc"
    seqmc.save_tabular(seqmc.tabular_model_generate(7, 3, 3), model_path)
    code = main(["sample", "--set", "energy.model=file",
                 "--set", f"energy.path={model_path}",
                 "--set", "sampler.epochs=10", "--set", "sampler.burn_in=2",
                 "--chains", "2", "--out", str(tmp_path / "runs")])
    assert code == 0
    assert "stationarity TV" in capsys.readouterr().out
