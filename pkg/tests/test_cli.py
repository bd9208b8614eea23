import json
import subprocess
import sys

import pytest

from permcodec.cli import EXIT_ASSERT, EXIT_BUDGET, EXIT_CONFIG, EXIT_OK, main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def cfg_file(tmp_path):
    def write(obj):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(obj))
        return str(p)

    return write


def test_rd_sweep_json(capsys):
    code, out, _ = run(["rd-sweep", "--pmf", "0.5,0.5", "--slopes", "0,1,2"], capsys)
    assert code == EXIT_OK
    pts = json.loads(out)["points"]
    assert pts[0]["R_bits"] == 0.0 and pts[0]["D"] == 0.5


def test_rd_sweep_csv(capsys):
    code, out, _ = run(["rd-sweep", "--slopes", "0,1", "--format", "csv"], capsys)
    assert out.splitlines()[0] == "slope,D,R_nats,R_bits"


def test_encrypt_save_then_decrypt(tmp_path, capsys):
    c = str(tmp_path / "c.json")
    code, out, _ = run(["encrypt", "--sequence", "001101", "--key", "2", "--n-keys", "4", "--seed", "1",
                        "--save-cipher", c], capsys)
    assert code == EXIT_OK
    y = "".join(map(str, json.loads(out)["output"]))
    code, out, _ = run(["encrypt", "--sequence", y, "--key", "2", "--cipher-file", c, "--decrypt"], capsys)
    assert json.loads(out)["output"] == [0, 0, 1, 1, 0, 1]


def test_encrypt_requires_seed(capsys):
    code, _, err = run(["encrypt", "--sequence", "01", "--key", "0", "--n-keys", "2"], capsys)
    assert code == EXIT_CONFIG and "seed" in err


def test_compress_codebook_round_trip(tmp_path, capsys):
    cb = str(tmp_path / "cb.json")
    _, first, _ = run(["compress", "--sequence", "0110", "--n-codewords", "4", "--seed", "2",
                       "--save-codebook", cb], capsys)
    _, second, _ = run(["compress", "--sequence", "0110", "--codebook-file", cb], capsys)
    assert json.loads(first)["index"] == json.loads(second)["index"]


def test_experiment_commands_need_seed():
    with pytest.raises(SystemExit):
        main(["pipeline", "run"])


def test_pipeline_with_assert(capsys):
    code, out, _ = run(["pipeline", "run", "--seed", "3", "--assert-bounds"], capsys)
    assert code == EXIT_OK
    assert json.loads(out)["leakage"]["total"]["holds"]


def test_unknown_config_field(cfg_file, capsys):
    code, _, err = run(["pipeline", "run", "--seed", "1", "--config", cfg_file({"bogus": 1})], capsys)
    assert code == EXIT_CONFIG and "bogus" in err


def test_budget_refusal(cfg_file, capsys):
    code, _, err = run(["leakage", "--seed", "1", "--config", cfg_file({"budgets": {"pairs": 100}})], capsys)
    assert code == EXIT_BUDGET and "budget" in err


def test_assertion_failure_exit_code(cfg_file, capsys, monkeypatch):
    from permcodec import cli

    def failing(rep):
        raise cli.AssertionFailed("forced")

    monkeypatch.setattr(cli, "_assert_reversed_leakage", failing)
    code, _, err = run(["leakage", "--seed", "1", "--assert-bounds"], capsys)
    assert code == EXIT_ASSERT and "forced" in err


def test_leakage_csv_columns(capsys):
    code, out, _ = run(["leakage", "--seed", "1", "--format", "csv"], capsys)
    assert out.splitlines()[0].startswith("type,type_size,probability,leakage_nats")
    assert len(out.splitlines()) == 8


def test_concentration_and_compare(cfg_file, capsys):
    cfg = cfg_file({"concentration": {"q": 0.25, "Delta": 4, "trials": 30}})
    code, out, _ = run(["concentration", "--seed", "1", "--config", cfg, "--assert-bounds"], capsys)
    assert code == EXIT_OK
    assert {e["kind"] for e in json.loads(out)["experiments"]} == {"mutual", "pairwise"}
    code, out, _ = run(["compare", "--seed", "1", "--format", "csv"], capsys)
    assert code == EXIT_OK and out.splitlines()[1].startswith("conventional")


def test_out_file(tmp_path, capsys):
    dest = tmp_path / "r.json"
    assert main(["pipeline", "run", "--seed", "2", "--out", str(dest)]) == EXIT_OK
    assert json.loads(dest.read_text())["system"] == "reversed"


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "permcodec", "rd-sweep", "--slopes", "0"], capture_output=True,
                         text=True, check=False)
    assert res.returncode == 0 and "points" in res.stdout
