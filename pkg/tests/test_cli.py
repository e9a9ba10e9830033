import json
import os
import subprocess
import sys

import numpy as np
import pytest

from gmcweld import cli, io


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_apery_command(capsys):
    code, out, err = run(["gmc-check", "--apery"], capsys)
    assert code == 0
    row = json.loads(out)
    assert row["value"] == pytest.approx(0.852557, abs=1e-4)
    assert row["target"] == pytest.approx(-0.852557, abs=1e-6)
    assert "target=-0.852557" in err


def test_operator_moebius(capsys):
    code, out, err = run(["operator", "--map", "moebius:0.3", "--K", "16", "--G", "4096"], capsys)
    assert code == 0 and "symplectic=PASS" in err
    rows = json.loads(out)
    assert rows[0]["hs_norm_N"] < 1e-8 and rows[1]["K"] == 32


def test_operator_csv_header(capsys):
    code, out, _ = run(["operator", "--map", "sine:0.2,1,0", "--K", "8", "--G", "2048", "--format", "csv"], capsys)
    assert code == 0 and out.splitlines()[0].startswith("K,G,cols,hs_norm_N")


def test_sample_csv_columns(capsys):
    code, out, _ = run(["sample", "--N", "16", "--samples", "2", "--seed", "1", "--format", "csv"], capsys)
    lines = out.splitlines()
    assert code == 0 and lines[0] == "index,angle,value" and len(lines) == 1 + 2 * 64


def test_sample_rerun_is_byte_identical(tmp_path, capsys):
    outs = []
    for i, threads in enumerate(("1", "1", "2")):
        path = tmp_path / f"s{i}.jsonl"
        assert cli.main(["sample", "--N", "32", "--samples", "6", "--seed", "5", "--threads", threads,
                         "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    capsys.readouterr()
    assert outs[0] == outs[1] == outs[2]
    assert len(io.read_jsonl(outs[0].decode())) == 6


def test_quasi_invariance_rerun_is_byte_identical(capsys):
    argv = ["quasi-invariance", "--N", "32", "--K", "16", "--samples", "200", "--seed", "3"]
    a = run(argv, capsys)
    b = run(argv, capsys)
    assert a[0] == 0 and a[1] == b[1]
    assert json.loads(a[1])["params"]["samples"] == 200


def test_invalid_gamma_exits_one(capsys):
    code, _, err = run(["sample", "--gamma", "2.5", "--seed", "1"], capsys)
    assert code == 1 and "gamma" in err


def test_stochastic_command_needs_seed(capsys):
    code, _, err = run(["sample"], capsys)
    assert code == 1 and "--seed" in err


def test_unknown_command(capsys):
    code, _, err = run(["bake"], capsys)
    assert code == 1 and "invalid input" in err


def test_flag_overrides_file(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("# demo\nN = 128\ngamma=0.5\n")
    cfg = cli.parse_config(["sample", "--config", str(cfg_file), "--N", "256", "--seed", "1"], env={})
    assert cfg.N == 256 and cfg.gamma == 0.5
    cfg = cli.parse_config(["sample", "--seed", "1"], config_file=str(cfg_file), env={})
    assert cfg.N == 128


def test_defaults_and_env_threads():
    cfg = cli.parse_config(["weld"], env={cli.THREADS_ENV: "3"})
    assert cfg.threads == 3 and cfg.N == 256 and cfg.gamma == 1.0
    with pytest.raises(cli.ConfigError):
        cli.parse_config(["weld"], env={cli.THREADS_ENV: "many"})


def test_unknown_config_key_names_location(tmp_path):
    f = tmp_path / "bad.cfg"
    f.write_text("N=64\nbogus=1\n")
    with pytest.raises(cli.ConfigError, match=r"bad.cfg:2: unknown key 'bogus'"):
        cli.parse_config(["weld", "--config", str(f)], env={})


def test_type_error_reports_both_locations(tmp_path):
    f = tmp_path / "t.cfg"
    f.write_text("N=lots\n")
    with pytest.raises(cli.ConfigError) as e:
        cli.parse_config(["weld", "--config", str(f), "--N", "64"], env={})
    assert "t.cfg:1" in str(e.value) and "--N" in str(e.value)
    f.write_text("N=64\n")
    with pytest.raises(cli.ConfigError) as e:
        cli.parse_config(["weld", "--config", str(f), "--N", "x"], env={})
    assert "t.cfg:1" in str(e.value) and "--N" in str(e.value)


def test_grid_smaller_than_twice_order_rejected():
    with pytest.raises(cli.ConfigError):
        cli.parse_config(["sample", "--N", "64", "--G", "100", "--seed", "1"], env={})


def test_unwritable_output(tmp_path, capsys):
    code, _, err = run(["weld", "--out", str(tmp_path / "missing" / "x.json")], capsys)
    assert code == 1 and "cannot write" in err


def test_weld_fixture_and_file(tmp_path, capsys):
    code, out, err = run(["weld", "--curve", "unit_circle", "--m", "128"], capsys)
    assert code == 0 and json.loads(out)["scale"] == pytest.approx(1.0, abs=1e-3)
    f = tmp_path / "square.json"
    f.write_text(json.dumps([[1, -1], [1, 1], [-1, 1], [-1, -1]]))
    code, out, _ = run(["weld", "--curve", str(f), "--m", "64", "--format", "csv"], capsys)
    assert code == 0 and out.splitlines()[0] == "knot,lift"


def test_numerical_abort_exits_two(tmp_path, capsys):
    t = 2 * np.pi * np.arange(64) / 64
    v = np.exp(1j * t)
    v[20:30] = 0.5 * v[20:30][::-1]
    f = tmp_path / "bowtie.json"
    f.write_text(json.dumps([[z.real, z.imag] for z in v]))
    code, _, err = run(["weld", "--curve", str(f), "--m", "64"], capsys)
    assert code == 2 and "numerical abort" in err


def test_kinked_map_post_side_aborts(capsys):
    code, _, err = run(["quasi-invariance", "--map", "rotation:0.3", "--samples", "10", "--seed", "1"], capsys)
    assert code == 2 and "numerical abort" in err


def test_fixtures_command(capsys):
    code, out, _ = run(["fixtures", "--m", "64", "--format", "csv"], capsys)
    assert code == 0 and out.splitlines()[0] == "name,scale,vertices" and len(out.splitlines()) == 6


def test_module_entry_point():
    p = subprocess.run([sys.executable, "-m", "gmcweld", "gmc-check", "--apery", "--G", "256"],
                       capture_output=True, text=True)
    assert p.returncode == 0 and "apery" in p.stderr


def test_atomic_write_leaves_no_partial_file(tmp_path):
    target = tmp_path / "out.txt"
    target.write_text("old")


    with pytest.raises(TypeError):
        io.atomic_write(str(target), 123)
    assert target.read_text() == "old"
    assert os.listdir(tmp_path) == ["out.txt"]
    io.atomic_write(str(target), "new")
    assert target.read_text() == "new"


def test_csv_table_formats():
    text = io.csv_table([{"a": 0.1, "b": [1, 2]}, {"a": 2}])
    assert text.splitlines() == ["a,b", '0.1,"[1, 2]"', "2,"]
