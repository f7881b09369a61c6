import json
import subprocess
import sys

import numpy as np
import pytest

from neumannlab.cli import named_control, parse_field, parse_points, parse_vector, run
from neumannlab.errors import ConfigError
from neumannlab.skorokhod import path_from_text

FREE = '{"kind": "free_space"}'
FAST = ["--nodes", "16", "--restarts", "3"]


def record(path):
    return dict(line.split("\t", 1) for line in path.read_text().splitlines())


def test_parsers():
    np.testing.assert_allclose(parse_vector("1,-2.5"), [1.0, -2.5])
    assert len(parse_points("1,0;2,0;")) == 2
    assert float(parse_field("constant:-1")([3.0, 3.0])) == -1.0
    assert float(parse_field("linear:1,0:2")(np.array([3.0, 7.0]))) == 5.0
    assert float(parse_field("zero")([1.0, 1.0])) == 0.0
    np.testing.assert_allclose(named_control("constant:1,-1")(0.3), [1.0, -1.0])
    with pytest.raises(ConfigError):
        parse_field("cubic:1")
    with pytest.raises(ConfigError):
        parse_vector("a,b")
    with pytest.raises(ConfigError):
        named_control("spiral")


def test_solve_free_space(tmp_path):
    code = run(["solve", "--domain", FREE, "--model", "quadratic", "--u0", "linear:1,0:2",
                "--x", "3,0", "--t", "1", "--out", str(tmp_path)])
    assert code == 0
    assert float(record(tmp_path / "value.txt")["value"]) == pytest.approx(4.5, abs=1e-3)
    path = path_from_text((tmp_path / "path.tsv").read_text())
    assert path.p is not None and len(path) == 65


def test_config_file_and_flag_override(tmp_path):
    cfg = {"domain": {"kind": "free_space"}, "model": {"name": "quadratic"}, "u0": "linear:1,0:2",
           "solver": {"nodes": 16, "restarts": 2}, "options": {"x": [3.0, 0.0], "t": 1.0}}
    conf = tmp_path / "run.json"
    conf.write_text(json.dumps(cfg))
    assert run(["solve", "--config", str(conf), "--out", str(tmp_path / "a")]) == 0
    assert float(record(tmp_path / "a" / "value.txt")["value"]) == pytest.approx(4.5, abs=1e-3)
    assert run(["solve", "--config", str(conf), "--t", "2", "--out", str(tmp_path / "b")]) == 0
    assert float(record(tmp_path / "b" / "value.txt")["value"]) == pytest.approx(4.0, abs=1e-3)


def test_exit_codes(tmp_path):
    assert run(["solve", "--domain", '{"kind": "moebius"}', "--x", "3,0", "--t", "1", "--out", str(tmp_path)]) == 2
    assert run(["solve", "--domain", "not json", "--x", "3,0", "--t", "1", "--out", str(tmp_path)]) == 2
    assert run(["solve", "--out", str(tmp_path)]) == 2
    assert run(["nonsense"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"colour": "red"}')
    assert run(["solve", "--config", str(bad)]) == 2
    # start point inside the obstacle: a solver-side failure
    assert run(["solve", "--x", "0.2,0", "--t", "1", "--out", str(tmp_path)] + FAST) == 3


def test_skorokhod_command(tmp_path):
    code = run(["skorokhod", "--domain", '{"kind": "half_space", "normal": [0, -1]}', "--x0", "0,1",
                "--control", "constant:1,-1", "--dt", "1e-3", "--T", "2", "--out", str(tmp_path)])
    assert code == 0
    rec = record(tmp_path / "residuals.txt")
    assert float(rec["max_feasibility"]) <= 1e-10
    path = path_from_text((tmp_path / "path.tsv").read_text())
    np.testing.assert_allclose(path.eta[-1], [2.0, 0.0], atol=2e-3)


def test_flow_command(tmp_path):
    code = run(["flow", "--model", "quadratic", "--g", "zero", "--x0", "3,0", "--p0", "0,1",
                "--T", "1", "--out", str(tmp_path)])
    assert code == 0
    path = path_from_text((tmp_path / "path.tsv").read_text())
    np.testing.assert_allclose(path.eta[-1], [3.0, -1.0], atol=2e-3)
    assert float(record(tmp_path / "diagnostics.txt")["tangency"]) == 0.0


def test_probe_command(tmp_path):
    assert run(["probe", "--source", "disk", "--points", "1,0", "--directions", "1,0", "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "probe.tsv").read_text().splitlines()
    cells = rows[1].split("\t")
    assert cells[2] == "boundary+"
    assert float(cells[4]) == pytest.approx(1.5, abs=0.02)


def test_disk_example_residual(tmp_path, capsys):
    assert run(["disk-example", "--check", "residual", "--out", str(tmp_path)]) == 0
    assert float(record(tmp_path / "disk_checks.txt")["max_residual"]) <= 1e-6
    assert "max residual" in capsys.readouterr().err


def test_disk_example_all(tmp_path):
    assert run(["disk-example", "--out", str(tmp_path)]) == 0
    table = np.loadtxt(tmp_path / "disk_table.tsv", skiprows=1)
    np.testing.assert_allclose(table[:, 3], table[:, 4], atol=1e-9)
    rec = record(tmp_path / "disk_checks.txt")
    assert float(rec["boundary_slope"]) == pytest.approx(1.5, abs=0.02)
    assert float(rec["interior_slope"]) == pytest.approx(2.0, abs=0.05)


def test_two_holes_command(tmp_path):
    assert run(["two-holes", "--h", "1.0", "--no-front", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "two_holes.tsv").read_text().splitlines()
    assert lines[0].split("\t") == ["h", "theta0", "t1", "t2", "D1", "f_h", "z1"]
    assert float(lines[1].split("\t")[1]) == pytest.approx(1.427295, abs=1e-6)


def test_two_holes_parallel_matches_serial(tmp_path):
    args = ["two-holes", "--h", "0.5,1.0", "--resolution", "100,100"]
    assert run(args + ["--out", str(tmp_path / "s")]) == 0
    assert run(args + ["--jobs", "2", "--out", str(tmp_path / "p")]) == 0
    for name in ("two_holes.tsv", "two_holes_front.tsv"):
        assert (tmp_path / "s" / name).read_bytes() == (tmp_path / "p" / name).read_bytes()


def test_front_command(tmp_path):
    assert run(["front", "--resolution", "200,200", "--out", str(tmp_path)]) == 0
    rec = record(tmp_path / "front.txt")
    assert float(rec["t"]) == pytest.approx(2 + np.pi / 2, abs=1e-3)
    assert float(rec["bowing_depth"]) == pytest.approx(np.pi / 2 - 1, abs=0.02)
    assert (tmp_path / "contours.txt").read_text().strip()
    assert run(["front", "--domain", FREE, "--out", str(tmp_path)]) == 2


def test_check_command(capsys):
    assert run(["check", "--criterion", "3"]) == 0
    assert "criterion 3 [PASS]" in capsys.readouterr().out
    assert run(["check", "--criterion", "12"]) == 2


def test_deterministic_outputs(tmp_path):
    args = ["solve", "--x", "1.2,0.3", "--t", "1"] + FAST
    assert run(args + ["--out", str(tmp_path / "a")]) == 0
    assert run(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("value.txt", "path.tsv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "neumannlab", "two-holes", "--h", "0.5", "--no-front",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout == ""
    assert (tmp_path / "two_holes.tsv").exists()
