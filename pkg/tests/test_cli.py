import csv
import io
import json
import math
import shutil
import subprocess

import numpy as np
import pytest

import oracles
from tsekit.cli import main
from tsekit.config import dump_design, prototype_design
from tsekit.core import Pose
from tsekit.kinematics import inverse_kinematics

SMALL_GRID = ["--nr", "5", "--nphi", "6", "--nz", "6"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestIk:
    def test_symmetric(self, capsys):
        code, out, _ = run(capsys, "ik", "--preset", "prototype", "--z", "0.9")
        assert code == 0
        vals = [float(r["displacement"]) for r in rows(out)]
        assert len(vals) == 6 and max(vals) - min(vals) < 1e-10
        assert all(r["status"] == "ok" for r in rows(out))

    def test_unreachable(self, capsys):
        code, out, err = run(capsys, "ik", "--z", "2.0")
        assert code == 3
        assert "unreachable" in err
        assert all("no_real_solution" in r["status"] for r in rows(out))

    def test_matches_library(self, capsys, proto):
        code, out, _ = run(capsys, "ik", "--x", "0.1", "--z", "0.9", "--pitch", "10")
        assert code == 0
        pose = Pose((0.1, 0, 0.9), pitch=math.radians(10))
        ref = inverse_kinematics(proto, pose).actuators.as_array()
        got = np.array([float(r["displacement"]) for r in rows(out)])
        np.testing.assert_allclose(got, ref, rtol=1e-11)

    def test_infeasible(self, capsys):
        code, out, _ = run(capsys, "ik", "--x", "0.8", "--z", "0.9")
        assert code == 2
        assert any(r["status"] != "ok" for r in rows(out))

    def test_fold_check_toggle(self, capsys):
        assert run(capsys, "ik", "--z", "1.68")[0] == 2
        assert run(capsys, "ik", "--z", "1.68", "--no-fold-check")[0] == 0

    def test_json(self, capsys):
        code, out, _ = run(capsys, "ik", "--z", "0.9", "--format", "json")
        data = json.loads(out)
        assert code == 0 and data[0]["slide"] == "s_A1" and isinstance(data[0]["displacement"], float)

    def test_config_file(self, capsys, tmp_path):
        p = tmp_path / "d.yaml"
        p.write_text(dump_design(prototype_design()))
        a = run(capsys, "ik", "--config", str(p), "--z", "0.9")
        b = run(capsys, "ik", "--z", "0.9")
        assert a == b

    def test_bad_config(self, capsys, tmp_path):
        p = tmp_path / "d.yaml"
        p.write_text(dump_design(prototype_design()).replace("r_top:", "r_top: x\n  r_tip:"))
        code, _, err = run(capsys, "ik", "--config", str(p), "--z", "0.9")
        assert code == 1
        assert f"{p}:" in err

    def test_usage_error_is_input_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["ik", "--z", "abc"])
        assert exc.value.code == 1


class TestFk:
    def test_roundtrip(self, capsys):
        _, out, _ = run(capsys, "ik", "--x", "0.05", "--y", "-0.03", "--z", "0.8", "--roll", "3", "--yaw", "-4")
        q = [r["displacement"] for r in rows(out)]
        code, out, _ = run(capsys, "fk", "--q", *q, "--seed-z", "0.85")
        assert code == 0
        r = rows(out)[0]
        got = [float(r[k]) for k in ("x", "y", "z", "roll", "pitch", "yaw")]
        np.testing.assert_allclose(got[:3], [0.05, -0.03, 0.8], atol=1e-6)
        np.testing.assert_allclose(np.radians(got[3:]), np.radians([3, 0, -4]), atol=1e-6)

    def test_equal_on_axis(self, capsys):
        code, out, _ = run(capsys, "fk", "--q", *(["0.45"] * 6), "--seed-x", "0.01")
        r = rows(out)[0]
        assert code == 0
        for k in ("x", "y", "roll", "pitch", "yaw"):
            assert abs(float(r[k])) < 1e-9

    def test_out_of_stroke(self, capsys):
        code, _, err = run(capsys, "fk", "--q", "0.45", "0.45", "0.45", "0.45", "0.45", "3.0")
        assert code == 2 and "infeasible" in err

    def test_non_convergence(self, capsys):
        # three equal pairs that no single plate pose can produce together
        code, _, err = run(capsys, "fk", "--q", "0.05", "0.8", "0.05", "0.8", "0.05", "0.8")
        assert code == 4 and "did not converge" in err


class TestWorkspace:
    def test_small_grid(self, capsys, tmp_path):
        out_file = tmp_path / "ws.xyz"
        code, out, _ = run(capsys, "workspace", *SMALL_GRID, "--out", str(out_file))
        r = rows(out)[0]
        assert code == 0
        assert int(r["n_total"]) == 180
        pts = np.loadtxt(out_file, ndmin=2)
        assert len(pts) == int(r["n_valid"])
        assert float(r["ws_fraction"]) == pytest.approx(int(r["n_valid"]) / 180)

    def test_deterministic(self, capsys, tmp_path):
        a, b = tmp_path / "a.xyz", tmp_path / "b.xyz"
        out_a = run(capsys, "workspace", *SMALL_GRID, "--out", str(a))
        out_b = run(capsys, "workspace", *SMALL_GRID, "--out", str(b))
        assert out_a == out_b
        assert a.read_bytes() == b.read_bytes()

    def test_above_reach(self, capsys):
        code, out, _ = run(capsys, "workspace", *SMALL_GRID, "--zmin", "1.8", "--zmax", "2.0")
        assert code == 0 and float(rows(out)[0]["ws_fraction"]) == 0.0

    def test_unwritable(self, capsys, tmp_path):
        code, _, err = run(capsys, "workspace", *SMALL_GRID, "--out", str(tmp_path / "missing" / "x.xyz"))
        assert code == 1 and "cannot write" in err

    def test_bad_grid(self, capsys):
        assert run(capsys, "workspace", "--nr", "0")[0] == 1

    def test_pitch_slice(self, capsys):
        code, out, _ = run(capsys, "workspace", *SMALL_GRID, "--pitch", "75")
        assert code == 0 and 0.0 <= float(rows(out)[0]["ws_fraction"]) <= 1.0


class TestSweep:
    def test_k1_csv(self, capsys, tmp_path):
        out_file = tmp_path / "s.csv"
        code, _, _ = run(
            capsys, "sweep", "--param", "k1", "--values", "0.5,1.0", *SMALL_GRID, "--nsamples", "4", "--out", str(out_file)
        )
        assert code == 0
        text = out_file.read_text()
        assert text.startswith("param_value,HAF,ws_percent,sigma_z@0.100,")
        r = rows(text)
        assert len(r) == 2 and r[1]["HAF"] == "1" and float(r[0]["HAF"]) > 1
        assert r[0]["error"] == ""

    def test_k2_symmetric(self, capsys):
        code, out, _ = run(capsys, "sweep", "--param", "k2", "--values=-30,30", "--no-workspace", "--nsamples", "5")
        r = rows(out)
        assert code == 0
        assert float(r[0]["HAF"]) == pytest.approx(float(r[1]["HAF"]), rel=0.02)
        assert r[0]["ws_percent"] == "nan"

    def test_k3_profiles(self, capsys):
        code, out, _ = run(capsys, "sweep", "--param", "k3", "--values", "0.01,0.05", "--no-workspace")
        prof = [np.array([float(v) for k, v in r.items() if k.startswith("sigma_z")]) for r in rows(out)]
        a, b = (p / p.max() for p in prof)
        assert code == 0 and np.all(np.abs(a - b) <= 0.02 * a)

    def test_bad_value_recorded(self, capsys):
        code, out, _ = run(capsys, "sweep", "--param", "k1", "--values", "1.5", "--no-workspace")
        assert code == 0 and "k1" in rows(out)[0]["error"]

    def test_malformed_values(self, capsys):
        assert run(capsys, "sweep", "--param", "k1", "--values", "a,b")[0] == 1

    def test_svd_definition(self, capsys):
        g = run(capsys, "sweep", "--param", "k1", "--values", "0.5", "--no-workspace", "--nsamples", "3")[1]
        s = run(capsys, "sweep", "--param", "k1", "--values", "0.5", "--no-workspace", "--nsamples", "3", "--sigma", "svd")[1]
        assert float(rows(g)[0]["HAF"]) == pytest.approx(float(rows(s)[0]["HAF"]), rel=1e-9)


class TestSingularity:
    def test_generic_pose(self, capsys):
        code, out, _ = run(capsys, "singularity", "--x", "0.1", "--z", "0.9", "--yaw", "5")
        r = rows(out)
        assert code == 0 and len(r) == 3
        assert all(abs(float(x["det_normalized"])) > 0.1 for x in r)
        assert all(x["singular"] == "false" for x in r)

    def test_constructed_singular(self, capsys, proto):
        sA, sB = 0.5168301161107344, 0.23043363673581885
        ap = oracles.singular_apexes(proto, sA, sB)[0]
        code, out, _ = run(capsys, "singularity", "--local", *(repr(float(v)) for v in (sA, sB, *ap)))
        r = rows(out)[0]
        assert code == 5 and r["singular"] == "true"
        assert float(r["critical_ratio"]) == pytest.approx(float(r["design_ratio"]), rel=1e-9)

    def test_unreachable(self, capsys):
        assert run(capsys, "singularity", "--z", "2.5")[0] == 3


@pytest.mark.skipif(shutil.which("tsekit") is None, reason="console script not installed")
def test_console_script():
    p = subprocess.run(["tsekit", "ik", "--z", "2.0"], capture_output=True, text=True)
    assert p.returncode == 3
    p = subprocess.run(["tsekit", "ik", "--z", "0.9"], capture_output=True, text=True)
    assert p.returncode == 0 and p.stdout.startswith("slide,displacement,status")
