"""End-to-end CLI runs: artifacts, determinism, exit codes."""

import numpy as np

from spindyad.cli import EXIT_CONFIG, EXIT_OK, main

FAST_LEVELS = """
schema = 1

[experiment]
preset = levels
label = levels

[params]
j = 0.2 MHz
theta = 1.5707963267948966

[sweep]
variable = b_field
start = 50 mT
stop = 53 mT
count = 31

[output]
plot = true
"""

FAST_ZQ = """
schema = 1

[experiment]
preset = zq_decay
label = zq

[params]
j_par = 50 kHz
j_perp = 50 kHz

[noise]
beta_rms = 1 uT
xi = 1.0

[sim]
trajectories = 12
seed = 3

[sweep]
tau_start = 1 us
tau_stop = 40 us
tau_count = 9
tau_spacing = log

[output]
plot = false
"""

FAST_CUSTOM = """
schema = 1

[experiment]
preset = custom
label = custom
program = {program}

[params]
j_par = 50 kHz
j_perp = 50 kHz

[noise]
beta_rms = 1 uT
xi = 0.5

[sim]
trajectories = 6

[output]
plot = false
"""


def write(tmp_path, body, name="run.cfg"):
    path = tmp_path / name
    path.write_text(body)
    return str(path)


class TestExitCodes:
    def test_config_error_is_2(self, tmp_path, capsys):
        path = write(tmp_path, "schema = 1\n[experiment]\npreset = warp\n")
        assert main(["--config", path, "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "warp" in capsys.readouterr().err

    def test_unreadable_config_is_2(self, tmp_path):
        assert main(["--config", str(tmp_path / "nope.cfg")]) == EXIT_CONFIG

    def test_levels_ok(self, tmp_path):
        import xml.etree.ElementTree as ET

        path = write(tmp_path, FAST_LEVELS)
        out = tmp_path / "out"
        assert main(["--config", path, "--out", str(out)]) == EXIT_OK
        assert (out / "levels.csv").exists()
        assert (out / "levels_summary.txt").exists()
        svg_root = ET.parse(out / "levels.svg").getroot()
        assert svg_root.tag.endswith("svg")
        assert any(child.tag.endswith("polyline") for child in svg_root)


class TestArtifacts:
    def test_metadata_header_reproduces_config(self, tmp_path):
        path = write(tmp_path, FAST_ZQ)
        out = tmp_path / "out"
        assert main(["--config", path, "--out", str(out)]) == EXIT_OK
        text = (out / "zq.csv").read_text()
        header = [l for l in text.splitlines() if l.startswith("#")]
        assert any("noise.beta_rms = 1 uT" in l for l in header)
        assert any("sim.seed" in l for l in header)
        assert any("sim.dt = 10 ns" in l for l in header)  # default echoed
        data = [l for l in text.splitlines() if l and not l.startswith("#")]
        assert data[0] == "sweep_value,time_s,signal_mean,signal_sem"

    def test_same_seed_byte_identical(self, tmp_path):
        path = write(tmp_path, FAST_ZQ)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["--config", path, "--out", str(out1)]) == EXIT_OK
        assert main(["--config", path, "--out", str(out2)]) == EXIT_OK
        assert (out1 / "zq.csv").read_bytes() == (out2 / "zq.csv").read_bytes()

    def test_thread_count_never_changes_bytes(self, tmp_path):
        path = write(tmp_path, FAST_ZQ)
        out1, out2 = tmp_path / "t1", tmp_path / "t8"
        assert main(["--config", path, "--out", str(out1), "--threads", "1"]) == EXIT_OK
        assert main(["--config", path, "--out", str(out2), "--threads", "8"]) == EXIT_OK
        assert (out1 / "zq.csv").read_bytes() == (out2 / "zq.csv").read_bytes()

    def test_seed_override_changes_data_not_schema(self, tmp_path):
        path = write(tmp_path, FAST_ZQ)
        out1, out2 = tmp_path / "s3", tmp_path / "s4"
        assert main(["--config", path, "--out", str(out1)]) == EXIT_OK
        assert main(["--config", path, "--out", str(out2), "--seed", "4"]) == EXIT_OK
        a = (out1 / "zq.csv").read_text().splitlines()
        b = (out2 / "zq.csv").read_text().splitlines()
        sig_a = [l for l in a if l and not l.startswith("#")]
        sig_b = [l for l in b if l and not l.startswith("#")]
        assert sig_a[0] == sig_b[0]  # identical column schema
        assert sig_a[1:] != sig_b[1:]

    def test_trajectory_override_smoke(self, tmp_path):
        path = write(tmp_path, FAST_ZQ)
        out = tmp_path / "n1"
        assert main(["--config", path, "--out", str(out), "--trajectories", "1"]) == EXIT_OK
        rows = [
            l
            for l in (out / "zq.csv").read_text().splitlines()
            if l and not l.startswith("#") and not l.startswith("sweep_value")
        ]
        sems = [float(r.split(",")[3]) for r in rows]
        assert all(s == 0.0 for s in sems)

    def test_no_plot_flag(self, tmp_path):
        path = write(tmp_path, FAST_LEVELS)
        out = tmp_path / "noplot"
        assert main(["--config", path, "--out", str(out), "--no-plot"]) == EXIT_OK
        assert not (out / "levels.svg").exists()

    def test_custom_program(self, tmp_path):
        program = tmp_path / "prog.txt"
        program.write_text(
            "rotation both x 1.5707963267948966\n"
            "delay 5e-06\n"
            "rotation both x 3.141592653589793\n"
            "delay 5e-06\n"
            "rotation both x 1.5707963267948966\n"
        )
        path = write(tmp_path, FAST_CUSTOM.format(program=program))
        out = tmp_path / "custom"
        assert main(["--config", path, "--out", str(out)]) == EXIT_OK
        summary = (out / "custom_summary.txt").read_text()
        assert "signal_mean" in summary

    def test_pol_transfer_summary(self, tmp_path):
        body = """
schema = 1

[experiment]
preset = pol_transfer
label = pol

[params]
j_par = 50 kHz
j_perp = 50 kHz

[output]
plot = false
"""
        path = write(tmp_path, body)
        out = tmp_path / "pol"
        assert main(["--config", path, "--out", str(out)]) == EXIT_OK
        summary = (out / "pol_summary.txt").read_text()
        fid = float(
            [l for l in summary.splitlines() if l.startswith("noise_free_fidelity")][0].split("=")[1]
        )
        assert fid >= 0.999


class TestLevelsContent:
    def test_levels_csv_has_twelve_branch_columns(self, tmp_path):
        path = write(tmp_path, FAST_LEVELS)
        out = tmp_path / "lv"
        assert main(["--config", path, "--out", str(out)]) == EXIT_OK
        lines = [
            l for l in (out / "levels.csv").read_text().splitlines() if not l.startswith("#")
        ]
        header = lines[0].split(",")
        assert header[0] == "b_tesla"
        assert len(header) == 13
        rows = np.array([[float(x) for x in l.split(",")] for l in lines[1:]])
        assert rows.shape == (31, 13)
        # shifted columns differ from plain ones by half the Zeeman slope
        from spindyad.model import DEFAULT_GAMMA_E

        recovered = rows[:, 7:] - 0.5 * DEFAULT_GAMMA_E * rows[:, [0]]
        assert np.max(np.abs(recovered - rows[:, 1:7])) < 1e-3
