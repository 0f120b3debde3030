"""Command-line interface: exit codes, outputs, and subcommands."""

import csv
import json
import math

import numpy as np
import pytest

import ehd
from ehd.cli import main

PI = math.pi


def full(grid, values):
    return np.ascontiguousarray(np.broadcast_to(values, (grid.n,) * 3), dtype=float)


def write_config(tmp_path, body):
    path = tmp_path / "run.cfg"
    path.write_text(body)
    return str(path)


def tg_config(tmp_path, t_end=0.02, extra=""):
    return write_config(
        tmp_path,
        f"grid_n = 16\nt_end = {t_end}\ninitial_condition = taylor_green\n"
        f"output_dir = {tmp_path}\n{extra}",
    )


def make_state(grid, ux=None, v=None, w=None):
    zeros = np.zeros((grid.n,) * 3)
    return ehd.State(
        u=ehd.VectorField(
            ehd.RealField(grid, ux if ux is not None else zeros.copy()),
            ehd.RealField(grid, zeros.copy()),
            ehd.RealField(grid, zeros.copy()),
        ),
        v=ehd.RealField(grid, v if v is not None else zeros.copy()),
        w=ehd.RealField(grid, w if w is not None else zeros.copy()),
    )


class TestRunCommand:
    def test_completed_run_exits_zero_and_writes_outputs(self, tmp_path, capsys):
        code = main(["run", tg_config(tmp_path)])
        assert code == 0
        for name in ("series.csv", "audit.csv", "energy.csv", "report.json", "final.ehds"):
            assert (tmp_path / name).exists()
        out = capsys.readouterr().out
        assert "status: completed" in out
        assert "spectral tail fraction" in out

    def test_energy_series_tracks_analytic_decay(self, tmp_path):
        main(["run", tg_config(tmp_path, t_end=0.05)])
        with open(tmp_path / "energy.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) > 10
        for row in rows:
            t = float(row["t"])
            kinetic = float(row["kinetic_energy"])
            assert kinetic == pytest.approx(4.0 * PI**3 * math.exp(-4.0 * t), rel=1e-6)

    def test_series_csv_has_contracted_columns(self, tmp_path):
        main(["run", tg_config(tmp_path)])
        with open(tmp_path / "series.csv", newline="") as fh:
            header = next(csv.reader(fh))
        assert header == [
            "t", "dt", "bkm_integrand", "bkm_integral", "ps_u_p", "ps_u_integral",
            "ps_gradu_integral", "besov_aniso_integrand", "besov_aniso_integral",
        ]

    def test_audit_csv_has_contracted_columns(self, tmp_path):
        main(["run", tg_config(tmp_path)])
        with open(tmp_path / "audit.csv", newline="") as fh:
            header = next(csv.reader(fh))
        assert header == [
            "t", "charge_identity_residual", "velocity_margin", "positivity_term",
            "ls_ratio", "Y", "gn_ratio_L4", "gn_ratio_L3",
        ]

    def test_checkpoint_cadence(self, tmp_path):
        main(["run", tg_config(tmp_path, extra="checkpoint_every = 5\ndt = 2e-3\n")])
        cadenced = sorted(tmp_path.glob("state_*.ehds"))
        assert cadenced, "expected cadenced checkpoints"
        state = ehd.read_checkpoint(cadenced[0])
        assert state.step_index % 5 == 0

    def test_final_checkpoint_round_trips(self, tmp_path):
        main(["run", tg_config(tmp_path)])
        state = ehd.read_checkpoint(tmp_path / "final.ehds")
        report = json.loads((tmp_path / "report.json").read_text())
        assert ehd.state_checksum(state) == report["state_checksum"]

    def test_config_error_exits_one(self, tmp_path, capsys):
        path = write_config(tmp_path, "t_end = 0.1\nt_end = 0.2\n"
                                      "initial_condition = taylor_green\n")
        code = main(["run", path])
        assert code == 1
        err = capsys.readouterr().err
        assert err.startswith("EHD-E1:")
        assert "duplicate" in err

    def test_missing_config_file_exits_one(self, tmp_path, capsys):
        code = main(["run", str(tmp_path / "nope.cfg")])
        assert code == 1
        assert "EHD-E1:" in capsys.readouterr().err

    def test_dt_min_above_cfl_limit_exits_one(self, tmp_path, capsys):
        # Taylor-Green speeds give a CFL step around 0.16 on a 16^3 grid
        path = tg_config(tmp_path, extra="dt = 0.25\ndt_min = 0.2\n")
        code = main(["run", path])
        assert code == 1
        err = capsys.readouterr().err
        assert "EHD-E1:" in err and "CFL" in err

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_blow_up_exits_two(self, tmp_path, capsys):
        grid = ehd.Grid(16)
        huge = make_state(
            grid,
            ux=full(grid, 1e160 * np.sin(grid.y)),
            v=np.ones((16,) * 3),
            w=np.ones((16,) * 3),
        )
        ckpt = tmp_path / "huge.ehds"
        ehd.write_checkpoint(ckpt, huge)
        path = write_config(
            tmp_path,
            f"t_end = 0.01\ninitial_condition = from_checkpoint(path={ckpt})\n"
            f"dt_min = 1e-300\noutput_dir = {tmp_path}\n",
        )
        code = main(["run", path])
        assert code == 2
        err = capsys.readouterr().err
        assert "EHD-E2:" in err
        report = json.loads((tmp_path / "report.json").read_text())
        assert report["status"] == "blow_up_suspected"

    def test_invariant_violation_exits_three(self, tmp_path, capsys):
        grid = ehd.Grid(16)
        skewed = make_state(grid, ux=full(grid, np.sin(grid.x)))  # div u != 0
        ckpt = tmp_path / "skewed.ehds"
        ehd.write_checkpoint(ckpt, skewed)
        path = write_config(
            tmp_path,
            f"t_end = 0.01\ninitial_condition = from_checkpoint(path={ckpt})\n"
            f"output_dir = {tmp_path}\n",
        )
        code = main(["run", path])
        assert code == 3
        assert "EHD-E3:" in capsys.readouterr().err

    def test_usage_error_exits_one(self, capsys):
        assert main(["frobnicate"]) == 1
        assert "EHD-E1:" in capsys.readouterr().err

    def test_duplicate_kind_uses_first_for_series_columns(self, tmp_path):
        path = tg_config(
            tmp_path,
            extra="criterion = PS_u, 6, auto\ncriterion = PS_u, 12, auto\n",
        )
        assert main(["run", path]) == 0
        with open(tmp_path / "series.csv", newline="") as fh:
            row = next(csv.DictReader(fh))
        assert float(row["ps_u_p"]) == 6.0
        report = json.loads((tmp_path / "report.json").read_text())
        assert [r["p"] for r in report["criteria"]] == [6.0, 12.0]


class TestBesovCommand:
    def test_single_mode_prints_one(self, tmp_path, capsys):
        grid = ehd.Grid(16)
        state = make_state(grid, v=full(grid, np.cos(4 * grid.x)))
        ckpt = tmp_path / "cos4.ehds"
        ehd.write_checkpoint(ckpt, state)
        code = main(["besov", str(ckpt), "--s", "0", "--p", "inf", "--r", "inf",
                     "--field", "v"])
        assert code == 0
        printed = float(capsys.readouterr().out.strip())
        assert printed == pytest.approx(1.0, abs=1e-12)

    def test_velocity_magnitude_default_field(self, tmp_path, capsys):
        grid = ehd.Grid(16)
        state = make_state(grid, ux=full(grid, 1.0 + 0.5 * np.cos(2 * grid.x)))
        ckpt = tmp_path / "umag.ehds"
        ehd.write_checkpoint(ckpt, state)
        code = main(["besov", str(ckpt), "--s", "0", "--p", "inf", "--r", "inf"])
        assert code == 0
        # |u| = 1 + cos(2 x1)/2: the oscillating pair sits in one band, sup 1/2
        assert float(capsys.readouterr().out.strip()) == pytest.approx(0.5, abs=1e-12)

    def test_missing_checkpoint_exits_one(self, tmp_path, capsys):
        code = main(["besov", str(tmp_path / "none.ehds"),
                     "--s", "0", "--p", "2", "--r", "2"])
        assert code == 1
        assert "EHD-E1:" in capsys.readouterr().err


class TestAuditCommand:
    def test_summarizes_run_directory(self, tmp_path, capsys):
        main(["run", tg_config(tmp_path)])
        capsys.readouterr()
        code = main(["audit", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "max charge-identity residual" in out
        assert "criteria integrals at end" in out

    def test_missing_directory_exits_one(self, tmp_path, capsys):
        code = main(["audit", str(tmp_path / "empty")])
        assert code == 1
        assert "EHD-E1:" in capsys.readouterr().err


class TestReportCommand:
    def test_prints_table_and_emits_plot_data(self, tmp_path, capsys):
        main(["run", tg_config(tmp_path)])
        capsys.readouterr()
        code = main(["report", str(tmp_path / "report.json")])
        assert code == 0
        out = capsys.readouterr().out
        assert "BKM" in out and "state checksum" in out
        plot = tmp_path / "report_criterion_bkm.csv"
        assert plot.exists()
        with open(plot, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["t", "integrand", "integral"]
        assert len(rows) > 2


class TestDeterminism:
    def test_same_seed_same_report(self, tmp_path):
        body = (
            "grid_n = 16\nt_end = 0.01\n"
            "initial_condition = random_smooth(seed=5, energy=1.0, peak_wavenumber=2)\n"
        )
        reports = []
        for sub in ("a", "b"):
            d = tmp_path / sub
            d.mkdir()
            path = write_config(d, body + f"output_dir = {d}\n")
            assert main(["run", path]) == 0
            data = json.loads((d / "report.json").read_text())
            data.pop("wall_clock")
            data["config"].pop("output_dir")
            reports.append(data)
        assert reports[0] == reports[1]
