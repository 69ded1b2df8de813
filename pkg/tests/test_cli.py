import json
import math
import subprocess
import sys

import numpy as np
import pytest

from sepfit import formats
from sepfit.cli import (
    _model_from_config,
    main,
    parse_config,
    parse_config_text,
    serialize_config,
)
from sepfit.errors import ConfigError
from sepfit.harness import demo_dataset
from sepfit.model import flatten

MINIMAL = """
init.values = 1.2, 0.1, 3.0, 0.2, 0.8, -0.1, 3.3, -1.4
"""

DEMO_FIT = """
# the pinned two-rank comparison start
model.rank = 2
model.dim = 2
model.terms = 1
model.tied = true

init.values = 1.2, 0.1, 3.0, 0.2, 0.8, -0.1, 3.3, -1.4

data.kind = grid
data.points_per_axis = 25
data.domain = 0, 1
data.target = cos_pi_diff

solver.method = ID
"""


# parsing
# -----------------------------------------------------------------------------

def test_minimal_config_fills_demo_defaults():
    cfg = parse_config_text(MINIMAL)
    assert cfg.model.rank == 2 and cfg.model.dim == 2
    assert cfg.model.terms == 1 and cfg.model.tied
    assert cfg.data.kind == "grid"
    assert cfg.data.points_per_axis == 25
    assert cfg.data.domain == (0.0, 1.0)
    assert cfg.data.target == "cos_pi_diff"
    assert cfg.solver.method == "ID"
    assert cfg.output.directory == "out"
    assert cfg.output.emit_trajectory and not cfg.output.emit_landscape


def test_config_roundtrips_through_serialization():
    text = DEMO_FIT + """
solver.id_inner_tol = 1e-10
output.directory = artifacts
output.emit_landscape = true
output.landscape.1.axis1 = alpha_1
output.landscape.1.axis2 = phi_1
output.landscape.1.grid1 = -1, 1, 21
output.landscape.1.grid2 = -3.2, 3.2, 21
"""
    cfg = parse_config_text(text)
    assert cfg.solver.id_inner_tol == 1e-10
    assert len(cfg.output.landscapes) == 1
    assert cfg.output.landscapes[0].axis1 == "alpha_1"
    assert cfg.output.landscapes[0].grid1 == (-1.0, 1.0, 21)
    again = parse_config_text(serialize_config(cfg))
    assert again == cfg


def test_comments_and_blank_lines_are_ignored():
    cfg = parse_config_text(
        "# leading comment\n\nmodel.rank = 1\nmodel.dim = 1\n"
        "init.values = 1, 0, 1, 0  # trailing note\n"
    )
    assert cfg.model.rank == 1
    assert cfg.init.values == (1.0, 0.0, 1.0, 0.0)


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("model.rank = 0\n" + MINIMAL, "at least 1"),
        ("model.rank = 2\nmodel.rank = 3\n" + MINIMAL, "duplicate"),
        ("no_equals_sign\n" + MINIMAL, "expected"),
        ("modle.rank = 2\n" + MINIMAL, "unknown key"),
        ("", "init.values / init.seed"),
        (MINIMAL + "init.seed = 3\n", "init.values / init.seed"),
        (
            "model.rank = 2\nmodel.dim = 2\nmodel.terms = 2\nmodel.tied = false\n"
            "init.values = 1, 2, 3\n",
            "layout needs 32",
        ),
        (MINIMAL + "init.range.A = 0, 1\n", "seeded"),
        (MINIMAL + "data.kind = parquet\n", "grid or csv_file"),
        (MINIMAL + "data.kind = csv_file\n", "data.path"),
        (MINIMAL + "data.kind = csv_file\ndata.path = d.csv\ndata.target = one\n", "grid"),
        (MINIMAL + "data.points_per_axis = 1\n", "at least 2"),
        (MINIMAL + "solver.method = LBFGS\n", "solver"),
        (MINIMAL + "solver.id_max_inner = 0\n", "solver"),
        (MINIMAL + "output.landscape.1.axis1 = phi_1\n", "axis2"),
        (
            MINIMAL + "output.landscape.1.axis1 = phi_1\n"
            "output.landscape.1.axis2 = A_1\n"
            "output.landscape.1.grid1 = 0, 1, 2.5\n",
            "point count",
        ),
        (MINIMAL + "model.terms = nine\n", "model.terms"),
    ],
)
def test_malformed_configs_are_rejected(text, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text)
    assert fragment in str(exc.value)


def test_unknown_key_error_names_the_line():
    with pytest.raises(ConfigError) as exc:
        parse_config_text("model.rank = 2\nmodel.dni = 2\n" + MINIMAL)
    assert "line 2" in str(exc.value)
    assert "model.dni" in str(exc.value)


def test_default_init_layout_is_eight_wide():
    # the default model block is the tied two-rank pair, so a wrong-width
    # values list is caught against that layout
    with pytest.raises(ConfigError) as exc:
        parse_config_text("init.values = 1, 2, 3, 4\n")
    assert "layout needs 8" in str(exc.value)


# seeded inits
# -----------------------------------------------------------------------------

def test_seeded_init_is_deterministic_and_in_range():
    text = "init.seed = 11\ninit.range.omega = 2, 4\n"
    cfg = parse_config_text(text)
    a = flatten(_model_from_config(cfg))
    b = flatten(_model_from_config(parse_config_text(text)))
    assert a.tobytes() == b.tobytes()
    names = ["A_1", "alpha_1", "omega_1", "phi_1", "A_2", "alpha_2", "omega_2", "phi_2"]
    bounds = {
        "A": (0.5, 1.5),
        "alpha": (-0.5, 0.5),
        "omega": (2.0, 4.0),  # overridden above
        "phi": (-math.pi, math.pi),
    }
    for name, value in zip(names, a):
        lo, hi = bounds[name.split("_")[0]]
        assert lo <= value <= hi
    c = flatten(_model_from_config(parse_config_text("init.seed = 12\n")))
    assert c.tobytes() != a.tobytes()


# fit and landscape commands
# -----------------------------------------------------------------------------

def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_fit_command_writes_report_and_trajectory(tmp_path, capsys):
    cfg = DEMO_FIT + f"output.directory = {tmp_path / 'run'}\n"
    rc = main(["fit", str(_write(tmp_path, "run.cfg", cfg))])
    assert rc == 0
    out = capsys.readouterr().out
    assert "ID" in out and "Converged" in out
    report = json.loads((tmp_path / "run" / "report.json").read_text())
    assert report["termination"] == "Converged"
    assert report["outer_iterations"] == 1
    assert report["final_loss"] <= 1e-12
    traj = (tmp_path / "run" / "trajectory_ID.csv").read_text().splitlines()
    assert traj[0].startswith("iter,loss,grad_inf_norm,p0")
    assert len(traj) == 1 + len(report["loss_trace"])


def test_fit_command_exit_two_when_iterations_run_out(tmp_path):
    cfg = (
        MINIMAL
        + "data.points_per_axis = 5\n"
        + "solver.method = NCG\nsolver.ncg_max_iters = 1\n"
        + f"output.directory = {tmp_path / 'run'}\n"
    )
    rc = main(["fit", str(_write(tmp_path, "short.cfg", cfg))])
    assert rc == 2
    report = json.loads((tmp_path / "run" / "report.json").read_text())
    assert report["termination"] == "MaxIters"


def test_fit_command_exit_one_on_parse_errors(tmp_path, capsys):
    rc = main(["fit", str(_write(tmp_path, "bad.cfg", "model.rank = 0\n"))])
    assert rc == 1
    assert "error" in capsys.readouterr().err.lower()
    assert main(["fit", str(tmp_path / "missing.cfg")]) == 1


def test_fit_command_rejects_landscape_flag_without_blocks(tmp_path):
    cfg = MINIMAL + "data.points_per_axis = 5\n" + "output.emit_landscape = true\n"
    cfg += f"output.directory = {tmp_path / 'run'}\n"
    rc = main(["fit", str(_write(tmp_path, "noland.cfg", cfg))])
    assert rc == 1


def test_fit_command_reads_csv_datasets(tmp_path):
    data_path = tmp_path / "dataset.csv"
    formats.write_dataset_csv(data_path, demo_dataset())
    cfg = (
        "init.values = 1.2, 0.1, 3.0, 0.2, 0.8, -0.1, 3.3, -1.4\n"
        f"data.kind = csv_file\ndata.path = {data_path}\n"
        f"output.directory = {tmp_path / 'run'}\n"
    )
    rc = main(["fit", str(_write(tmp_path, "csv.cfg", cfg))])
    assert rc == 0
    report = json.loads((tmp_path / "run" / "report.json").read_text())
    # identical problem to the grid config, so the same root is found
    assert report["final_loss"] <= 1e-12


def test_landscape_command_freezes_the_init(tmp_path):
    cfg = DEMO_FIT + (
        f"output.directory = {tmp_path / 'land'}\n"
        "output.landscape.1.axis1 = alpha_1\n"
        "output.landscape.1.axis2 = phi_1\n"
        "output.landscape.1.grid1 = -1, 1, 5\n"
        "output.landscape.1.grid2 = -2, 2, 4\n"
    )
    rc = main(["landscape", str(_write(tmp_path, "land.cfg", cfg))])
    assert rc == 0
    lines = (tmp_path / "land" / "landscape_alpha_1_phi_1.csv").read_text().strip().splitlines()
    assert lines[0] == "alpha_1,phi_1,loss"
    assert len(lines) == 1 + 5 * 4
    # non-axis parameters stay frozen at the init while the axes sweep
    from sepfit.model import loss as model_loss
    from sepfit.model import unflatten

    cells = {(row.split(",")[0], row.split(",")[1]): float(row.split(",")[2]) for row in lines[1:]}
    base = _model_from_config(parse_config_text(cfg))
    probe = flatten(base).copy()
    probe[base.layout.axis_index("alpha_1")] = 0.5
    probe[base.layout.axis_index("phi_1")] = -2.0
    assert cells[("0.5", "-2.0")] == model_loss(unflatten(probe, base.layout), demo_dataset())


def test_landscape_command_requires_blocks(tmp_path):
    rc = main(["landscape", str(_write(tmp_path, "none.cfg", DEMO_FIT))])
    assert rc == 1


# demo and verify commands
# -----------------------------------------------------------------------------

def test_demo_command_prints_the_comparison_table(tmp_path, capsys):
    rc = main(["demo", "--out", str(tmp_path / "demo")])
    assert rc == 0
    out = capsys.readouterr().out
    lines = [line for line in out.splitlines() if line.strip()]
    assert lines[0].split() == ["method", "iterations", "walltime_ms", "final_loss", "termination"]
    methods = [line.split()[0] for line in lines[1:4]]
    assert methods == ["SD", "NCG", "ID"]
    sd = lines[1].split()
    assert sd[1] == "1000" and sd[4] == "Converged"
    assert (tmp_path / "demo" / "table1.csv").exists()


def test_verify_command_exit_codes(capsys):
    assert main(["verify", "--seed", "0", "--trials", "3"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 9 and "FAIL" not in out
    assert main(["verify", "--seed", "0", "--trials", "3", "--corrupt-gradient"]) == 1
    out = capsys.readouterr().out
    assert "FAIL gradient_vs_central_fd" in out


def test_corrupt_gradient_flag_is_hidden(capsys):
    with pytest.raises(SystemExit):
        main(["verify", "--help"])
    assert "corrupt" not in capsys.readouterr().out


def test_module_entry_point_smoke():
    proc = subprocess.run(
        [sys.executable, "-m", "sepfit", "verify", "--trials", "2"],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.count("PASS") == 9
