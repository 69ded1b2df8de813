import json
import math

import numpy as np
import pytest

from sepfit import formats
from sepfit.errors import ConfigError
from sepfit.harness import demo_dataset, demo_init, landscape_slice
from sepfit.model import Dataset
from sepfit.solvers import SolverConfig, infinite_descent


def test_real_formatting_roundtrips_exactly():
    rng = np.random.default_rng(13)
    for x in rng.uniform(-1e6, 1e6, size=50):
        assert float(formats.format_real(x)) == x
    for x in (0.1, 1.0 / 3.0, math.pi, 2.0 ** -52):
        assert float(formats.format_real(x)) == x


def test_loss_formatting_keeps_full_precision():
    for x in (82.76945670879935, 9.6e-29, 1e-300, 0.0):
        assert float(formats.format_loss(x)) == x
        assert "e" in formats.format_loss(x)


def test_artifact_names():
    assert formats.trajectory_name("ID") == "trajectory_ID.csv"
    assert formats.landscape_name("alpha_1", "phi_1") == "landscape_alpha_1_phi_1.csv"
    assert formats.TABLE1_NAME == "table1.csv"
    assert formats.REPORT_NAME == "report.json"


def test_write_table1(tmp_path):
    path = tmp_path / formats.TABLE1_NAME
    formats.write_table1(path, [("ID", 1, 51.25, 9.6e-29), ("SD", 1000, 3500.0, 2.1e-6)])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "method,iterations,walltime_ms,final_loss"
    assert lines[1].startswith("ID,1,51.25,")
    assert float(lines[1].split(",")[3]) == 9.6e-29
    assert len(lines) == 3


def test_write_trajectory_columns_align_with_traces(tmp_path):
    model, data = demo_init(), demo_dataset()
    rep = infinite_descent(model, data, SolverConfig(method="ID"))
    path = tmp_path / formats.trajectory_name(rep.method)
    formats.write_trajectory(path, rep)
    lines = path.read_text().strip().splitlines()
    K = model.layout.size
    assert lines[0] == "iter,loss,grad_inf_norm," + ",".join(f"p{k}" for k in range(K))
    assert len(lines) == 1 + len(rep.loss_trace)
    first = lines[1].split(",")
    assert first[0] == "0"
    assert float(first[1]) == rep.loss_trace[0]
    assert float(first[2]) == rep.grad_norm_trace[0]
    assert [float(v) for v in first[3:]] == list(rep.trajectory[0])
    last = lines[-1].split(",")
    assert int(last[0]) == len(rep.loss_trace) - 1
    assert [float(v) for v in last[3:]] == list(rep.final_params)


def test_write_landscape_row_major_with_inf_sentinel(tmp_path):
    model, data = demo_init(), demo_dataset()
    # the huge growth-rate corner overflows, producing the inf sentinel
    slc = landscape_slice(
        model,
        "alpha_1",
        "phi_1",
        np.array([0.0, 2000.0]),
        np.array([-1.0, 0.0, 1.0]),
        data,
    )
    path = tmp_path / formats.landscape_name("alpha_1", "phi_1")
    formats.write_landscape(path, slc)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "alpha_1,phi_1,loss"
    assert len(lines) == 1 + 2 * 3
    # row-major: the first grid axis varies slowest
    firsts = [line.split(",")[0] for line in lines[1:]]
    assert firsts == ["0.0"] * 3 + ["2000.0"] * 3
    finite_rows = [line for line in lines[1:4]]
    for row in finite_rows:
        assert math.isfinite(float(row.split(",")[2]))
    for line in lines[4:]:
        assert line.split(",")[2] == "inf"


def test_report_json_fields(tmp_path):
    model, data = demo_init(), demo_dataset()
    rep = infinite_descent(model, data, SolverConfig(method="ID"))
    path = tmp_path / formats.REPORT_NAME
    formats.write_report_json(path, rep)
    doc = json.loads(path.read_text())
    assert doc["method"] == "ID"
    assert doc["termination"] == "Converged"
    assert doc["outer_iterations"] == 1
    assert doc["final_loss"] == rep.final_loss
    assert doc["final_params"] == list(rep.final_params)
    assert doc["loss_trace"] == rep.loss_trace
    assert len(doc["grad_norm_trace"]) == len(rep.grad_norm_trace)
    assert doc["walltime_ms"] >= 0.0


def test_dataset_csv_roundtrip(tmp_path):
    data = demo_dataset()
    path = tmp_path / "dataset.csv"
    formats.write_dataset_csv(path, data)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "x1,x2,y"
    assert len(lines) == 1 + data.n
    back = formats.read_dataset_csv(path)
    assert back.x.tobytes() == data.x.tobytes()
    assert back.y.tobytes() == data.y.tobytes()


def test_dataset_csv_rejects_bad_files(tmp_path):
    bad_header = tmp_path / "bad_header.csv"
    bad_header.write_text("a,b,c\n0,0,1\n")
    with pytest.raises(ConfigError):
        formats.read_dataset_csv(bad_header)

    bad_cell = tmp_path / "bad_cell.csv"
    bad_cell.write_text("x1,y\n0.0,1.0\noops,2.0\n")
    with pytest.raises(ConfigError) as exc:
        formats.read_dataset_csv(bad_cell)
    assert "3" in str(exc.value)  # the offending line number

    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ConfigError):
        formats.read_dataset_csv(empty)

    header_only = tmp_path / "header_only.csv"
    header_only.write_text("x1,y\n")
    with pytest.raises(ConfigError):
        formats.read_dataset_csv(header_only)


def test_dataset_csv_rejects_ragged_rows(tmp_path):
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("x1,x2,y\n0.0,0.0,1.0\n0.5,1.0\n")
    with pytest.raises(ConfigError):
        formats.read_dataset_csv(ragged)
