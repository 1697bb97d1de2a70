import csv
import io
import json
import math
import subprocess
import sys

import pytest

from photocells.cli import main, parse_grid


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(text):
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = value
        else:
            body.append(line)
    return meta, list(csv.DictReader(io.StringIO("\n".join(body))))


def test_pmf_detection_csv(capsys):
    code, out, _ = run(capsys, "pmf", "detection", "--nbar", "1", "--kmax", "10")
    assert code == 0
    meta, rows = read_csv(out)
    assert len(rows) == 11
    assert float(rows[0]["probability"]) == pytest.approx(math.log(2), abs=1e-11)
    total = math.fsum(float(r["probability"]) for r in rows) + float(meta["tail_bound"])
    assert total == pytest.approx(1.0, abs=1e-9)
    for key in ("version", "mode", "epsilon", "nbar", "tail_bound"):
        assert key in meta


def test_pmf_zero_occupancy(capsys):
    code, out, _ = run(capsys, "pmf", "detection", "--nbar", "0")
    _, rows = read_csv(out)
    assert code == 0 and rows == [{"k": "0", "probability": "1"}]


def test_pmf_conditional_zero_is_usage_error(capsys):
    code, out, err = run(capsys, "pmf", "conditional", "--nbar", "0")
    assert code == 2 and out == ""
    assert len(err.strip().splitlines()) == 1 and "degenerate" in err


@pytest.mark.parametrize("kind", ["cells", "absorption", "detection", "conditional", "responses", "window"])
@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_pmf_round_trip(capsys, kind, fmt):
    code, out, _ = run(capsys, "pmf", kind, "--nbar", "0.7", "--t-over-tau", "3", "--format", fmt)
    assert code == 0
    if fmt == "json":
        doc = json.loads(out)
        meta, probs = doc["meta"], [r["probability"] for r in doc["rows"]]
        tail = meta["tail_bound"]
    else:
        meta, rows = read_csv(out)
        probs = [float(r["probability"]) for r in rows]
        tail = float(meta["tail_bound"])
    assert all(p >= 0 for p in probs)
    assert abs(math.fsum(probs) + tail - 1.0) <= 1e-9


def test_pmf_scale_is_display_only(capsys):
    _, out, _ = run(capsys, "pmf", "cells", "--nbar", "1", "--scale", "0.1", "--format", "json")
    rows = json.loads(out)["rows"]
    assert rows[0]["probability"] == 0.5
    assert rows[0]["scaled_probability"] == pytest.approx(0.05)


def test_pmf_truncation_exit_code(capsys):
    code, _, err = run(capsys, "pmf", "detection", "--nbar", "10", "--max-terms", "20")
    assert code == 3 and "truncation" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["pmf", "detection"],
        ["pmf", "detection", "--nbar", "-1"],
        ["pmf", "bogus", "--nbar", "1"],
        ["pmf", "detection", "--nbar", "1", "--eps", "2"],
        ["simulate", "response", "--nbar", "1", "--trials", "0"],
        ["sweep", "ratio21", "--nbar-grid", "a,b"],
        ["localization", "volume-ratio", "--v", "0.5"],
    ],
)
def test_invalid_arguments_exit_2(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        code = main(argv)
        raise SystemExit(code)
    assert exc.value.code == 2
    _, err = capsys.readouterr()
    assert len(err.strip().splitlines()) == 1


# -- simulate -----------------------------------------------------------


def test_simulate_byte_identical(capsys):
    argv = ["simulate", "response", "--nbar", "1", "--trials", "1000000", "--seed", "42"]
    outs = [run(capsys, *argv, "--workers", w)[1] for w in ("1", "1", "8")]
    assert outs[0] == outs[1] == outs[2]
    meta, _ = read_csv(outs[0])
    assert float(meta["tv_distance"]) <= 5e-3
    assert meta["seed"] == "42" and meta["trials"] == "1000000"


def test_simulate_window_json(capsys):
    code, out, _ = run(capsys, "simulate", "window", "--nbar", "0.1", "--t-over-tau", "10",
                       "--trials", "100000", "--seed", "1", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["meta"]["t_over_tau"] == 10.0
    assert sum(r["count"] for r in doc["rows"]) == 100000
    assert {"tv_distance", "chi_square", "p_value"} <= set(doc["meta"])


# -- sweep --------------------------------------------------------------


def test_sweep_ratio21(capsys):
    _, out, _ = run(capsys, "sweep", "ratio21", "--nbar-grid", "1e-4")
    _, rows = read_csv(out)
    assert abs(float(rows[0]["ratio21"]) - 0.5) <= 1e-3


def test_sweep_mean_transition(capsys):
    _, out, _ = run(capsys, "sweep", "mean-transition", "--nbar-grid", "1", "--format", "json")
    row = json.loads(out)["rows"][0]
    assert row["exact"] == pytest.approx(1 - math.log(2), abs=1e-12)
    assert row["paper_approx"] == 0.5


def test_sweep_ergodicity_gap(capsys):
    _, out, _ = run(capsys, "sweep", "ergodicity-gap", "--nbar-grid", "0.1,1", "--mode", "paper")
    _, rows = read_csv(out)
    assert len(rows) == 2 and all(float(r["ergodicity_gap"]) > 0 for r in rows)
    code, _, _ = run(capsys, "sweep", "ergodicity-gap", "--nbar-grid", "1", "--t-over-tau", "0.5")
    assert code == 2


@pytest.mark.parametrize("grid", ["", "  ", ",", "log:1:2", "log:0:1:3", "-1"])
def test_sweep_bad_grid(capsys, grid):
    code, _, _ = run(capsys, "sweep", "ratio21", "--nbar-grid", grid)
    assert code == 2


def test_parse_grid():
    assert parse_grid("0.1, 1,10") == [0.1, 1.0, 10.0]
    grid = parse_grid("log:1e-4:1:5")
    assert len(grid) == 5 and grid[0] == pytest.approx(1e-4) and grid[-1] == pytest.approx(1.0)


# -- localization -------------------------------------------------------


def test_localization_volume_ratio(capsys):
    _, out, _ = run(capsys, "localization", "volume-ratio", "--v", "0.5", "--v0", "1", "--n", "2")
    meta, rows = read_csv(out)
    assert float(rows[0]["value"]) == 0.25 and meta["n"] == "2"


def test_localization_classical_mean(capsys):
    _, out, _ = run(capsys, "localization", "classical-mean", "--rho", "1", "--u", "1",
                    "--tau", "1", "--area", "1", "--format", "json")
    assert json.loads(out)["meta"]["value"] == 1.0


def test_localization_detect_prob(capsys):
    _, out, _ = run(capsys, "localization", "detect-prob", "--n", "4", "--dv-over-v", "0.01")
    assert float(read_csv(out)[1][0]["value"]) == pytest.approx(0.04)
    _, out, _ = run(capsys, "localization", "detect-prob", "--z", "10", "--nbar", "0.5", "--dv", "0.1", "--v", "2")
    assert float(read_csv(out)[1][0]["value"]) == pytest.approx(0.25)
    code, _, err = run(capsys, "localization", "detect-prob", "--n", "4", "--dv-over-v", "0.2")
    assert code == 4 and "domain" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "photocells", "pmf", "cells", "--nbar", "1", "--kmax", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[-1] == "2,0.125"
