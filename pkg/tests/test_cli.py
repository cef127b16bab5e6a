"""Command-line interface checks: every subcommand, determinism of outputs,
config handling and failure exits."""

import os

import numpy as np
import pytest

from consumerlab import stats
from consumerlab.cli import main, parse_config_file
from consumerlab.products import read_type_rows

# small world reused across CLI invocations (flags go through --config)
SMALL_CONFIG = """
# compact test world
width = 41
height = 41
n_consumers = 5
n_types = 4
replicas_per_type = 1
ws_degree = 2
cycles = 100
"""


@pytest.fixture()
def config_file(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL_CONFIG)
    return str(path)


def read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


# ---------------------------------------------------------------------------
# gen-types


def test_gen_types_deterministic_bytes(tmp_path, capsys):
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    assert main(["gen-types", "--seed", "7", "--count", "10",
                 "--out", str(out_a)]) == 0
    assert main(["gen-types", "--seed", "7", "--count", "10",
                 "--out", str(out_b)]) == 0
    assert read(out_a) == read(out_b)
    rows = read_type_rows(str(out_a))
    assert len(rows) == 10
    assert "pairwise" in capsys.readouterr().out


def test_gen_types_single_row(tmp_path):
    out = tmp_path / "one.csv"
    assert main(["gen-types", "--seed", "3", "--count", "1",
                 "--out", str(out)]) == 0
    assert len(read_type_rows(str(out))) == 1


def test_gen_types_infeasible_distance_fails(tmp_path, capsys):
    out = tmp_path / "never.csv"
    # cap the attempt budget so the failure path stays quick
    cfg = tmp_path / "cap.cfg"
    cfg.write_text("max_type_attempts = 64\n")
    code = main(["gen-types", "--seed", "3", "--count", "10",
                 "--min-dist", "999", "--config", str(cfg), "--out", str(out)])
    assert code == 1
    err = capsys.readouterr().err
    assert "999" in err and "achieved" in err
    assert not os.path.exists(out)


def test_gen_types_reproduces_run_type_stream(tmp_path):
    # the CLI draws from the same named substream a run at that seed uses
    from consumerlab.harness import init_world, RunConfig
    out = tmp_path / "types.csv"
    assert main(["gen-types", "--seed", "5", "--count", "4", "--min-dist",
                 "0.25", "--out", str(out)]) == 0
    rows = read_type_rows(str(out))
    world = init_world(RunConfig(seed=5, width=41, height=41, n_consumers=5,
                                 n_types=4, replicas_per_type=1, ws_degree=2))
    for row, t in zip(rows, world.types):
        assert row["utility"] == t.utility
        assert np.array_equal(row["signature"], t.signature)


# ---------------------------------------------------------------------------
# landscape


def test_landscape_small_sample(tmp_path, capsys):
    out = tmp_path / "scape.csv"
    assert main(["landscape", "--seed", "2", "--samples", "2",
                 "--out", str(out)]) == 0
    rows = read_type_rows(str(out))
    assert len(rows) == 2
    assert "fdc" in capsys.readouterr().out


def test_landscape_fdc_round_trips_through_csv(tmp_path):
    out = tmp_path / "scape.csv"
    assert main(["landscape", "--seed", "9", "--samples", "40",
                 "--out", str(out)]) == 0
    lines = read(out).splitlines()
    summary = [l for l in lines if l.startswith("# fdc =")]
    assert len(summary) == 1
    reported = float(summary[0].split("=", 1)[1].strip())
    rows = read_type_rows(str(out))
    utilities = [r["utility"] for r in rows]
    distances = [float(r["extra"]["nearest_max_dist"]) for r in rows]
    assert stats.fdc(utilities, distances) == reported


def test_landscape_rejects_tiny_sample(tmp_path):
    assert main(["landscape", "--seed", "2", "--samples", "1",
                 "--out", str(tmp_path / "x.csv")]) == 2


# ---------------------------------------------------------------------------
# run


def test_run_sample_arithmetic(tmp_path, config_file, capsys):
    out = tmp_path / "run.csv"
    assert main(["run", "--seed", "4", "--cycles", "100", "--config",
                 config_file, "--out", str(out)]) == 0
    lines = read(out).splitlines()
    # header + 5 samples x 5 consumers
    assert len(lines) == 1 + 5 * 5
    assert capsys.readouterr().out.strip()


def test_run_social_flag_changes_trace(tmp_path, config_file):
    a = tmp_path / "social.csv"
    b = tmp_path / "nonsocial.csv"
    assert main(["run", "--seed", "4", "--cycles", "1500", "--config",
                 config_file, "--social", "--out", str(a)]) == 0
    assert main(["run", "--seed", "4", "--cycles", "1500", "--config",
                 config_file, "--no-social", "--out", str(b)]) == 0
    assert read(a) != read(b)


def test_run_rejects_invalid_config(tmp_path, config_file):
    code = main(["run", "--seed", "4", "--cycles", "101", "--config",
                 config_file, "--out", str(tmp_path / "x.csv")])
    assert code == 2


# ---------------------------------------------------------------------------
# experiment + analyze


def test_experiment_and_analyze_round_trip(tmp_path, config_file, capsys):
    out_dir = tmp_path / "exp"
    assert main(["experiment", "--pairs", "2", "--seed-base", "11",
                 "--config", config_file, "--out-dir", str(out_dir)]) == 0
    names = sorted(os.listdir(out_dir))
    assert "report.csv" in names
    assert "summary.csv" in names
    run_files = [n for n in names if n.startswith("run_")]
    assert sorted(run_files) == ["run_11_nonsocial.csv", "run_11_social.csv",
                                 "run_12_nonsocial.csv", "run_12_social.csv"]
    kde_files = [n for n in names if n.startswith("kde_")]
    assert len(kde_files) == 6

    report = read(out_dir / "report.csv")
    assert report.splitlines()[0] == ",".join(stats.REPORT_HEADER)
    assert len(report.splitlines()) == 6  # header + 5 metrics

    # analyze must reproduce the report byte-exactly from the raw run CSVs
    re_report = tmp_path / "re" / "report.csv"
    assert main(["analyze", "--in-dir", str(out_dir), "--config", config_file,
                 "--out", str(re_report)]) == 0
    assert read(re_report) == report
    for kde in kde_files:
        assert read(tmp_path / "re" / kde) == read(out_dir / kde)


def test_experiment_rerun_byte_identical(tmp_path, config_file):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        assert main(["experiment", "--pairs", "1", "--seed-base", "3",
                     "--config", config_file, "--out-dir", str(out)]) == 0
    for name in sorted(os.listdir(a)):
        assert read(a / name) == read(b / name), name


def test_experiment_single_pair_marks_insufficient_n(tmp_path, config_file):
    out_dir = tmp_path / "exp1"
    assert main(["experiment", "--pairs", "1", "--seed-base", "5",
                 "--config", config_file, "--out-dir", str(out_dir)]) == 0
    rows = read(out_dir / "report.csv").splitlines()[1:]
    for row in rows:
        assert "insufficient-n" in row


def test_analyze_empty_directory_fails(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["analyze", "--in-dir", str(empty),
                 "--out", str(tmp_path / "r.csv")]) == 1
    assert "no run_" in capsys.readouterr().err


def test_analyze_incomplete_pair_fails(tmp_path, config_file, capsys):
    out_dir = tmp_path / "exp"
    assert main(["experiment", "--pairs", "1", "--seed-base", "8",
                 "--config", config_file, "--out-dir", str(out_dir)]) == 0
    os.unlink(out_dir / "run_8_nonsocial.csv")
    assert main(["analyze", "--in-dir", str(out_dir),
                 "--out", str(tmp_path / "r.csv")]) == 1
    assert "8" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# configuration plumbing


def test_config_file_parsing(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("seed = 9   # comment\n\n# full line comment\nsocial = false\n")
    assert parse_config_file(str(path)) == {"seed": "9", "social": "false"}


def test_unknown_config_key_rejected(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("no_such_knob = 1\n")
    code = main(["run", "--seed", "1", "--config", str(path),
                 "--out", str(tmp_path / "x.csv")])
    assert code == 1


def test_malformed_config_line_rejected(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("just some words\n")
    assert main(["run", "--seed", "1", "--config", str(path),
                 "--out", str(tmp_path / "x.csv")]) == 1


def test_flags_override_config_file(tmp_path, config_file):
    out = tmp_path / "run.csv"
    # config says 100 cycles; flag forces 40 -> 2 samples x 3 consumers
    assert main(["run", "--seed", "4", "--cycles", "40", "--config",
                 config_file, "--out", str(out)]) == 0
    assert len(read(out).splitlines()) == 1 + 2 * 5
