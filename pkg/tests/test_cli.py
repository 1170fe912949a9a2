"""End-to-end tests for the command-line interface."""

import json

import pytest

from triple_stab.cli import main
from triple_stab.lab import load_report

TRIMMED = [
    "--scheme",
    "jensen3-contractive",
    "--p",
    "4.0",
    "--eps",
    "0.1",
    "--seed",
    "7",
    "--probe-count",
    "12",
]


def test_axioms_command_passes(capsys):
    code = main(["axioms", "--dim", "2", "--probe-count", "20", "--seed", "11"])
    out = capsys.readouterr().out
    assert code == 0
    assert "axioms: 5/5 checks passed" in out
    assert out.count("PASS") == 5
    assert "FAIL" not in out


def test_axioms_config_file_with_override(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(
        json.dumps({"dim": 3, "probe_count": 15, "p": 0.25}), encoding="utf-8"
    )
    out_path = tmp_path / "axioms.json"
    code = main(
        [
            "axioms",
            "--config",
            str(cfg_path),
            "--p",
            "0.5",
            "--out",
            str(out_path),
        ]
    )
    assert code == 0
    assert f"wrote json report to {out_path}" in capsys.readouterr().out
    data = json.loads(out_path.read_text(encoding="utf-8"))
    # the flag overrides the file; untouched file fields survive
    assert data["config"]["p"] == 0.5
    assert data["config"]["dim"] == 3
    assert data["passed"] is True


def test_recover_command_writes_report(tmp_path, capsys):
    out_path = tmp_path / "report.json"
    code = main(["recover", *TRIMMED, "--out", str(out_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "recover: 20/20 checks passed" in out
    report = load_report(str(out_path))
    assert report.passed
    assert report.config["scheme"] == "jensen3-contractive"

    # re-render the persisted report as a CSV table
    code = main(["report", "--in", str(out_path)])
    rendered = capsys.readouterr().out
    assert code == 0
    assert rendered.startswith("norm_x,bound,error,ratio\n")
    assert len(rendered.strip().splitlines()) == 13

    # and as JSON into a second file, which must load identically
    json_path = tmp_path / "again.json"
    code = main(
        ["report", "--in", str(out_path), "--format", "json", "--out", str(json_path)]
    )
    assert code == 0
    capsys.readouterr()
    assert load_report(str(json_path)).to_dict() == report.to_dict()


def test_bounds_grid_has_no_rejections(capsys):
    code = main(["bounds"])
    out = capsys.readouterr().out
    assert code == 0
    for tag in ("cauchy2", "cauchy2-contractive", "jensen3", "jensen3-contractive"):
        assert tag in out
    assert "rejected" not in out
    assert out.count("\n") == 17


def test_bounds_single_p_marks_gated_schemes(capsys):
    code = main(["bounds", "--p", "0.5"])
    out = capsys.readouterr().out
    assert code == 0
    assert "rejected: scheme cauchy2-contractive requires p > 1" in out
    assert "rejected: scheme jensen3-contractive requires p > 3" in out


def test_bounds_explicit_gate_violation_fails_before_output(capsys):
    code = main(["bounds", "--scheme", "cauchy2", "--p", "1.0"])
    captured = capsys.readouterr()
    assert code == 2
    assert captured.err.startswith("error:")
    assert "requires p < 1" in captured.err
    assert "closed_form" not in captured.out


def test_recover_rejects_gate_violation(capsys):
    code = main(["recover", "--scheme", "cauchy2", "--p", "1.0"])
    err = capsys.readouterr().err
    assert code == 2
    assert err.startswith("error:")
    assert "requires p < 1" in err


@pytest.mark.parametrize(
    "argv,fragment",
    [
        (["recover", "--scheme", "cauchy4"], "unknown scheme"),
        (["axioms", "--config", "/nonexistent/cfg.json"], "could not read config"),
        (["recover", "--generator", "{not json"], "generator is not valid JSON"),
        (["axioms", "--dim", "40"], "dim must be in"),
        (["report", "--in", "/nonexistent/report.json"], "could not read report"),
    ],
)
def test_errors_exit_two_with_message(argv, fragment, capsys):
    code = main(argv)
    err = capsys.readouterr().err
    assert code == 2
    assert err.startswith("error:")
    assert fragment in err


def test_config_file_with_bad_json(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{oops", encoding="utf-8")
    code = main(["axioms", "--config", str(path)])
    err = capsys.readouterr().err
    assert code == 2
    assert "is not valid JSON" in err


def test_missing_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        main([])
    assert excinfo.value.code == 2
