import json
import math

import numpy as np
import pytest

import bsquant.cli as cli
from bsquant.experiments import (
    ExperimentConfig,
    ExperimentReport,
    RateFit,
    ResultRow,
    _calibration_split,
    fit_rate,
    parse_w_grid,
    run_convergence,
    run_decay,
    run_kernel_check,
    run_profile,
    run_quantize,
)
from bsquant.figures import render_report
from bsquant.reporting import (
    CSV_HEADER,
    report_to_dict,
    report_to_json,
    rows_to_csv,
    verdict_lines,
    write_report,
)

# ----------------------------------------------------------------------
# Rate fitting.
# ----------------------------------------------------------------------


def test_fit_rate_exact_power_law():
    samples = [(k, 3.7 * k ** -0.5) for k in (8, 16, 32, 64, 128)]
    fit = fit_rate(samples)
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3.7), abs=1e-12)
    assert fit.confidence < 1e-10
    assert fit.n_used == 5


def test_fit_rate_with_noise():
    rng = np.random.default_rng(7)
    samples = [(k, (5.0 / k) * (1 + 0.05 * rng.standard_normal()))
               for k in (16, 32, 64, 128, 256, 512)]
    fit = fit_rate(samples)
    assert fit.slope == pytest.approx(-1.0, abs=0.05)
    assert fit.confidence > 0


def test_fit_rate_constant():
    fit = fit_rate([(k, 2.0) for k in (8, 16, 32, 64)])
    assert fit.slope == pytest.approx(0.0, abs=1e-12)


def test_fit_rate_needs_samples():
    with pytest.raises(ValueError, match="at least 4"):
        fit_rate([(8, 1.0), (16, 0.5), (32, 0.25)])


def test_fit_rate_drops_bad_values():
    samples = [(8, 1.0), (16, 0.5), (32, -0.1), (64, 0.125), (128, math.nan)]
    with pytest.warns(UserWarning, match="dropped"):
        fit = fit_rate(samples)
    assert fit.n_used == 3
    assert fit.slope == pytest.approx(-1.0, abs=1e-12)


def test_fit_rate_needs_positive_values():
    with pytest.warns(UserWarning, match="dropped"):
        with pytest.raises(ValueError, match="positive"):
            fit_rate([(8, -1.0), (16, -0.5), (32, 0.0), (64, -2.0)])


# ----------------------------------------------------------------------
# Config plumbing.
# ----------------------------------------------------------------------

def test_parse_w_grid_counts():
    pts = parse_w_grid("p=-1:1:0.5,q=0:1:0.5")
    assert len(pts) == 5 * 3
    assert complex(-1, 0) in pts and complex(1, 1) in pts


def test_parse_w_grid_axis_order_is_free():
    assert set(parse_w_grid("q=0:1:1,p=0:1:1")) \
        == set(parse_w_grid("p=0:1:1,q=0:1:1"))


@pytest.mark.parametrize("spec,msg", [
    ("p=0:1:0.5", "both p and q"),
    ("r=0:1:0.5,q=0:1:0.5", "must be p or q"),
    ("p=0:1,q=0:1:0.5", "lo:hi:step"),
    ("p=1:0:0.5,q=0:1:0.5", "bad range"),
    ("p=0:1:-0.5,q=0:1:0.5", "bad range"),
])
def test_parse_w_grid_rejects(spec, msg):
    with pytest.raises(ValueError, match=msg):
        parse_w_grid(spec)


def test_calibration_split():
    assert _calibration_split([512, 32, 128, 64, 256]) \
        == ([32, 64, 128], [256, 512])
    assert _calibration_split([16, 32]) == ([16], [32])
    assert _calibration_split([64]) == ([64], [])


def test_config_offsets_prefer_grid():
    cfg = ExperimentConfig(w_points=(1 + 1j,), w_grid="p=0:1:1,q=0:0:1")
    assert cfg.offsets() == (0j, 1 + 0j)
    assert ExperimentConfig(w_points=(1 + 1j,)).offsets() == (1 + 1j,)


# ----------------------------------------------------------------------
# Drivers (small smoke configurations; the acceptance suite runs the
# full-size ones).
# ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def flat_kernel_report():
    cfg = ExperimentConfig(model="bf:1", k_list=(16, 64),
                           w_grid="p=-1:1:0.5,q=-1:1:0.5")
    return run_kernel_check(cfg)


def test_flat_kernel_check(flat_kernel_report):
    rep = flat_kernel_report
    assert rep.passed
    assert rep.verdicts["flat_kernel_exact"]["max_abs_err"] <= 1e-12
    assert len(rep.rows) == 2 * 25


def test_curved_kernel_check():
    cfg = ExperimentConfig(model="cp1:2", k_list=(16, 32, 64, 128),
                           w_grid="p=-1.5:1.5:0.5,q=-1.5:1.5:0.5")
    rep = run_kernel_check(cfg)
    assert rep.passed
    assert rep.fits["rel_discrepancy"].slope == pytest.approx(-1.0, abs=0.2)
    for name in ("discrepancy_rate", "envelope_holdout",
                 "hermitian_symmetry", "equivariance"):
        assert rep.verdicts[name]["pass"]


def test_quantize_driver():
    cfg = ExperimentConfig(k_list=(32, 64), w_points=(0j, 0.5 + 0.25j))
    rep = run_quantize(cfg)
    assert rep.passed
    assert rep.verdicts["quadrature_doubling"]["pass"]
    assert len(rep.rows) == 4
    on_loop = [r for r in rep.rows if r.w_re == 0 and r.w_im == 0]
    for r in on_loop:
        # the residual is dominated by curvature corrections ~ 0.9/k
        assert r.rel_err < 0.05


def test_profile_driver():
    # ell=0 keeps the envelope margin growing with k (at ell=2 the bound
    # and the un-modeled curvature share the same rate, margin ~ 1)
    cfg = ExperimentConfig(k_list=(16, 32, 48, 64), ell=0,
                           w_grid="p=-1:1:0.5,q=-1:1:0.5")
    rep = run_profile(cfg)
    assert rep.passed
    for name in ("leading_law_rate", "profile_rate", "profile_monotone",
                 "phase_rate", "envelope_holdout"):
        assert rep.verdicts[name]["pass"], name
    assert rep.fits["leading_law"].slope <= -0.45


def test_decay_driver():
    cfg = ExperimentConfig(k_list=(32, 64, 128, 256))
    rep = run_decay(cfg)
    assert rep.passed
    assert rep.verdicts["far_point"]["normalized_far_value"] <= 1e-8
    for N in (1, 2, 3):
        assert rep.verdicts[f"ratio_test_N{N}"]["pass"]
    assert rep.verdicts["superpolynomial"]["pass"]


def test_convergence_driver():
    cfg = ExperimentConfig(model="bf:1", loop="bf-plane",
                           k_list=(64, 128, 256, 512),
                           w_points=(0.7 + 0.3j,))
    rep = run_convergence(cfg)
    assert rep.passed
    assert rep.fits["rel_err_ell2"].slope <= -1.35
    assert rep.verdicts["first_correction_vanishes_on_loop"]["pass"]


# ----------------------------------------------------------------------
# Serialization.
# ----------------------------------------------------------------------

def test_csv_header_is_frozen():
    assert CSV_HEADER == ("k,w_re,w_im,u_re,u_im,pred_re,pred_im,"
                          "abs_err,rel_err,bound,in_window")


def test_rows_to_csv_roundtrip():
    row = ResultRow(k=8, w_re=0.5, w_im=-0.25, u_re=1.0, u_im=2.0,
                    pred_re=1.0, pred_im=2.0, abs_err=0.0, rel_err=0.0,
                    bound=0.1, in_window=True)
    text = rows_to_csv([row])
    lines = text.splitlines()
    assert lines[0] == CSV_HEADER
    cells = lines[1].split(",")
    assert cells[0] == "8"
    assert cells[1] == repr(0.5)
    assert cells[-1] == "True"
    assert text.endswith("\n")


def test_report_dict_shape(flat_kernel_report):
    d = report_to_dict(flat_kernel_report)
    assert set(d) == {"config", "rows", "fits", "verdicts", "versions"}
    assert set(d["versions"]) >= {"bsquant", "numpy", "scipy", "python"}
    assert d["config"]["model"] == "bf:1"
    assert len(d["rows"]) == len(flat_kernel_report.rows)


def test_report_json_parses(flat_kernel_report):
    text = report_to_json(flat_kernel_report)
    assert text.endswith("\n")
    parsed = json.loads(text)
    assert parsed["verdicts"]["flat_kernel_exact"]["pass"] is True


def test_verdict_lines(flat_kernel_report):
    lines = verdict_lines(flat_kernel_report)
    assert any(line.startswith("[PASS] kernel-check/flat_kernel_exact")
               for line in lines)
    failing = ExperimentReport(name="stub", config=ExperimentConfig())
    failing.add_verdict("broken", False, detail=1)
    assert any(line.startswith("[FAIL] stub/broken")
               for line in verdict_lines(failing))


def test_write_report_files(flat_kernel_report, tmp_path):
    csv_path = tmp_path / "out.csv"
    write_report(flat_kernel_report, str(csv_path), "csv")
    assert csv_path.read_text().startswith(CSV_HEADER)
    json_path = tmp_path / "out.json"
    write_report(flat_kernel_report, str(json_path), "json")
    assert json.loads(json_path.read_text())["config"]["model"] == "bf:1"


def test_reruns_are_byte_identical():
    cfg = ExperimentConfig(model="bf:1", k_list=(16,),
                           w_grid="p=-1:1:1,q=-1:1:1")
    first = run_kernel_check(cfg)
    second = run_kernel_check(cfg)
    assert rows_to_csv(first.rows) == rows_to_csv(second.rows)
    assert report_to_json(first) == report_to_json(second)


def test_figure_render_is_deterministic(flat_kernel_report, tmp_path):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    render_report(flat_kernel_report, str(a))
    render_report(flat_kernel_report, str(b))
    data = a.read_bytes()
    assert data.startswith(b"<?xml")
    assert data == b.read_bytes()


# ----------------------------------------------------------------------
# Command-line entry point.
# ----------------------------------------------------------------------

FAST_ARGS = ["kernel-check", "--model", "bf:1", "--k", "16",
             "--w-grid", "p=-1:1:1,q=-1:1:1"]


def test_cli_models_listing(capsys):
    assert cli.main(["models"]) == 0
    out = capsys.readouterr().out
    assert "cp1-equator" in out and "bf:1" in out


def test_cli_pass_run(capsys):
    assert cli.main(FAST_ARGS) == 0
    captured = capsys.readouterr()
    assert captured.out.startswith(CSV_HEADER)
    assert "RESULT: PASS" in captured.err


def test_cli_json_format(capsys):
    assert cli.main(FAST_ARGS + ["--format", "json"]) == 0
    parsed = json.loads(capsys.readouterr().out)
    assert parsed["config"]["model"] == "bf:1"


def test_cli_out_and_svg(capsys, tmp_path):
    out = tmp_path / "rows.csv"
    svg = tmp_path / "fig.svg"
    code = cli.main(FAST_ARGS + ["--out", str(out), "--svg", str(svg)])
    assert code == 0
    assert capsys.readouterr().out == ""
    assert out.read_text().startswith(CSV_HEADER)
    assert svg.read_bytes().startswith(b"<?xml")


def test_cli_config_file(capsys, tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({
        "model": "bf:1", "k_list": [16], "w_grid": "p=-1:1:1,q=-1:1:1"}))
    assert cli.main(["kernel-check", "--config", str(cfg_path)]) == 0
    # flags override the file
    assert cli.main(["kernel-check", "--config", str(cfg_path),
                     "--w-grid", "p=0:1:1,q=0:1:1"]) == 0


@pytest.mark.parametrize("argv", [
    FAST_ARGS[:-2] + ["--k", "abc"],
    FAST_ARGS + ["--ell", "5"],
    FAST_ARGS + ["--epsilon", "1.5"],
    ["kernel-check", "--model", "torus:1"],
    ["quantize", "--loop", "no-such-preset"],
    ["quantize", "--quad-nodes", "10", "--k", "64"],
])
def test_cli_usage_errors(argv, capsys):
    assert cli.main(argv) == 1
    assert "error" in capsys.readouterr().err


def test_cli_bad_config_files(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert cli.main(["kernel-check", "--config", str(missing)]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["kernel-check", "--config", str(bad)]) == 1
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"model": "bf:1", "bogus_key": 3}))
    assert cli.main(["kernel-check", "--config", str(unknown)]) == 1
    capsys.readouterr()


def test_cli_unknown_subcommand():
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 1


def test_cli_verdict_failure_exit(monkeypatch, capsys):
    def stub(cfg):
        """Stub driver that always fails its verdict."""
        rep = ExperimentReport(name="stub", config=cfg)
        rep.add_verdict("stub_check", False, reason="forced")
        return rep

    monkeypatch.setitem(cli._RUNNERS, "quantize", stub)
    assert cli.main(["quantize"]) == 2
    err = capsys.readouterr().err
    assert "[FAIL] stub/stub_check" in err
    assert "RESULT: FAIL" in err
