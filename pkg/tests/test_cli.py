import csv
import io
import json

import pytest

from fracspde import cli, kernels, mlf, regimes
from fracspde.params import ModelParams


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_mlf_is_a_thin_wrapper(capsys):
    code, out, err = run(capsys, "mlf", "--a", "0.8", "--b", "1.8", "--z", "-5")
    assert code == 0
    v = json.loads(out)["value"]
    assert v == mlf.ml_eval(mlf.MLQuery(0.8, 1.8, -5.0)).value
    assert json.loads(err)["command"] == "mlf"


def test_kernel_is_a_thin_wrapper(capsys):
    code, out, _ = run(capsys, "kernel", "--kind", "weighted_energy", "--beta", "0.7", "--alpha", "1.5",
                       "--H", "0.3", "--t", "0.5", "--a", "0.2")
    assert code == 0
    ref = kernels.weighted_energy(ModelParams(alpha=1.5, beta=0.7, H=0.3), 0.5, 0.2).value
    assert json.loads(out)["value"] == ref


def test_config_precedence(capsys, tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# heat\nH = 0.4\nH0 = 0.6\n")
    _, out, _ = run(capsys, "regime", "--config", str(conf))
    ref = regimes.regime_report(ModelParams(H=0.4, H0=0.6))
    assert json.loads(out)["margin"] == ref.margin
    _, out, _ = run(capsys, "regime", "--config", str(conf), "--H", "0.2")
    ref = regimes.regime_report(ModelParams(H=0.2, H0=0.6))
    assert json.loads(out)["margin"] == ref.margin


def test_bad_config_key(capsys, tmp_path):
    conf = tmp_path / "bad.conf"
    conf.write_text("Hurst = 0.4\n")
    code, _, err = run(capsys, "regime", "--config", str(conf))
    assert code == 2 and "Hurst" in err


def test_manifest_round_trip(capsys, tmp_path):
    code, _, _ = run(capsys, "regime", "--H", "0.3", "--out", str(tmp_path))
    assert code == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "regime"
    assert man["params"]["H"] == 0.3
    assert str(tmp_path / "regime.json") in man["outputs"]
    assert json.loads((tmp_path / "regime.json").read_text())["exists"] is True


def _sweep(capsys, grid, *extra):
    code, out, _ = run(capsys, "sweep", "--grid", grid, *extra)
    assert code == 0
    return list(csv.DictReader(io.StringIO(out)))


def test_sweep_heat_boundary(capsys):
    rows = _sweep(capsys, "H=0.01:0.49:0.02,H0=0.5:0.98:0.02")
    assert len(rows) == 25 * 25
    for r in rows:
        s = float(r["H"]) + float(r["H0"])
        if abs(s - 0.75) > 0.02:
            assert (r["exists"] == "true") == (s > 0.75)


def test_sweep_wave_boundary(capsys):
    rows = _sweep(capsys, "alpha=0.5:3.0:0.05,H=0.05:0.45:0.05", "--beta", "2")
    for r in rows:
        d = float(r["alpha"]) - (3 - 4 * float(r["H"]))
        if abs(d) > 0.05:
            assert (r["exists"] == "true") == (d > 0)


def test_sweep_svg(capsys, tmp_path):
    svg = tmp_path / "map.svg"
    _sweep(capsys, "H=0.1:0.4:0.1,H0=0.5:0.9:0.1", "--svg", str(svg))
    text = svg.read_text()
    assert text.startswith("<svg") and text.count("<rect") == 1 + 4 * 5


@pytest.mark.parametrize("grid", ["H=0.4:0.1:0.05", "H=0.1:0.4:0", "Q=0:1:0.1", "H=0.1:0.4"])
def test_sweep_rejects_bad_grids(capsys, grid):
    code, _, _ = run(capsys, "sweep", "--grid", grid)
    assert code == 2


def test_domain_error_exit_code(capsys):
    code, _, err = run(capsys, "mlf", "--a", "0", "--b", "1", "--z", "1")
    assert code == 2 and err.startswith("error:")


def test_bad_thread_cap(capsys, monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "many")
    code, _, _ = run(capsys, "sweep", "--grid", "H=0.1:0.2:0.1")
    assert code == 2


def test_chaos_command(capsys):
    code, out, _ = run(capsys, "chaos", "--n", "1", "--t", "0.5", "--H", "0.3")
    d = json.loads(out)
    assert code == 0 and len(d["terms"]) == 2
    assert d["second_moment_truncated"] == pytest.approx(1.0 + d["terms"][1]["value"])


def test_simulate_stdout(capsys):
    code, out, _ = run(capsys, "simulate", "--H", "0.35", "--n-paths", "4", "--n-modes", "64", "--L", "4",
                       "--n-time", "32", "--t-max", "0.25", "--seed", "1")
    assert code == 0
    assert set(json.loads(out)) >= {"mean", "moments", "space_holder_slope"}


def test_verify_mlf_suite(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "mlf")
    assert code == 0 and "6/6 checks passed" in out


def test_dumps_precision():
    x = 0.1 + 0.2
    assert json.loads(cli.dumps({"x": x}))["x"] == x
    assert cli.dumps([float("nan")]) == "[\n  null\n]"
