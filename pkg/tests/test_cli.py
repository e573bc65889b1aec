import re

import pytest

from oscswap import __version__
from oscswap.cli import main

SMALL = """
name: cli-small
states:
  phi: {kind: fock, n: 0}
  phibar: {kind: fock, n: 1}
params:
  solve: {g_a: 60 MHz, Delta_a: 1.5 GHz, Delta: 1.25 GHz, delta: 0.25 GHz, k: 1}
decoherence: reference
truncation: 3
solver: {method: split, dt: 2 ns, n_samples: 13}
"""


def test_version(capsys):
    assert main(["--version"]) == 0
    out = capsys.readouterr().out
    assert out.startswith(f"oscswap {__version__}") and "kernels:" in out


def test_help_is_ok(capsys):
    assert main(["--help"]) == 0


def test_no_command_is_input_error(capsys):
    assert main([]) == 2


class TestParams:
    def test_solve(self, capsys):
        rc = main(["params", "solve", "--ga", "60", "--da", "1.5 GHz", "--d", "1250 MHz", "--delta", "0.25GHz", "--k", "1"])
        assert rc == 0
        out = capsys.readouterr().out
        g_b = float(re.search(r"g_b/2pi \(MHz\)\s+(\S+)", out).group(1))
        omega = float(re.search(r"Omega/2pi \(MHz\)\s+(\S+)", out).group(1))
        t_swap = float(re.search(r"t_swap \(us\)\s+(\S+)", out).group(1))
        assert g_b == pytest.approx(25.0, abs=1e-6)
        assert omega == pytest.approx(113.636, abs=1e-3)
        assert t_swap == pytest.approx(0.5, abs=1e-9)

    @pytest.mark.parametrize(
        "args",
        [
            ["params", "solve", "--ga", "60", "--da", "1.5 parsecs", "--d", "1250", "--delta", "250"],
            ["params", "solve", "--ga", "60"],
            ["params", "solve", "--ga", "60", "--da", "1500", "--d", "1250", "--delta", "250", "--k", "0"],
            ["params", "solve", "--ga", "-60", "--da", "1500", "--d", "1250", "--delta", "250"],
            ["params"],
        ],
    )
    def test_bad_input(self, args, capsys):
        assert main(args) == 2


class TestProtocol:
    def test_run(self, capsys):
        assert main(["protocol", "run", "--n", "15"]) == 0
        out = capsys.readouterr().out
        p_g = float(re.search(r"branch g\s+p=(\S+)", out).group(1))
        assert p_g == pytest.approx(0.5091578194443671, abs=1e-10)

    def test_swap_check_ok(self, capsys):
        assert main(["protocol", "swap-check"]) == 0
        assert "ok" in capsys.readouterr().out

    def test_swap_check_validation_failure(self, capsys):
        # an impossible tolerance turns the round-off residual into a failure
        assert main(["protocol", "swap-check", "--phi", "fock:0", "--phibar", "fock:1", "--n", "4", "--tol", "-1"]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_bad_state(self, capsys):
        assert main(["protocol", "run", "--phi", "wiggle:1"]) == 2

    def test_bad_amplitudes(self, capsys):
        assert main(["protocol", "run", "--alpha", "1", "--beta", "1"]) == 2


class TestSimulate:
    def test_writes_outputs(self, tmp_path, capsys):
        cfg = tmp_path / "s.yaml"
        cfg.write_text(SMALL)
        csv, svg = tmp_path / "o.csv", tmp_path / "o.svg"
        assert main(["simulate", "--scenario", str(cfg), "--output", str(csv), "--plot", str(svg), "--json"]) == 0
        assert '"scenario": "cli-small"' in capsys.readouterr().out
        assert csv.read_text().startswith("time_us,fidelity,")
        assert "<svg" in svg.read_text()

    def test_unknown_scenario(self, capsys):
        assert main(["simulate", "--scenario", "nowhere.yaml"]) == 2
        assert "input error" in capsys.readouterr().err

    def test_malformed_scenario(self, tmp_path, capsys):
        cfg = tmp_path / "s.yaml"
        cfg.write_text(SMALL.replace("truncation: 3", "truncation: 3\nbogus: 1"))
        assert main(["simulate", "--scenario", str(cfg)]) == 2

    def test_solver_failure(self, tmp_path, capsys):
        cfg = tmp_path / "s.yaml"
        cfg.write_text(SMALL.replace("solver: {method: split, dt: 2 ns, n_samples: 13}",
                                     "solver: {method: adaptive, n_samples: 3, rtol: 1e-30, atol: 1e-300}"))
        assert main(["simulate", "--scenario", str(cfg)]) == 3
        assert "solver failure" in capsys.readouterr().err


class TestValidate:
    def test_suite(self, capsys):
        assert main(["validate", "--suite", "params"]) == 0
        assert "params:" in capsys.readouterr().out

    def test_unknown_suite(self, capsys):
        assert main(["validate", "--suite", "nope"]) == 2
