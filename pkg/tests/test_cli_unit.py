import logging
from pathlib import Path
from unittest.mock import ANY

import pytest
from typer.testing import CliRunner

from py_spinbath_dynamics.cli import app
from py_spinbath_dynamics.output import OutputFile
from py_spinbath_dynamics.propagators.base import ConvergenceError
from py_spinbath_dynamics.runner import RunSummary
from py_spinbath_dynamics.scenario import ScenarioError
from py_spinbath_dynamics.theory import (
    EnvelopeExtractionError,
    EnvelopeLaw,
    TheoryParams,
)

# It's better to have a single runner instance
runner = CliRunner()


@pytest.fixture(autouse=True)
def mock_logging(mocker):
    """Fixture to mock the logging configuration to allow caplog to work."""
    mocker.patch("py_spinbath_dynamics.cli.configure_logging")


@pytest.fixture
def mock_resolve(mocker):
    """Fixture to mock scenario resolution."""
    return mocker.patch(
        "py_spinbath_dynamics.cli.resolve_scenario", return_value=Path("fig1.ini")
    )


@pytest.fixture
def mock_run(mocker):
    """Fixture to mock the scenario runner."""
    summary = RunSummary(
        scenario="fig1",
        family="static_ising",
        theory=TheoryParams(b2=0.073034125, delta=4.0),
        wall_time_s=1.5,
        propagator="exact_static_ising",
        outputs={
            "sigma_z": OutputFile(path="results/fig1/fig1_sigma_z.csv", sha256="0")
        },
        metrics={"envelope_deviation": 0.01},
    )
    return mocker.patch("py_spinbath_dynamics.cli.run_scenario", return_value=summary)


@pytest.fixture
def mock_compare(mocker):
    """Fixture to mock the envelope comparison."""
    return mocker.patch("py_spinbath_dynamics.cli.compare_envelope", return_value=0.004)


def test_run_success(mock_resolve, mock_run, caplog):
    """Tests happy path for the run command."""
    with caplog.at_level(logging.INFO):
        result = runner.invoke(app, ["run", "fig1"])
        assert result.exit_code == 0, caplog.text
        assert "Scenario completed successfully" in caplog.text
    mock_resolve.assert_called_once_with("fig1")
    mock_run.assert_called_once_with(
        Path("fig1.ini"), out_dir=None, seed_override=None, threads=None, settings=ANY
    )


def test_run_passes_options(mock_resolve, mock_run, tmp_path):
    """Tests that --out-dir, --seed-override and --threads reach the runner."""
    result = runner.invoke(
        app,
        [
            "run", "fig1", "--out-dir", str(tmp_path),
            "--seed-override", "7", "--threads", "2",
        ],
    )
    assert result.exit_code == 0
    mock_run.assert_called_once_with(
        Path("fig1.ini"), out_dir=tmp_path, seed_override=7, threads=2, settings=ANY
    )


def test_run_rejects_zero_threads(mock_resolve, mock_run):
    """Tests that --threads must be positive."""
    result = runner.invoke(app, ["run", "fig1", "--threads", "0"])
    assert result.exit_code != 0
    mock_run.assert_not_called()


def test_run_unknown_scenario(mock_resolve, mock_run, caplog):
    """Tests that an unresolvable scenario exits with code 1."""
    mock_resolve.side_effect = ScenarioError("fig9: no such file")
    with caplog.at_level(logging.ERROR):
        result = runner.invoke(app, ["run", "fig9"])
        assert result.exit_code == 1
        assert "Error running scenario" in caplog.text
    mock_run.assert_not_called()


def test_run_propagator_failure(mock_resolve, mock_run, caplog):
    """Tests exception handling for a failed simulation."""
    mock_run.side_effect = ConvergenceError("scenario fig1: did not reach tolerance")
    with caplog.at_level(logging.ERROR):
        result = runner.invoke(app, ["run", "fig1"])
        assert result.exit_code == 1
        assert "Error running scenario" in caplog.text
        assert "did not reach tolerance" in caplog.text


def test_compare_success(mock_compare, tmp_path, caplog):
    """Tests happy path for the compare command."""
    csv = tmp_path / "fig1_sigma_z.csv"
    with caplog.at_level(logging.INFO):
        result = runner.invoke(
            app,
            [
                "compare", str(csv), "--law", "static_quarter",
                "--b2", "0.073", "--delta", "4", "--t-max", "300",
            ],
        )
        assert result.exit_code == 0, caplog.text
        assert "Comparison completed successfully" in caplog.text
    mock_compare.assert_called_once_with(
        csv,
        EnvelopeLaw.STATIC_QUARTER,
        TheoryParams(b2=0.073, delta=4.0),
        sigma0=None,
        t_min=0.0,
        t_max=300.0,
        column=None,
    )


def test_compare_rejects_unknown_law(mock_compare, tmp_path):
    """Tests that only the named laws are accepted."""
    result = runner.invoke(
        app, ["compare", str(tmp_path / "x.csv"), "--law", "gaussian", "--b2", "0.1"]
    )
    assert result.exit_code != 0
    mock_compare.assert_not_called()


def test_compare_failure(mock_compare, tmp_path, caplog):
    """Tests exception handling for the compare command."""
    mock_compare.side_effect = EnvelopeExtractionError("Found 1 peaks")
    with caplog.at_level(logging.ERROR):
        result = runner.invoke(
            app,
            ["compare", str(tmp_path / "x.csv"), "--law", "heisenberg_mf", "--b2=0.1"],
        )
        assert result.exit_code == 1
        assert "Error comparing envelope" in caplog.text


def test_compare_invalid_parameters(mock_compare, tmp_path, caplog):
    """Tests that a negative dispersion is reported, not raised."""
    with caplog.at_level(logging.ERROR):
        result = runner.invoke(
            app,
            ["compare", str(tmp_path / "x.csv"), "--law", "heisenberg_mf", "--b2=-1"],
        )
        assert result.exit_code == 1
        assert "Error comparing envelope" in caplog.text
    mock_compare.assert_not_called()
