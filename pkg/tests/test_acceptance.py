"""
Full-size reproductions of the bundled scenarios.

These take minutes of CPU; select them with ``pytest -m slow``.
"""
import numpy as np
import pytest

from py_spinbath_dynamics.config import Settings
from py_spinbath_dynamics.output import read_series_csv
from py_spinbath_dynamics.runner import compare, run_scenario
from py_spinbath_dynamics.scenario import resolve_scenario
from py_spinbath_dynamics.theory import (
    EnvelopeLaw,
    TheoryParams,
    envelope_dynamic,
    magnus_gaussian_average,
    magnus_monte_carlo,
    sigma_z_closed_form,
    static_gaussian_average,
)

pytestmark = pytest.mark.slow

REDUCED_SWEEP = """
    [scenario]
    name = reduced_sweep
    [model]
    family = transverse_bath
    delta = 4.0
    couplings = published
    n_bath = 12
    hx = 0.5, 1.0
    [initial]
    bloch = 0.447, 0.0, 0.894
    [run]
    bath_seed = 1
    t_max = 160.0
    n_samples = 4001
    method = polynomial
    [output]
    observables = sigma_z
    theory_overlay = false
"""


def run_bundled(name, out_dir):
    """Run a bundled scenario with default settings."""
    return run_scenario(resolve_scenario(name), out_dir=out_dir, settings=Settings())


@pytest.fixture(scope="module")
def fig1_run(tmp_path_factory):
    """The static-bath scenario, run once for the whole module."""
    out_dir = tmp_path_factory.mktemp("fig1")
    summary = run_bundled("fig1", out_dir)
    return summary, out_dir / "fig1"


def test_fig1_envelope_follows_static_law(fig1_run):
    """The sigma_z envelope follows the quarter-power law over the Gaussian regime."""
    summary, target = fig1_run
    tau1 = summary.theory.tau1
    assert tau1 == pytest.approx(54.77, abs=0.01)
    deviation = compare(
        target / "fig1_sigma_z.csv",
        EnvelopeLaw.STATIC_QUARTER,
        summary.theory,
        t_max=5.0 * tau1,
    )
    assert deviation < 0.1
    assert "envelope_deviation" in summary.metrics


def test_fig1_decohered_spin_keeps_oscillating(fig1_run):
    """At full decoherence a sizeable fraction of the oscillation survives."""
    summary, _ = fig1_run
    metrics = summary.metrics
    assert 0.0 < metrics["entropy_plateau"] <= 0.5
    assert metrics["decoherence_time"] > 0.0
    assert metrics["residual_amplitude_fraction"] >= 0.15


def test_fig1_conservation(fig1_run):
    """sigma_x and every bath sigma^z are conserved by the static bath."""
    summary, target = fig1_run
    assert summary.metrics["bath_sz_drift"] < 1e-12
    assert summary.metrics["sigma_x_drift"] < 0.02
    sigma_x, _ = read_series_csv(target / "fig1_sigma_x.csv")
    assert sigma_x["sigma_x"][0] == pytest.approx(0.447, abs=1e-3)


def test_fig1_overlay_columns(fig1_run):
    """The overlay carries the closed-form envelope and averaged signal."""
    summary, target = fig1_run
    columns, _ = read_series_csv(target / "fig1_sigma_z.csv")
    sigma0 = columns["sigma_z"][0]
    t = columns["t"]
    assert np.allclose(
        columns["theory_signal"], static_gaussian_average(t, summary.theory, sigma0)
    )
    envelope = columns["theory_envelope"]
    assert np.all(np.abs(columns["theory_signal"]) <= envelope + 1e-12)


def test_fig1_is_deterministic(fig1_run, tmp_path):
    """A second run writes byte-identical series."""
    summary, _ = fig1_run
    again = run_bundled("fig1", tmp_path)
    for name, output in summary.outputs.items():
        assert again.outputs[name].sha256 == output.sha256


@pytest.fixture(scope="module")
def fig4_run(tmp_path_factory):
    """The two-spin scenario over its short window, run once."""
    out_dir = tmp_path_factory.mktemp("fig4")
    return run_bundled("fig4", out_dir), out_dir / "fig4"


@pytest.fixture(scope="module")
def fig3_run(tmp_path_factory):
    """The two-spin scenario over its long window, run once."""
    out_dir = tmp_path_factory.mktemp("fig3")
    return run_bundled("fig3", out_dir), out_dir / "fig3"


def test_fig4_two_spin_conservation(fig4_run):
    """Total S_z is conserved and the coupled-basis weights stay normalized."""
    summary, target = fig4_run
    assert summary.metrics["magnetization_drift"] < 1e-10
    rho, _ = read_series_csv(target / "fig4_rho_coupled.csv")
    assert rho["abs_S_T0"][0] == pytest.approx(0.5, abs=1e-12)
    total = rho["p_S"] + rho["p_Tm"] + rho["p_T0"] + rho["p_Tp"]
    assert np.allclose(total, 1.0, atol=1e-10)


@pytest.mark.parametrize("fixture", ["fig3_run", "fig4_run"])
def test_coupled_basis_structure(fixture, request):
    """|1,+1> and |1,-1> fill equally and only the S-T0 coherence is large."""
    summary, _ = request.getfixturevalue(fixture)
    assert summary.metrics["triplet_imbalance"] < 0.02
    assert summary.metrics["max_other_offdiag"] < 0.05


@pytest.mark.parametrize("fixture", ["fig3_run", "fig4_run"])
def test_singlet_triplet_coherence_plateau(fixture, request):
    """After the mean-field minimum |rho_S,T0| settles near 1/6, not zero."""
    summary, _ = request.getfixturevalue(fixture)
    assert summary.metrics["coherence_plateau"] == pytest.approx(1.0 / 6.0, abs=0.05)


def test_fig4_is_deterministic(fig4_run, tmp_path):
    """A second two-spin run writes byte-identical series."""
    summary, _ = fig4_run
    again = run_bundled("fig4", tmp_path)
    for name, output in summary.outputs.items():
        assert again.outputs[name].sha256 == output.sha256


def test_fig3_tail_follows_inverse_time(fig3_run):
    """Between 4/b and 16/b the envelope is fitted by c/t to within 20 %."""
    summary, _ = fig3_run
    assert summary.metrics["magnetization_drift"] < 1e-10
    assert 3.5 < summary.metrics["tail_fit_c"] < 6.5
    assert summary.metrics["tail_fit_residual"] < 0.2


def test_transverse_envelopes_do_not_depend_on_hx(write_scenario, tmp_path):
    """Two fast transverse fields give the same envelope on a 12-spin bath."""
    path = write_scenario(REDUCED_SWEEP, "reduced_sweep.ini")
    summary = run_scenario(path, out_dir=tmp_path, threads=2, settings=Settings())
    names = [m.name for m in summary.members]
    assert names == ["reduced_sweep_hx0.5", "reduced_sweep_hx1"]
    assert summary.metrics["sweep_envelope_spread"] < 0.25


def test_closed_form_agrees_with_quadrature_on_fine_grid():
    """The static-bath average is cross-checked on 1000 times."""
    params = TheoryParams(b2=0.073034125, delta=4.0)
    for t in np.linspace(0.0, 20.0 * params.tau1, 1000):
        sigma_z_closed_form(float(t), params, 0.894)


def test_effective_dynamics_sampling_matches_average():
    """Monte-Carlo sampling of the effective precession matches its average."""
    params = TheoryParams(b2=0.073034125, delta=4.0)
    for t in np.linspace(50.0, 2000.0, 20):
        mean, stderr = magnus_monte_carlo(float(t), params, 1.0, 100_000, seed=11)
        assert abs(mean - magnus_gaussian_average(float(t), params, 1.0)) <= 5 * stderr
        assert abs(mean) <= envelope_dynamic(float(t), params, 1.0) + 5 * stderr
