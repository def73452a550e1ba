import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.optimize import minimize_scalar

from py_spinbath_dynamics.models import published_couplings
from py_spinbath_dynamics.observables import TimeSeries
from py_spinbath_dynamics.theory import (
    Envelope,
    EnvelopeExtractionError,
    EnvelopeLaw,
    QuadratureError,
    TheoryParams,
    bath_dispersion,
    envelope_deviation,
    envelope_dynamic,
    envelope_heisenberg,
    envelope_static,
    extract_envelope,
    fit_inverse_time_tail,
    heisenberg_envelope_minimum,
    magnus_effective_sigma_z,
    magnus_gaussian_average,
    magnus_monte_carlo,
    sigma_z_closed_form,
    static_gaussian_average,
)

B2 = 0.073034125


@pytest.fixture
def bath() -> TheoryParams:
    """Delta = 4 with the published couplings."""
    return TheoryParams.from_couplings(published_couplings(), delta=4.0)


def test_bath_dispersion():
    """b^2 is the sum of squared couplings."""
    assert bath_dispersion(published_couplings()) == pytest.approx(B2, rel=1e-12)
    assert bath_dispersion(published_couplings()) == pytest.approx(0.0736, rel=0.01)
    assert bath_dispersion([0.0, 0.0]) == 0.0
    assert bath_dispersion([0.3]) == pytest.approx(0.09)
    with pytest.raises(ValueError, match="at least one"):
        bath_dispersion([])


def test_theory_params_time_scales(bath):
    """tau1 = Delta / b^2 and tau2 = 1 / h_x."""
    assert bath.tau1 == 4.0 / bath.b2
    assert bath.tau1 == pytest.approx(54.77, abs=0.01)
    assert bath.tau2 is None
    assert TheoryParams(b2=0.1, delta=1.0, hx=0.5).tau2 == 2.0
    assert TheoryParams(b2=0.0, delta=1.0).tau1 == math.inf
    with pytest.raises(ValidationError):
        TheoryParams(b2=-0.1, delta=1.0)


def test_envelope_static_limits(bath):
    """sigma0 at t = 0 and sigma0 / sqrt(2t/tau1) far beyond tau1."""
    assert envelope_static(0.0, bath, 0.894) == pytest.approx(0.894)
    t = 1000.0 * bath.tau1
    asymptote = 0.894 / math.sqrt(2.0 * t / bath.tau1)
    assert envelope_static(t, bath, 0.894) == pytest.approx(asymptote, rel=1e-6)


def test_envelope_dynamic_limits(bath):
    """sigma0 at t = 0 and sigma0 Delta / (b^2 t) at long times."""
    assert envelope_dynamic(0.0, bath, 0.5) == pytest.approx(0.5)
    t = 1e5
    asymptote = 0.5 * bath.delta / (bath.b2 * t)
    assert envelope_dynamic(t, bath, 0.5) == pytest.approx(asymptote, rel=1e-6)


def test_envelopes_are_strictly_decreasing(bath):
    """Both single-spin laws decay monotonically."""
    t = np.linspace(0.1, 2000.0, 500)
    assert np.all(np.diff(envelope_static(t, bath, 1.0)) < 0)
    assert np.all(np.diff(envelope_dynamic(t, bath, 1.0)) < 0)


def test_envelopes_need_delta():
    """The single-spin laws are undefined without a splitting."""
    with pytest.raises(ValueError, match="delta > 0"):
        envelope_static(1.0, TheoryParams(b2=0.1), 1.0)


def test_static_envelope_dominates_signal(bath):
    """|sigma_z(t)| never exceeds the envelope."""
    t = np.linspace(0.0, 20.0 * bath.tau1, 5000)
    signal = np.abs(static_gaussian_average(t, bath, 0.894))
    assert np.all(signal <= envelope_static(t, bath, 0.894) + 1e-12)


def test_sigma_z_closed_form_limits(bath):
    """sigma0 at t = 0 and free precession without a bath."""
    assert sigma_z_closed_form(0.0, bath, 0.894) == pytest.approx(0.894)
    free = TheoryParams(b2=0.0, delta=4.0)
    for t in (0.1, 1.7, 40.0):
        expected = 0.7 * math.cos(8.0 * t)
        assert sigma_z_closed_form(t, free, 0.7) == pytest.approx(expected, abs=1e-12)


def test_sigma_z_closed_form_cross_check_over_decay(bath):
    """Quadrature and closed form agree along the whole decay window."""
    for t in np.linspace(0.0, 20.0 * bath.tau1, 60):
        value = sigma_z_closed_form(float(t), bath, 0.894)
        expected = static_gaussian_average(float(t), bath, 0.894)
        assert value == pytest.approx(expected, abs=1e-12)


def test_sigma_z_closed_form_reports_disagreement(mocker, bath):
    """A quadrature that disagrees with the closed form is an error."""
    mocker.patch(
        "py_spinbath_dynamics.theory._gaussian_phase_average", return_value=0.5 + 0j
    )
    with pytest.raises(QuadratureError, match="differ"):
        sigma_z_closed_form(3.0, bath, 0.894)


def test_magnus_monte_carlo_trivial_limits(bath):
    """t = 0 gives sigma0 exactly; no bath gives cos(2 Delta t)."""
    mean, stderr = magnus_monte_carlo(0.0, bath, 0.894, 5000, seed=1)
    assert mean == 0.894
    assert stderr == 0.0
    free = TheoryParams(b2=0.0, delta=4.0)
    estimate = magnus_effective_sigma_z(1.3, free, 1.0, 2000, seed=1)
    assert estimate == pytest.approx(math.cos(10.4), abs=1e-12)


def test_magnus_monte_carlo_matches_gaussian_average(bath):
    """Sampling agrees with the analytic average within its error bars."""
    for t in (10.0, 60.0, 150.0, 400.0):
        mean, stderr = magnus_monte_carlo(t, bath, 1.0, 100_000, seed=7)
        expected = magnus_gaussian_average(t, bath, 1.0)
        assert abs(mean - expected) <= 5.0 * stderr + 1e-12


def test_magnus_gaussian_average_amplitude_is_dynamic_envelope(bath):
    """The analytic average oscillates inside the 1/t envelope."""
    t = np.linspace(0.0, 2000.0, 4001)
    average = np.abs(magnus_gaussian_average(t, bath, 1.0))
    assert np.all(average <= envelope_dynamic(t, bath, 1.0) + 1e-12)


def test_magnus_monte_carlo_is_thread_independent(bath):
    """Chunked seeding gives identical results for any worker count."""
    serial = magnus_monte_carlo(75.0, bath, 1.0, 35_000, seed=3, threads=1)
    parallel = magnus_monte_carlo(75.0, bath, 1.0, 35_000, seed=3, threads=4)
    assert serial == parallel


def test_magnus_effective_sigma_z_passes_threads(mocker, bath):
    """The worker count reaches the sampler and does not change the estimate."""
    serial = magnus_effective_sigma_z(75.0, bath, 1.0, 35_000, seed=3)
    sampler = mocker.patch(
        "py_spinbath_dynamics.theory.magnus_monte_carlo",
        wraps=magnus_monte_carlo,
    )
    parallel = magnus_effective_sigma_z(75.0, bath, 1.0, 35_000, seed=3, threads=3)
    assert serial == parallel
    assert sampler.call_args.kwargs["threads"] == 3


def test_magnus_monte_carlo_needs_samples(bath):
    """Fewer than 1000 samples is refused."""
    with pytest.raises(ValueError, match="at least 1000"):
        magnus_monte_carlo(1.0, bath, 1.0, 999, seed=0)


def test_envelope_heisenberg_limits():
    """1 at t = 0 and 1/3 at long times."""
    assert envelope_heisenberg(0.0, B2) == pytest.approx(1.0)
    assert envelope_heisenberg(1e3, B2) == pytest.approx(1.0 / 3.0, abs=1e-12)
    t = np.linspace(0.0, 200.0, 2001)
    values = envelope_heisenberg(t, B2)
    assert np.all((values > 0.0) & (values <= 1.0))


def test_heisenberg_minimum_matches_numerical_search():
    """The minimum sits at b^2 t^2 = 3 with value (1 - 4 e^-1.5) / 3."""
    t_star, value = heisenberg_envelope_minimum(B2)
    found = minimize_scalar(
        lambda t: envelope_heisenberg(t, B2),
        bounds=(0.5 * t_star, 1.5 * t_star),
        method="bounded",
        options={"xatol": 1e-10},
    )
    assert value == pytest.approx(float(found.fun), abs=1e-9)
    assert t_star == pytest.approx(float(found.x), rel=1e-4)
    assert value == pytest.approx(0.0358, abs=1e-4)
    fine = np.linspace(0.9 * t_star, 1.1 * t_star, 200_001)
    assert value == pytest.approx(np.min(envelope_heisenberg(fine, B2)), abs=1e-9)


def test_heisenberg_envelope_approaches_one_third_monotonically():
    """Beyond the minimum the envelope rises towards 1/3."""
    t_star, _ = heisenberg_envelope_minimum(B2)
    t = np.linspace(t_star, 4.0 * t_star, 1000)
    assert np.all(np.diff(envelope_heisenberg(t, B2)) > 0)


def test_extract_envelope_of_cosine():
    """A pure cosine has a constant envelope."""
    t = np.linspace(0.0, 20.0, 4000)
    envelope = extract_envelope(TimeSeries(t, 0.7 * np.cos(3.0 * t), "cos"))
    assert len(envelope) > 10
    assert np.allclose(envelope.values, 0.7, atol=1e-6)
    assert np.all(np.diff(envelope.times) > 0)
    assert envelope.label == "cos_envelope"


def test_extract_envelope_of_damped_cosine():
    """Peaks of e^-t cos(20t) lie on the e^-t curve."""
    t = np.linspace(0.0, 3.0, 4000)
    envelope = extract_envelope(TimeSeries(t, np.exp(-t) * np.cos(20.0 * t)))
    assert np.allclose(envelope.values, np.exp(-envelope.times), rtol=5e-3)


def test_extract_envelope_needs_three_peaks():
    """Too few oscillations cannot define an envelope."""
    t = np.linspace(0.0, 1.0, 200)
    with pytest.raises(EnvelopeExtractionError, match="need at least 3"):
        extract_envelope(TimeSeries(t, np.cos(4.0 * t)))


def test_extract_envelope_min_separation_drops_ripple():
    """A small ripple between carrier peaks is ignored with a separation."""
    t = np.linspace(0.0, 10.0, 20_000)
    values = np.sin(2.0 * t) + 0.01 * np.cos(60.0 * t)
    with_ripple = extract_envelope(TimeSeries(t, values))
    carrier_only = extract_envelope(TimeSeries(t, values), min_separation=0.5)
    assert len(carrier_only) < len(with_ripple)
    assert len(carrier_only) == 6


def test_fit_inverse_time_tail():
    """An exact c/t tail is recovered with zero residual."""
    t = np.linspace(10.0, 100.0, 50)
    c, residual = fit_inverse_time_tail(TimeSeries(t, 2.5 / t), t_min=20.0)
    assert c == pytest.approx(2.5, rel=1e-12)
    assert residual == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError, match="two positive"):
        fit_inverse_time_tail(TimeSeries(t, 2.5 / t), t_min=1000.0)


def test_fit_inverse_time_tail_window_excludes_late_decay():
    """A faster decay after t_max does not enter the fit."""
    t = np.linspace(10.0, 150.0, 141)
    values = np.where(t <= 60.0, 2.5 / t, 2.5 / t * np.exp(-(t - 60.0) / 20.0))
    c, residual = fit_inverse_time_tail(TimeSeries(t, values), 15.0, 60.0)
    assert c == pytest.approx(2.5, rel=1e-12)
    assert residual == pytest.approx(0.0, abs=1e-12)
    _, full = fit_inverse_time_tail(TimeSeries(t, values), 15.0)
    assert full > 0.3


def test_envelope_model_dispatch(bath):
    """An Envelope evaluates its named law."""
    static = Envelope(law=EnvelopeLaw.STATIC_QUARTER, params=bath, sigma0=0.9)
    assert static(100.0) == pytest.approx(envelope_static(100.0, bath, 0.9))
    dynamic = Envelope(law="dynamic_half", params=bath)
    assert dynamic(100.0) == pytest.approx(envelope_dynamic(100.0, bath, 1.0))
    heisenberg = Envelope(law=EnvelopeLaw.HEISENBERG_MF, params=TheoryParams(b2=0.07))
    assert heisenberg(3.0) == pytest.approx(envelope_heisenberg(3.0, 0.07))
    with pytest.raises(ValidationError, match="needs delta"):
        Envelope(law=EnvelopeLaw.STATIC_QUARTER, params=TheoryParams(b2=0.07))


def test_envelope_deviation_of_self_generated_signal(bath):
    """A signal built from the static law matches it within 1 %."""
    t = np.linspace(0.0, 300.0, 60_000)
    signal = envelope_static(t, bath, 0.894) * np.cos(8.0 * t)
    envelope = extract_envelope(TimeSeries(t, signal))
    law = Envelope(law=EnvelopeLaw.STATIC_QUARTER, params=bath, sigma0=0.894)
    assert envelope_deviation(envelope, law) < 0.01
    with pytest.raises(EnvelopeExtractionError, match="No envelope points"):
        envelope_deviation(envelope, law, t_min=500.0)
