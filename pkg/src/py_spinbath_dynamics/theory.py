"""
Closed-form and semi-analytical envelopes of the central-spin oscillations.

Gaussian bath-field averages give the static-bath law
sigma0 [1 + (2t/tau1)^2]^(-1/4), the fluctuating-bath law
sigma0 [1 + (b^2 t/Delta)^2]^(-1/2) and the two-spin mean-field law
(1/3)[1 - 2(b^2 t^2 - 1) exp(-b^2 t^2 / 2)]. Simulated series are reduced to
envelopes by peak extraction and compared against these laws.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator
from scipy.signal import find_peaks
from scipy.special import roots_legendre
from scipy.stats import norm

from .observables import TimeSeries

logger = logging.getLogger(__name__)

FloatOrArray = Union[float, np.ndarray]

# Standard-normal mass beyond this cutoff is below 1e-18.
_GAUSS_CUTOFF = 9.0
_LEGENDRE_NODES, _LEGENDRE_WEIGHTS = roots_legendre(32)
_QUADRATURE_RTOL = 1e-10
_QUADRATURE_MAX_PANELS = 4096
_CROSS_CHECK_ATOL = 1e-9


class QuadratureError(RuntimeError):
    """Numerical quadrature did not converge or disagreed with the closed form."""


class EnvelopeExtractionError(ValueError):
    """Too few oscillation peaks to define an envelope."""


class TheoryParams(BaseModel):
    """Bath dispersion and time scales derived from a model."""

    model_config = ConfigDict(frozen=True)

    b2: float = Field(ge=0.0)
    delta: float = Field(default=0.0, ge=0.0)
    hx: Optional[float] = Field(default=None, gt=0.0)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def tau1(self) -> float:
        """Static-bath crossover time Delta/b^2 (infinite without a bath)."""
        return math.inf if self.b2 == 0.0 else self.delta / self.b2

    @computed_field  # type: ignore[prop-decorator]
    @property
    def tau2(self) -> Optional[float]:
        """Bath-flip time 1/h_x, when a transverse bath field is present."""
        return None if self.hx is None else 1.0 / self.hx

    @classmethod
    def from_couplings(
        cls, couplings: Sequence[float], delta: float = 0.0, hx: Optional[float] = None
    ) -> "TheoryParams":
        """Build parameters from the bath couplings J_k."""
        return cls(b2=bath_dispersion(couplings), delta=delta, hx=hx or None)


def bath_dispersion(couplings: Sequence[float]) -> float:
    """
    Return b^2 = sum_k J_k^2.

    Raises:
        ValueError: For an empty coupling list.

    """
    values = np.asarray(couplings, dtype=float)
    if values.size == 0:
        raise ValueError("bath_dispersion needs at least one coupling")
    return float(np.sum(values**2))


def _require_delta(p: TheoryParams, law: str) -> None:
    if p.delta <= 0.0:
        raise ValueError(f"The {law} law needs delta > 0, got {p.delta}")


def envelope_static(t: FloatOrArray, p: TheoryParams, sigma0: float) -> FloatOrArray:
    """Return sigma0 [1 + (2t/tau1)^2]^(-1/4); the tail is sigma0/sqrt(2t/tau1)."""
    _require_delta(p, "static")
    t = np.asarray(t, dtype=float)
    ratio = 2.0 * p.b2 * t / p.delta
    return sigma0 * (1.0 + ratio**2) ** -0.25


def envelope_dynamic(t: FloatOrArray, p: TheoryParams, sigma0: float) -> FloatOrArray:
    """Return sigma0 [1 + (b^2 t/Delta)^2]^(-1/2); the tail decays as 1/t."""
    _require_delta(p, "dynamic")
    t = np.asarray(t, dtype=float)
    ratio = p.b2 * t / p.delta
    return sigma0 * (1.0 + ratio**2) ** -0.5


def envelope_heisenberg(t: FloatOrArray, b2: float) -> FloatOrArray:
    """Return the two-spin mean-field envelope, 1 at t=0 and 1/3 at long times."""
    x = b2 * np.asarray(t, dtype=float) ** 2
    return (1.0 - 2.0 * (x - 1.0) * np.exp(-0.5 * x)) / 3.0


def heisenberg_envelope_minimum(b2: float) -> Tuple[float, float]:
    """Return (t*, value) of the mean-field envelope minimum, at b^2 t*^2 = 3."""
    if b2 <= 0.0:
        raise ValueError(f"b2 must be positive, got {b2}")
    return math.sqrt(3.0 / b2), (1.0 - 4.0 * math.exp(-1.5)) / 3.0


def _gaussian_phase_average(gamma: float) -> complex:
    """Return E[exp(-i gamma x^2)] for standard-normal x by composite quadrature."""

    def integrate(panels: int) -> complex:
        edges = np.linspace(0.0, _GAUSS_CUTOFF, panels + 1)
        half = 0.5 * np.diff(edges)[:, None]
        x = 0.5 * (edges[:-1] + edges[1:])[:, None] + half * _LEGENDRE_NODES
        integrand = 2.0 * norm.pdf(x) * np.exp(-1j * gamma * x**2)
        return complex(np.sum(half * _LEGENDRE_WEIGHTS * integrand))

    panels = 4
    previous = integrate(panels)
    while panels < _QUADRATURE_MAX_PANELS:
        panels *= 2
        current = integrate(panels)
        if abs(current - previous) < _QUADRATURE_RTOL:
            return current
        previous = current
    raise QuadratureError(
        f"Gaussian average for gamma={gamma:.6g} did not converge with "
        f"{_QUADRATURE_MAX_PANELS} panels"
    )


def static_gaussian_average(
    t: FloatOrArray, p: TheoryParams, sigma0: float
) -> FloatOrArray:
    """Return sigma0 Re{exp(-2i Delta t)(1 + 2i b^2 t/Delta)^(-1/2)}."""
    _require_delta(p, "static")
    t = np.asarray(t, dtype=float)
    gamma = p.b2 * t / p.delta
    return sigma0 * (np.exp(-2j * p.delta * t) * (1.0 + 2j * gamma) ** -0.5).real


def sigma_z_closed_form(t: float, p: TheoryParams, sigma0: float) -> float:
    """
    Return the Gaussian-averaged static-bath sigma_z(t).

    The analytic value sigma0 Re{exp(-2i Delta t)(1 + 2i b^2 t/Delta)^(-1/2)} is
    cross-checked against quadrature over the bath field on every call.

    Raises:
        QuadratureError: If the quadrature fails or differs by more than 1e-9.

    """
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    _require_delta(p, "static")
    gamma = p.b2 * t / p.delta
    carrier = np.exp(-2j * p.delta * t)
    analytic = float(static_gaussian_average(t, p, sigma0))
    numeric = sigma0 * (carrier * _gaussian_phase_average(gamma)).real
    if abs(analytic - numeric) > _CROSS_CHECK_ATOL * max(1.0, abs(sigma0)):
        logger.error(
            "Quadrature disagrees with closed form.",
            extra={"t": t, "analytic": analytic, "numeric": numeric},
        )
        raise QuadratureError(
            f"Quadrature {numeric:.15g} and closed form {analytic:.15g} differ at t={t}"
        )
    return float(analytic)


def magnus_gaussian_average(
    t: FloatOrArray, p: TheoryParams, sigma0: float
) -> FloatOrArray:
    """Return sigma0 Re{exp(-2i Delta t)(1 + i b^2 t/Delta)^(-1)}, the exact average."""
    _require_delta(p, "dynamic")
    t = np.asarray(t, dtype=float)
    return sigma0 * (np.exp(-2j * p.delta * t) / (1.0 + 1j * p.b2 * t / p.delta)).real


def _magnus_chunk(
    t: float, p: TheoryParams, size: int, seed: np.random.SeedSequence
) -> Tuple[float, float]:
    rng = np.random.default_rng(seed)
    sigma_b = math.sqrt(p.b2)
    b_y = rng.normal(0.0, sigma_b, size)
    b_z = rng.normal(0.0, sigma_b, size)
    samples = np.cos(2.0 * t * (p.delta + (b_y**2 + b_z**2) / (4.0 * p.delta)))
    return float(np.sum(samples)), float(np.sum(samples**2))


def magnus_monte_carlo(
    t: float,
    p: TheoryParams,
    sigma0: float,
    n_samples: int,
    seed: int,
    chunk_size: int = 10_000,
    threads: int = 1,
) -> Tuple[float, float]:
    """
    Sample the long-time effective precession over Gaussian bath fields.

    The effective frequency is Delta + (B_y^2 + B_z^2)/(4 Delta) with B_y, B_z
    independent with variance b^2. Samples are drawn in fixed-size chunks whose
    generators are spawned from ``seed``, so the result does not depend on
    ``threads``.

    Returns:
        The estimate of sigma_z(t) and its standard error.

    """
    if n_samples < 1000:
        raise ValueError(f"n_samples must be at least 1000, got {n_samples}")
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    _require_delta(p, "dynamic")
    sizes = [chunk_size] * (n_samples // chunk_size)
    if n_samples % chunk_size:
        sizes.append(n_samples % chunk_size)
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    with ThreadPoolExecutor(max_workers=threads) as executor:
        partials: List[Tuple[float, float]] = list(
            executor.map(lambda job: _magnus_chunk(t, p, *job), zip(sizes, seeds))
        )
    total = math.fsum(s for s, _ in partials)
    total_sq = math.fsum(q for _, q in partials)
    mean = total / n_samples
    variance = max(total_sq / n_samples - mean**2, 0.0)
    stderr = math.sqrt(variance / (n_samples - 1))
    return sigma0 * mean, abs(sigma0) * stderr


def magnus_effective_sigma_z(
    t: float,
    p: TheoryParams,
    sigma0: float,
    n_samples: int,
    seed: int,
    threads: int = 1,
) -> float:
    """Return the Monte-Carlo estimate of sigma_z(t) under the effective dynamics."""
    mean, _ = magnus_monte_carlo(t, p, sigma0, n_samples, seed, threads=threads)
    return mean


def extract_envelope(
    series: TimeSeries, min_separation: Optional[float] = None
) -> TimeSeries:
    """
    Return the refined local maxima of |values|.

    Each peak is refined by the vertex of the parabola through it and its two
    neighbours. ``min_separation`` (time units) suppresses spurious maxima
    closer than that to a larger one.

    Raises:
        EnvelopeExtractionError: If fewer than three peaks are found.

    """
    magnitude = np.abs(series.values)
    distance = None
    if min_separation is not None and len(series) > 1:
        step = float(np.median(np.diff(series.times)))
        distance = max(1, int(min_separation / step))
    peaks, _ = find_peaks(magnitude, distance=distance)
    if peaks.size < 3:
        raise EnvelopeExtractionError(
            f"Found {peaks.size} peaks in {series.label or 'series'}, need at least 3"
        )
    left, centre, right = magnitude[peaks - 1], magnitude[peaks], magnitude[peaks + 1]
    curvature = left - 2.0 * centre + right
    with np.errstate(invalid="ignore", divide="ignore"):
        offset = np.where(curvature != 0.0, 0.5 * (left - right) / curvature, 0.0)
    heights = centre - 0.25 * (left - right) * offset
    spacing = 0.5 * (series.times[peaks + 1] - series.times[peaks - 1])
    times = series.times[peaks] + offset * spacing
    return TimeSeries(times, heights, f"{series.label}_envelope")


def fit_inverse_time_tail(
    envelope: TimeSeries, t_min: float, t_max: float = math.inf
) -> Tuple[float, float]:
    """
    Least-squares fit of c/t to the envelope for t_min <= t <= t_max.

    Returns:
        The coefficient c and the RMS relative residual of the fit.

    """
    tail = envelope.window(t_min, t_max)
    if len(tail) < 2 or tail.times[0] <= 0.0:
        raise ValueError(
            f"Need at least two positive tail points in [{t_min:g}, {t_max:g}]"
        )
    design = (1.0 / tail.times)[:, None]
    (c,), *_ = np.linalg.lstsq(design, tail.values, rcond=None)
    fitted = c / tail.times
    residual = float(np.sqrt(np.mean(((tail.values - fitted) / fitted) ** 2)))
    return float(c), residual


class EnvelopeLaw(str, Enum):
    """Named closed-form envelope laws."""

    STATIC_QUARTER = "static_quarter"
    DYNAMIC_HALF = "dynamic_half"
    HEISENBERG_MF = "heisenberg_mf"


class Envelope(BaseModel):
    """An envelope law bound to its parameters and initial amplitude."""

    model_config = ConfigDict(frozen=True)

    law: EnvelopeLaw
    params: TheoryParams
    sigma0: float = 1.0

    @model_validator(mode="after")
    def _check_params(self) -> "Envelope":
        """Require delta for the single-spin laws."""
        if self.law is not EnvelopeLaw.HEISENBERG_MF and self.params.delta <= 0.0:
            raise ValueError(f"{self.law.value} needs delta > 0")
        return self

    def __call__(self, t: FloatOrArray) -> FloatOrArray:
        """Evaluate the law at ``t``."""
        if self.law is EnvelopeLaw.STATIC_QUARTER:
            return envelope_static(t, self.params, self.sigma0)
        if self.law is EnvelopeLaw.DYNAMIC_HALF:
            return envelope_dynamic(t, self.params, self.sigma0)
        return self.sigma0 * envelope_heisenberg(t, self.params.b2)


def envelope_deviation(
    envelope: TimeSeries,
    law: Envelope,
    t_min: float = 0.0,
    t_max: float = math.inf,
) -> float:
    """
    Return the max relative deviation of extracted peaks from ``law``.

    Raises:
        EnvelopeExtractionError: If no peak lies inside [t_min, t_max].

    """
    window = envelope.window(t_min, t_max)
    if len(window) == 0:
        raise EnvelopeExtractionError(f"No envelope points inside [{t_min}, {t_max}]")
    expected = np.asarray(law(window.times))
    return float(np.max(np.abs(window.values - expected) / np.abs(expected)))
