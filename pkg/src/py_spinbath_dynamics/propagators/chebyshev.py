"""
Chebyshev polynomial propagator.

exp(-iHt) is expanded as exp(-ict) [J_0(x) + 2 sum_k (-i)^k J_k(x) T_k(H')]
with H' = (H - c)/R scaled into [-1, 1] and x = R t. The series is cut where
the Bessel coefficients fall below the tolerance; long times are split into
segments so the degree stays below the configured cap.
"""
import logging
import math
from functools import lru_cache

import numpy as np
from scipy.special import jv

from ..hilbert import StateVector
from ..models import CompiledModel
from .base import ConvergenceError, Propagator, PropagatorConfig

logger = logging.getLogger(__name__)

_MINUS_I_POWERS = np.array([1.0, -1j, -1.0, 1j])


@lru_cache(maxsize=256)
def bessel_coefficients(x: float, tolerance: float, max_degree: int) -> np.ndarray:
    """
    Return J_0(x)..J_K(x), truncated after the last term above ``tolerance``.

    Raises:
        ConvergenceError: If the coefficients have not decayed by ``max_degree``.

    """
    orders = np.arange(max_degree + 1)
    bessel = jv(orders, x)
    significant = np.nonzero(np.abs(bessel) >= tolerance)[0]
    degree = int(significant[-1]) + 1 if significant.size else 1
    if degree >= max_degree:
        raise ConvergenceError(
            f"Chebyshev series for x={x:.6g} did not reach tolerance {tolerance:g} "
            f"within {max_degree} terms"
        )
    coefficients = bessel[: degree + 1].copy()
    coefficients.setflags(write=False)
    return coefficients


def _chebyshev_step(
    m: CompiledModel,
    psi: np.ndarray,
    dt: float,
    center: float,
    radius: float,
    config: PropagatorConfig,
) -> np.ndarray:
    coefficients = bessel_coefficients(radius * dt, config.tolerance, config.max_degree)
    logger.debug("Chebyshev segment.", extra={"dt": dt, "degree": len(coefficients)})

    def scaled(v: np.ndarray) -> np.ndarray:
        return (m.apply(v) - center * v) / radius

    result = coefficients[0] * psi
    phi_prev, phi = psi, scaled(psi)
    result = result + 2.0 * _MINUS_I_POWERS[1] * coefficients[1] * phi
    for k in range(2, len(coefficients)):
        phi_prev, phi = phi, 2.0 * scaled(phi) - phi_prev
        result += 2.0 * _MINUS_I_POWERS[k % 4] * coefficients[k] * phi
    return np.exp(-1j * center * dt) * result


def evolve_polynomial(
    m: CompiledModel, s0: StateVector, t: float, cfg: PropagatorConfig
) -> StateVector:
    """
    Approximate exp(-iHt)|s0> by a Chebyshev expansion.

    The spectral interval is bounded by the sum of absolute term coefficients.

    Raises:
        ValueError: If ``t`` is negative or the layouts differ.
        ConvergenceError: If a segment's series cannot reach the tolerance.

    """
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    if (s0.n_central, s0.n_bath) != (m.n_central, m.n_bath):
        raise ValueError(
            f"State has {s0.n_central}+{s0.n_bath} spins, model has "
            f"{m.n_central}+{m.n_bath}"
        )
    center, radius = m.spectral_bound()
    psi = np.array(s0.amplitudes)
    if t == 0.0:
        return s0.replace(psi)
    if radius == 0.0:
        return s0.replace(np.exp(-1j * center * t) * psi)
    # Keep x = R dt at half the degree cap; J_k(x) is negligible well before 2x.
    n_segments = max(1, math.ceil(radius * t / (cfg.max_degree / 2)))
    dt = t / n_segments
    for _ in range(n_segments):
        psi = _chebyshev_step(m, psi, dt, center, radius, cfg)
    return s0.replace(psi)


class ChebyshevPropagator(Propagator):
    """Plug-in wrapper around the Chebyshev expansion."""

    def _evolve(self, state: StateVector, t: float) -> StateVector:
        return evolve_polynomial(self.compiled, state, t, self.config)
