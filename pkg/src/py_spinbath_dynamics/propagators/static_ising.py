"""Closed-form propagator of a single spin coupled to a static Ising bath."""
from functools import cached_property
from typing import Iterable, Iterator

import numpy as np

from ..hilbert import StateVector, basis_indices
from ..models import ModelFamily, ModelSpec
from .base import Propagator


def bath_fields(spec: ModelSpec) -> np.ndarray:
    """Return B_m = sum_k J_k (+-1)_k for every bath basis configuration m."""
    configs = basis_indices(spec.n_bath)
    fields = np.zeros(configs.shape[0])
    for k, j_k in enumerate(spec.couplings):
        fields += j_k * (2.0 * ((configs >> k) & 1) - 1.0)
    return fields


def _rotate(
    amplitudes: np.ndarray, delta: float, fields: np.ndarray, t: float
) -> np.ndarray:
    # U = cos(Wt) - i (B sz + D sx) sin(Wt)/W per bath configuration.
    omega = np.sqrt(delta**2 + fields**2)
    cos_wt = np.cos(omega * t)
    with np.errstate(invalid="ignore", divide="ignore"):
        sinc_wt = np.where(omega > 0.0, np.sin(omega * t) / omega, t)
    pairs = amplitudes.reshape(-1, 2)
    down, up = pairs[:, 0], pairs[:, 1]
    rotated = np.empty_like(pairs)
    rotated[:, 1] = cos_wt * up - 1j * sinc_wt * (fields * up + delta * down)
    rotated[:, 0] = cos_wt * down - 1j * sinc_wt * (delta * up - fields * down)
    return rotated.reshape(-1)


def evolve_static_ising(spec: ModelSpec, s0: StateVector, t: float) -> StateVector:
    """
    Apply the exact static-bath evolution operator at time ``t``.

    Each bath configuration only sees its own field B_m, so the central
    amplitude pair of every configuration is rotated in closed form. There is
    no step error for any t.

    Raises:
        ValueError: If ``spec`` is not a static Ising model or ``s0`` has the
            wrong layout.

    """
    if spec.family is not ModelFamily.STATIC_ISING:
        raise ValueError(f"evolve_static_ising needs static_ising, got {spec.family}")
    if (s0.n_central, s0.n_bath) != (1, spec.n_bath):
        raise ValueError(
            f"State has {s0.n_central}+{s0.n_bath} spins, model has 1+{spec.n_bath}"
        )
    return s0.replace(_rotate(s0.amplitudes, spec.delta, bath_fields(spec), t))


class StaticIsingPropagator(Propagator):
    """Plug-in wrapper around the closed-form static-bath solution."""

    @cached_property
    def _fields(self) -> np.ndarray:
        if self.spec.family is not ModelFamily.STATIC_ISING:
            raise ValueError(
                f"exact_static_ising needs static_ising, got {self.spec.family}"
            )
        return bath_fields(self.spec)

    def _evolve(self, state: StateVector, t: float) -> StateVector:
        rotated = _rotate(state.amplitudes, self.spec.delta, self._fields, t)
        return state.replace(rotated)

    def trajectory(
        self, state: StateVector, times: Iterable[float]
    ) -> Iterator[StateVector]:
        """Yield the state at each time, each evaluated directly from ``state``."""
        for t in times:
            yield self.evolve(state, t)
