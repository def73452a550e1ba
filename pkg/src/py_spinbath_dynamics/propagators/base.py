"""Abstract base class and shared configuration for propagators."""
import logging
from abc import ABC, abstractmethod
from enum import Enum
from typing import Iterable, Iterator

from pydantic import BaseModel, ConfigDict, Field

from ..hilbert import StateVector
from ..models import CompiledModel, ModelFamily, ModelSpec

logger = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """A series expansion did not reach its tolerance within the iteration cap."""


class NormDriftError(RuntimeError):
    """A propagator call changed the state norm beyond the allowed drift."""


class PropagatorMethod(str, Enum):
    """Registered propagator plug-in names."""

    EXACT_STATIC_ISING = "exact_static_ising"
    POLYNOMIAL = "polynomial"
    DENSE_ORACLE = "dense_oracle"


class PropagatorConfig(BaseModel):
    """Numerical settings shared by all propagators."""

    model_config = ConfigDict(frozen=True)

    method: PropagatorMethod = PropagatorMethod.POLYNOMIAL
    tolerance: float = Field(default=1e-12, gt=0)
    dt: float = Field(default=0.05, gt=0)
    max_degree: int = Field(default=10_000, ge=16)
    norm_atol: float = Field(default=1e-12, gt=0)
    dense_max_spins: int = Field(default=10, ge=1)


def default_method(spec: ModelSpec) -> PropagatorMethod:
    """Pick the closed-form propagator for the static bath, Chebyshev otherwise."""
    if spec.family is ModelFamily.STATIC_ISING:
        return PropagatorMethod.EXACT_STATIC_ISING
    return PropagatorMethod.POLYNOMIAL


class Propagator(ABC):
    """Evolves states of one model under exp(-iHt)."""

    def __init__(
        self, spec: ModelSpec, compiled: CompiledModel, config: PropagatorConfig
    ):
        """
        Initialize the propagator.

        Args:
            spec: The model description.
            compiled: The model's Pauli-string Hamiltonian.
            config: Numerical settings.

        """
        self.spec = spec
        self.compiled = compiled
        self.config = config

    @abstractmethod
    def _evolve(self, state: StateVector, t: float) -> StateVector:
        """Return exp(-iHt)|state>."""
        raise NotImplementedError

    def evolve(self, state: StateVector, t: float) -> StateVector:
        """
        Evolve ``state`` by time ``t`` and check the norm was preserved.

        Raises:
            ValueError: If the state does not match the model layout.
            NormDriftError: If the norm moved by more than ``norm_atol``.

        """
        if (state.n_central, state.n_bath) != (
            self.compiled.n_central,
            self.compiled.n_bath,
        ):
            raise ValueError(
                f"State has {state.n_central}+{state.n_bath} spins, model has "
                f"{self.compiled.n_central}+{self.compiled.n_bath}"
            )
        result = self._evolve(state, t)
        drift = abs(result.norm() - state.norm())
        if drift > self.config.norm_atol:
            logger.error(
                "Norm drift beyond tolerance.",
                extra={"drift": drift, "t": t, "method": self.config.method.value},
            )
            raise NormDriftError(
                f"{self.config.method.value} changed the norm by {drift:.3e} at t={t}"
            )
        return result

    def trajectory(
        self, state: StateVector, times: Iterable[float]
    ) -> Iterator[StateVector]:
        """
        Yield the evolved state at each of the ascending ``times``.

        The default implementation steps from one sample to the next.
        """
        current = state
        previous_t = 0.0
        for t in times:
            if t < previous_t:
                raise ValueError(f"Times must be ascending, got {t} after {previous_t}")
            if t > previous_t:
                current = self.evolve(current, t - previous_t)
            previous_t = t
            yield current
