"""Dense-matrix reference propagator for small instances."""
from functools import cached_property
from typing import Tuple

import numpy as np
from scipy.linalg import eigh

from ..hilbert import StateVector
from ..models import CompiledModel
from .base import Propagator


class DimensionCapError(ValueError):
    """The dense oracle refuses registers above its spin cap."""


def _eigensystem(m: CompiledModel, max_spins: int) -> Tuple[np.ndarray, np.ndarray]:
    if m.n_sites > max_spins:
        raise DimensionCapError(
            f"Dense oracle is capped at {max_spins} spins, model has {m.n_sites}"
        )
    return eigh(m.to_dense())


def _apply_eigensystem(
    energies: np.ndarray, vectors: np.ndarray, psi: np.ndarray, t: float
) -> np.ndarray:
    return vectors @ (np.exp(-1j * energies * t) * (vectors.conj().T @ psi))


def dense_oracle(
    m: CompiledModel, s0: StateVector, t: float, max_spins: int = 10
) -> StateVector:
    """
    Evolve by explicit eigendecomposition of the dense Hamiltonian.

    Raises:
        DimensionCapError: If the register exceeds ``max_spins`` spins.

    """
    energies, vectors = _eigensystem(m, max_spins)
    return s0.replace(_apply_eigensystem(energies, vectors, s0.amplitudes, t))


class DensePropagator(Propagator):
    """Plug-in wrapper that diagonalizes once and reuses the eigensystem."""

    @cached_property
    def _eigen(self) -> Tuple[np.ndarray, np.ndarray]:
        return _eigensystem(self.compiled, self.config.dense_max_spins)

    def _evolve(self, state: StateVector, t: float) -> StateVector:
        energies, vectors = self._eigen
        return state.replace(_apply_eigensystem(energies, vectors, state.amplitudes, t))
