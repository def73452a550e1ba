"""
Measured quantities: Pauli expectations, reduced density matrices, entropies,
central-spin correlations and the singlet/triplet representation.
"""
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Dict

import numpy as np
from scipy.stats import entropy as shannon_entropy

from .hilbert import PauliString, StateVector, apply_pauli_string, basis_indices


class DensityMatrixError(ValueError):
    """A density matrix violates Hermiticity, unit trace or positivity."""


class DensityBasis(str, Enum):
    """Basis a density matrix is written in."""

    COMPUTATIONAL = "computational"
    COUPLED = "coupled"


# Columns are |s=0>, |1,-1>, |1,0>, |1,+1> over the computational index with
# spin 1 on bit 0, so |up,down> is index 1 and |down,up> is index 2.
_SQRT_HALF = np.sqrt(0.5)
COUPLED_BASIS = np.array(
    [
        [0.0, 1.0, 0.0, 0.0],
        [_SQRT_HALF, 0.0, _SQRT_HALF, 0.0],
        [-_SQRT_HALF, 0.0, _SQRT_HALF, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ],
    dtype=complex,
)
COUPLED_LABELS = ("S", "Tm", "T0", "Tp")


@dataclass(frozen=True)
class DensityMatrix:
    """A 2x2 or 4x4 reduced density matrix with its basis tag."""

    entries: np.ndarray
    basis: DensityBasis = DensityBasis.COMPUTATIONAL

    def __post_init__(self) -> None:
        """Check the shape and freeze the entries."""
        entries = np.array(self.entries, dtype=complex)
        if entries.shape not in ((2, 2), (4, 4)):
            raise DensityMatrixError(
                f"Expected a 2x2 or 4x4 matrix, got {entries.shape}"
            )
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "basis", DensityBasis(self.basis))

    @property
    def dim(self) -> int:
        """Matrix dimension d."""
        return int(self.entries.shape[0])

    def validate(self, atol: float = 1e-12) -> "DensityMatrix":
        """
        Check Hermiticity, unit trace and positivity within ``atol``.

        Positivity allows eigenvalues down to -max(atol, 1e-10).

        Raises:
            DensityMatrixError: Naming the violated property and its size.

        """
        rho = self.entries
        asymmetry = float(np.max(np.abs(rho - rho.conj().T)))
        if asymmetry > atol:
            raise DensityMatrixError(
                f"Not Hermitian: max |rho - rho^H| = {asymmetry:.3e}"
            )
        trace_error = abs(complex(np.trace(rho)) - 1.0)
        if trace_error > atol:
            raise DensityMatrixError(f"Trace differs from 1 by {trace_error:.3e}")
        smallest = float(np.linalg.eigvalsh(rho)[0])
        if smallest < -max(atol, 1e-10):
            raise DensityMatrixError(f"Negative eigenvalue {smallest:.3e}")
        return self


@dataclass(frozen=True)
class TimeSeries:
    """One observable sampled on a strictly increasing time grid."""

    times: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        """Validate lengths and ordering."""
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape:
            raise ValueError(
                f"times and values must be equal-length 1-d arrays, got "
                f"{times.shape} and {values.shape}"
            )
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError(
                f"Times of {self.label or 'series'} are not strictly increasing"
            )
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        """Number of samples."""
        return int(self.times.size)

    def window(self, t_min: float = 0.0, t_max: float = np.inf) -> "TimeSeries":
        """Return the samples with t_min <= t <= t_max."""
        keep = (self.times >= t_min) & (self.times <= t_max)
        return TimeSeries(self.times[keep], self.values[keep], self.label)


def expect_pauli(s: StateVector, p: PauliString) -> float:
    """
    Return the real expectation <s|p|s>.

    Raises:
        ValueError: On a site-count mismatch or an imaginary residue above 1e-12.

    """
    value = s.inner(apply_pauli_string(p, s))
    scale = max(1.0, abs(p.coefficient)) * max(1.0, s.norm() ** 2)
    if abs(value.imag) > 1e-12 * scale:
        raise ValueError(
            f"Expectation of {p.letters} has imaginary part {value.imag:.3e}"
        )
    return value.real


def reduced_density_matrix(
    s: StateVector, n_central: int, atol: float = 1e-12
) -> DensityMatrix:
    """
    Trace out the bath, keeping the ``n_central`` low-bit spins.

    Raises:
        ValueError: If ``n_central`` differs from the state's central count.
        DensityMatrixError: If the result fails validation at ``atol``.

    """
    if n_central != s.n_central:
        raise ValueError(f"State has {s.n_central} central spins, not {n_central}")
    # Rows are bath configurations (high bits), columns central ones.
    block = s.amplitudes.reshape(1 << s.n_bath, 1 << n_central)
    return DensityMatrix(block.T @ block.conj()).validate(atol)


def quadratic_entropy(rho: DensityMatrix) -> float:
    """Return 1 - Tr rho^2."""
    entries = rho.entries
    purity = float(np.real(np.vdot(entries, entries)))
    return 1.0 - purity


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """Return -Tr rho ln rho, a diagnostic alongside the quadratic entropy."""
    eigenvalues = np.clip(np.linalg.eigvalsh(rho.entries), 0.0, None)
    return float(shannon_entropy(eigenvalues))


def correlation(s: StateVector, alpha: str, beta: str) -> float:
    """Return <sigma_1^alpha sigma_2^beta> for the two central spins."""
    if s.n_central != 2:
        raise ValueError(
            f"Correlations need two central spins, state has {s.n_central}"
        )
    letters = {alpha.upper(), beta.upper()}
    if not letters <= {"X", "Y", "Z"}:
        raise ValueError(f"Axes must be x, y or z, got {alpha!r}, {beta!r}")
    return expect_pauli(
        s, PauliString.from_sites(s.n_sites, {0: alpha.upper(), 1: beta.upper()})
    )


def to_coupled_basis(rho: DensityMatrix) -> DensityMatrix:
    """
    Rewrite a two-spin density matrix in the order |s=0>, |1,-1>, |1,0>, |1,+1>.

    Raises:
        DensityMatrixError: If ``rho`` is not a 4x4 computational-basis matrix.

    """
    if rho.dim != 4 or rho.basis is not DensityBasis.COMPUTATIONAL:
        raise DensityMatrixError(
            f"Need a 4x4 computational-basis matrix, got {rho.dim}x{rho.dim} "
            f"in the {rho.basis.value} basis"
        )
    return DensityMatrix(
        COUPLED_BASIS.conj().T @ rho.entries @ COUPLED_BASIS, DensityBasis.COUPLED
    )


def rdm_expectation(rho: DensityMatrix, letters: str) -> float:
    """Return Tr(rho P) for a Pauli string over the central spins only."""
    if rho.basis is not DensityBasis.COMPUTATIONAL:
        raise DensityMatrixError("Pauli expectations need the computational basis")
    operator = PauliString(letters).to_dense()
    if operator.shape != rho.entries.shape:
        raise ValueError(f"{letters!r} does not match a {rho.dim}x{rho.dim} matrix")
    return float(np.real(np.trace(rho.entries @ operator)))


@lru_cache(maxsize=32)
def _up_counts(n_sites: int) -> np.ndarray:
    idx = basis_indices(n_sites)
    counts = np.zeros(idx.shape[0])
    for site in range(n_sites):
        counts += (idx >> site) & 1
    counts.setflags(write=False)
    return counts


def total_magnetization(s: StateVector) -> float:
    """Return sum over all sites of <sigma^z>."""
    probabilities = np.abs(s.amplitudes) ** 2
    return float(probabilities @ (2.0 * _up_counts(s.n_sites) - s.n_sites))


def site_magnetizations(s: StateVector) -> np.ndarray:
    """Return <sigma^z_k> for every site k."""
    probabilities = np.abs(s.amplitudes) ** 2
    idx = basis_indices(s.n_sites)
    return np.array(
        [probabilities @ (2.0 * ((idx >> k) & 1) - 1.0) for k in range(s.n_sites)]
    )


def coupled_elements(rho: DensityMatrix) -> Dict[str, float]:
    """
    Flatten a coupled-basis matrix into named real columns.

    Diagonal weights are ``p_<label>``; off-diagonal magnitudes are
    ``abs_<label>_<label>`` for each unordered pair.
    """
    if rho.basis is not DensityBasis.COUPLED:
        raise DensityMatrixError("coupled_elements needs a coupled-basis matrix")
    entries = rho.entries
    columns = {
        f"p_{label}": float(entries[i, i].real)
        for i, label in enumerate(COUPLED_LABELS)
    }
    for i in range(4):
        for j in range(i + 1, 4):
            name = f"abs_{COUPLED_LABELS[i]}_{COUPLED_LABELS[j]}"
            columns[name] = float(abs(entries[i, j]))
    return columns
