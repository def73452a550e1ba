"""
Joint central-spin/bath pure states and matrix-free Pauli strings.

Bit convention: for a state over M central and N bath spins the basis index is
little-endian, bits 0..M-1 are the central spins and bits M..M+N-1 the bath
spins. Bit value 1 is spin-up, so Z|1> = +|1> and Z|0> = -|0>. With this
convention the per-site matrices below are the standard Pauli matrices
written in the (down, up) ordering.
"""
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Mapping, Optional

import numpy as np

NORM_ATOL = 1e-12

_SITE_MATRICES: Dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, 1j], [-1j, 0]], dtype=complex),
    "Z": np.array([[-1, 0], [0, 1]], dtype=complex),
}

_BIT_LETTERS = {"0": 0, "1": 1, "d": 0, "u": 1, "↓": 0, "↑": 1}


@lru_cache(maxsize=64)
def basis_indices(n_sites: int) -> np.ndarray:
    """Return the read-only index array 0..2^n-1 shared by the kernels."""
    idx = np.arange(1 << n_sites, dtype=np.int64)
    idx.setflags(write=False)
    return idx


@dataclass(frozen=True)
class StateVector:
    """A pure state of M central spins and N bath spins."""

    amplitudes: np.ndarray
    n_central: int
    n_bath: int = 0

    def __post_init__(self) -> None:
        """Validate the layout and freeze the amplitude buffer."""
        if self.n_central not in (1, 2):
            raise ValueError(f"n_central must be 1 or 2, got {self.n_central}")
        if self.n_bath < 0:
            raise ValueError(f"n_bath must be non-negative, got {self.n_bath}")
        amplitudes = np.asarray(self.amplitudes, dtype=complex)
        expected = 1 << (self.n_central + self.n_bath)
        if amplitudes.shape != (expected,):
            raise ValueError(
                f"Expected {expected} amplitudes for {self.n_central}+{self.n_bath} "
                f"spins, got shape {amplitudes.shape}"
            )
        amplitudes.setflags(write=False)
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def n_sites(self) -> int:
        """Total number of spins."""
        return self.n_central + self.n_bath

    @property
    def dim(self) -> int:
        """Hilbert-space dimension."""
        return 1 << self.n_sites

    def norm(self) -> float:
        """Return the 2-norm of the amplitudes."""
        return float(np.linalg.norm(self.amplitudes))

    def replace(self, amplitudes: np.ndarray) -> "StateVector":
        """Return a state with the same layout and new amplitudes."""
        return StateVector(amplitudes, self.n_central, self.n_bath)

    def inner(self, other: "StateVector") -> complex:
        """Return <self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class PauliString:
    """A real coefficient times a tensor product of I/X/Y/Z letters.

    ``letters[k]`` acts on site k (site 0 is the least significant bit). An
    all-identity string is a constant energy shift.
    """

    letters: str
    coefficient: float = 1.0
    x_mask: int = field(init=False, repr=False)
    z_mask: int = field(init=False, repr=False)
    n_y: int = field(init=False, repr=False)

    def __post_init__(self) -> None:
        """Validate the letters and precompute the flip and phase masks."""
        letters = self.letters.upper()
        unknown = set(letters) - set(_SITE_MATRICES)
        if not letters or unknown:
            raise ValueError(f"Invalid Pauli letters {self.letters!r}")
        x_mask = z_mask = n_y = 0
        for site, letter in enumerate(letters):
            if letter in "XY":
                x_mask |= 1 << site
            if letter in "ZY":
                z_mask |= 1 << site
            n_y += letter == "Y"
        object.__setattr__(self, "letters", letters)
        object.__setattr__(self, "coefficient", float(self.coefficient))
        object.__setattr__(self, "x_mask", x_mask)
        object.__setattr__(self, "z_mask", z_mask)
        object.__setattr__(self, "n_y", n_y)

    @classmethod
    def from_sites(
        cls, n_sites: int, ops: Mapping[int, str], coefficient: float = 1.0
    ) -> "PauliString":
        """Build a string from a sparse ``{site: letter}`` mapping."""
        letters = ["I"] * n_sites
        for site, letter in ops.items():
            if not 0 <= site < n_sites:
                raise ValueError(f"Site {site} outside 0..{n_sites - 1}")
            letters[site] = letter
        return cls("".join(letters), coefficient)

    @property
    def n_sites(self) -> int:
        """Number of sites the string spans."""
        return len(self.letters)

    @property
    def is_identity(self) -> bool:
        """True for a constant shift."""
        return self.x_mask == 0 and self.z_mask == 0

    def phase_vector(self) -> np.ndarray:
        """Return coefficient * i^n_y * prod_z(+-1) over the input basis index."""
        idx = basis_indices(self.n_sites)
        sign = np.ones(idx.shape[0])
        for site in range(self.n_sites):
            if self.z_mask >> site & 1:
                sign *= 2.0 * ((idx >> site) & 1) - 1.0
        return (self.coefficient * 1j**self.n_y) * sign

    def to_dense(self) -> np.ndarray:
        """Return the explicit 2^n x 2^n matrix built by Kronecker products."""
        matrix = np.ones((1, 1), dtype=complex)
        # Site n-1 is the most significant bit, so it is the leftmost factor.
        for letter in reversed(self.letters):
            matrix = np.kron(matrix, _SITE_MATRICES[letter])
        return self.coefficient * matrix


def basis_state(
    bits: str, n_central: int, n_bath: Optional[int] = None
) -> StateVector:
    """
    Return the computational basis state labelled by ``bits``.

    Args:
        bits: One character per site, site 0 first. Accepted letters are
            ``1``/``u``/``↑`` for spin-up and ``0``/``d``/``↓`` for spin-down.
        n_central: How many of the leading sites are central spins.
        n_bath: Expected bath size; when given, ``bits`` must span exactly
            ``n_central + n_bath`` sites.

    Raises:
        ValueError: On a length mismatch or an unknown letter.

    """
    expected = n_central + (n_bath if n_bath is not None else len(bits) - n_central)
    if len(bits) < n_central or len(bits) != expected:
        raise ValueError(
            f"Bit string {bits!r} does not span {n_central} central and "
            f"{expected - n_central} bath spins"
        )
    index = 0
    for site, letter in enumerate(bits):
        try:
            index |= _BIT_LETTERS[letter.lower()] << site
        except KeyError:
            raise ValueError(f"Unknown spin letter {letter!r} in {bits!r}") from None
    amplitudes = np.zeros(1 << len(bits), dtype=complex)
    amplitudes[index] = 1.0
    return StateVector(amplitudes, n_central, len(bits) - n_central)


def bloch_state(bloch: "np.ndarray | tuple[float, float, float]") -> StateVector:
    """Return the single-spin pure state whose Bloch vector points along ``bloch``.

    The vector is normalized first, so rounded published components are accepted.
    """
    vector = np.asarray(bloch, dtype=float)
    length = np.linalg.norm(vector)
    if vector.shape != (3,) or length == 0.0:
        raise ValueError(f"Bloch vector must be a non-zero 3-vector, got {bloch!r}")
    x, y, z = vector / length
    theta = np.arccos(np.clip(z, -1.0, 1.0))
    phi = np.arctan2(y, x)
    amplitudes = np.array(
        [np.exp(1j * phi) * np.sin(theta / 2), np.cos(theta / 2)], dtype=complex
    )
    return StateVector(amplitudes, 1, 0)


def random_bath_product(central: StateVector, n_bath: int, seed: int) -> StateVector:
    """
    Return ``central`` times a random bath superposition.

    The 2^N bath coefficients are i.i.d. standard complex Gaussians, normalized
    afterwards; the same seed always yields the same state.
    """
    if central.n_bath != 0:
        raise ValueError("The central state must not already carry bath spins")
    if n_bath < 1:
        raise ValueError(f"n_bath must be at least 1, got {n_bath}")
    if abs(central.norm() - 1.0) > NORM_ATOL:
        raise ValueError(f"Central state is not normalized (norm={central.norm()})")
    rng = np.random.default_rng(seed)
    size = 1 << n_bath
    bath = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    bath /= np.linalg.norm(bath)
    # The bath occupies the high bits, so it is the left Kronecker factor.
    return StateVector(np.kron(bath, central.amplitudes), central.n_central, n_bath)


def apply_pauli_string(p: PauliString, s: StateVector) -> StateVector:
    """Return p|s> in O(2^n) without forming a matrix."""
    if p.n_sites != s.n_sites:
        raise ValueError(
            f"Pauli string spans {p.n_sites} sites, state has {s.n_sites}"
        )
    weighted = p.phase_vector() * s.amplitudes
    if p.x_mask:
        weighted = weighted[basis_indices(s.n_sites) ^ p.x_mask]
    return s.replace(weighted)
