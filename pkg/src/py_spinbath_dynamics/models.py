"""
Model families and their compilation to Pauli-string Hamiltonians.

All bath operators are Pauli matrices (eigenvalues +-1), so the bath field
B = sum_k J_k sigma^z_k has dispersion b^2 = sum_k J_k^2. Central spins of the
two-spin family use s = sigma/2 in the central exchange 2J s1.s2 + J/2.
"""
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .hilbert import PauliString, StateVector, basis_indices

# Coupling constants of the published 14-spin bath, J_max = 0.125.
_PUBLISHED_COUPLINGS = (
    0.123, 0.06425, 0.079, 0.009, 0.0585, 0.03525, 0.012,
    0.00525, 0.0945, 0.049, 0.1105, 0.02575, 0.07625, 0.11225,
)


def published_couplings() -> np.ndarray:
    """Return the 14 published bath coupling constants J_k."""
    return np.array(_PUBLISHED_COUPLINGS, dtype=float)


class ModelFamily(str, Enum):
    """The four system-bath model families."""

    STATIC_ISING = "static_ising"
    TRANSVERSE_BATH = "transverse_bath"
    BATH_EXCHANGE = "bath_exchange"
    TWO_SPIN_HEISENBERG = "two_spin_heisenberg"


class ExchangeMode(str, Enum):
    """How the bath-bath exchange matrix A_kl is populated."""

    CONSTANT = "constant"
    RANDOM = "random"


class ModelSpec(BaseModel):
    """Pydantic model describing one member of a model family."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    family: ModelFamily
    couplings: List[float]
    n_bath: int = Field(ge=0)
    delta: float = 0.0
    hx: float = Field(default=0.0, ge=0.0)
    exchange: float = 0.0
    exchange_mode: ExchangeMode = ExchangeMode.CONSTANT
    exchange_seed: int = 0
    exchange_matrix: Optional[List[List[float]]] = None
    j_central: float = 0.0

    @model_validator(mode="after")
    def _check_family_fields(self) -> "ModelSpec":
        """Enforce coupling length and zero family-irrelevant fields."""
        if len(self.couplings) != self.n_bath:
            raise ValueError(
                f"couplings has {len(self.couplings)} entries but n_bath is "
                f"{self.n_bath}"
            )
        family = self.family
        if family is ModelFamily.TWO_SPIN_HEISENBERG and self.delta != 0.0:
            raise ValueError("delta is not a parameter of two_spin_heisenberg")
        if family is not ModelFamily.TWO_SPIN_HEISENBERG and self.j_central != 0.0:
            raise ValueError(f"j_central is not a parameter of {family.value}")
        if family is not ModelFamily.TRANSVERSE_BATH and self.hx != 0.0:
            raise ValueError(f"hx is not a parameter of {family.value}")
        if family is not ModelFamily.BATH_EXCHANGE and (
            self.exchange != 0.0 or self.exchange_matrix is not None
        ):
            raise ValueError(f"exchange is not a parameter of {family.value}")
        if self.exchange_matrix is not None:
            shape = np.shape(self.exchange_matrix)
            if shape != (self.n_bath, self.n_bath):
                raise ValueError(
                    f"exchange_matrix must be {self.n_bath}x{self.n_bath}, got {shape}"
                )
        return self

    @property
    def n_central(self) -> int:
        """Number of central spins."""
        return 2 if self.family is ModelFamily.TWO_SPIN_HEISENBERG else 1

    @property
    def n_sites(self) -> int:
        """Total number of spins."""
        return self.n_central + self.n_bath

    def coupling_array(self) -> np.ndarray:
        """Return J_k as a float array."""
        return np.asarray(self.couplings, dtype=float)

    def bath_exchange_matrix(self) -> np.ndarray:
        """
        Return the symmetric A_kl matrix of the bath-exchange family.

        Only the upper triangle (k < l) enters the Hamiltonian. Random entries
        are uniform in [0, A] and reproducible through ``exchange_seed``.
        """
        n = self.n_bath
        if self.exchange_matrix is not None:
            matrix = np.asarray(self.exchange_matrix, dtype=float)
            return np.triu(matrix, 1) + np.triu(matrix, 1).T
        if self.exchange_mode is ExchangeMode.CONSTANT:
            matrix = np.full((n, n), self.exchange)
        else:
            rng = np.random.default_rng(self.exchange_seed)
            matrix = rng.uniform(0.0, self.exchange, size=(n, n))
        upper = np.triu(matrix, 1)
        return upper + upper.T


@dataclass(frozen=True)
class CompiledModel:
    """A Hamiltonian as a list of Pauli strings over n_central + n_bath sites."""

    terms: Tuple[PauliString, ...]
    n_central: int
    n_bath: int

    def __post_init__(self) -> None:
        """Check every term spans the full register."""
        for term in self.terms:
            if term.n_sites != self.n_sites:
                raise ValueError(
                    f"Term {term.letters} spans {term.n_sites} sites, "
                    f"model has {self.n_sites}"
                )

    @property
    def n_sites(self) -> int:
        """Total number of spins."""
        return self.n_central + self.n_bath

    @cached_property
    def grouped(self) -> Tuple[Tuple[int, np.ndarray, Optional[np.ndarray]], ...]:
        """
        Merge terms sharing an X/Y flip mask.

        Each entry is (flip mask, summed phase vector, gather index or None for
        the diagonal), ordered by mask so summation order is reproducible.
        """
        merged: Dict[int, np.ndarray] = {}
        for term in self.terms:
            vector = term.phase_vector()
            if term.x_mask in merged:
                merged[term.x_mask] = merged[term.x_mask] + vector
            else:
                merged[term.x_mask] = vector
        idx = basis_indices(self.n_sites)
        return tuple(
            (mask, merged[mask], idx ^ mask if mask else None)
            for mask in sorted(merged)
        )

    def apply(self, amplitudes: np.ndarray) -> np.ndarray:
        """Return H applied to a raw amplitude array."""
        out = np.zeros_like(amplitudes, dtype=complex)
        for _, vector, gather in self.grouped:
            weighted = vector * amplitudes
            out += weighted if gather is None else weighted[gather]
        return out

    def spectral_bound(self) -> Tuple[float, float]:
        """
        Return (center, radius) with the spectrum inside center +- radius.

        The center collects identity terms; the radius is the sum of absolute
        coefficients of the others, a cheap overestimate.
        """
        center = sum(t.coefficient for t in self.terms if t.is_identity)
        radius = sum(abs(t.coefficient) for t in self.terms if not t.is_identity)
        return float(center), float(radius)

    def to_dense(self) -> np.ndarray:
        """Return the explicit Hamiltonian matrix."""
        dim = 1 << self.n_sites
        matrix = np.zeros((dim, dim), dtype=complex)
        for term in self.terms:
            matrix += term.to_dense()
        return matrix


def _central_field_terms(spec: ModelSpec) -> List[PauliString]:
    """Delta sigma_x plus the Ising coupling sigma_z J_k sigma^z_k."""
    n = spec.n_sites
    terms = [PauliString.from_sites(n, {0: "X"}, spec.delta)]
    for k, j_k in enumerate(spec.couplings):
        terms.append(PauliString.from_sites(n, {0: "Z", 1 + k: "Z"}, j_k))
    return terms


def _compile_static_ising(spec: ModelSpec) -> List[PauliString]:
    return _central_field_terms(spec)


def _compile_transverse_bath(spec: ModelSpec) -> List[PauliString]:
    terms = _central_field_terms(spec)
    for k in range(spec.n_bath):
        terms.append(PauliString.from_sites(spec.n_sites, {1 + k: "X"}, spec.hx))
    return terms


def _compile_bath_exchange(spec: ModelSpec) -> List[PauliString]:
    terms = _central_field_terms(spec)
    matrix = spec.bath_exchange_matrix()
    for k in range(spec.n_bath):
        for m in range(k + 1, spec.n_bath):
            terms.append(
                PauliString.from_sites(
                    spec.n_sites, {1 + k: "X", 1 + m: "X"}, matrix[k, m]
                )
            )
    return terms


def _compile_two_spin_heisenberg(spec: ModelSpec) -> List[PauliString]:
    n = spec.n_sites
    j = spec.j_central
    # 2J s1.s2 + J/2 with s = sigma/2 is (J/2) sigma1.sigma2 + J/2.
    terms = [PauliString.from_sites(n, {0: a, 1: a}, j / 2) for a in "XYZ"]
    terms.append(PauliString("I" * n, j / 2))
    for k, j_k in enumerate(spec.couplings):
        for a in "XYZ":
            for central in (0, 1):
                terms.append(
                    PauliString.from_sites(n, {central: a, 2 + k: a}, j_k / 2)
                )
    return terms


_COMPILERS: Dict[ModelFamily, Callable[[ModelSpec], List[PauliString]]] = {
    ModelFamily.STATIC_ISING: _compile_static_ising,
    ModelFamily.TRANSVERSE_BATH: _compile_transverse_bath,
    ModelFamily.BATH_EXCHANGE: _compile_bath_exchange,
    ModelFamily.TWO_SPIN_HEISENBERG: _compile_two_spin_heisenberg,
}


def compile_model(spec: ModelSpec) -> CompiledModel:
    """
    Compile a model specification into its Pauli-string Hamiltonian.

    Terms with a zero coefficient are dropped, so a bath with all couplings
    zero leaves only the central Hamiltonian.

    Raises:
        ValueError: For an unknown family or a negative bath size.

    """
    if spec.n_bath < 0:
        raise ValueError(f"n_bath must be non-negative, got {spec.n_bath}")
    try:
        compiler = _COMPILERS[ModelFamily(spec.family)]
    except (KeyError, ValueError):
        raise ValueError(f"Unknown model family {spec.family!r}") from None
    terms = tuple(t for t in compiler(spec) if t.coefficient != 0.0)
    return CompiledModel(terms, spec.n_central, spec.n_bath)


def apply_hamiltonian(m: CompiledModel, s: StateVector) -> StateVector:
    """Return H|s> as the sum of the term applications."""
    if (s.n_central, s.n_bath) != (m.n_central, m.n_bath):
        raise ValueError(
            f"State has {s.n_central}+{s.n_bath} spins, model has "
            f"{m.n_central}+{m.n_bath}"
        )
    return s.replace(m.apply(s.amplitudes))
