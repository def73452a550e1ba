import textwrap
from pathlib import Path
from typing import Callable

import numpy as np
import pytest

from py_spinbath_dynamics.hilbert import StateVector
from py_spinbath_dynamics.models import ExchangeMode, ModelFamily, ModelSpec


@pytest.fixture
def rng() -> np.random.Generator:
    """A seeded generator so every test sees the same random numbers."""
    return np.random.default_rng(20240601)


@pytest.fixture
def random_state(rng) -> Callable[[int, int], StateVector]:
    """Factory for normalized random states of M central and N bath spins."""

    def make(n_central: int, n_bath: int) -> StateVector:
        dim = 1 << (n_central + n_bath)
        amplitudes = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        return StateVector(amplitudes / np.linalg.norm(amplitudes), n_central, n_bath)

    return make


@pytest.fixture
def static_ising_spec(rng) -> ModelSpec:
    """A 1+4 static Ising model with random couplings."""
    couplings = rng.uniform(0.0, 0.125, 4).tolist()
    return ModelSpec(
        family=ModelFamily.STATIC_ISING, delta=4.0, couplings=couplings, n_bath=4
    )


@pytest.fixture
def heisenberg_spec() -> ModelSpec:
    """A 2+4 two-spin Heisenberg model."""
    return ModelSpec(
        family=ModelFamily.TWO_SPIN_HEISENBERG,
        j_central=8.0,
        couplings=[0.123, 0.06425, 0.079, 0.0585],
        n_bath=4,
    )


@pytest.fixture(
    params=[
        {"family": ModelFamily.STATIC_ISING, "delta": 4.0},
        {"family": ModelFamily.TRANSVERSE_BATH, "delta": 4.0, "hx": 0.5},
        {"family": ModelFamily.BATH_EXCHANGE, "delta": 4.0, "exchange": 0.3},
        {
            "family": ModelFamily.BATH_EXCHANGE,
            "delta": 4.0,
            "exchange": 0.3,
            "exchange_mode": ExchangeMode.RANDOM,
            "exchange_seed": 5,
        },
        {"family": ModelFamily.TWO_SPIN_HEISENBERG, "j_central": 8.0},
    ],
    ids=["static", "transverse", "exchange", "exchange-random", "heisenberg"],
)
def family_spec(request) -> ModelSpec:
    """Each model family on a three-spin bath."""
    return ModelSpec(couplings=[0.1, 0.05, 0.08], n_bath=3, **request.param)


@pytest.fixture
def write_scenario(tmp_path) -> Callable[[str, str], Path]:
    """Write dedented scenario text to a file in tmp_path."""

    def write(text: str, name: str = "scenario.ini") -> Path:
        path = tmp_path / name
        path.write_text(textwrap.dedent(text).lstrip(), encoding="utf-8")
        return path

    return write
