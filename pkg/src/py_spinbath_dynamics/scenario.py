"""
Scenario files: INI text describing one simulation (or an h_x sweep).

Sections are [scenario], [model], [initial], [run] and [output]; every value
is validated by pydantic and any failure is reported against its
``section.key``.
"""
import configparser
import math
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, NoReturn, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .hilbert import StateVector, basis_state, bloch_state
from .models import ModelFamily, ModelSpec, published_couplings
from .propagators.base import PropagatorMethod

BUNDLED_SCENARIOS = ("fig1", "fig2", "fig3", "fig4")

_ALLOWED_KEYS: Dict[str, Tuple[str, ...]] = {
    "scenario": ("name",),
    "model": (
        "family", "delta", "j_central", "couplings", "n_bath", "hx",
        "exchange", "exchange_mode", "exchange_seed",
    ),
    "initial": ("bloch", "state"),
    "run": ("bath_seed", "t_max", "n_samples", "method", "tolerance"),
    "output": ("observables", "theory_overlay"),
}

# Scenario field -> section holding it.
_FIELD_SECTIONS = {
    "name": "scenario", "bloch": "initial", "state": "initial",
    "bath_seed": "run", "t_max": "run", "n_samples": "run", "method": "run",
    "tolerance": "run", "observables": "output", "theory_overlay": "output",
    "hx_sweep": "model",
}


class ScenarioError(ValueError):
    """A scenario file is malformed; the message names the offending key."""


class CentralLabel(str, Enum):
    """Named initial states of two central spins (spin 1 written first)."""

    UP_DOWN = "up-down"
    DOWN_UP = "down-up"
    UP_UP = "up-up"
    DOWN_DOWN = "down-down"
    SINGLET = "singlet"
    TRIPLET0 = "triplet0"


class Observable(str, Enum):
    """Observable series a scenario can request."""

    SIGMA_X = "sigma_x"
    SIGMA_Y = "sigma_y"
    SIGMA_Z = "sigma_z"
    SIGMA1_Z = "sigma1_z"
    SIGMA2_Z = "sigma2_z"
    ENTROPY = "entropy"
    ENTROPY_VN = "entropy_vn"
    CORR_XX = "corr_xx"
    CORR_YY = "corr_yy"
    CORR_ZZ = "corr_zz"
    RHO_COUPLED = "rho_coupled"


SINGLE_SPIN_OBSERVABLES = frozenset(
    {
        Observable.SIGMA_X, Observable.SIGMA_Y, Observable.SIGMA_Z,
        Observable.ENTROPY, Observable.ENTROPY_VN,
    }
)
TWO_SPIN_OBSERVABLES = frozenset(
    {
        Observable.SIGMA1_Z, Observable.SIGMA2_Z, Observable.ENTROPY,
        Observable.ENTROPY_VN, Observable.CORR_XX, Observable.CORR_YY,
        Observable.CORR_ZZ, Observable.RHO_COUPLED,
    }
)

_LABEL_BITS = {
    CentralLabel.UP_DOWN: "ud",
    CentralLabel.DOWN_UP: "du",
    CentralLabel.UP_UP: "uu",
    CentralLabel.DOWN_DOWN: "dd",
}


def central_state(label: CentralLabel) -> StateVector:
    """Return the two-spin central state named by ``label``."""
    if label in _LABEL_BITS:
        return basis_state(_LABEL_BITS[label], 2, 0)
    up_down = basis_state("ud", 2, 0).amplitudes
    down_up = basis_state("du", 2, 0).amplitudes
    sign = -1.0 if label is CentralLabel.SINGLET else 1.0
    return StateVector((up_down + sign * down_up) / math.sqrt(2.0), 2, 0)


class Scenario(BaseModel):
    """A validated scenario; a non-empty ``hx_sweep`` expands into members."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = Field(pattern=r"^[A-Za-z0-9_.-]+$")
    model: ModelSpec
    hx_sweep: List[float] = Field(default_factory=list)
    bloch: Optional[Tuple[float, float, float]] = None
    state: Optional[CentralLabel] = None
    bath_seed: int = 0
    t_max: float = Field(gt=0.0)
    n_samples: Optional[int] = Field(default=None, ge=2)
    method: str = "auto"
    tolerance: Optional[float] = Field(default=None, gt=0.0)
    observables: List[Observable] = Field(min_length=1)
    theory_overlay: bool = False

    @model_validator(mode="after")
    def _check_consistency(self) -> "Scenario":
        """Match initial state and observables to the number of central spins."""
        allowed_methods = {"auto"} | {m.value for m in PropagatorMethod}
        if self.method not in allowed_methods:
            raise ValueError(
                f"method must be one of {sorted(allowed_methods)}, got {self.method!r}"
            )
        if self.model.n_central == 1:
            if self.bloch is None or self.state is not None:
                raise ValueError("single-spin families need initial.bloch only")
            allowed = SINGLE_SPIN_OBSERVABLES
        else:
            if self.state is None or self.bloch is not None:
                raise ValueError("two-spin families need initial.state only")
            allowed = TWO_SPIN_OBSERVABLES
        invalid = [o.value for o in self.observables if o not in allowed]
        if invalid:
            raise ValueError(
                f"observables {invalid} need a different number of central spins"
            )
        if self.model.n_bath < 1:
            raise ValueError("a scenario needs at least one bath spin")
        if self.hx_sweep and (
            self.model.family is not ModelFamily.TRANSVERSE_BATH
            or min(self.hx_sweep) < 0.0
        ):
            raise ValueError("an hx sweep needs transverse_bath and hx >= 0")
        return self

    def central_state(self) -> StateVector:
        """Return the initial central state."""
        if self.bloch is not None:
            return bloch_state(self.bloch)
        assert self.state is not None
        return central_state(self.state)

    def members(self) -> List["Scenario"]:
        """Return one scenario per sweep value, or just this one."""
        if not self.hx_sweep:
            return [self]
        return [
            self.model_copy(
                update={
                    "name": f"{self.name}_hx{hx:g}",
                    "model": self.model.model_copy(update={"hx": hx}),
                    "hx_sweep": [],
                }
            )
            for hx in self.hx_sweep
        ]

    def time_grid(self, omega_max: float, points_per_period: int) -> np.ndarray:
        """
        Return the uniform sample times from 0 to t_max.

        Without an explicit ``n_samples`` the step is
        2 pi / (points_per_period * omega_max).
        """
        n_samples = self.n_samples
        if n_samples is None:
            if omega_max <= 0.0:
                n_samples = 2
            else:
                dt = 2.0 * math.pi / (points_per_period * omega_max)
                n_samples = max(2, math.ceil(self.t_max / dt) + 1)
        return np.linspace(0.0, self.t_max, n_samples)


def _split(value: str) -> List[str]:
    return [item.strip() for item in value.split(",") if item.strip()]


def _model_fields(
    section: configparser.SectionProxy,
) -> Tuple[Dict[str, Any], List[float]]:
    fields: Dict[str, Any] = {
        key: section[key]
        for key in (
            "family", "delta", "j_central", "exchange", "exchange_mode", "exchange_seed"
        )
        if key in section
    }
    hx_sweep: List[float] = []
    if "hx" in section:
        values = _split(section["hx"])
        try:
            numbers = [float(v) for v in values]
        except ValueError:
            raise ScenarioError(
                f"model.hx: not a number list: {section['hx']!r}"
            ) from None
        if len(numbers) == 1:
            fields["hx"] = numbers[0]
        elif numbers:
            fields["hx"] = numbers[0]
            hx_sweep = numbers
    raw_couplings = section.get("couplings", "").strip()
    n_bath: Optional[int] = None
    if "n_bath" in section:
        try:
            n_bath = int(section["n_bath"])
        except ValueError:
            raise ScenarioError(
                f"model.n_bath: not an integer: {section['n_bath']!r}"
            ) from None
    if not raw_couplings:
        raise ScenarioError("model.couplings: missing")
    if raw_couplings.lower() == "published":
        published = published_couplings()
        n_bath = published.size if n_bath is None else n_bath
        if not 0 < n_bath <= published.size:
            raise ScenarioError(
                f"model.n_bath: published couplings provide 1..{published.size} spins, "
                f"got {n_bath}"
            )
        couplings = published[:n_bath].tolist()
    else:
        try:
            couplings = [float(v) for v in _split(raw_couplings)]
        except ValueError:
            raise ScenarioError(
                f"model.couplings: not a number list: {raw_couplings!r}"
            ) from None
        n_bath = len(couplings) if n_bath is None else n_bath
    fields["couplings"] = couplings
    fields["n_bath"] = n_bath
    return fields, hx_sweep


def _error_location(section: str, error: Dict[str, Any]) -> str:
    loc = error.get("loc", ())
    field = str(loc[0]) if loc else ""
    if section == "model":
        return f"model.{field}" if field else "model"
    if field == "model" and len(loc) > 1:
        return f"model.{loc[1]}"
    if field in _FIELD_SECTIONS:
        return f"{_FIELD_SECTIONS[field]}.{field}"
    return field or "scenario"


def _raise_validation(section: str, exc: ValidationError) -> NoReturn:
    first = exc.errors()[0]
    location = _error_location(section, dict(first))
    raise ScenarioError(f"{location}: {first['msg']}") from exc


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    """
    Parse and validate scenario text.

    Raises:
        ScenarioError: Naming the first offending ``section.key``.

    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ScenarioError(f"{source}: {exc}") from exc

    for section in parser.sections():
        if section not in _ALLOWED_KEYS:
            raise ScenarioError(f"{section}: unknown section")
        for key in parser[section]:
            if key not in _ALLOWED_KEYS[section]:
                raise ScenarioError(f"{section}.{key}: unknown key")
    for section in ("scenario", "model", "initial", "run", "output"):
        if not parser.has_section(section):
            raise ScenarioError(f"{section}: missing section")

    model_fields, hx_sweep = _model_fields(parser["model"])
    try:
        model = ModelSpec(**model_fields)
    except ValidationError as exc:
        _raise_validation("model", exc)

    fields: Dict[str, Any] = {"model": model, "hx_sweep": hx_sweep}
    fields.update(parser["scenario"])
    fields.update(parser["run"])
    initial = parser["initial"]
    if "bloch" in initial:
        fields["bloch"] = _split(initial["bloch"])
    if "state" in initial:
        fields["state"] = initial["state"].strip()
    output = parser["output"]
    if "observables" in output:
        fields["observables"] = _split(output["observables"])
    if "theory_overlay" in output:
        fields["theory_overlay"] = output["theory_overlay"]
    try:
        return Scenario(**fields)
    except ValidationError as exc:
        _raise_validation("scenario", exc)


def render_scenario(text: str) -> List[str]:
    """Return the non-blank, comment-free lines of a scenario for provenance."""
    return [
        line.rstrip()
        for line in text.splitlines()
        if line.strip() and not line.lstrip().startswith(("#", ";"))
    ]


def resolve_scenario(name_or_path: str) -> Path:
    """
    Return the path of a scenario file or a bundled scenario name.

    Raises:
        ScenarioError: If neither a file nor a bundled scenario matches.

    """
    path = Path(name_or_path)
    if path.is_file():
        return path
    if name_or_path in BUNDLED_SCENARIOS:
        package = resources.files("py_spinbath_dynamics")
        bundled = package / "scenarios" / f"{name_or_path}.ini"
        return Path(str(bundled))
    raise ScenarioError(
        f"{name_or_path}: no such file and not a bundled scenario "
        f"({', '.join(BUNDLED_SCENARIOS)})"
    )


def load_scenario(path: Path) -> Tuple[Scenario, str]:
    """Read and parse a scenario file, returning it with its raw text."""
    text = Path(path).read_text(encoding="utf-8")
    return parse_scenario(text, source=str(path)), text
