"""
Scenario orchestration: simulate, record observables, write files and
compute the comparison metrics of each run.
"""
import itertools
import logging
import math
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.signal import detrend

from .config import Settings
from .hilbert import StateVector, random_bath_product
from .models import ModelFamily, compile_model
from .observables import (
    DensityMatrixError,
    TimeSeries,
    coupled_elements,
    quadratic_entropy,
    rdm_expectation,
    reduced_density_matrix,
    site_magnetizations,
    to_coupled_basis,
    total_magnetization,
    von_neumann_entropy,
)
from .output import OutputFile, read_series_csv, write_series_csv, write_summary
from .propagators.base import (
    ConvergenceError,
    NormDriftError,
    PropagatorConfig,
    PropagatorMethod,
    default_method,
)
from .propagators.factory import get_propagator
from .scenario import Observable, Scenario, load_scenario, render_scenario
from .theory import (
    Envelope,
    EnvelopeExtractionError,
    EnvelopeLaw,
    TheoryParams,
    envelope_deviation,
    extract_envelope,
    fit_inverse_time_tail,
    magnus_gaussian_average,
    static_gaussian_average,
)

logger = logging.getLogger(__name__)

_SINGLE_SPIN_LETTERS = {"sigma_x": "X", "sigma_y": "Y", "sigma_z": "Z"}
_TWO_SPIN_LETTERS = {
    "sigma1_z": "ZI",
    "sigma2_z": "IZ",
    "corr_xx": "XX",
    "corr_yy": "YY",
    "corr_zz": "ZZ",
}
# Bath magnetizations are checked on about this many samples per run.
_BATH_CHECKS = 16
# Two-spin windows in units of 1/b: the c/t tail fit, and the coherence plateau
# that follows the mean-field minimum at b t = sqrt(3).
_TAIL_WINDOW = (4.0, 16.0)
_PLATEAU_WINDOW = (3.0, 4.0)


class MemberResult(BaseModel):
    """Files and metrics of one simulated member of a scenario."""

    name: str
    theory: TheoryParams
    propagator: str
    n_samples: int
    outputs: Dict[str, OutputFile] = Field(default_factory=dict)
    metrics: Dict[str, float] = Field(default_factory=dict)


class RunSummary(BaseModel):
    """Machine-readable record of a scenario run."""

    scenario: str
    family: ModelFamily
    theory: TheoryParams
    wall_time_s: float
    propagator: str
    outputs: Dict[str, OutputFile] = Field(default_factory=dict)
    metrics: Dict[str, float] = Field(default_factory=dict)
    members: List[MemberResult] = Field(default_factory=list)


@dataclass
class _MemberOutcome:
    result: MemberResult
    envelope: Optional[TimeSeries]


def theory_params(scenario: Scenario) -> TheoryParams:
    """Derive b^2, Delta and h_x of a scenario's model."""
    spec = scenario.model
    hx = spec.hx if spec.family is ModelFamily.TRANSVERSE_BATH else None
    return TheoryParams.from_couplings(spec.couplings, delta=spec.delta, hx=hx)


def family_envelope(scenario: Scenario, sigma0: float) -> Optional[Envelope]:
    """Return the closed-form envelope law of the scenario's family, if any."""
    params = theory_params(scenario)
    family = scenario.model.family
    if family is ModelFamily.STATIC_ISING and params.delta > 0:
        return Envelope(law=EnvelopeLaw.STATIC_QUARTER, params=params, sigma0=sigma0)
    if family is ModelFamily.TRANSVERSE_BATH and params.delta > 0:
        return Envelope(law=EnvelopeLaw.DYNAMIC_HALF, params=params, sigma0=sigma0)
    if family is ModelFamily.TWO_SPIN_HEISENBERG:
        return Envelope(law=EnvelopeLaw.HEISENBERG_MF, params=params, sigma0=sigma0)
    return None


def _comparison_window(scenario: Scenario, params: TheoryParams) -> Tuple[float, float]:
    family = scenario.model.family
    if family is ModelFamily.TRANSVERSE_BATH and params.tau2 is not None:
        return params.tau2, scenario.t_max
    if family is ModelFamily.TWO_SPIN_HEISENBERG and params.b2 > 0:
        return 0.0, min(scenario.t_max, 3.0 / math.sqrt(params.b2))
    return 0.0, scenario.t_max


def _carrier_frequency(scenario: Scenario) -> float:
    spec = scenario.model
    return 2.0 * abs(spec.j_central if spec.n_central == 2 else spec.delta)


class _Recorder:
    """Collects every per-sample quantity a member needs."""

    def __init__(self, scenario: Scenario, density_atol: float, n_times: int):
        self.scenario = scenario
        self.density_atol = density_atol
        self.requested = {o.value for o in scenario.observables}
        self.columns: Dict[str, List[float]] = defaultdict(list)
        self.bath_magnetizations: List[np.ndarray] = []
        self._bath_stride = max(1, n_times // _BATH_CHECKS)

    def record(self, index: int, t: float, state: StateVector) -> None:
        """Append the quantities of one sample; invalid density matrices abort."""
        n_central = state.n_central
        try:
            rho = reduced_density_matrix(state, n_central, self.density_atol)
        except DensityMatrixError as exc:
            logger.error(
                "Reduced density matrix invalid.",
                extra={"scenario": self.scenario.name, "t": t, "error": str(exc)},
            )
            raise
        self.columns["entropy"].append(quadratic_entropy(rho))
        if Observable.ENTROPY_VN.value in self.requested:
            self.columns["entropy_vn"].append(von_neumann_entropy(rho))
        if n_central == 1:
            for name, letters in _SINGLE_SPIN_LETTERS.items():
                self.columns[name].append(rdm_expectation(rho, letters))
            if self.scenario.model.family is ModelFamily.STATIC_ISING and (
                index % self._bath_stride == 0
            ):
                self.bath_magnetizations.append(site_magnetizations(state)[1:])
            return
        for name, letters in _TWO_SPIN_LETTERS.items():
            self.columns[name].append(rdm_expectation(rho, letters))
        self.columns["magnetization"].append(total_magnetization(state))
        for name, value in coupled_elements(to_coupled_basis(rho)).items():
            self.columns[name].append(value)

    def array(self, name: str) -> np.ndarray:
        """Return a recorded column as a float array."""
        return np.asarray(self.columns[name], dtype=float)


def _simulate(
    scenario: Scenario, settings: Settings
) -> Tuple[np.ndarray, _Recorder, PropagatorMethod]:
    spec = scenario.model
    compiled = compile_model(spec)
    _, radius = compiled.spectral_bound()
    times = scenario.time_grid(2.0 * radius, settings.points_per_period)
    method = (
        default_method(spec)
        if scenario.method == "auto"
        else PropagatorMethod(scenario.method)
    )
    config = PropagatorConfig(
        method=method,
        tolerance=scenario.tolerance or settings.propagator_tolerance,
        dt=float(times[1] - times[0]),
        norm_atol=settings.norm_atol,
        dense_max_spins=settings.dense_max_spins,
    )
    propagator = get_propagator(method.value, spec, compiled, config)
    initial = random_bath_product(
        scenario.central_state(), spec.n_bath, scenario.bath_seed
    )
    recorder = _Recorder(scenario, settings.density_atol, times.size)
    logger.info(
        "Simulating member.",
        extra={
            "scenario": scenario.name,
            "family": spec.family.value,
            "method": method.value,
            "n_samples": int(times.size),
            "dim": initial.dim,
        },
    )
    try:
        for index, (t, state) in enumerate(
            zip(times, propagator.trajectory(initial, times))
        ):
            recorder.record(index, float(t), state)
    except (ConvergenceError, NormDriftError) as exc:
        raise type(exc)(f"scenario {scenario.name}: {exc}") from exc
    return times, recorder, method


def _primary_signal(scenario: Scenario) -> str:
    return "sigma_z" if scenario.model.n_central == 1 else "sigma1_z"


def _overlay_columns(
    scenario: Scenario, times: np.ndarray, sigma0: float
) -> Dict[str, np.ndarray]:
    envelope = family_envelope(scenario, sigma0)
    if envelope is None:
        logger.info(
            "No closed-form envelope for this family.",
            extra={"family": scenario.model.family.value},
        )
        return {}
    columns = {"theory_envelope": np.asarray(envelope(times), dtype=float)}
    params = envelope.params
    if envelope.law is EnvelopeLaw.STATIC_QUARTER:
        columns["theory_signal"] = np.asarray(
            static_gaussian_average(times, params, sigma0), dtype=float
        )
    elif envelope.law is EnvelopeLaw.DYNAMIC_HALF:
        columns["theory_signal"] = np.asarray(
            magnus_gaussian_average(times, params, sigma0), dtype=float
        )
    return columns


def _write_outputs(
    scenario: Scenario,
    times: np.ndarray,
    recorder: _Recorder,
    out_dir: Path,
    provenance: List[str],
) -> Dict[str, OutputFile]:
    outputs: Dict[str, OutputFile] = {}
    primary = _primary_signal(scenario)
    sigma0 = float(recorder.array(primary)[0])
    for observable in scenario.observables:
        name = observable.value
        if observable is Observable.RHO_COUPLED:
            columns = {
                key: recorder.array(key)
                for key in recorder.columns
                if key.startswith(("p_", "abs_"))
            }
        else:
            columns = {name: recorder.array(name)}
            if scenario.theory_overlay and name == primary:
                columns.update(_overlay_columns(scenario, times, sigma0))
        path = out_dir / f"{scenario.name}_{name}.csv"
        outputs[name] = write_series_csv(path, times, columns, provenance)
    return outputs


def _envelope_metrics(
    scenario: Scenario,
    times: np.ndarray,
    recorder: _Recorder,
    metrics: Dict[str, float],
) -> Optional[TimeSeries]:
    primary = _primary_signal(scenario)
    signal = recorder.array(primary)
    sigma0 = abs(float(signal[0]))
    carrier = _carrier_frequency(scenario)
    separation = 0.5 * math.pi / carrier if carrier > 0 else None
    try:
        envelope = extract_envelope(TimeSeries(times, signal, primary), separation)
    except EnvelopeExtractionError as exc:
        logger.warning(
            "Envelope metrics skipped.",
            extra={"scenario": scenario.name, "reason": str(exc)},
        )
        return None

    law = family_envelope(scenario, sigma0)
    params = theory_params(scenario)
    if law is not None:
        t_min, t_max = _comparison_window(scenario, params)
        try:
            metrics["envelope_deviation"] = envelope_deviation(
                envelope, law, t_min, t_max
            )
        except EnvelopeExtractionError:
            logger.warning("No envelope points in the comparison window.")

    entropy = recorder.array("entropy")
    plateau = float(np.mean(entropy[-max(1, entropy.size // 4):]))
    metrics["entropy_plateau"] = plateau
    if scenario.model.n_central == 1 and plateau > 0 and sigma0 > 0:
        decohered = np.nonzero(entropy >= 0.98 * plateau)[0]
        if decohered.size:
            t_dec = float(times[decohered[0]])
            amplitude = float(np.interp(t_dec, envelope.times, envelope.values))
            metrics["decoherence_time"] = t_dec
            metrics["residual_amplitude_fraction"] = amplitude / sigma0
    if scenario.model.n_central == 2 and params.b2 > 0:
        b = math.sqrt(params.b2)
        try:
            c, residual = fit_inverse_time_tail(
                envelope, _TAIL_WINDOW[0] / b, _TAIL_WINDOW[1] / b
            )
            metrics["tail_fit_c"] = c
            metrics["tail_fit_residual"] = residual
        except ValueError as exc:
            logger.warning("Tail fit skipped.", extra={"reason": str(exc)})
    return envelope


def _conservation_metrics(
    scenario: Scenario,
    times: np.ndarray,
    recorder: _Recorder,
    metrics: Dict[str, float],
) -> None:
    if scenario.model.n_central == 1:
        sigma_x = recorder.array("sigma_x")
        if abs(sigma_x[0]) > 1e-12:
            metrics["sigma_x_drift"] = float(
                np.max(np.abs(sigma_x - sigma_x[0])) / abs(sigma_x[0])
            )
        if recorder.bath_magnetizations:
            stacked = np.vstack(recorder.bath_magnetizations)
            metrics["bath_sz_drift"] = float(np.max(np.abs(stacked - stacked[0])))
        return
    magnetization = recorder.array("magnetization")
    metrics["magnetization_drift"] = float(
        np.max(np.abs(magnetization - magnetization[0]))
    )
    sigma1, sigma2 = recorder.array("sigma1_z"), recorder.array("sigma2_z")
    if sigma1.size > 2 and np.std(detrend(sigma1)) > 0 and np.std(detrend(sigma2)) > 0:
        metrics["sigma_z_anticorrelation"] = float(
            np.corrcoef(detrend(sigma1), detrend(sigma2))[0, 1]
        )
    metrics["triplet_imbalance"] = float(
        np.max(np.abs(recorder.array("p_Tp") - recorder.array("p_Tm")))
    )
    params = theory_params(scenario)
    if params.b2 > 0:
        b = math.sqrt(params.b2)
        coherence = recorder.array("abs_S_T0")
        inside = (times >= _PLATEAU_WINDOW[0] / b) & (times <= _PLATEAU_WINDOW[1] / b)
        if np.any(inside):
            metrics["coherence_plateau"] = float(np.mean(coherence[inside]))
    others = [
        recorder.array(key)
        for key in recorder.columns
        if key.startswith("abs_") and key != "abs_S_T0"
    ]
    metrics["max_other_offdiag"] = float(max(np.max(o) for o in others))


def _run_member(
    scenario: Scenario, settings: Settings, out_dir: Path, provenance: List[str]
) -> _MemberOutcome:
    times, recorder, method = _simulate(scenario, settings)
    member_provenance = [
        *provenance,
        f"member = {scenario.name}",
        f"hx = {scenario.model.hx:.17g}",
        f"bath_seed = {scenario.bath_seed}",
        f"method = {method.value}",
    ]
    outputs = _write_outputs(scenario, times, recorder, out_dir, member_provenance)
    metrics: Dict[str, float] = {}
    envelope = _envelope_metrics(scenario, times, recorder, metrics)
    _conservation_metrics(scenario, times, recorder, metrics)
    result = MemberResult(
        name=scenario.name,
        theory=theory_params(scenario),
        propagator=method.value,
        n_samples=int(times.size),
        outputs=outputs,
        metrics=metrics,
    )
    logger.info(
        "Member finished.", extra={"member": scenario.name, "metrics": metrics}
    )
    return _MemberOutcome(result, envelope)


def sweep_spread(envelopes: List[TimeSeries], t_min: float) -> float:
    """
    Return the largest pairwise relative difference between envelopes.

    Envelopes are compared on the peak times of the first one after ``t_min``
    that lie inside every envelope's range.
    """
    upper = min(float(e.times[-1]) for e in envelopes)
    lower = max(t_min, max(float(e.times[0]) for e in envelopes))
    grid = envelopes[0].window(lower, upper).times
    if grid.size == 0:
        raise EnvelopeExtractionError("Sweep envelopes do not overlap")
    resampled = [np.interp(grid, e.times, e.values) for e in envelopes]
    spread = 0.0
    for a, b in itertools.combinations(resampled, 2):
        spread = max(spread, float(np.max(np.abs(a - b) / np.minimum(a, b))))
    return spread


def run_scenario(
    config_path: Path,
    out_dir: Optional[Path] = None,
    seed_override: Optional[int] = None,
    threads: Optional[int] = None,
    settings: Optional[Settings] = None,
) -> RunSummary:
    """
    Run a scenario file and write its series, comparison files and summary.

    Args:
        config_path: Scenario INI file.
        out_dir: Output root; files go to ``<out_dir>/<scenario name>/``.
        seed_override: Replaces ``run.bath_seed`` when given.
        threads: Concurrent sweep members.
        settings: Process settings; read from the environment when omitted.

    Returns:
        The run summary, also written as ``<name>_summary.json``.

    """
    settings = settings or Settings()
    started = time.perf_counter()
    scenario, text = load_scenario(config_path)
    if seed_override is not None:
        scenario = scenario.model_copy(update={"bath_seed": seed_override})
    target = Path(out_dir or settings.out_dir) / scenario.name
    workers = threads or settings.threads
    provenance = [*render_scenario(text), f"seed_override = {seed_override}"]
    logger.info(
        "Starting scenario.",
        extra={
            "scenario": scenario.name,
            "family": scenario.model.family.value,
            "out_dir": str(target),
        },
    )

    members = scenario.members()
    if len(members) == 1:
        outcomes = [_run_member(members[0], settings, target, provenance)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            outcomes = list(
                executor.map(
                    lambda m: _run_member(m, settings, target, provenance), members
                )
            )

    metrics: Dict[str, float] = {}
    outputs: Dict[str, OutputFile] = {}
    if len(outcomes) == 1:
        metrics.update(outcomes[0].result.metrics)
        outputs.update(outcomes[0].result.outputs)
    else:
        for outcome in outcomes:
            for key, file in outcome.result.outputs.items():
                outputs[f"{outcome.result.name}.{key}"] = file
        envelopes = [o.envelope for o in outcomes if o.envelope is not None]
        if len(envelopes) == len(outcomes):
            t_min = 1.0 / max(scenario.hx_sweep)
            try:
                metrics["sweep_envelope_spread"] = sweep_spread(envelopes, t_min)
            except EnvelopeExtractionError as exc:
                logger.warning("Sweep spread skipped.", extra={"reason": str(exc)})
        deviations = [
            o.result.metrics["envelope_deviation"]
            for o in outcomes
            if "envelope_deviation" in o.result.metrics
        ]
        if deviations:
            metrics["envelope_deviation"] = max(deviations)

    summary = RunSummary(
        scenario=scenario.name,
        family=scenario.model.family,
        theory=theory_params(scenario),
        wall_time_s=time.perf_counter() - started,
        propagator=outcomes[0].result.propagator,
        outputs=outputs,
        metrics=metrics,
        members=[o.result for o in outcomes] if len(outcomes) > 1 else [],
    )
    write_summary(target / f"{scenario.name}_summary.json", summary)
    logger.info(
        "Scenario finished.",
        extra={
            "scenario": scenario.name,
            "method": summary.propagator,
            "wall_time_s": summary.wall_time_s,
        },
    )
    return summary


def compare(
    sim_csv: Path,
    law: EnvelopeLaw,
    params: TheoryParams,
    sigma0: Optional[float] = None,
    t_min: float = 0.0,
    t_max: float = math.inf,
    column: Optional[str] = None,
) -> float:
    """
    Compare a simulated series' envelope with a closed-form law.

    The envelope is written to ``<stem>_compare_<law>.csv`` next to the input.

    Returns:
        The max relative deviation inside [t_min, t_max].

    Raises:
        EnvelopeExtractionError: If too few peaks are found.

    """
    sim_csv = Path(sim_csv)
    columns, _ = read_series_csv(sim_csv)
    names = [name for name in columns if name != "t"]
    if column is None:
        preferred = [n for n in ("sigma_z", "sigma1_z") if n in columns]
        column = preferred[0] if preferred else names[0]
    if column not in columns:
        raise ValueError(f"{sim_csv}: no column {column!r}, have {names}")
    series = TimeSeries(columns["t"], columns[column], column)
    amplitude = abs(float(series.values[0])) if sigma0 is None else sigma0
    envelope_law = Envelope(law=law, params=params, sigma0=amplitude)
    envelope = extract_envelope(series)
    deviation = envelope_deviation(envelope, envelope_law, t_min, t_max)

    expected = np.asarray(envelope_law(envelope.times), dtype=float)
    output = sim_csv.with_name(f"{sim_csv.stem}_compare_{law.value}.csv")
    write_series_csv(
        output,
        envelope.times,
        {
            "envelope": envelope.values,
            "law": expected,
            "relative_deviation": np.abs(envelope.values - expected) / np.abs(expected),
        },
        [f"source = {sim_csv.name}", f"law = {law.value}", f"sigma0 = {amplitude!r}"],
    )
    logger.info(
        "Comparison finished.",
        extra={"csv": str(sim_csv), "law": law.value, "deviation": deviation},
    )
    return deviation
