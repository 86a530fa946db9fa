"""Scenario files: strict YAML schema for CLI runs.

Unknown keys are rejected, every violation is collected and reported with
its field path and line number.
"""

from __future__ import annotations

import hashlib
from importlib import resources
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import constants as C
from .dynamics import IlluminationModel
from .physics import GYROMAGNETIC, HamiltonianParams, Species
from .sequences import CorrelationSpec, Dissipation


class ScenarioError(ValueError):
    """Scenario could not be loaded; ``problems`` lists every violation."""

    def __init__(self, problems, source=""):
        self.problems = list(problems)
        head = f"invalid scenario {source}".strip()
        super().__init__(head + ":\n" + "\n".join(f"  - {p}" for p in self.problems))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SubsystemSpec(_Strict):
    label: str
    dim: int = Field(ge=2)


class SystemSection(_Strict):
    subsystems: list[SubsystemSpec] = Field(min_length=1)

    @field_validator("subsystems")
    @classmethod
    def _unique(cls, v):
        labels = [s.label for s in v]
        dup = sorted({l for l in labels if labels.count(l) > 1})
        if dup:
            raise ValueError(f"duplicate subsystem label(s): {', '.join(dup)}")
        return v


class PhysicsSection(_Strict):
    D: float = C.ZFS_NV
    B_z: float = Field(C.B_FIELD, ge=0)
    A_par_memory: float = C.A_PAR_MEMORY
    A_par_targets: list[float] = [2800.0]
    target_species: Species = Species.C13

    def params(self) -> HamiltonianParams:
        return HamiltonianParams(D=self.D, B_z=self.B_z, A_par_memory=self.A_par_memory,
                                 gamma_target=GYROMAGNETIC[self.target_species],
                                 A_par_targets=tuple(self.A_par_targets))


class IlluminationSection(_Strict):
    laser_power: float = Field(0.0, ge=0)
    c_exc: float = Field(C.C_EXC, gt=0)
    c_ion: float = Field(C.C_ION, ge=0)
    p_branching: float = Field(C.P_BRANCHING, ge=0, le=1)
    metastable_rate: float = Field(C.METASTABLE_RATE, gt=0)
    ms0_excitation_ratio: float = Field(C.MS0_EXCITATION_RATIO, ge=0, le=1)

    def model(self, t1_nv0: float) -> IlluminationModel:
        return IlluminationModel(laser_power=self.laser_power, c_exc=self.c_exc, c_ion=self.c_ion,
                                 p_branching=self.p_branching, t1_nv0=t1_nv0,
                                 metastable_rate=self.metastable_rate,
                                 ms0_excitation_ratio=self.ms0_excitation_ratio)


class DissipationSection(_Strict):
    model: Literal["dark_nvm", "dark_nv0", "illuminated", "none"] = "dark_nvm"
    t1_sensor: float = Field(C.T1_SENSOR, gt=0)
    t1_nv0: float = Field(C.T1_NV0, gt=0)
    recovery_fidelity: float = Field(C.RECOVERY_FIDELITY, ge=0, le=1)
    init_fidelity: float = Field(1.0, ge=0, le=1)
    during_sensing: bool = False
    illumination: IlluminationSection = IlluminationSection()

    def illumination_model(self) -> IlluminationModel:
        return self.illumination.model(self.t1_nv0)

    def sequence_dissipation(self) -> Optional[Dissipation]:
        if self.model == "none":
            return None
        return Dissipation(self.t1_sensor, self.t1_nv0, self.recovery_fidelity, self.during_sensing)


class SequenceSection(_Strict):
    kind: Literal["this_work", "prior_work"] = "this_work"
    tau: float = Field(200e-6, gt=0)
    t_c: float = Field(860e-6, gt=0)
    rf_center: Optional[float] = None
    rf_pi_durations: tuple[float, Optional[float]] = (40e-6, None)
    sensor_state_during_tc: Literal[0, 1] = 1
    classical_storage: bool = False
    payload: Literal["pi", "ramsey", "none"] = "pi"
    ramsey_pulse_duration: float = Field(20e-6, gt=0)
    ramsey_phase: float = 0.0
    tc_mode: Literal["dark", "illuminated", "nv0"] = "dark"


class SweepSection(_Strict):
    axis: Literal["rf_frequency", "tau", "laser_power", "coupling"] = "rf_frequency"
    start: Optional[float] = None
    stop: Optional[float] = None
    num: int = Field(41, ge=2)
    scale: Literal["linear", "log"] = "linear"
    values: Optional[list[float]] = None
    relative_to_larmor: bool = True
    method: Literal["dark_nvm", "dark_nv0", "repump_optimal"] = "dark_nvm"
    points_per_decade: int = Field(10, ge=1)

    @model_validator(mode="after")
    def _grid(self):
        if self.values is None and (self.start is None or self.stop is None):
            raise ValueError("sweep needs either 'values' or both 'start' and 'stop'")
        if self.scale == "log" and self.values is None and not (self.start > 0 and self.stop > 0):
            raise ValueError("log sweep needs start, stop > 0")
        return self

    def grid(self) -> np.ndarray:
        if self.values is not None:
            return np.asarray(self.values, dtype=float)
        if self.scale == "log":
            return np.logspace(np.log10(self.start), np.log10(self.stop), self.num)
        return np.linspace(self.start, self.stop, self.num)


class FilterSection(_Strict):
    kind: Literal["this_work", "prior_work", "ramsey", "spin_echo", "cpmg", "pdd"] = "this_work"
    t: float = Field(1e-3, gt=0)
    eta_tau: float = Field(1.0, ge=0, le=1)
    eta_tc: float = Field(0.0, ge=0, le=1)
    n: int = Field(1, ge=1)
    omega_t_max: float = Field(100.0, gt=0)
    points: int = Field(1000, ge=2)

    @model_validator(mode="after")
    def _sum(self):
        if self.eta_tau + self.eta_tc > 1 + 1e-12:
            raise ValueError("eta_tau + eta_tc must be <= 1")
        return self


class NoiseSection(_Strict):
    kind: Literal["white", "lorentzian", "one_over_f"] = "white"
    S0: float = Field(1.0, ge=0)
    cutoff: float = Field(1.0, gt=0)
    amplitude: float = Field(0.0, ge=0)
    exponent: float = 1.0
    t_start: float = Field(1e-4, gt=0)
    t_stop: float = Field(1e-2, gt=0)
    num: int = Field(30, ge=2)


class SimulateSection(_Strict):
    target: int = Field(0, ge=0)
    t_final: Optional[float] = Field(None, gt=0)
    points: int = Field(201, ge=2)


class OutputSection(_Strict):
    dir: Optional[str] = None
    figures: bool = True


class Scenario(_Strict):
    name: str = "scenario"
    system: SystemSection = SystemSection(subsystems=[SubsystemSpec(label="sensor", dim=3),
                                                      SubsystemSpec(label="memory", dim=2),
                                                      SubsystemSpec(label="target0", dim=2)])
    physics: PhysicsSection = PhysicsSection()
    dissipation: DissipationSection = DissipationSection()
    sequence: SequenceSection = SequenceSection()
    sweep: SweepSection = SweepSection(start=-3000.0, stop=3000.0)
    filter: FilterSection = FilterSection()
    noise: NoiseSection = NoiseSection()
    simulate: SimulateSection = SimulateSection()
    output: OutputSection = OutputSection()

    # cross-section consistency; returns a list of problems
    def consistency_problems(self) -> list[str]:
        out = []
        subs = self.system.subsystems
        labels = [s.label for s in subs]
        if labels[0] != "sensor":
            out.append("system.subsystems: the first subsystem must be 'sensor'")
        elif subs[0].dim != (2 if self.dissipation.model == "dark_nv0" else 3):
            out.append(f"system.subsystems[0].dim: sensor dimension {subs[0].dim} does not match "
                       f"dissipation.model '{self.dissipation.model}'")
        targets = [l for l in labels if l.startswith("target")]
        want = [f"target{k}" for k in range(len(self.physics.A_par_targets))]
        if targets != want:
            out.append(f"system.subsystems: targets {targets} do not match "
                       f"physics.A_par_targets (expected {want})")
        extra = set(labels) - {"sensor", "memory"} - set(want)
        if extra:
            out.append(f"system.subsystems: unknown subsystem label(s) {sorted(extra)}")
        for s in subs[1:]:
            if s.dim != 2:
                out.append(f"system.subsystems: '{s.label}' must have dim 2")
        if self.simulate.target >= len(self.physics.A_par_targets):
            out.append("simulate.target: index beyond physics.A_par_targets")
        if self.sequence.tc_mode != "dark" and not self.sequence.classical_storage:
            out.append("sequence.tc_mode: illuminated/nv0 correlation times need classical_storage: true")
        if self.noise.t_stop <= self.noise.t_start:
            out.append("noise.t_stop: must exceed t_start")
        return out

    def params(self) -> HamiltonianParams:
        return self.physics.params()

    def correlation_spec(self, rf_center: float | None = None) -> CorrelationSpec:
        s = self.sequence
        center = s.rf_center if s.rf_center is not None else (rf_center if rf_center is not None else 0.0)
        illum = self.dissipation.illumination_model() if s.tc_mode == "illuminated" else None
        return CorrelationSpec(tau=s.tau, t_c=s.t_c, rf_center=center, rf_pi_durations=tuple(s.rf_pi_durations),
                               sensor_state_during_tc=s.sensor_state_during_tc,
                               classical_storage=s.classical_storage, kind=s.kind, payload=s.payload,
                               ramsey_pulse_duration=s.ramsey_pulse_duration, ramsey_phase=s.ramsey_phase,
                               tc_mode=s.tc_mode, illumination=illum)


def _line_of(root, loc) -> int | None:
    """Line number (1-based) of the YAML node at path ``loc``."""
    node, line = root, None
    for key in loc:
        if node is None:
            break
        line = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == key:
                    nxt, line = v, k.start_mark.line + 1
                    break
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            break
    if node is not None:
        line = node.start_mark.line + 1
    return line


def _fmt_loc(loc) -> str:
    out = ""
    for k in loc:
        out += f"[{k}]" if isinstance(k, int) else (f".{k}" if out else str(k))
    return out or "<root>"


def scenario_from_text(text: str, source: str = "") -> Scenario:
    try:
        data = yaml.safe_load(text)
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise ScenarioError([f"YAML syntax error: {exc}"], source) from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ScenarioError(["top level must be a mapping of sections"], source)
    try:
        sc = Scenario.model_validate(data)
    except ValidationError as exc:
        problems = []
        for e in exc.errors():
            loc = [k for k in e["loc"] if not (isinstance(k, str) and k.startswith("function-"))]
            line = _line_of(root, loc)
            where = f" (line {line})" if line else ""
            problems.append(f"{_fmt_loc(loc)}{where}: {e['msg']}")
        raise ScenarioError(problems, source) from None
    problems = sc.consistency_problems()
    if problems:
        raise ScenarioError(problems, source)
    return sc


def parse_scenario(path) -> Scenario:
    """Load and validate a scenario file."""
    path = Path(path)
    if not path.is_file():
        raise ScenarioError([f"file not found: {path}"], str(path))
    return scenario_from_text(path.read_text(encoding="utf-8"), str(path))


def default_scenario_text() -> str:
    return resources.files("nvmem").joinpath("data/default.yaml").read_text(encoding="utf-8")


def default_scenario() -> Scenario:
    return scenario_from_text(default_scenario_text(), "<default>")


def scenario_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
