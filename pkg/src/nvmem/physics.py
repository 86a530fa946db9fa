"""Secular spin Hamiltonian, point-dipole geometry and memory mixing estimate.

Conventions
-----------
* The sensor basis is m_S = +1, 0, -1 (spin-1), or m_S = +1/2, -1/2 for the
  neutral charge state. The illuminated sensor adds a metastable and an
  ionized level, both with S_z = 0.
* The memory is the qubit {m_I = 0, +1} with I_z = diag(0, 1).
* Targets are spin-1/2 with I_z = diag(+1/2, -1/2).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from . import constants as C
from .quantum import CompositeSystem, Operator, embed

SENSOR = "sensor"
MEMORY = "memory"

MEMORY_IZ = np.diag([0.0, 1.0]).astype(complex)
TARGET_IZ = np.diag([0.5, -0.5]).astype(complex)


class Species(str, enum.Enum):
    C13 = "C13"
    H1 = "H1"
    Si29 = "Si29"
    F19 = "F19"


GYROMAGNETIC = {
    Species.C13: C.GAMMA_C13,
    Species.H1: C.GAMMA_H1,
    Species.Si29: C.GAMMA_SI29,
    Species.F19: C.GAMMA_F19,
}


def target_label(k: int) -> str:
    return f"target{k}"


def sensor_sz(dim: int) -> np.ndarray:
    """S_z of the sensor for a given sensor-space dimension.

    3: spin-1 triplet; 2: spin-1/2 (neutral charge state); 5: triplet plus
    metastable and ionized levels (S_z = 0 on both).
    """
    if dim == 3:
        return np.diag([1.0, 0.0, -1.0]).astype(complex)
    if dim == 2:
        return np.diag([0.5, -0.5]).astype(complex)
    if dim == 5:
        return np.diag([1.0, 0.0, -1.0, 0.0, 0.0]).astype(complex)
    raise ValueError(f"no sensor model with dimension {dim}")


def nv_system(n_targets: int = 0, memory: bool = True, sensor_dim: int = 3) -> CompositeSystem:
    """Standard ordering: sensor, memory, target0, target1, ..."""
    subs = [(SENSOR, sensor_dim)]
    if memory:
        subs.append((MEMORY, 2))
    subs += [(target_label(k), 2) for k in range(n_targets)]
    return CompositeSystem(tuple(subs))


@dataclass(frozen=True)
class HamiltonianParams:
    """Parameters of the secular Hamiltonian (frequencies in Hz, field in T)."""

    D: float = C.ZFS_NV
    B_z: float = C.B_FIELD
    gamma_sensor: float = C.GAMMA_ELECTRON
    gamma_memory: float = C.GAMMA_N14
    gamma_target: float = C.GAMMA_C13
    A_par_memory: float = C.A_PAR_MEMORY
    A_par_targets: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.B_z < 0:
            raise ValueError("B_z must be >= 0")
        object.__setattr__(self, "A_par_targets", tuple(float(a) for a in self.A_par_targets))

    @property
    def larmor_target(self) -> float:
        """Bare target Larmor frequency gamma_target * B_z, Hz."""
        return self.gamma_target * self.B_z

    def rotating(self) -> "HamiltonianParams":
        """Same couplings with the local terms (D, Zeeman) removed."""
        return replace(self, D=0.0, B_z=0.0)


def _check_system(params: HamiltonianParams, system: CompositeSystem):
    labels = system.labels
    if labels[0] != SENSOR:
        raise ValueError("first subsystem must be the sensor")
    n_t = sum(1 for label in labels if label.startswith("target"))
    if n_t != len(params.A_par_targets):
        raise ValueError(f"system has {n_t} targets but params list {len(params.A_par_targets)} couplings")
    for k in range(n_t):
        if system.dim_of(target_label(k)) != 2:
            raise ValueError("targets must be spin-1/2")
    if MEMORY in labels and system.dim_of(MEMORY) != 2:
        raise ValueError("memory must be a qubit")


def build_hamiltonian(params: HamiltonianParams, system: CompositeSystem) -> Operator:
    """Secular Hamiltonian in Hz, diagonal in the product basis.

    H = D S_z^2 + g_s B S_z + g_m B I_z^m + g_t B sum I_z^t
        + A_m S_z I_z^m + S_z sum A_t I_z^t
    """
    _check_system(params, system)
    sz = sensor_sz(system.dim_of(SENSOR))
    h = np.zeros(system.dim)
    Sz = np.real(np.diag(embed(sz, system, SENSOR).matrix))
    h += params.D * Sz**2 + params.gamma_sensor * params.B_z * Sz
    if MEMORY in system.labels:
        Im = np.real(np.diag(embed(MEMORY_IZ, system, MEMORY).matrix))
        h += params.gamma_memory * params.B_z * Im + params.A_par_memory * Sz * Im
    for k, a in enumerate(params.A_par_targets):
        It = np.real(np.diag(embed(TARGET_IZ, system, target_label(k)).matrix))
        h += params.gamma_target * params.B_z * It + a * Sz * It
    return Operator(system, np.diag(h))


def target_transition(params: HamiltonianParams, k: int, m_s: float) -> float:
    """Transition frequency of target ``k`` with the sensor in ``m_s``, Hz."""
    return params.gamma_target * params.B_z + params.A_par_targets[k] * m_s


# Geometry ------------------------------------------------------------------

@dataclass(frozen=True)
class GeometryQuery:
    theta: float
    distance: float
    species: Species = Species.C13

    def __post_init__(self):
        if not self.distance > 0:
            raise ValueError("distance must be > 0")
        object.__setattr__(self, "species", Species(self.species))


def dipolar_constant(species) -> float:
    """K = (mu0/4pi) h gamma_e gamma_species, Hz m^3 (signed)."""
    return C.MU0_OVER_4PI * C.PLANCK * C.GAMMA_ELECTRON * GYROMAGNETIC[Species(species)]


def dipolar_coupling(q: GeometryQuery) -> float:
    """Secular point-dipole coupling K (3 cos^2 theta - 1) / d^3, Hz."""
    c = np.cos(q.theta)
    return dipolar_constant(q.species) * (3 * c * c - 1) / q.distance**3


def max_distance_for_coupling(a_par: float, species) -> float:
    """Largest distance at which |A_par| is reachable (on the NV axis), m."""
    if not a_par > 0:
        raise ValueError("a_par must be > 0")
    return (2 * abs(dipolar_constant(species)) / a_par) ** (1 / 3)


def coupling_locus(a_par: float, species, theta_grid):
    """Distance d(theta) solving dipolar_coupling = a_par.

    Angles where the sign of (3 cos^2 theta - 1) cannot produce ``a_par`` are
    left out, so the result may be empty.

    Returns
    -------
    list of (theta, d)
    """
    if a_par == 0:
        raise ValueError("a_par must be nonzero")
    k = dipolar_constant(species)
    out = []
    for th in np.asarray(theta_grid, dtype=float):
        ang = 3 * np.cos(th) ** 2 - 1
        ratio = k * ang / a_par
        if ratio > 0:
            out.append((float(th), float(ratio ** (1 / 3))))
    return out


# Memory relaxation estimate ------------------------------------------------

@dataclass(frozen=True)
class MixingEstimateParams:
    A_perp: float
    E_eZ: float
    projection_rate: float

    def __post_init__(self):
        if not (self.E_eZ > 0 and self.projection_rate > 0):
            raise ValueError("E_eZ and projection_rate must be > 0")


def memory_t1_limit(p: MixingEstimateParams) -> float:
    """Memory T1 bound 1 / (eps * rate) with eps = (A_perp / E_eZ)^2, s."""
    eps = (p.A_perp / p.E_eZ) ** 2
    return 1 / (eps * p.projection_rate)
