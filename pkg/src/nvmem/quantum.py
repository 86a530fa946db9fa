"""Dense operators and density matrices on labeled tensor-product spaces.

Subsystems are ordered; the global basis is the Kronecker product of the
local bases in that order. All objects are immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Mapping

import numpy as np

HERMITIAN_RTOL = 1e-12
TRACE_ATOL = 1e-10
POSITIVITY_ATOL = 1e-10


@dataclass(frozen=True)
class CompositeSystem:
    """Ordered list of ``(label, dimension)`` pairs.

    Examples
    --------
    >>> sys = CompositeSystem((("sensor", 3), ("memory", 2)))
    >>> sys.dim
    6
    """

    subsystems: tuple

    def __post_init__(self):
        subs = tuple((str(label), int(dim)) for label, dim in self.subsystems)
        if not subs:
            raise ValueError("a system needs at least one subsystem")
        labels = [label for label, _ in subs]
        dupes = sorted({label for label in labels if labels.count(label) > 1})
        if dupes:
            raise ValueError(f"duplicate subsystem labels: {dupes}")
        for label, dim in subs:
            if dim < 2:
                raise ValueError(f"subsystem {label!r} has dimension {dim} < 2")
        object.__setattr__(self, "subsystems", subs)

    @property
    def labels(self) -> tuple:
        return tuple(label for label, _ in self.subsystems)

    @property
    def dims(self) -> tuple:
        return tuple(dim for _, dim in self.subsystems)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown subsystem {label!r}; have {list(self.labels)}") from None

    def dim_of(self, label: str) -> int:
        return self.dims[self.index(label)]

    def with_dim(self, label: str, dim: int) -> "CompositeSystem":
        """Copy of the system with one subsystem resized."""
        i = self.index(label)
        subs = list(self.subsystems)
        subs[i] = (label, dim)
        return CompositeSystem(tuple(subs))


def _as_square(matrix, dim: int, what: str) -> np.ndarray:
    m = np.array(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{what} must be a square matrix, got shape {m.shape}")
    if m.shape[0] != dim:
        raise ValueError(f"{what} has dimension {m.shape[0]}, system needs {dim}")
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False)
class Operator:
    """Dense complex operator on a :class:`CompositeSystem`.

    Hamiltonians are stored in Hz; 2 pi is applied inside propagators.
    """

    system: CompositeSystem
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _as_square(self.matrix, self.system.dim, "operator"))

    def is_hermitian(self, rtol: float = HERMITIAN_RTOL) -> bool:
        m = self.matrix
        scale = max(np.abs(m).max(), 1e-300)
        return bool(np.abs(m - m.conj().T).max() <= rtol * scale)

    @property
    def dag(self) -> "Operator":
        return Operator(self.system, self.matrix.conj().T)

    def _check(self, other: "Operator"):
        if other.system != self.system:
            raise ValueError("operators live on different systems")

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.system, self.matrix @ other.matrix)

    def __add__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.system, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check(other)
        return Operator(self.system, self.matrix - other.matrix)

    def __mul__(self, c) -> "Operator":
        return Operator(self.system, c * self.matrix)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class DensityState:
    """Validated density matrix: Hermitian, unit trace, positive semidefinite."""

    system: CompositeSystem
    matrix: np.ndarray
    atol: float = POSITIVITY_ATOL

    def __post_init__(self):
        m = _as_square(self.matrix, self.system.dim, "density matrix")
        if np.abs(m - m.conj().T).max() > self.atol:
            raise ValueError("density matrix is not Hermitian")
        tr = np.trace(m)
        if abs(tr - 1) > max(TRACE_ATOL, self.atol):
            raise ValueError(f"density matrix trace is {tr.real:.12g}, expected 1")
        if np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min() < -self.atol:
            raise ValueError("density matrix has negative eigenvalues")
        object.__setattr__(self, "matrix", m)


def embed(local, system: CompositeSystem, label: str) -> Operator:
    """Lift a local matrix on subsystem ``label`` to the full space."""
    i = system.index(label)
    local = np.asarray(local, dtype=complex)
    d = system.dims[i]
    if local.shape != (d, d):
        raise ValueError(f"local operator shape {local.shape} does not match {label!r} (dim {d})")
    left = int(np.prod(system.dims[:i]))
    right = int(np.prod(system.dims[i + 1:]))
    return Operator(system, np.kron(np.kron(np.eye(left), local), np.eye(right)))


def embed_many(locals_: Mapping[str, np.ndarray], system: CompositeSystem) -> Operator:
    """Tensor product of local matrices, identity on unnamed subsystems."""
    for label in locals_:
        system.index(label)
    factors = [np.asarray(locals_.get(label, np.eye(d)), dtype=complex)
               for label, d in system.subsystems]
    return Operator(system, reduce(np.kron, factors))


def product_state(system: CompositeSystem, locals_: Mapping[str, np.ndarray]) -> DensityState:
    """Product density matrix; unnamed subsystems are maximally mixed."""
    for label in locals_:
        system.index(label)
    factors = [np.asarray(locals_[label], dtype=complex) if label in locals_ else np.eye(d) / d
               for label, d in system.subsystems]
    return DensityState(system, reduce(np.kron, factors))


def partial_trace(state: DensityState, keep: Iterable[str]) -> DensityState:
    """Reduced state on the subsystems in ``keep`` (returned in system order)."""
    keep = set(keep)
    if not keep:
        raise ValueError("keep set is empty")
    sys = state.system
    for label in keep:
        sys.index(label)
    rho = reduced_matrix(state.matrix, sys, keep)
    kept = CompositeSystem(tuple(s for s in sys.subsystems if s[0] in keep))
    return DensityState(kept, rho)


def reduced_matrix(rho: np.ndarray, system: CompositeSystem, keep) -> np.ndarray:
    """Partial trace of a raw matrix, keeping labels in ``keep``."""
    dims = system.dims
    n = len(dims)
    keep_idx = [i for i, label in enumerate(system.labels) if label in keep]
    t = rho.reshape(dims + dims)
    # trace out from the back so remaining axis numbers stay valid
    for i in reversed(range(n)):
        if i not in keep_idx:
            m = t.ndim // 2
            t = np.trace(t, axis1=i, axis2=i + m)
    d = int(np.prod([dims[i] for i in keep_idx]))
    return t.reshape(d, d)


def expectation(state: DensityState, op: Operator) -> complex:
    """Tr(rho O)."""
    if state.system != op.system:
        raise ValueError("state and operator live on different systems")
    return complex(np.einsum("ij,ji->", state.matrix, op.matrix))


# Local spin matrices -------------------------------------------------------

def spin_operators(dim: int):
    """Return ``(Sx, Sy, Sz)`` for spin ``(dim - 1) / 2`` in the basis m = S ... -S."""
    s = (dim - 1) / 2
    m = s - np.arange(dim)
    sp = np.zeros((dim, dim), dtype=complex)
    for k in range(1, dim):
        sp[k - 1, k] = np.sqrt(s * (s + 1) - m[k] * (m[k] + 1))
    sx = (sp + sp.conj().T) / 2
    sy = (sp - sp.conj().T) / 2j
    return sx, sy, np.diag(m).astype(complex)


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def ket(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1
    return v


def projector(dim: int, index: int) -> np.ndarray:
    p = np.zeros((dim, dim), dtype=complex)
    p[index, index] = 1
    return p


def qubit_rotation(angle: float, phase: float) -> np.ndarray:
    """exp(-i angle/2 (cos(phase) X + sin(phase) Y))."""
    n = np.cos(phase) * PAULI_X + np.sin(phase) * PAULI_Y
    return np.cos(angle / 2) * np.eye(2) - 1j * np.sin(angle / 2) * n
