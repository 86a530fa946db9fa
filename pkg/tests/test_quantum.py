import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_density
from nvmem.quantum import (PAULI_X, PAULI_Y, PAULI_Z, CompositeSystem, DensityState, Operator, embed,
                           embed_many, expectation, partial_trace, product_state, qubit_rotation,
                           spin_operators)

SYS = CompositeSystem((("sensor", 3), ("memory", 2), ("target0", 2)))


def test_system_basics():
    assert SYS.dim == 12
    assert SYS.dims == (3, 2, 2)
    assert SYS.dim_of("memory") == 2
    assert SYS.with_dim("sensor", 5).dim == 20


@pytest.mark.parametrize("subs", [(("a", 2), ("a", 3)), (("a", 1),), ()])
def test_system_rejects_bad_layouts(subs):
    with pytest.raises(ValueError):
        CompositeSystem(subs)


def test_unknown_label():
    with pytest.raises(KeyError, match="unknown subsystem"):
        SYS.index("nope")
    with pytest.raises(KeyError):
        embed(np.eye(2), SYS, "nope")


def test_embed_matches_kron():
    sz = np.diag([1.0, 0, -1])
    op = embed(sz, SYS, "sensor").matrix
    np.testing.assert_allclose(op, np.kron(sz, np.eye(4)))
    op = embed(PAULI_X, SYS, "target0").matrix
    np.testing.assert_allclose(op, np.kron(np.eye(6), PAULI_X))
    both = embed_many({"sensor": sz, "target0": PAULI_X}, SYS).matrix
    np.testing.assert_allclose(both, np.kron(np.kron(sz, np.eye(2)), PAULI_X))


def test_operator_algebra_and_checks():
    a = embed(PAULI_X, SYS, "memory")
    b = embed(PAULI_Y, SYS, "memory")
    comm = (a @ b - b @ a).matrix
    np.testing.assert_allclose(comm, 2j * embed(PAULI_Z, SYS, "memory").matrix)
    assert a.is_hermitian() and not (1j * a + a).is_hermitian()
    assert (2 * a).matrix[0, 2] == 2
    with pytest.raises(ValueError):
        Operator(SYS, np.eye(3))
    other = CompositeSystem((("x", 12),))
    with pytest.raises(ValueError):
        a @ Operator(other, np.eye(12))
    with pytest.raises(ValueError):
        a.matrix[0, 0] = 1  # read-only


@pytest.mark.parametrize("m, msg", [
    (np.diag([0.5, 0.6]), "trace"),
    (np.array([[0.5, 0.1], [0.3, 0.5]]), "Hermitian"),
    (np.diag([1.5, -0.5]), "negative"),
])
def test_density_validation(m, msg):
    with pytest.raises(ValueError, match=msg):
        DensityState(CompositeSystem((("q", 2),)), m)


@given(st.integers(0, 2**31 - 1))
def test_partial_trace_of_product(seed):
    rng = np.random.default_rng(seed)
    rs, rm, rt = random_density(rng, 3), random_density(rng, 2), random_density(rng, 2)
    state = product_state(SYS, {"sensor": rs, "memory": rm, "target0": rt})
    np.testing.assert_allclose(partial_trace(state, ["memory"]).matrix, rm, atol=1e-12)
    np.testing.assert_allclose(partial_trace(state, ["sensor", "target0"]).matrix, np.kron(rs, rt), atol=1e-12)
    # keep order follows the system, not the argument
    np.testing.assert_allclose(partial_trace(state, ["target0", "sensor"]).matrix, np.kron(rs, rt), atol=1e-12)


@given(st.integers(0, 2**31 - 1))
def test_partial_trace_preserves_local_expectations(seed):
    rng = np.random.default_rng(seed)
    state = DensityState(SYS, random_density(rng, 12))
    red = partial_trace(state, ["memory"])
    for p in (PAULI_X, PAULI_Y, PAULI_Z):
        full = expectation(state, embed(p, SYS, "memory"))
        local = np.trace(red.matrix @ p)
        assert abs(full - local) < 1e-12


def test_partial_trace_empty_keep():
    with pytest.raises(ValueError):
        partial_trace(product_state(SYS, {}), [])


def test_product_state_defaults_to_mixed():
    st_ = product_state(SYS, {"sensor": np.diag([0, 1, 0])})
    np.testing.assert_allclose(partial_trace(st_, ["memory"]).matrix, np.eye(2) / 2)


@pytest.mark.parametrize("dim", [2, 3, 4, 5])
def test_spin_algebra(dim):
    sx, sy, sz = spin_operators(dim)
    np.testing.assert_allclose(sx @ sy - sy @ sx, 1j * sz, atol=1e-12)
    s = (dim - 1) / 2
    np.testing.assert_allclose(sx @ sx + sy @ sy + sz @ sz, s * (s + 1) * np.eye(dim), atol=1e-12)


@given(st.floats(-7, 7), st.floats(-7, 7))
def test_qubit_rotation_is_unitary(angle, phase):
    u = qubit_rotation(angle, phase)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(2), atol=1e-12)


def test_qubit_rotation_oracle():
    # pi about x maps |0> to -i|1>; pi/2 about y maps |0> to (|0> + |1>)/sqrt2
    np.testing.assert_allclose(qubit_rotation(np.pi, 0) @ [1, 0], [0, -1j], atol=1e-15)
    np.testing.assert_allclose(qubit_rotation(np.pi / 2, np.pi / 2) @ [1, 0], [2**-0.5, 2**-0.5], atol=1e-15)
