"""Literal gate-level execution of the interference circuit on small instances.

This is a correctness oracle, not a performance path: a dense register
(x, y, b) is walked through the exact gate sequence

    H on x, FFT on b=|0..01>, f-oracle (add mod 2^N), discard b,
    H on y, FFT on b, g-oracle (subtract mod 2^N), discard b, H on x

and the z=0 measurement probability / conditional y distribution are read
off the final amplitudes.  The b register is only ever discarded after a
numerical check that the state actually factorizes across the b cut; the
norm is checked after every gate.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .core import DataTable, DomainGrid, ParameterSpace
from .errors import (
    InternalConsistencyError,
    SimulationCapError,
    UnsupportedShapeError,
)

DEFAULT_AMPLITUDE_CAP = 2**20
_NORM_TOL = 1e-10
_SEPARABILITY_TOL = 1e-10


@dataclass
class Registers:
    """Dense simulator state; x_qubits become z after the final Hadamard."""

    x_qubits: int
    y_qubits: int
    b_qubits: int
    n_exp: int
    state: np.ndarray
    grid: DomainGrid
    param_space: ParameterSpace | None = None
    interfered: bool = False

    def check_norm(self) -> None:
        total = math.fsum(np.abs(self.state).reshape(-1) ** 2)
        if abs(total - 1.0) > _NORM_TOL:
            raise InternalConsistencyError(f"state norm drifted to {total!r}")


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _fwht_axis(a: np.ndarray, axis: int) -> np.ndarray:
    """Normalized fast Walsh-Hadamard transform along one axis."""
    moved = np.moveaxis(a, axis, 0)
    n = moved.shape[0]
    rest = moved.shape[1:]
    work = moved.reshape(n, -1).copy()
    h = 1
    while h < n:
        blocks = work.reshape(n // (2 * h), 2, h, -1)
        top = blocks[:, 0] + blocks[:, 1]
        bottom = blocks[:, 0] - blocks[:, 1]
        work = np.concatenate((top[:, np.newaxis], bottom[:, np.newaxis]), axis=1)
        work = work.reshape(n, -1)
        h *= 2
    work = (work / math.sqrt(n)).reshape((n,) + rest)
    return np.moveaxis(work, 0, axis)


def _fft_basis_b(state: np.ndarray) -> np.ndarray:
    """FFT on the b register, which must currently hold a basis state.

    Its only use in the circuit is on |0..01>, so the transform is realized
    as the explicit phase-state preparation sum_k e^(2*pi*i*b0*k/M)/sqrt(M).
    """
    m = state.shape[-1]
    flat = state.reshape(-1, m)
    col_norms = np.abs(flat).sum(axis=0)
    nonzero = np.nonzero(col_norms > 1e-14)[0]
    if len(nonzero) != 1:
        raise InternalConsistencyError("b register is not in a basis state before FFT")
    b0 = int(nonzero[0])
    phi = np.exp(2j * np.pi * b0 * np.arange(m) / m) / math.sqrt(m)
    return (flat[:, b0:b0 + 1] * phi[np.newaxis, :]).reshape(state.shape)


def _discard_b(state: np.ndarray) -> np.ndarray:
    """Check Schmidt rank 1 across the b cut, then project b out."""
    m = state.shape[-1]
    flat = state.reshape(-1, m)
    singular = np.linalg.svd(flat, compute_uv=False)
    if singular.size > 1 and singular[1] > _SEPARABILITY_TOL:
        raise InternalConsistencyError(
            f"state does not factorize across the b cut (sigma_2={singular[1]:.3e})"
        )
    phi = np.exp(2j * np.pi * np.arange(m) / m) / math.sqrt(m)
    reduced = flat @ phi.conj()
    return reduced.reshape(state.shape[:-1])


def prepare_phase_state(
    f: DataTable, n_exp: int, amplitude_cap: int = DEFAULT_AMPLITUDE_CAP
) -> Registers:
    """Load the experiment into x-register phases e^(-2*pi*i*f(x)/2^N)/sqrt(|X|)."""
    nx = f.grid.total_size
    if not _is_power_of_two(nx):
        raise UnsupportedShapeError(f"|X|={nx} is not a power of two")
    if n_exp < 1:
        raise UnsupportedShapeError("precision exponent must be >= 1")
    m = 2**n_exp
    if nx * m > amplitude_cap:
        raise SimulationCapError(f"|X|*2^N = {nx * m} exceeds cap {amplitude_cap}")

    state = np.zeros((nx, m), dtype=np.complex128)
    state[0, 1] = 1.0  # |x> = |0..0>, |b> = |0..01>
    reg = Registers(x_qubits=nx.bit_length() - 1, y_qubits=0, b_qubits=n_exp,
                    n_exp=n_exp, state=state, grid=f.grid)

    reg.state = _fwht_axis(reg.state, axis=0)  # H on every x qubit
    reg.check_norm()
    reg.state = _fft_basis_b(reg.state)
    reg.check_norm()

    # f-oracle: |x, b> -> |x, b (+) f(x)>, addition mod 2^N
    fvals = np.mod(f.values, m)
    cols = np.mod(np.arange(m)[np.newaxis, :] - fvals[:, np.newaxis], m)
    reg.state = np.take_along_axis(reg.state, cols, axis=1)
    reg.check_norm()

    reg.state = _discard_b(reg.state)
    reg.b_qubits = 0
    reg.check_norm()
    return reg


def apply_g_and_interfere(
    reg: Registers,
    g,
    space: ParameterSpace,
    amplitude_cap: int = DEFAULT_AMPLITUDE_CAP,
) -> Registers:
    """Introduce the parameter register, apply the g-oracle, interfere x."""
    if reg.y_qubits or reg.interfered:
        raise InternalConsistencyError("registers already carry a parameter phase")
    ny = space.size
    nx = reg.state.shape[0]
    if not _is_power_of_two(ny):
        raise UnsupportedShapeError(f"|Y|={ny} is not a power of two")
    m = 2**reg.n_exp
    if nx * ny * m > amplitude_cap:
        raise SimulationCapError(f"|X|*|Y|*2^N = {nx * ny * m} exceeds cap {amplitude_cap}")

    state = np.zeros((nx, ny, m), dtype=np.complex128)
    state[:, 0, 1] = reg.state  # |y> = |0..0>, |b> = |0..01>
    reg = Registers(x_qubits=reg.x_qubits, y_qubits=ny.bit_length() - 1,
                    b_qubits=reg.n_exp, n_exp=reg.n_exp, state=state,
                    grid=reg.grid, param_space=space)

    reg.state = _fwht_axis(reg.state, axis=1)  # H on every y qubit
    reg.check_norm()
    reg.state = _fft_basis_b(reg.state)
    reg.check_norm()

    # g-oracle: |x, y, b> -> |x, y, b (-) g_y(x)>, subtraction mod 2^N
    coords = [c[np.newaxis, :] for c in reg.grid.coordinate_arrays()]
    decoded = space.decoded_matrix()
    ys = [decoded[:, j:j + 1] for j in range(decoded.shape[1])]
    gvals = np.broadcast_to(g.evaluate_on(coords, ys), (ny, nx))
    gmod = np.mod(gvals.T, m)  # (nx, ny)
    cols = np.mod(np.arange(m)[np.newaxis, np.newaxis, :] + gmod[:, :, np.newaxis], m)
    reg.state = np.take_along_axis(reg.state, cols, axis=2)
    reg.check_norm()

    reg.state = _discard_b(reg.state)
    reg.b_qubits = 0
    reg.check_norm()

    reg.state = _fwht_axis(reg.state, axis=0)  # H on every x qubit: x -> z
    reg.check_norm()
    reg.interfered = True
    return reg


@dataclass(frozen=True)
class MeasurementOutcome:
    """Exact z=0 probability and the renormalized parameter distribution.

    The conditional distribution is None when the z=0 probability is below
    1e-15 (renormalization would be meaningless).
    """

    z_is_zero_probability: float
    conditional_y_distribution: dict | None

    def __post_init__(self):
        if self.conditional_y_distribution is not None:
            total = math.fsum(self.conditional_y_distribution.values())
            if abs(total - 1.0) > 1e-10:
                raise InternalConsistencyError(
                    f"conditional distribution sums to {total!r}"
                )


@dataclass(frozen=True)
class SampleCounts:
    """Seeded sampling results: shot counts rather than exact probabilities."""

    shots: int
    z_zero_count: int
    y_counts: dict


def measure(reg: Registers) -> MeasurementOutcome:
    """Exact measurement statistics of the interfered state."""
    if not reg.interfered or reg.param_space is None:
        raise InternalConsistencyError("measure needs an interfered register")
    weights = np.abs(reg.state[0, :]) ** 2
    p_zero = math.fsum(weights)
    if p_zero < 1e-15:
        return MeasurementOutcome(p_zero, None)
    dist = {}
    for i, vec in enumerate(reg.param_space.enumerate()):
        dist[vec] = weights[i] / p_zero
    return MeasurementOutcome(p_zero, dist)


def sample_measurements(reg: Registers, shots: int, seed: int) -> SampleCounts:
    """Draw seeded measurement shots from the exact joint distribution."""
    if not reg.interfered or reg.param_space is None:
        raise InternalConsistencyError("sampling needs an interfered register")
    rng = np.random.default_rng(seed)
    probs = np.abs(reg.state.reshape(-1)) ** 2
    probs = probs / probs.sum()
    draws = rng.choice(probs.size, size=shots, p=probs)
    ny = reg.state.shape[1]
    z_draws, y_draws = draws // ny, draws % ny
    zero_mask = z_draws == 0
    vectors = list(reg.param_space.enumerate())
    counts = Counter(vectors[i] for i in y_draws[zero_mask])
    return SampleCounts(shots=shots, z_zero_count=int(zero_mask.sum()), y_counts=dict(counts))


def run_oracle(f: DataTable, g, space: ParameterSpace, n_exp: int,
               amplitude_cap: int = DEFAULT_AMPLITUDE_CAP) -> MeasurementOutcome:
    """Full circuit: prepare, interfere, measure."""
    reg = prepare_phase_state(f, n_exp, amplitude_cap)
    reg = apply_g_and_interfere(reg, g, space, amplitude_cap)
    return measure(reg)
