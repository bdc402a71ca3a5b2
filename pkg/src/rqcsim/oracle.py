"""Dense state-vector reference simulator.

Independent of the tensor-network machinery: gates are applied cycle by
cycle to a full 2^n state vector in double precision.  Diagonal cycles
(CZ layers plus T gates) are fused into a single phase pass.  Used for
cross-checking amplitudes, distributions, and sampling statistics on
small circuits; refuses systems above `MAX_QUBITS`.

Conventions: qubit 0 is the most significant bit of the state index, so
bit-string '10...0' (qubit 0 set) maps to index 2^(n-1).
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .circuits import Circuit

MAX_QUBITS = 26

H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2.0)
T = np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=np.complex128)
X_1_2 = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=np.complex128)
Y_1_2 = 0.5 * np.array([[1 + 1j, -1 - 1j], [1 + 1j, 1 + 1j]], dtype=np.complex128)
CZ = np.diag([1, 1, 1, -1]).astype(np.complex128)
ISWAP = np.array(
    [[1, 0, 0, 0],
     [0, 0, 1j, 0],
     [0, 1j, 0, 0],
     [0, 0, 0, 1]], dtype=np.complex128)

GATE_MATRIX = {"h": H, "t": T, "x_1_2": X_1_2, "y_1_2": Y_1_2, "cz": CZ, "iswap": ISWAP}


def _check_size(circuit: Circuit):
    if circuit.n > MAX_QUBITS:
        raise ValueError(
            f"reference simulator capped at {MAX_QUBITS} qubits, got {circuit.n}")


def bits_to_index(bits: str) -> int:
    """Bit-string (leftmost char = qubit 0) to state index."""
    return int(bits, 2)


def index_to_bits(index: int, n: int) -> str:
    return format(index, f"0{n}b")


def evolve(circuit: Circuit, in_bits: str | int = 0) -> np.ndarray:
    """Full output state vector for a computational-basis input."""
    _check_size(circuit)
    n = circuit.n
    state = np.zeros(1 << n, dtype=np.complex128)
    state[bits_to_index(in_bits) if isinstance(in_bits, str) else in_bits] = 1.0

    for gates in circuit.by_cycle():
        cz_bits = []
        t_bits = []
        for g in gates:
            if g.name == "cz":
                a, b = g.qubits
                cz_bits.append((n - 1 - a, n - 1 - b))
            elif g.name == "t":
                t_bits.append(n - 1 - g.qubits[0])
            elif len(g.qubits) == 1:
                _kernels.apply_1q(state, GATE_MATRIX[g.name], n - 1 - g.qubits[0])
            else:
                a, b = g.qubits
                _kernels.apply_2q(state, GATE_MATRIX[g.name], n - 1 - a, n - 1 - b)
        if cz_bits or t_bits:
            _kernels.apply_diag(state, cz_bits, t_bits)
    return state


def exact_amplitude(circuit: Circuit, in_bits: str | int, out_bits: str | int) -> complex:
    state = evolve(circuit, in_bits)
    idx = bits_to_index(out_bits) if isinstance(out_bits, str) else out_bits
    return complex(state[idx])


def exact_distribution(circuit: Circuit, in_bits: str | int = 0) -> np.ndarray:
    """Output probabilities |<b|U|in>|^2 for all 2^n bit-strings b."""
    state = evolve(circuit, in_bits)
    return np.abs(state) ** 2
