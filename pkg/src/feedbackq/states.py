"""Dense statevector engine.

Amplitude index convention matches the Pauli-string convention: qubit 0
is the most significant bit, so for two qubits the amplitudes are
ordered |00>, |01>, |10>, |11>.

Pauli strings never become dense matrices here.  Each string acts as an
index permutation plus a phase: X and Y flip the targeted bits, while Z
and Y contribute (-1) phases read off the input index.  Exponentials use
the closed form exp(-i*t*O) = cos(t)*1 - i*sin(t)*O, valid because every
Pauli string squares to the identity.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Sequence, Tuple

import numpy as np

from .pauli import PauliSum, _check_ops

NORM_TOL = 1e-9
DENSE_QUBIT_LIMIT = 12
DIAGONAL_QUBIT_LIMIT = 26


@lru_cache(maxsize=None)
def _string_masks(ops: str) -> Tuple[int, int, complex]:
    """(flip mask, phase mask, i**n_Y) for one Pauli string."""
    n = len(ops)
    xmask = 0
    zmask = 0
    ny = 0
    for q, letter in enumerate(ops):
        bit = 1 << (n - 1 - q)
        if letter in ("X", "Y"):
            xmask |= bit
        if letter in ("Z", "Y"):
            zmask |= bit
        if letter == "Y":
            ny += 1
    return xmask, zmask, 1j ** (ny % 4)


@lru_cache(maxsize=32)
def _indices(n: int) -> np.ndarray:
    idx = np.arange(1 << n, dtype=np.int64)
    idx.flags.writeable = False
    return idx


def _parity(values: np.ndarray) -> np.ndarray:
    v = values.copy()
    for shift in (32, 16, 8, 4, 2, 1):
        v ^= v >> shift
    return v & 1


def _pauli_action(amps: np.ndarray, ops: str, n: int) -> np.ndarray:
    """Return O|psi> as a fresh amplitude array."""
    xmask, zmask, ipow = _string_masks(ops)
    idx = _indices(n)
    src = idx ^ xmask if xmask else idx
    if zmask:
        sign = 1.0 - 2.0 * _parity(src & zmask)
        out = (ipow * sign) * amps[src]
    elif xmask:
        out = ipow * amps[src]
    else:
        out = amps.copy()
    return out


class StateVector:
    """Unit-norm amplitude vector over 2**n basis states."""

    __slots__ = ("amps", "n")

    def __init__(self, amps: Sequence[complex], copy: bool = True):
        arr = np.array(amps, dtype=np.complex128, copy=copy)
        if arr.ndim != 1 or arr.size == 0 or arr.size & (arr.size - 1):
            raise ValueError("amplitude count must be a power of two")
        norm_sq = float(np.vdot(arr, arr).real)
        if abs(norm_sq - 1.0) > NORM_TOL:
            raise ValueError(f"state norm^2 = {norm_sq!r} is not 1 within {NORM_TOL}")
        self.amps = arr
        self.n = arr.size.bit_length() - 1

    @classmethod
    def from_amplitudes(cls, amps: Sequence[complex]) -> "StateVector":
        """Construct from an unnormalized vector, rescaling to unit norm."""
        arr = np.asarray(amps, dtype=np.complex128)
        norm = float(np.linalg.norm(arr))
        if norm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return cls(arr / norm, copy=False)

    @classmethod
    def basis(cls, n: int, label) -> "StateVector":
        """Computational basis state from an integer index or a bit string like "01"."""
        if isinstance(label, str):
            if len(label) != n or set(label) - {"0", "1"}:
                raise ValueError(f"bit string {label!r} does not address {n} qubits")
            index = int(label, 2)
        else:
            index = int(label)
        if not 0 <= index < (1 << n):
            raise ValueError(f"basis index {index} out of range for {n} qubits")
        amps = np.zeros(1 << n, dtype=np.complex128)
        amps[index] = 1.0
        return cls(amps, copy=False)

    @classmethod
    def plus(cls, n: int) -> "StateVector":
        """|+>^n, the uniform superposition."""
        dim = 1 << n
        return cls(np.full(dim, 1.0 / np.sqrt(dim), dtype=np.complex128), copy=False)

    def copy(self) -> "StateVector":
        return StateVector(self.amps, copy=True)

    def __repr__(self) -> str:
        return f"StateVector(n={self.n})"


def _check_same_n(a_n: int, b_n: int) -> None:
    if a_n != b_n:
        raise ValueError(f"qubit count mismatch: {a_n} vs {b_n}")


def apply_pauli(state: StateVector, ops: str) -> np.ndarray:
    """O|psi> as a raw amplitude array (not unit norm in general contexts)."""
    _check_ops(ops)
    _check_same_n(len(ops), state.n)
    return _pauli_action(state.amps, ops, state.n)


def _exp_amps(amps: np.ndarray, ops: str, angle: float, n: int) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return c * amps - 1j * s * _pauli_action(amps, ops, n)


def apply_pauli_exp(state: StateVector, ops: str, angle: float) -> StateVector:
    """exp(-i*angle*O)|psi> for a single Pauli string O."""
    _check_ops(ops)
    _check_same_n(len(ops), state.n)
    if not np.isfinite(angle):
        raise ValueError(f"angle must be finite, got {angle!r}")
    return StateVector(_exp_amps(state.amps, ops, float(angle), state.n), copy=False)


@dataclass(frozen=True)
class TrotterPlan:
    """Frozen factor order for first-order product-formula steps.

    One application advances by dt (times an optional scale folded into
    every factor angle, used for control unitaries exp(-i*u*dt*H)).
    """

    factors: Tuple[Tuple[str, float], ...]
    dt: float

    @classmethod
    def from_sum(cls, h: PauliSum, dt: float) -> "TrotterPlan":
        if not h.is_hermitian:
            raise ValueError("Trotter plans require a hermitian sum")
        return cls(tuple((ops, c.real) for ops, c in h.items()), float(dt))

    def apply(self, state: StateVector, scale: float = 1.0, slices: int = 1) -> StateVector:
        if slices < 1:
            raise ValueError("slices must be >= 1")
        amps = state.amps
        step = self.dt * scale / slices
        for _ in range(slices):
            for ops, coeff in self.factors:
                amps = _exp_amps(amps, ops, coeff * step, state.n)
        return StateVector(amps, copy=False)


def apply_sum_trotter(state: StateVector, h: PauliSum, t: float, slices: int = 1) -> StateVector:
    """First-order Trotter step exp(-i*c_1*t*O_1)...exp(-i*c_m*t*O_m)|psi>.

    Factors run in the canonical term order of h; exact whenever all
    terms commute (diagonal sums in particular).
    """
    _check_same_n(h.n, state.n)
    return TrotterPlan.from_sum(h, t).apply(state, slices=slices)


def pauli_expectation(state: StateVector, ops: str) -> float:
    """<psi|O|psi> for one Pauli string (real by hermiticity)."""
    return float(np.vdot(state.amps, apply_pauli(state, ops)).real)


def pauli_matrix_element(a: StateVector, ops: str, b: StateVector) -> complex:
    """<a|O|b> for one Pauli string."""
    _check_same_n(a.n, b.n)
    return complex(np.vdot(a.amps, apply_pauli(b, ops)))


def expectation(state: StateVector, h: PauliSum) -> float:
    """<psi|H|psi> for a hermitian sum; the imaginary residue must vanish."""
    _check_same_n(h.n, state.n)
    total = 0j
    for ops, coeff in h.items():
        total += coeff * np.vdot(state.amps, _pauli_action(state.amps, ops, state.n))
    if abs(total.imag) > 1e-10:
        raise ValueError(f"imaginary residue {total.imag} in expectation of a hermitian sum")
    return float(total.real)


def inner(a: StateVector, b: StateVector) -> complex:
    """<a|b>."""
    _check_same_n(a.n, b.n)
    return complex(np.vdot(a.amps, b.amps))


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|**2."""
    return abs(inner(a, b)) ** 2


def diagonal_values(h: PauliSum) -> np.ndarray:
    """Dense diagonal of a sum containing only I and Z letters."""
    if not h.is_diagonal:
        raise ValueError("diagonal_values requires an I/Z-only sum")
    if h.n > DIAGONAL_QUBIT_LIMIT:
        raise ValueError(f"diagonal path supports n <= {DIAGONAL_QUBIT_LIMIT}")
    idx = _indices(h.n)
    diag = np.zeros(idx.size, dtype=np.float64)
    for ops, coeff in h.items():
        _, zmask, _ = _string_masks(ops)
        if zmask:
            diag += coeff.real * (1.0 - 2.0 * _parity(idx & zmask))
        else:
            diag += coeff.real
    return diag


def dense_matrix(h: PauliSum) -> np.ndarray:
    """Dense 2**n x 2**n matrix of a sum (n <= 12 guard for memory)."""
    if h.n > DENSE_QUBIT_LIMIT:
        raise ValueError(f"dense path supports n <= {DENSE_QUBIT_LIMIT}")
    dim = 1 << h.n
    idx = _indices(h.n)
    mat = np.zeros((dim, dim), dtype=np.complex128)
    for ops, coeff in h.items():
        xmask, zmask, ipow = _string_masks(ops)
        rows = idx ^ xmask if xmask else idx
        vals = np.full(dim, coeff * ipow, dtype=np.complex128)
        if zmask:
            vals *= 1.0 - 2.0 * _parity(idx & zmask)
        mat[rows, idx] += vals
    return mat


def reference_spectrum(h: PauliSum, count: int | None = None) -> List[Tuple[float, StateVector]]:
    """Eigenpairs of a hermitian sum, ascending by eigenvalue.

    Diagonal sums (I/Z letters only) sort their dense diagonal and emit
    basis-state eigenvectors, which scales to n <= 26 when `count` bounds
    how many pairs are materialized.  Anything else diagonalizes the
    dense matrix and is limited to n <= 12.
    """
    if not h.is_hermitian:
        raise ValueError("reference_spectrum requires a hermitian sum")
    if count is not None and count < 1:
        raise ValueError("count must be >= 1 when given")
    if h.is_diagonal:
        if count is None and h.n > DENSE_QUBIT_LIMIT:
            raise ValueError(
                f"materializing all 2**{h.n} eigenvectors is not supported; pass count"
            )
        diag = diagonal_values(h)
        order = np.argsort(diag, kind="stable")
        if count is not None:
            order = order[:count]
        return [(float(diag[i]), StateVector.basis(h.n, int(i))) for i in order]
    evals, evecs = np.linalg.eigh(dense_matrix(h))
    upto = len(evals) if count is None else min(count, len(evals))
    return [
        (float(evals[i]), StateVector(evecs[:, i], copy=True)) for i in range(upto)
    ]


def save_state(state: StateVector, path) -> None:
    """Binary dump: little-endian uint32 qubit count, then interleaved
    re/im float64 amplitudes."""
    flat = np.empty(2 * state.amps.size, dtype="<f8")
    flat[0::2] = state.amps.real
    flat[1::2] = state.amps.imag
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", state.n))
        fh.write(flat.tobytes())


def load_state(path) -> StateVector:
    """Inverse of save_state."""
    with open(path, "rb") as fh:
        (n,) = struct.unpack("<I", fh.read(4))
        raw = np.frombuffer(fh.read(), dtype="<f8")
    if raw.size != 2 << n:
        raise ValueError(f"expected {2 << n} floats for n={n}, found {raw.size}")
    return StateVector(raw[0::2] + 1j * raw[1::2], copy=False)
