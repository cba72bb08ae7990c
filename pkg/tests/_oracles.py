"""Dense matrix oracles built straight from Kronecker products.

Everything here is deliberately independent of the package internals:
operators are assembled letter by letter with ``np.kron`` and evolved
through eigendecompositions, so any agreement with the fast masked
kernels is a genuine cross-check rather than a shared-code tautology.
"""

from __future__ import annotations

import numpy as np

SINGLE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}


def dense_string(ops: str) -> np.ndarray:
    """Kronecker product with qubit 0 as the leftmost (most significant) factor."""
    out = np.array([[1.0 + 0.0j]])
    for letter in ops:
        out = np.kron(out, SINGLE[letter])
    return out


def dense_sum(terms) -> np.ndarray:
    """Dense matrix of a list of (pauli string, coefficient) pairs."""
    first = terms[0][0]
    dim = 2 ** len(first)
    out = np.zeros((dim, dim), dtype=complex)
    for ops, coeff in terms:
        out = out + complex(coeff) * dense_string(ops)
    return out


def dense_commutator_i(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return 1.0j * (a @ b - b @ a)


def dense_expm_unitary(h: np.ndarray, t: float) -> np.ndarray:
    """exp(-i t H) for hermitian H via eigendecomposition."""
    vals, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(-1.0j * t * vals)) @ vecs.conj().T


def dense_evolve(amps: np.ndarray, h: np.ndarray, t: float) -> np.ndarray:
    return dense_expm_unitary(h, t) @ amps


def random_pauli_terms(rng: np.random.Generator, n: int, count: int, real: bool = True):
    """Distinct random strings with coefficients suitable for a hermitian sum."""
    seen = {}
    count = min(count, 4 ** n)
    while len(seen) < count:
        ops = "".join(rng.choice(list("IXYZ")) for _ in range(n))
        coeff = float(rng.uniform(-2.0, 2.0))
        if not real:
            coeff = complex(coeff, float(rng.uniform(-2.0, 2.0)))
        seen[ops] = coeff
    return list(seen.items())


def random_state(rng: np.random.Generator, n: int) -> np.ndarray:
    amps = rng.normal(size=2**n) + 1.0j * rng.normal(size=2**n)
    return amps / np.linalg.norm(amps)
