"""Symbolic algebra over n-qubit Pauli strings.

Operators are represented as sums of Pauli strings with complex
coefficients.  Qubit 0 is the leftmost factor of the tensor product and
the most significant bit of basis-state labels, so the string "ZI" acts
as Z on qubit 0 and identity on qubit 1.

Canonical form: within a sum, no two terms share an ops string,
coefficients below 1e-14 in magnitude are pruned, and terms are ordered
lexicographically with I < X < Y < Z (plain string order does this).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence, Tuple, Union

PRUNE_TOL = 1e-14
HERMITIAN_TOL = 1e-12

_LETTERS = frozenset("IXYZ")

# Single-qubit products a*b -> (phase, letter).
_MUL = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("Y", "I"): (1, "Y"), ("Z", "I"): (1, "Z"),
    ("X", "X"): (1, "I"), ("Y", "Y"): (1, "I"), ("Z", "Z"): (1, "I"),
    ("X", "Y"): (1j, "Z"), ("Y", "Z"): (1j, "X"), ("Z", "X"): (1j, "Y"),
    ("Y", "X"): (-1j, "Z"), ("Z", "Y"): (-1j, "X"), ("X", "Z"): (-1j, "Y"),
}


def _check_ops(ops: str) -> str:
    if not ops:
        raise ValueError("Pauli string must cover at least one qubit")
    bad = set(ops) - _LETTERS
    if bad:
        raise ValueError(f"invalid Pauli letters {sorted(bad)} in {ops!r}")
    return ops


@dataclass(frozen=True)
class PauliTerm:
    """One Pauli string with a complex coefficient."""

    ops: str
    coeff: complex = 1.0

    def __post_init__(self) -> None:
        _check_ops(self.ops)
        object.__setattr__(self, "coeff", complex(self.coeff))

    @property
    def n(self) -> int:
        return len(self.ops)

    @property
    def is_identity(self) -> bool:
        return set(self.ops) == {"I"}

    def __repr__(self) -> str:
        return f"PauliTerm({self.ops!r}, {self.coeff!r})"


def mul_terms(a: PauliTerm, b: PauliTerm) -> PauliTerm:
    """Operator product a*b as a single term, phase folded into the coefficient."""
    if len(a.ops) != len(b.ops):
        raise ValueError(f"qubit count mismatch: {len(a.ops)} vs {len(b.ops)}")
    phase = 1 + 0j
    letters = []
    for pa, pb in zip(a.ops, b.ops):
        ph, letter = _MUL[(pa, pb)]
        phase *= ph
        letters.append(letter)
    return PauliTerm("".join(letters), a.coeff * b.coeff * phase)


def strings_anticommute(a: str, b: str) -> bool:
    """True when the two Pauli strings anticommute (odd number of clashing factors)."""
    if len(a) != len(b):
        raise ValueError(f"qubit count mismatch: {len(a)} vs {len(b)}")
    clashes = sum(1 for pa, pb in zip(a, b) if pa != "I" and pb != "I" and pa != pb)
    return clashes % 2 == 1


TermLike = Union[PauliTerm, Tuple[str, complex]]


class PauliSum:
    """Canonicalized sum of Pauli terms on a fixed qubit count."""

    __slots__ = ("_coeffs", "_n")

    def __init__(self, terms: Iterable[TermLike] = (), n: int | None = None):
        coeffs: dict[str, complex] = {}
        for item in terms:
            if isinstance(item, PauliTerm):
                ops, c = item.ops, item.coeff
            else:
                ops, c = item
                _check_ops(ops)
                c = complex(c)
            if n is None:
                n = len(ops)
            elif len(ops) != n:
                raise ValueError(f"qubit count mismatch: {len(ops)} vs {n}")
            coeffs[ops] = coeffs.get(ops, 0j) + c
        if n is None:
            raise ValueError("empty PauliSum needs an explicit qubit count n")
        self._n = int(n)
        self._coeffs = {
            ops: c for ops, c in sorted(coeffs.items()) if abs(c) > PRUNE_TOL
        }

    @property
    def n(self) -> int:
        return self._n

    @property
    def terms(self) -> Tuple[PauliTerm, ...]:
        return tuple(PauliTerm(ops, c) for ops, c in self._coeffs.items())

    @property
    def is_hermitian(self) -> bool:
        return all(abs(c.imag) <= HERMITIAN_TOL for c in self._coeffs.values())

    @property
    def is_diagonal(self) -> bool:
        """True when every term uses only I and Z letters."""
        return all(set(ops) <= {"I", "Z"} for ops in self._coeffs)

    def coefficient(self, ops: str) -> complex:
        return self._coeffs.get(ops, 0j)

    @property
    def identity_coefficient(self) -> complex:
        return self._coeffs.get("I" * self._n, 0j)

    def items(self) -> Iterator[Tuple[str, complex]]:
        return iter(self._coeffs.items())

    def __len__(self) -> int:
        return len(self._coeffs)

    def __iter__(self) -> Iterator[PauliTerm]:
        return iter(self.terms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self._n == other._n and self._coeffs == other._coeffs

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if not isinstance(other, PauliSum):
            return NotImplemented
        return PauliSum(list(self.terms) + list(other.terms), n=self._n)

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self + (-1.0) * other

    def __mul__(self, scalar: complex) -> "PauliSum":
        return PauliSum([(ops, c * scalar) for ops, c in self._coeffs.items()], n=self._n)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"PauliSum({format_sum(self)!r})"

    def __str__(self) -> str:
        return format_sum(self)


def product(a: PauliSum, b: PauliSum) -> PauliSum:
    """Full operator product a*b expanded back into a canonical sum."""
    if a.n != b.n:
        raise ValueError(f"qubit count mismatch: {a.n} vs {b.n}")
    out = []
    for ta in a:
        for tb in b:
            out.append(mul_terms(ta, tb))
    return PauliSum(out, n=a.n)


def commutator_i(a: PauliSum, b: PauliSum) -> PauliSum:
    """Canonicalized expansion of i[a, b] = i(ab - ba) for hermitian sums.

    Pairs of commuting strings cancel exactly and are skipped; for an
    anticommuting pair i(ab - ba) = 2i*ab, so each surviving pair
    contributes a single product term.  The result is hermitian.
    """
    if a.n != b.n:
        raise ValueError(f"qubit count mismatch: {a.n} vs {b.n}")
    if not (a.is_hermitian and b.is_hermitian):
        raise ValueError("commutator_i expects hermitian inputs")
    out = []
    for ta in a:
        for tb in b:
            if strings_anticommute(ta.ops, tb.ops):
                prod = mul_terms(ta, tb)
                out.append(PauliTerm(prod.ops, 2j * prod.coeff))
    return PauliSum(out, n=a.n)


def one_norm(h: PauliSum) -> float:
    """Sum of absolute coefficients, excluding the all-identity term."""
    ident = "I" * h.n
    return float(sum(abs(c) for ops, c in h.items() if ops != ident))


def format_sum(h: PauliSum) -> str:
    """Render a sum as `+1.0*ZI +2.0*IZ +0.5*ZZ` (terms in canonical order)."""
    parts = []
    for ops, c in h.items():
        if abs(c.imag) > HERMITIAN_TOL:
            raise ValueError(f"cannot format non-real coefficient {c} for {ops}")
        v = c.real
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign}{abs(v)!r}*{ops}")
    return " ".join(parts) if parts else "0"

def parse_sum(text: str, n: int | None = None) -> PauliSum:
    """Inverse of format_sum.  The qubit count is taken from the first term
    unless the text is the empty sum "0", in which case n is required."""
    stripped = text.strip()
    if stripped == "0" or not stripped:
        if n is None:
            raise ValueError("parsing an empty sum requires an explicit n")
        return PauliSum((), n=n)
    terms = []
    for token in stripped.split():
        if "*" not in token:
            raise ValueError(f"malformed term {token!r} (expected COEFF*OPS)")
        coeff_text, ops = token.rsplit("*", 1)
        terms.append((_check_ops(ops), float(coeff_text)))
    return PauliSum(terms, n=n)
