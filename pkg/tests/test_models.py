"""Hamiltonian builders, bundled coefficients, and instance generators."""

import numpy as np
import pytest

from feedbackq import (
    CONTROL_KINDS,
    H2Spec,
    IsingSpec,
    MfiSpec,
    PauliSum,
    build_h2,
    build_ising,
    build_mfi,
    diagonal_values,
    random_ising,
    random_mfi,
    reference_spectrum,
    standard_controls,
)

from _oracles import dense_sum


BENCH_ISING = IsingSpec(2, ((0.0, 0.5), (0.5, 0.0)), (1.0, 2.0))


def test_two_qubit_benchmark_diagonal():
    """Z1 + 2 Z2 + 0.5 Z1Z2 has diagonal (3.5, -1.5, 0.5, -2.5)."""
    h = build_ising(BENCH_ISING)
    assert np.allclose(diagonal_values(h), [3.5, -1.5, 0.5, -2.5])
    assert h.is_diagonal and h.is_hermitian


def test_all_zero_spec_gives_empty_sum():
    h = build_ising(IsingSpec(2, ((0.0, 0.0), (0.0, 0.0)), (0.0, 0.0)))
    assert len(h) == 0


def test_single_qubit_field():
    h = build_ising(IsingSpec(1, ((0.0,),), (1.0,)))
    assert np.allclose(diagonal_values(h), [1.0, -1.0])


def test_asymmetric_couplings_rejected():
    with pytest.raises(ValueError):
        IsingSpec(2, ((0.0, 0.5), (0.4, 0.0)), (1.0, 2.0))


def test_mfi_ring_structure():
    """Periodic ring: 3n terms including the wrap-around coupling."""
    h = build_mfi(MfiSpec(12, -1.0, 0.7, 0.35))
    assert len(h) == 36
    assert h.is_hermitian
    wrap = "Z" + "I" * 10 + "Z"
    assert h.coefficient(wrap) == pytest.approx(-1.0)


def test_mfi_pure_coupling_is_diagonal():
    h = build_mfi(MfiSpec(3, 1.0, 0.0, 0.0))
    assert sorted(ops for ops, _ in h.items()) == ["IZZ", "ZIZ", "ZZI"]


def test_mfi_needs_a_ring():
    with pytest.raises(ValueError):
        MfiSpec(2, 1.0, 0.5, 0.5)


def test_h2_bundled_row():
    """The shipped table carries the R=1.05 coefficient row."""
    spec = H2Spec.from_table(1.05)
    assert spec.coefficients == pytest.approx(
        (-0.5626, -0.248783, -0.248783, 0.00850998, 0.0, 0.199984)
    )
    h = build_h2(spec)
    assert h.coefficient("XX") == pytest.approx(0.199984)
    assert h.coefficient("YY") == 0.0
    assert h.identity_coefficient == pytest.approx(-0.5626)


def test_h2_ground_energy():
    """Dense ground energy of the bundled molecule row: about -1.0904."""
    h = build_h2(H2Spec.from_table(1.05))
    vals = np.linalg.eigvalsh(dense_sum(list(h.items())))
    assert vals[0] == pytest.approx(-1.090341, abs=5e-6)


def test_h2_missing_row_lists_available():
    with pytest.raises(LookupError, match="1.05"):
        H2Spec.from_table(2.0)


def test_h2_all_zero_coefficients():
    h = build_h2(H2Spec(1.0, (0.0,) * 6))
    assert len(h) == 0


def test_random_ising_reproducible_and_bounded():
    rng_seeds = np.random.default_rng(303).integers(0, 2**32, size=8)
    for seed in rng_seeds:
        a = random_ising(5, int(seed))
        b = random_ising(5, int(seed))
        assert a == b
        flat = [v for row in a.couplings for v in row] + list(a.fields)
        assert all(-2.0 <= v <= 2.0 for v in flat)


def test_random_ising_distinct_across_seeds():
    specs = {random_ising(9, s).fields for s in range(20)}
    assert len(specs) == 20


def test_random_ising_fully_connected():
    spec = random_ising(4, 11)
    for q in range(4):
        for j in range(4):
            if q != j:
                assert spec.couplings[q][j] != 0.0
                assert spec.couplings[q][j] == spec.couplings[j][q]


def test_random_ising_needs_two_qubits():
    with pytest.raises(ValueError):
        random_ising(1, 0)


def test_random_mfi_bounds_and_fixed_coupling():
    for seed in range(50):
        spec = random_mfi(12, seed)
        assert spec.J == -1.0
        assert 0.4 <= spec.h <= 1.0
        assert 0.1 <= spec.g <= 0.6
    assert random_mfi(12, 7) == random_mfi(12, 7)


def test_standard_controls_families():
    names = set(CONTROL_KINDS)
    assert names == {"y_per_qubit", "z_per_qubit", "global_xyz", "x_mixer"}

    y = standard_controls("y_per_qubit", 2)
    assert [list(c.items()) for c in y] == [[("YI", 1.0)], [("IY", 1.0)]]

    xyz = standard_controls("global_xyz", 12)
    assert len(xyz) == 3
    assert all(len(c) == 12 for c in xyz)

    mixer = standard_controls("x_mixer", 4)
    assert len(mixer) == 1
    assert sorted(ops for ops, _ in mixer[0].items()) == [
        "IIIX", "IIXI", "IXII", "XIII"
    ]
    for family in names:
        for h in standard_controls(family, 3):
            assert h.is_hermitian


def test_unknown_control_kind_rejected():
    with pytest.raises(ValueError):
        standard_controls("w_per_qubit", 3)


def test_benchmark_first_excited_is_basis_state():
    h = build_ising(BENCH_ISING)
    pairs = reference_spectrum(h)
    assert pairs[1][0] == pytest.approx(-1.5)
    idx = int(np.argmax(np.abs(pairs[1][1].amps)))
    assert idx == 0b01
