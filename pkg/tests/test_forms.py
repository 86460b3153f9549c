import numpy as np
import pytest
from hypothesis import given, strategies as st

from cartan_orbits.errors import DegenerateBasis, DegenerateForm, InvalidForm, InvalidPoint
from cartan_orbits.forms import (
    HermitianForm,
    Signature,
    SymmetricForm,
    VectorClass,
    classify_vector,
    complex_to_real,
    form_from_json,
    orthocomplement,
    real_to_complex,
    restrict,
    signature,
    standard_complex_structure,
)

seeds = st.integers(0, 2**32 - 1)


def random_form(rng, n, zeros=0):
    diag = rng.choice([-1.0, 1.0], n) * rng.uniform(0.5, 3.0, n)
    diag[:zeros] = 0.0
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return q @ np.diag(diag) @ q.T, diag


@pytest.mark.parametrize("matrix, expected", [
    (np.diag([2.0, -3.0, 0.0]), (1, 1, 1)),
    ([[0.0, 1.0], [1.0, 0.0]], (1, 1, 0)),
    (np.diag([1.0, 1.0, 1.0, -1.0]), (3, 1, 0)),
])
def test_signature_examples(matrix, expected):
    assert signature(SymmetricForm(matrix)).as_tuple() == expected


def test_signature_rejects_asymmetric():
    with pytest.raises(InvalidForm):
        signature([[0.0, 1.0], [0.0, 0.0]])


def test_signature_small_drift_is_symmetrized():
    m = np.diag([1.0, -1.0]) + np.array([[0.0, 1e-14], [0.0, 0.0]])
    assert signature(m) == (1, 1, 0)


def test_signature_is_scale_free():
    assert signature(1e-6 * np.diag([1.0, -1.0, 0.0])).as_tuple() == (1, 1, 1)
    # below the absolute floor everything counts as zero
    assert signature(np.diag([1e-12, -1e-12, 0.0])).as_tuple() == (0, 0, 3)
    assert signature(np.diag([1e12, 1e-3, 0.0])).as_tuple() == (1, 0, 2)


def test_hermitian_signature_counts_complex_dimensions():
    h = HermitianForm(np.diag([1.0, 1.0, -1.0]).astype(complex))
    assert signature(h).as_tuple() == (2, 1, 0)
    assert h.real.shape == (6, 6)
    j0 = standard_complex_structure(3)
    assert np.allclose(h.real @ j0, j0 @ h.real)


def test_hermitian_rejects_non_hermitian():
    with pytest.raises(InvalidForm):
        HermitianForm([[1.0, 1j], [1j, 1.0]])


def test_complex_real_roundtrip(rng):
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    assert np.allclose(real_to_complex(complex_to_real(a)), a)
    z = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    zr = np.concatenate([z.real, z.imag])
    prod = complex_to_real(a) @ zr
    assert np.allclose(prod[:3] + 1j * prod[3:], a @ z)


def test_restrict_examples():
    m = SymmetricForm(np.diag([1.0, 1.0, -1.0]))
    assert np.allclose(restrict(m, [(1, 0, 1)]).matrix, [[0.0]])
    assert np.allclose(restrict(m, [(1, 0, 0), (0, 1, 0)]).matrix, np.eye(2))
    r = restrict(SymmetricForm(np.diag([1.0, -1.0])), [(3, 4), (4, 3)])
    # Gram entries: 9-16, 12-12, 16-9
    assert np.allclose(r.matrix, [[-7.0, 0.0], [0.0, 7.0]])
    assert signature(r) == (1, 1, 0)


def test_restrict_rejects_dependent_basis():
    with pytest.raises(DegenerateBasis):
        restrict(np.eye(3), [(1, 0, 0), (2, 0, 0)])


@pytest.mark.parametrize("v, expected", [
    ((0, 0, 1), VectorClass.NEG),
    ((3, 4, 5), VectorClass.NULL),
    ((1, 0, 0), VectorClass.POS),
])
def test_classify_vector_examples(v, expected):
    assert classify_vector(SymmetricForm(np.diag([1.0, 1.0, -1.0])), v) is expected


def test_classify_zero_vector_raises():
    with pytest.raises(InvalidPoint):
        classify_vector(np.eye(2), (0.0, 0.0))


def _same_span(a, b):
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    return np.linalg.matrix_rank(np.vstack([a, b]), tol=1e-8) == np.linalg.matrix_rank(a, tol=1e-8) \
        == np.linalg.matrix_rank(b, tol=1e-8)


def test_orthocomplement_examples():
    lor = SymmetricForm(np.diag([1.0, 1.0, -1.0]))
    assert _same_span(orthocomplement(lor, [(0, 0, 1)]), [(1, 0, 0), (0, 1, 0)])
    assert _same_span(orthocomplement(np.diag([1.0, -1.0]), [(1, 1)]), [(1, 1)])
    comp = orthocomplement(np.diag([1.0, 1.0, 1.0, -1.0]), [(1, 0, 0, 1)])
    assert comp.shape[0] == 3
    coeffs, *_ = np.linalg.lstsq(comp.T, np.array([1.0, 0, 0, 1]), rcond=None)
    assert np.allclose(comp.T @ coeffs, [1, 0, 0, 1])


def test_orthocomplement_needs_nondegenerate_form():
    with pytest.raises(DegenerateForm):
        orthocomplement(np.diag([1.0, 0.0]), [(1, 0)])


def test_form_json_roundtrip():
    s = SymmetricForm(np.diag([1.0, -2.0]))
    assert np.allclose(form_from_json(s.to_json()).matrix, s.matrix)
    h = HermitianForm([[1.0, 1j], [-1j, -1.0]])
    assert np.allclose(form_from_json(h.to_json()).matrix, h.matrix)


def test_signature_rejects_negative_counts():
    with pytest.raises(ValueError):
        Signature(-1, 0, 0)


@given(seeds, st.integers(1, 6), st.integers(0, 2))
def test_signature_congruence_invariant(seed, n, zeros):
    rng = np.random.default_rng(seed)
    zeros = min(zeros, n - 1)
    m, diag = random_form(rng, n, zeros)
    expected = (int(np.sum(diag > 0)), int(np.sum(diag < 0)), zeros)
    assert signature(m).as_tuple() == expected
    a = rng.standard_normal((n, n)) + 3 * np.eye(n)
    assert signature(a.T @ m @ a).as_tuple() == expected


def test_congruence_suite_100_cases():
    rng = np.random.default_rng(2024)
    violations = 0
    for _ in range(100):
        n = int(rng.integers(2, 7))
        m, _ = random_form(rng, n)
        a = rng.standard_normal((n, n))
        if abs(np.linalg.det(a)) < 1e-3:
            a += np.eye(n)
        violations += signature(a.T @ m @ a) != signature(m)
    assert violations == 0


@given(seeds, st.floats(0.01, 100.0), st.booleans())
def test_classify_vector_ray_invariant(seed, scale, flip):
    rng = np.random.default_rng(seed)
    m, _ = random_form(rng, 4)
    v = rng.standard_normal(4)
    lam = -scale if flip else scale
    assert classify_vector(m, lam * v) is classify_vector(m, v)


@given(seeds)
def test_classify_vector_line_invariant_hermitian(seed):
    rng = np.random.default_rng(seed)
    h = HermitianForm(np.diag([1.0, -1.0, 1.0]).astype(complex))
    z = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    lam = complex(*rng.standard_normal(2))
    assert classify_vector(h, lam * z) is classify_vector(h, z)


def test_restrict_signature_matches_brute_force():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n = int(rng.integers(2, 7))
        k = int(rng.integers(1, n + 1))
        m, _ = random_form(rng, n)
        basis = rng.standard_normal((k, n))
        gram = basis @ m @ basis.T
        ev = np.linalg.eigvalsh(gram)
        eps = 1e-9 * np.max(np.abs(ev))
        expected = (int(np.sum(ev > eps)), int(np.sum(ev < -eps)), int(np.sum(np.abs(ev) <= eps)))
        assert signature(restrict(m, basis)).as_tuple() == expected


@given(seeds, st.integers(2, 6))
def test_orthocomplement_involution(seed, n):
    rng = np.random.default_rng(seed)
    m, _ = random_form(rng, n)
    k = int(rng.integers(1, n))
    basis = rng.standard_normal((k, n))
    back = orthocomplement(m, orthocomplement(m, basis))
    assert _same_span(back, basis)


@given(seeds)
def test_hermitian_orthocomplement_is_orthogonal(seed):
    rng = np.random.default_rng(seed)
    h = HermitianForm(np.diag([1.0, -1.0, 1.0]).astype(complex))
    z = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    comp = orthocomplement(h, [z])
    assert comp.shape[0] == 2
    assert np.allclose([h(z, w) for w in comp], 0.0, atol=1e-10)
