import numpy as np
import pytest
from hypothesis import given, strategies as st

from cartan_orbits import lie
from cartan_orbits import model as mdl
from cartan_orbits.errors import InvalidDirection, InvalidForm, InvalidPoint, ScenarioMismatch
from cartan_orbits.forms import SymmetricForm, signature
from cartan_orbits.model import Label

seeds = st.integers(0, 2**32 - 1)


def conformal_vector(model, kind):
    p, q = model.signature
    frame = np.zeros(p + q + 2)
    if kind == "positive":
        frame[0] = 1.0
    elif kind == "negative":
        frame[p + 1] = 1.0
    else:
        frame[0] = frame[p + 1] = 1.0
    return mdl.ReductionDatum.vector(model.from_orthonormal(frame))


def projective_form(p, q):
    return mdl.ReductionDatum.symmetric_form(np.diag([1.0] * p + [-1.0] * q))


# -- models ---------------------------------------------------------------------

@pytest.mark.parametrize("build, dim", [
    (lambda: mdl.projective_model(3), 3),
    (lambda: mdl.conformal_model(2, 1), 3),
    (lambda: mdl.conformal_model(1, 1), 2),
    (lambda: mdl.complex_projective_model(2), 4),
    (lambda: mdl.cr_model(0, 1), 3),
])
def test_model_dimensions(build, dim):
    m = build()
    assert m.dimension == dim
    assert m.g_minus.dim == dim


def test_witt_frame_is_orthonormal():
    w = mdl.witt_form(2, 1)
    c = mdl.witt_orthonormal_frame(2, 1)
    assert np.allclose(c.T @ w @ c, np.diag([1.0, 1.0, 1.0, -1.0, -1.0]))


def test_base_point_must_be_isotropic():
    with pytest.raises(ValueError):
        mdl.HomogeneousModel("bad", (2, 0), 3, SymmetricForm(np.eye(3)), mdl.Quotient.RAY,
                             lie.orthogonal_algebra(np.eye(3)), (1, 1, 1))


def test_model_point_normalisation():
    pt = mdl.conformal_model(2, 1).point(5.0 * np.eye(5)[0])
    assert 0.5 <= np.linalg.norm(pt.representative) <= 2.0


def test_non_isotropic_point_rejected():
    m = mdl.conformal_model(2, 1)
    with pytest.raises(InvalidPoint):
        mdl.p_type(m, conformal_vector(m, "positive"), np.eye(5)[1])


def test_datum_model_mismatch():
    with pytest.raises(ScenarioMismatch):
        mdl.p_type(mdl.projective_model(2), conformal_vector(mdl.conformal_model(1, 0), "positive"),
                   np.ones(3))


def test_datum_invariants():
    with pytest.raises(InvalidForm):
        mdl.ReductionDatum.complex_structure(np.eye(2))
    with pytest.raises(InvalidForm):
        mdl.ReductionDatum.three_form(np.ones((3, 3, 3)))


def test_datum_json_roundtrip():
    d = projective_form(2, 1)
    back = mdl.ReductionDatum.from_json(d.to_json())
    assert back.variant is d.variant and np.allclose(back.payload, d.payload)


# -- P-types ----------------------------------------------------------------------

def test_p_type_projective_example():
    m = mdl.projective_model(2)
    assert mdl.p_type(m, projective_form(2, 1), [0, 0, 1]) is Label.MINUS


def test_p_type_null_conformal_at_datum():
    m = mdl.conformal_model(1, 1)
    v = conformal_vector(m, "null")
    assert mdl.p_type(m, v, v.payload) is Label.ISOLATED_PLUS
    assert mdl.p_type(m, v, -v.payload) is Label.ISOLATED_MINUS


def test_p_type_fefferman_single(rng):
    m = mdl.conformal_model(1, 1)
    j = mdl.fefferman_complex_structure(m)
    pts = mdl.uniform_points(m, rng, 1000)
    assert {mdl.p_type(m, j, x) for x in pts} == {Label.SINGLE}


@pytest.mark.parametrize("make, expected", [
    (lambda: (mdl.projective_model(2), projective_form(2, 1)), 3),
    (lambda: (mdl.complex_projective_model(2),
              mdl.ReductionDatum.hermitian_form(np.diag([1.0, 1.0, -1.0]).astype(complex))), 3),
    (lambda: (mdl.conformal_model(2, 1), conformal_vector(mdl.conformal_model(2, 1), "positive")), 3),
    (lambda: (mdl.conformal_model(1, 1), conformal_vector(mdl.conformal_model(1, 1), "null")), 5),
    (lambda: (mdl.cr_model(0, 1), conformal_vector(mdl.cr_model(0, 1), "negative")), 2),
])
def test_observed_labels_equal_declared(make, expected):
    m, d = make()
    rng = np.random.default_rng(0)
    pts = np.vstack([mdl.uniform_points(m, rng, 500)] + mdl.targeted_points(m, d))
    labels = {mdl.p_type(m, d, x) for x in pts} - {Label.AMBIGUOUS}
    assert labels == mdl.declared_labels(m, d)
    assert len(labels) == expected


def test_riemannian_conformal_negative_vector_has_no_zero():
    m = mdl.conformal_model(3, 0)
    d = conformal_vector(m, "negative")
    rep = mdl.orbit_decompose_grid(m, d, mdl.uniform_points(m, np.random.default_rng(1), 500))
    assert rep.frequencies().get("ZERO", 0.0) == 0.0
    assert Label.ZERO not in mdl.declared_labels(m, d)


# -- label invariance ---------------------------------------------------------------

@given(seeds, st.floats(0.01, 100.0))
def test_ray_rescaling_invariance(seed, lam):
    m = mdl.conformal_model(2, 1)
    d = conformal_vector(m, "positive")
    x = mdl.uniform_points(m, np.random.default_rng(seed), 1)[0]
    assert mdl.p_type(m, d, lam * x) is mdl.p_type(m, d, x)


@given(seeds, st.floats(0.01, 100.0), st.booleans())
def test_line_rescaling_invariance_projective_form(seed, lam, flip):
    m = mdl.projective_model(3)
    d = projective_form(3, 1)
    x = mdl.uniform_points(m, np.random.default_rng(seed), 1)[0]
    scale = -lam if flip else lam
    assert mdl.p_type(m, d, scale * x) is mdl.p_type(m, d, x)


@given(seeds, st.floats(0.1, 10.0), st.floats(0, 2 * np.pi))
def test_complex_line_rescaling_invariance(seed, r, phase):
    m = mdl.cr_model(1, 1)
    d = conformal_vector(m, "negative")
    x = mdl.uniform_points(m, np.random.default_rng(seed), 1)[0]
    half = x.size // 2
    z = (x[:half] + 1j * x[half:]) * r * np.exp(1j * phase)
    assert mdl.p_type(m, d, np.concatenate([z.real, z.imag])) is mdl.p_type(m, d, x)


def test_rescaling_suite_100_cases():
    rng = np.random.default_rng(99)
    cases = [(mdl.projective_model(3), projective_form(3, 1), "line"),
             (mdl.conformal_model(2, 1), conformal_vector(mdl.conformal_model(2, 1), "positive"), "ray"),
             (mdl.complex_projective_model(2),
              mdl.ReductionDatum.hermitian_form(np.diag([1.0, -1.0, 1.0]).astype(complex)), "complex")]
    violations = 0
    for i in range(100):
        m, d, mode = cases[i % 3]
        x = mdl.uniform_points(m, rng, 1)[0]
        if mode == "complex":
            half = x.size // 2
            z = (x[:half] + 1j * x[half:]) * complex(*rng.standard_normal(2))
            y = np.concatenate([z.real, z.imag])
        else:
            lam = rng.uniform(0.1, 10)
            y = (lam if mode == "ray" else -lam) * x
        violations += mdl.p_type(m, d, y) is not mdl.p_type(m, d, x)
    assert violations == 0


# -- model solutions and the flow identity -------------------------------------------------

def test_model_solution_identity_and_composition(rng):
    m = mdl.projective_model(2)
    d = projective_form(2, 1)
    assert np.allclose(mdl.model_solution_value(d, np.eye(3)).payload, d.payload)
    g1, g2 = (lie.exponential(m.algebra.sample(rng, 0.4)) for _ in range(2))
    direct = mdl.model_solution_value(d, g1 @ g2).payload
    staged = mdl.model_solution_value(mdl.model_solution_value(d, g1), g2).payload
    assert np.allclose(direct, staged)


def test_model_solution_boost_congruence():
    d = projective_form(2, 1)
    t = 0.7
    boost = np.array([[np.cosh(t), 0, np.sinh(t)], [0, 1, 0], [np.sinh(t), 0, np.cosh(t)]])
    out = mdl.model_solution_value(d, boost).payload
    # g^{-1} . M = g^T M g
    assert np.allclose(out, boost.T @ d.payload @ boost)
    assert signature(out) == signature(d.payload)


def test_flow_identity_zero_direction():
    m = mdl.projective_model(3)
    assert mdl.flow_identity_check(m, projective_form(3, 1), np.eye(4), np.zeros((4, 4))) == 0.0


@pytest.mark.parametrize("make", [
    lambda: (mdl.projective_model(3), projective_form(3, 1)),
    lambda: (mdl.conformal_model(2, 1), conformal_vector(mdl.conformal_model(2, 1), "null")),
    lambda: (mdl.complex_projective_model(2),
             mdl.ReductionDatum.hermitian_form(np.diag([1.0, 1.0, -1.0]).astype(complex))),
    lambda: (mdl.cr_model(0, 1), conformal_vector(mdl.cr_model(0, 1), "negative")),
])
def test_flow_identity_random(make):
    m, d = make()
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        u = lie.exponential(m.algebra.sample(rng, 0.5))
        x = m.g_minus.sample(rng)
        x *= rng.uniform() / np.linalg.norm(x)
        worst = max(worst, mdl.flow_identity_check(m, d, u, x))
    assert worst < 1e-9


def test_flow_identity_rejects_parabolic_direction():
    m = mdl.projective_model(2)
    with pytest.raises(InvalidDirection):
        mdl.flow_identity_check(m, projective_form(2, 1), np.eye(3), m.parabolic[0])


# -- orbit decomposition ------------------------------------------------------------------

def test_projective_zero_stratum_is_hypersurface():
    m = mdl.projective_model(2)
    d = projective_form(2, 1)
    rng = np.random.default_rng(5)
    # points on the null cone of diag(1, 1, -1)
    theta = rng.uniform(0, 2 * np.pi, 20)
    pts = np.column_stack([np.cos(theta), np.sin(theta), np.ones_like(theta)])
    rep = mdl.orbit_decompose_grid(m, d, pts)
    assert rep.observed_labels == {"ZERO"}
    assert all(s["grad_norm"] > 1e-3 for s in rep.samples)
    assert rep.stratum_geometry == {"ZERO": "HYPERSURFACE"}


def test_cr_zero_stratum_is_codimension_two():
    m = mdl.cr_model(0, 1)
    d = conformal_vector(m, "negative")
    rep = mdl.orbit_decompose_grid(m, d, np.array(mdl.targeted_points(m, d)))
    assert rep.stratum_geometry == {"ZERO": "CODIM2"}


def test_null_isolated_points_have_vanishing_gradient():
    m = mdl.conformal_model(1, 1)
    d = conformal_vector(m, "null")
    rep = mdl.orbit_decompose_grid(m, d, np.array(mdl.targeted_points(m, d)))
    assert rep.stratum_geometry["ISOLATED_PLUS"] == "ISOLATED"
    assert rep.stratum_geometry["HYPERSURFACE"] == "HYPERSURFACE"


def test_decompose_threads_match_serial():
    m = mdl.projective_model(3)
    d = projective_form(3, 1)
    pts = mdl.uniform_points(m, np.random.default_rng(8), 200)
    a = mdl.orbit_decompose_grid(m, d, pts, threads=1)
    b = mdl.orbit_decompose_grid(m, d, pts, threads=4)
    assert a.csv_text() == b.csv_text()


# -- H-orbits and stabilizers -----------------------------------------------------------------

def test_h_orbit_identity_has_no_disagreement(rng):
    m = mdl.projective_model(3)
    d = projective_form(3, 1)
    x = mdl.uniform_points(m, rng, 1)[0]
    assert mdl.h_orbit_invariance_check(m, d, x, 10, rng, scale=0.0) == 0


def test_h_orbit_invariance_projective_500():
    m = mdl.projective_model(3)
    d = projective_form(3, 1)
    rng = np.random.default_rng(11)
    pts = list(mdl.uniform_points(m, rng, 50)) + mdl.targeted_points(m, d)
    reps = {mdl.p_type(m, d, x): x for x in pts}
    h = mdl.stabilizer(m, d)
    assert sum(mdl.h_orbit_invariance_check(m, d, x, 500, rng, 0.5, h) for x in reps.values()) == 0


def test_stabilizer_pair_projective_plus():
    m = mdl.projective_model(2)
    d = projective_form(2, 1)
    h, inter = mdl.stabilizer_pair(m, d, [1.0, 0.0, 0.0])
    assert (h.dim, inter.dim) == (lie.so_dim(3), lie.so_dim(2))


def test_stabilizer_pair_conformal_zero():
    m = mdl.conformal_model(2, 1)
    d = conformal_vector(m, "positive")
    x = mdl.targeted_points(m, d)[0]
    assert mdl.p_type(m, d, x) is Label.ZERO
    h, inter = mdl.stabilizer_pair(m, d, x)
    assert h.dim == lie.so_dim(4)
    assert inter.dim == lie.so_dim(4) - (3 - 1)


def test_stabilizer_pair_cr_open():
    m = mdl.cr_model(1, 1)
    d = conformal_vector(m, "negative")
    x = next(x for x in mdl.uniform_points(m, np.random.default_rng(2), 20)
             if mdl.p_type(m, d, x) is Label.OPEN)
    h, inter = mdl.stabilizer_pair(m, d, x)
    assert h.dim == lie.su_dim(3)
    assert inter.dim == lie.su_dim(2)


@pytest.mark.parametrize("p, q", [(2, 1), (1, 1), (3, 0)])
def test_stabilizer_dimensions(p, q):
    m = mdl.conformal_model(p, q)
    n = p + q
    assert mdl.stabilizer(m, conformal_vector(m, "positive")).dim == lie.so_dim(n + 1)
    assert mdl.stabilizer(m, conformal_vector(m, "negative")).dim == lie.so_dim(n + 1)
    assert mdl.stabilizer(m, conformal_vector(m, "null")).dim == n * (n - 1) // 2 + n
    cr = mdl.cr_model(p, q)
    assert mdl.stabilizer(cr, conformal_vector(cr, "negative")).dim == lie.su_dim(n + 1)


def test_g2_three_form_datum():
    m = mdl.conformal_model(2, 3)
    h = mdl.stabilizer(m, mdl.g2_three_form_datum(m))
    assert h.dim == 14
    assert h.closure_residual < 1e-8
