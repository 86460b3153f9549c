import numpy as np
import pytest

from cartan_orbits import bgg
from cartan_orbits import tractor as tr
from cartan_orbits.charts import StructureKind, flat, poincare_ball, round_sphere
from cartan_orbits.errors import MarginViolation

CIRCLE = np.array([[1.0, 0.0], [0.0, -1.0], [0.6, 0.8], [-0.8, 0.6]])


def flat_section(dim, sigma, signature_=None, base=None):
    chart = flat(dim, signature_)
    conn = tr.TractorConnection(chart)
    x0 = np.zeros(dim) if base is None else np.asarray(base, float)
    return bgg.ParallelSection(conn, x0, tr.splitting_operator(chart, sigma, x0))


def test_grid_points_layout():
    pts = bgg.grid_points([(0, 1), (-1, 1)], [2, 3])
    assert pts.shape == (6, 2)
    assert np.allclose(pts[:3, 0], 0.0) and np.allclose(pts[:3, 1], [-1, 0, 1])


def test_flat_kernel_is_full_fibre():
    conn = tr.TractorConnection(flat(3))
    hol = tr.holonomy_algebra(conn, np.zeros(3), seed=2)
    sections = bgg.find_parallel_sections(conn, hol, np.zeros(3))
    assert len(sections) == 5
    metrics = bgg.find_parallel_sections(conn, hol, np.zeros(3), bgg.Representation.METRIC)
    assert len(metrics) == 15


def test_projection_examples():
    x = np.array([0.7, -0.4, 1.1])
    assert bgg.bgg_project(flat_section(3, lambda y: y[0]), x) == pytest.approx(0.7, abs=1e-10)
    quad = flat_section(3, lambda y: y @ y / 2)
    assert bgg.bgg_project(quad, x) == pytest.approx(x @ x / 2, abs=1e-10)
    affine = flat_section(3, lambda y: 1.0 - 2 * y[1] + 0.5 * y[2])
    assert bgg.bgg_project(affine, x) == pytest.approx(1.0 + 0.8 + 0.55, abs=1e-10)


def test_section_is_path_independent_on_flat_chart():
    s = flat_section(2, lambda y: (1 - y @ y) / 2)
    assert s.path_independence_residual(np.array([0.5, 0.5]), np.array([-0.3, 0.9])) < 1e-9


def test_slot_jet_matches_closed_form():
    s = flat_section(2, lambda y: y[0] * y[0] / 2 + y[1] * y[1] / 2 - y[0])
    sigma, grad, hess = bgg.NormalSolution(s).jet(np.array([0.3, -0.2]))
    assert sigma == pytest.approx(0.045 + 0.02 - 0.3)
    assert np.allclose(grad, [0.3 - 1.0, -0.2])
    assert np.allclose(hess, np.eye(2))


# -- zero strata ------------------------------------------------------------------

def test_isolated_zero_of_quadratic_scale():
    s = flat_section(2, lambda y: y @ y / 2)
    pts = np.vstack([bgg.grid_points([(-1, 1), (-1, 1)], 5), [[0.0, 0.0]]])
    report = bgg.zero_strata(bgg.NormalSolution(s), pts)
    # σ and its gradient vanish at the origin, which occurs twice
    assert report.counts["T1"] == 2 and report.counts.get("T0", 0) == 0
    assert report.stratum_geometry == {"T1": "ISOLATED"}
    assert report.notes["monotone"]


def test_unit_circle_is_a_hypersurface():
    s = flat_section(2, lambda y: (y @ y - 1) / 2)
    pts = np.vstack([CIRCLE, [[0.2, 0.1], [1.5, -0.3]]])
    report = bgg.zero_strata(bgg.NormalSolution(s), pts)
    assert report.counts["T0"] == 4 and report.counts["OPEN"] == 2
    assert report.stratum_geometry == {"T0": "HYPERSURFACE"}
    assert report.counts.get("T1", 0) == 0


def test_null_section_on_flat_lorentzian_plane():
    s = flat_section(2, lambda y: (y[0] ** 2 - y[1] ** 2) / 2, signature_=(1, 1))
    assert abs(s.g_type) < 1e-12
    pts = np.array([[0.0, 0.0], [0.5, 0.5], [-0.3, 0.3], [0.8, 0.1], [0.1, 0.8]])
    report = bgg.curved_orbit_decompose(s.conn, s, pts)
    assert [r["label"] for r in report.samples] == ["ISOLATED_MINUS", "HYPERSURFACE", "HYPERSURFACE",
                                                  "OPEN_PLUS", "OPEN_MINUS"]
    assert report.notes["labels_subset_of_model"]
    assert report.stratum_geometry == {"ISOLATED_MINUS": "ISOLATED", "HYPERSURFACE": "HYPERSURFACE"}


def test_classify_geometry_thresholds():
    assert bgg.classify_geometry(np.array([1.0, 0.0]), np.eye(2)) == "HYPERSURFACE"
    assert bgg.classify_geometry(np.zeros(2), np.eye(2)) == "ISOLATED"
    assert bgg.classify_geometry(np.zeros(2), np.diag([1.0, 0.0])) == "UNRESOLVED"


# -- invariants ---------------------------------------------------------------------

def test_tractor_length_is_constant_on_sphere():
    chart = round_sphere(3)
    x0 = np.zeros(3)
    s = bgg.ParallelSection(tr.TractorConnection(chart), x0,
                            tr.splitting_operator(chart, lambda y: y[0] + 0.5, x0))
    pts = bgg.grid_points([(-1, 1)] * 3, 3)
    assert bgg.h_constancy_residual(s, pts) < 1e-7


def test_independent_sections_project_independently():
    conn = tr.TractorConnection(flat(3))
    hol = tr.holonomy_algebra(conn, np.zeros(3), seed=0)
    sections = bgg.find_parallel_sections(conn, hol, np.zeros(3))
    pts = bgg.grid_points([(-1, 1)] * 3, 3)
    assert bgg.projection_gram_determinant(sections, pts) > 1e-6


# -- Einstein metrics --------------------------------------------------------------------

@pytest.mark.parametrize("sigma, sign, pts", [
    (lambda y: (1 - y @ y) / 2, -1, [[0.1, 0.2, 0.0], [0.5, -0.2, 0.3]]),
    (lambda y: (1 + y @ y) / 2, 1, [[0.1, 0.2, 0.0], [2.0, -0.2, 0.3]]),
    (lambda y: y[0], -1, [[0.5, 0.2, 0.0], [2.0, -1.0, 0.3]]),
])
def test_einstein_verify_flat_rescalings(sigma, sign, pts):
    assert bgg.einstein_verify(flat(3), sigma, sign, pts) < 1e-6


def test_einstein_constant_from_tractor_length():
    assert bgg.einstein_constant(1.0, 3) == -2.0
    assert bgg.einstein_constant(-1.0, 4) == 3.0
    assert bgg.einstein_constant(0.0, 3) == 0.0


def test_einstein_from_slot_jet_matches_formula():
    s = flat_section(3, lambda y: (1 - y @ y) / 2)
    sol = bgg.NormalSolution(s)
    lam = bgg.einstein_constant(s.g_type, 3)
    assert lam == pytest.approx(-2.0)
    assert bgg.einstein_verify(flat(3), sol, 0, [[0.2, 0.1, -0.3], [0.4, 0.4, 0.0]], lam=lam) < 1e-6


def test_margin_violation_near_zero_set():
    with pytest.raises(MarginViolation):
        bgg.einstein_verify(flat(2), lambda y: (1 - y @ y) / 2, -1, [[0.999, 0.0]], margin=0.01)


# -- projective metrics -------------------------------------------------------------------

def test_flat_projective_metric_has_three_orbits():
    conn = tr.TractorConnection(flat(2, kind=StructureKind.PROJECTIVE))
    s = bgg.ParallelSection(conn, np.zeros(2), np.diag([1.0, 1.0, -1.0]), bgg.Representation.METRIC)
    # the top slot is H((x, 1), (x, 1)) = |x|^2 - 1
    x = np.array([0.3, 0.4])
    assert bgg.bgg_project(s, x) == pytest.approx(x @ x - 1, abs=1e-10)
    pts = np.vstack([CIRCLE, [[0.1, 0.2], [1.5, 1.0]]])
    report = bgg.curved_orbit_decompose(conn, s, pts)
    assert report.observed_labels == {"PLUS", "ZERO", "MINUS"}
    assert report.counts["ZERO"] == 4


def test_projective_metric_of_sphere_and_ball():
    sphere = bgg.projective_metric_scenario(round_sphere(3), bgg.grid_points([(-1, 1)] * 3, 3), 1)
    assert sphere.holonomy_dim == 0 and sphere.kernel_dim == 10
    assert sphere.tractor_signature.as_tuple() == (4, 0, 0)
    assert sphere.report.observed_labels == {"PLUS"}
    assert sphere.einstein_residual < 1e-6 and sphere.induced_residual < 1e-5
    ball = bgg.projective_metric_scenario(poincare_ball(3), bgg.grid_points([(-0.5, 0.5)] * 3, 3), -1)
    assert ball.tractor_signature.as_tuple() == (3, 1, 0)
    assert ball.report.observed_labels == {"MINUS"}
    assert ball.induced_residual < 1e-5


def test_flat_projective_metric_with_constant_top_slot_is_degenerate():
    # constant H((x, 1), (x, 1)) forces H to be the square of the last coordinate
    res = bgg.projective_metric_scenario(flat(3), bgg.grid_points([(-1, 1)] * 3, 3), 0)
    assert res.kernel_dim == 10 and res.constant_dim == 1
    assert res.section is None
