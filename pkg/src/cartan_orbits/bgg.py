"""Parallel tractors, their normal solutions and curved orbit decompositions.

A parallel section is found at a basepoint as a joint kernel of the holonomy
algebra and extended over the chart by radial parallel transport.  Its
projection to the top slot is the normal solution ``σ``; zero loci of
increasing order and the P-type of every grid point are read from the slots.

Two representations are supported: the standard tractor bundle (conformal
almost Einstein scales) and symmetric bilinear forms on it (projective
metrics, whose top slot is ``H(X, X)`` for the distinguished line ``X``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import jax
import jax.numpy as jnp
import numpy as np
from scipy.linalg import null_space

from . import lie
from . import model as mdl
from .charts import ChartGeometry, StructureKind
from .errors import MarginViolation, ScenarioMismatch
from .forms import Signature, SymmetricForm, signature
from .report import StrataReport
from .tractor import TRANSPORT_TOL, Path, TractorConnection, holonomy_algebra

KERNEL_TOL = 1e-8
ZERO_FLOOR = 1e-10
GEOMETRY_TOL = 1e-6
CONSTANCY_TOL = 1e-7
AMBIGUITY_FACTOR = mdl.AMBIGUITY_FACTOR


class Representation:
    STANDARD = "standard"
    METRIC = "metric"


def grid_points(box: Sequence[Sequence[float]], resolution: int | Sequence[int]) -> np.ndarray:
    """Tensor grid over a box, one point per row, first coordinate slowest."""
    box = np.asarray(box, dtype=float)
    res = [resolution] * len(box) if np.isscalar(resolution) else list(resolution)
    axes = [np.linspace(lo, hi, int(r)) for (lo, hi), r in zip(box, res)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _sym_basis(m: int) -> np.ndarray:
    out = []
    for i in range(m):
        for j in range(i, m):
            e = np.zeros((m, m))
            e[i, j] = e[j, i] = 1.0 if i == j else 1 / np.sqrt(2)
            out.append(e)
    return np.array(out)


class ParallelSection:
    """A parallel tractor determined by its value at a basepoint."""

    def __init__(self, conn: TractorConnection, basepoint, base_value,
                 representation: str = Representation.STANDARD, tol: float = TRANSPORT_TOL):
        self.conn = conn
        self.basepoint = conn.chart.check_point(basepoint)
        self.base_value = np.array(base_value, dtype=float)
        self.representation = representation
        self.tol = tol

    def __repr__(self):
        return f"ParallelSection({self.representation}, base={self.base_value.round(6).tolist()})"

    @property
    def g_type(self):
        """``h(s, s)`` for standard tractors, the signature for tractor metrics."""
        if self.representation == Representation.METRIC:
            return signature(self.base_value)
        h = self.conn.fiber_metric(self.basepoint)
        if h is None:
            return None
        return float(self.base_value @ h @ self.base_value)

    def transports(self, points) -> np.ndarray:
        return self.conn.radial_transports(self.basepoint, points, self.tol)

    def _apply(self, t: np.ndarray) -> np.ndarray:
        if self.representation == Representation.METRIC:
            tinv = np.linalg.inv(t)
            return tinv.T @ self.base_value @ tinv
        return t @ self.base_value

    def value(self, x) -> np.ndarray:
        return self._apply(self.transports([x])[0])

    def values(self, points) -> np.ndarray:
        return np.array([self._apply(t) for t in self.transports(points)])

    def value_along(self, path: Path) -> np.ndarray:
        """Value at ``path.end`` obtained by transport along ``path`` from the basepoint."""
        if not np.allclose(path.start, self.basepoint):
            raise ValueError("path must start at the basepoint")
        return self._apply(self.conn.transport_matrix(path, self.tol))

    def path_independence_residual(self, x, via) -> float:
        """Difference between radial transport and transport through ``via``."""
        other = self.value_along(Path.polyline([self.basepoint, via, x]))
        return float(np.max(np.abs(other - self.value(x))))

    def derivatives(self, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Value, first and second coordinate derivatives from ``∇ s = 0``."""
        a, da = self.conn.jet(x)
        dA = np.einsum("aijb->abij", da)  # dA[a, b] = ∂_b A_a
        v = self.value(x)
        if self.representation == Representation.METRIC:
            d1 = np.einsum("aji,jk->aik", a, v) + np.einsum("ij,ajk->aik", v, a)

            def dd(b, c):
                term = dA[b, c].T @ v + v @ dA[b, c]
                return term + a[b].T @ d1[c] + d1[c] @ a[b]
        else:
            d1 = -np.einsum("aij,j->ai", a, v)

            def dd(b, c):
                return -dA[b, c] @ v - a[b] @ d1[c]
        n = self.conn.dim
        d2 = np.array([[dd(b, c) for c in range(n)] for b in range(n)])
        return v, d1, 0.5 * (d2 + np.swapaxes(d2, 0, 1))


def find_parallel_sections(conn: TractorConnection, holonomy: lie.AlgebraBasis, basepoint,
                           representation: str = Representation.STANDARD,
                           tol: float = KERNEL_TOL) -> list[ParallelSection]:
    """Sections whose basepoint values span the joint kernel of the holonomy."""
    m = conn.fiber_dim
    if representation == Representation.METRIC:
        basis = _sym_basis(m)
        if holonomy.dim == 0:
            coeffs = np.eye(len(basis))
        else:
            system = np.array([[np.ravel(lie.act_bilinear(a, e)) for e in basis]
                               for a in holonomy.elements])
            system = system.transpose(0, 2, 1).reshape(-1, len(basis))
            coeffs = null_space(system, rcond=tol)
        values = np.einsum("kc,kij->cij", coeffs, basis)
    else:
        if holonomy.dim == 0:
            values = np.eye(m)
        else:
            values = null_space(holonomy.elements.reshape(-1, m), rcond=tol).T
    return [ParallelSection(conn, basepoint, v, representation) for v in values]


@dataclass
class NormalSolution:
    """Top slot of a parallel section; ``formula`` optionally gives a closed form."""

    source: ParallelSection
    formula: Callable | None = None

    def top(self, value: np.ndarray) -> float:
        if self.source.representation == Representation.METRIC:
            return float(value[-1, -1])
        return float(value[0])

    def __call__(self, x) -> float:
        return self.top(self.source.value(x))

    def on(self, points) -> np.ndarray:
        return np.array([self.top(v) for v in self.source.values(points)])

    def jet(self, x) -> tuple[float, np.ndarray, np.ndarray]:
        """``σ``, its gradient and coordinate Hessian at ``x``."""
        v, d1, d2 = self.source.derivatives(x)
        if self.source.representation == Representation.METRIC:
            return float(v[-1, -1]), d1[:, -1, -1], d2[:, :, -1, -1]
        return float(v[0]), d1[:, 0], d2[:, :, 0]


def bgg_project(s: ParallelSection, x) -> float:
    return NormalSolution(s)(x)


# -- zero loci ------------------------------------------------------------------

def _filtration(s: ParallelSection) -> list[tuple[str, Callable[[np.ndarray], np.ndarray]]]:
    """Subspaces ``U`` in increasing order of vanishing, as component extractors."""
    if s.representation == Representation.METRIC:
        return [("Z0", lambda v: v[-1:, -1]), ("Z1", lambda v: v[:, -1])]
    n = s.conn.dim
    if s.conn.kind is StructureKind.CONFORMAL:
        return [("T0", lambda v: v[:1]), ("T1", lambda v: v[: n + 1])]
    return [("T1", lambda v: v[:n])]


def classify_geometry(grad: np.ndarray, hess: np.ndarray, tol: float = GEOMETRY_TOL) -> str:
    g = float(np.linalg.norm(grad))
    if g > 10 * tol:
        return "HYPERSURFACE"
    if g <= tol and abs(np.linalg.det(hess)) > tol:
        return "ISOLATED"
    return "UNRESOLVED"


def zero_strata(solution: NormalSolution, points, tol: float = 1e-8,
                geometry_tol: float = GEOMETRY_TOL, scenario: str = "zero-strata") -> StrataReport:
    """Membership of ``s(x)`` in each filtration subspace plus local geometry of ``Z(σ)``.

    The label of a point is the smallest subspace containing ``s(x)``, or
    ``OPEN`` when ``σ(x) != 0``.
    """
    s = solution.source
    levels = _filtration(s)
    pts = np.atleast_2d(np.asarray(points, float))
    values = s.values(pts)
    report = StrataReport(scenario, ["OPEN"] + [name for name, _ in levels])
    geometry: dict[str, set] = {}
    monotone = True
    for x, v in zip(pts, values):
        thresh = max(tol * float(np.linalg.norm(v)), ZERO_FLOOR)
        member = [bool(np.all(np.abs(extract(v)) <= thresh)) for _, extract in levels]
        monotone &= all(a or not b for a, b in zip(member, member[1:]))
        label = "OPEN"
        for (name, _), inside in zip(levels, member):
            if inside:
                label = name
        row = {f"in_{name}": inside for (name, _), inside in zip(levels, member)}
        row["sigma"] = solution.top(v)
        if member[0]:
            _, grad, hess = solution.jet(x)
            row["grad_norm"] = float(np.linalg.norm(grad))
            row["hess_det"] = float(np.linalg.det(hess))
            row["geometry"] = classify_geometry(grad, hess, geometry_tol)
            geometry.setdefault(label, set()).add(row["geometry"])
        report.add(x, label, **row)
    report.stratum_geometry = {k: "/".join(sorted(v)) for k, v in geometry.items()}
    report.notes["monotone"] = monotone
    return report


# -- curved orbits --------------------------------------------------------------------

def _sign(value: float, tol: float) -> int:
    if abs(value) <= tol:
        return 0
    return 1 if value > 0 else -1


def model_counterpart(s: ParallelSection, tol: float = 1e-8) -> tuple[mdl.HomogeneousModel, mdl.ReductionDatum]:
    """Homogeneous model and datum of the same type as the section."""
    chart = s.conn.chart
    n = chart.dim
    if s.representation == Representation.STANDARD and chart.kind is not StructureKind.CONFORMAL:
        raise ScenarioMismatch("standard projective tractors have no model counterpart here")
    if s.representation == Representation.METRIC:
        pos, neg, null = signature(s.base_value)
        if null:
            raise ScenarioMismatch("degenerate tractor metric")
        return mdl.projective_model(n), mdl.ReductionDatum.symmetric_form(np.diag([1.0] * pos + [-1.0] * neg))
    p, q = chart.metric_signature
    model = mdl.conformal_model(p, q)
    h = s.g_type
    scale = float(np.linalg.norm(s.base_value)) ** 2
    sgn = _sign(h, tol * max(scale, 1.0))
    frame = np.zeros(p + q + 2)
    if sgn > 0:
        frame[0] = 1.0
    elif sgn < 0:
        frame[p + 1] = 1.0
    else:
        frame[0] = frame[p + 1] = 1.0
    return model, mdl.ReductionDatum.vector(model.from_orthonormal(frame))


def label_value(s: ParallelSection, v: np.ndarray, zero_tol: float = 1e-9) -> mdl.Label:
    """P-type of a single fibre value, read against the distinguished line."""
    L = mdl.Label
    scale = max(float(np.linalg.norm(v)), ZERO_FLOOR)
    if s.representation == Representation.METRIC:
        return _band(float(v[-1, -1]), zero_tol * scale, L.PLUS, L.ZERO, L.MINUS)
    n = s.conn.dim
    h = s.g_type
    if _sign(h, zero_tol * max(float(s.base_value @ s.base_value), 1.0)) != 0:
        return _band(float(v[0]), zero_tol * scale, L.PLUS, L.ZERO, L.MINUS)
    if np.all(np.abs(v[: n + 1]) <= zero_tol * scale):
        return L.ISOLATED_PLUS if v[-1] > 0 else L.ISOLATED_MINUS
    return _band(float(v[0]), zero_tol * scale, L.OPEN_PLUS, L.HYPERSURFACE, L.OPEN_MINUS)


def _band(value: float, tol: float, plus, zero, minus):
    if abs(value) <= tol:
        return zero
    if abs(value) <= AMBIGUITY_FACTOR * tol:
        return mdl.Label.AMBIGUOUS
    return plus if value > 0 else minus


def curved_orbit_decompose(conn: TractorConnection, s: ParallelSection, points,
                           scenario: str = "curved-orbits", zero_tol: float = 1e-9,
                           geometry_tol: float = GEOMETRY_TOL) -> StrataReport:
    """Label each point by the P-type of ``s(x)`` and compare with the model's orbit set."""
    if s.conn is not conn:
        raise ScenarioMismatch("section belongs to a different connection")
    model, datum = model_counterpart(s)
    declared = sorted(str(l) for l in mdl.declared_labels(model, datum))
    pts = np.atleast_2d(np.asarray(points, float))
    values = s.values(pts)
    solution = NormalSolution(s)
    report = StrataReport(scenario, declared)
    geometry: dict[str, set] = {}
    for x, v in zip(pts, values):
        label = label_value(s, v, zero_tol)
        row = {"sigma": solution.top(v)}
        if s.representation == Representation.STANDARD and conn.kind is StructureKind.CONFORMAL:
            row["h_ss"] = float(v @ conn.fiber_metric(x) @ v)
        if label not in mdl.OPEN_LABELS and label is not mdl.Label.AMBIGUOUS:
            _, grad, hess = solution.jet(x)
            row["grad_norm"] = float(np.linalg.norm(grad))
            row["hess_det"] = float(np.linalg.det(hess))
            row["geometry"] = classify_geometry(grad, hess, geometry_tol)
            geometry.setdefault(str(label), set()).add(row["geometry"])
        report.add(x, str(label), **row)
    report.stratum_geometry = {k: "/".join(sorted(v)) for k, v in geometry.items()}
    observed = report.observed_labels - {str(mdl.Label.AMBIGUOUS)}
    report.notes["labels_subset_of_model"] = observed <= set(declared)
    report.notes["ambiguous"] = report.counts.get(str(mdl.Label.AMBIGUOUS), 0)
    if report.samples and "h_ss" in report.samples[0]:
        hs = np.array([r["h_ss"] for r in report.samples])
        report.notes["h_ss_spread"] = float(np.max(hs) - np.min(hs))
    return report


def h_constancy_residual(s: ParallelSection, points) -> float:
    """Spread of ``h(s(x), s(x))`` over the points."""
    h = np.array([v @ s.conn.fiber_metric(x) @ v for x, v in zip(points, s.values(points))])
    return float(np.max(h) - np.min(h))


def projection_gram_determinant(sections: Sequence[ParallelSection], points) -> float:
    """Gram determinant of the normalised ``σ`` vectors of several sections."""
    vecs = []
    for s in sections:
        sig = NormalSolution(s).on(points)
        vecs.append(sig / np.linalg.norm(sig))
    vecs = np.array(vecs)
    return float(np.linalg.det(vecs @ vecs.T))


# -- Einstein metrics -------------------------------------------------------------------

def einstein_constant(h_ss: float, n: int) -> float:
    """Einstein constant of ``σ^{-2} g`` for a parallel standard tractor with ``h(s, s)``."""
    return -(n - 1) * h_ss


def _ricci_residuals(chart: ChartGeometry, metric: Callable, lam: float, points: np.ndarray) -> np.ndarray:
    rescaled = ChartGeometry(metric, chart.dim, chart.metric_signature, chart.kind, chart.engine,
                             chart.step)

    def residual(x):
        return jnp.linalg.norm(rescaled.ricci_fn(x) - lam * metric(x))

    return np.asarray(jax.jit(jax.vmap(residual))(jnp.asarray(points)))


def einstein_verify(chart: ChartGeometry, sigma, expected_sign: int, points, tol: float = 1e-6,
                    margin: float = 1e-2, lam: float | None = None) -> float:
    """Largest ``|Ric(σ^{-2} g) - λ σ^{-2} g|`` over the points.

    ``λ = expected_sign * (n - 1)`` unless given.  ``sigma`` is either a
    traceable function or a :class:`NormalSolution`; in the latter case a
    closed ``formula`` is used when present, otherwise the Ricci tensor of the
    rescaled metric is assembled from the slot jet of the parallel section.
    """
    pts = np.atleast_2d(np.asarray(points, float))
    for p in pts:
        chart.check_point(p)
    lam = expected_sign * (chart.dim - 1) if lam is None else lam
    formula = sigma.formula if isinstance(sigma, NormalSolution) else sigma
    if formula is not None:
        vals = np.asarray(jax.vmap(formula)(jnp.asarray(pts)))
        if np.min(np.abs(vals)) < margin:
            raise MarginViolation(f"a point lies within {margin} of the zero set")
        g = chart.metric_fn
        res = _ricci_residuals(chart, lambda x: g(x) / formula(x) ** 2, lam, pts)
        return float(np.max(res))
    return float(max(_jet_einstein_residual(chart, sigma, lam, x, margin) for x in pts))


def _jet_einstein_residual(chart: ChartGeometry, sol: NormalSolution, lam: float, x, margin) -> float:
    s = sol.source
    if s.representation != Representation.STANDARD or chart.kind is not StructureKind.CONFORMAL:
        raise ScenarioMismatch("slot-jet Einstein check needs a conformal standard tractor")
    v = s.value(x)
    n = chart.dim
    sigma, mu, rho = v[0], v[1:n + 1], v[n + 1]
    if abs(sigma) < margin:
        raise MarginViolation(f"{x} lies within {margin} of the zero set")
    curv = chart.curvature_tensors(x)
    g, ginv = curv.metric, np.linalg.inv(curv.metric)
    df = -mu / sigma
    ddf = curv.schouten + g * rho / sigma + np.outer(mu, mu) / sigma ** 2
    lap = np.einsum("ab,ab->", ginv, ddf)
    sq = df @ ginv @ df
    ric = curv.ricci - (n - 2) * (ddf - np.outer(df, df)) - (lap + (n - 2) * sq) * g
    return float(np.linalg.norm(ric - lam * g / sigma ** 2))


# -- projective metrics -----------------------------------------------------------------

@dataclass
class ProjectiveMetricResult:
    report: StrataReport
    holonomy_dim: int
    kernel_dim: int
    constant_dim: int
    tractor_signature: Signature | None
    einstein_residual: float
    induced_residual: float | None
    section: ParallelSection | None = None
    notes: dict = field(default_factory=dict)


def induced_metric(s: ParallelSection, x) -> np.ndarray:
    """``H(ξ~, η~) / |σ|`` with ``ξ~`` the ``H``-orthogonal lift of ``ξ`` away from ``X``."""
    h = s.value(x)
    n = s.conn.dim
    sigma = h[-1, -1]
    lifts = np.eye(n + 1)[:n]
    lifts = lifts - np.outer(lifts @ h[:, -1] / sigma, np.eye(n + 1)[-1])
    return lifts @ h @ lifts.T / abs(sigma)


def projective_metric_scenario(chart: ChartGeometry, points, expected_sign: int, basepoint=None,
                               holonomy_seed: int = 0, tol: float = 1e-6) -> ProjectiveMetricResult:
    """Parallel tractor metric of an Einstein chart and the orbit labels it induces."""
    chart = chart.with_kind(StructureKind.PROJECTIVE)
    n = chart.dim
    pts = np.atleast_2d(np.asarray(points, float))
    x0 = np.zeros(n) if basepoint is None else np.asarray(basepoint, float)
    lam = expected_sign * (n - 1)
    einstein = float(np.max(_ricci_residuals(chart, chart.metric_fn, lam, pts)))
    conn = TractorConnection(chart)
    hol = holonomy_algebra(conn, x0, seed=holonomy_seed)
    kernel = find_parallel_sections(conn, hol, x0, Representation.METRIC)
    chosen, constant_dim = _constant_sigma_metric(conn, kernel, x0, pts)
    report = StrataReport("projective-metric", [])
    result = ProjectiveMetricResult(report, hol.dim, len(kernel), constant_dim, None, einstein, None,
                                    chosen)
    if chosen is None:
        return result
    result.tractor_signature = signature(chosen.base_value)
    report = curved_orbit_decompose(conn, chosen, pts, "projective-metric")
    result.report = report
    sig_vals = NormalSolution(chosen).on(pts)
    worst = 0.0
    for x, sv in zip(pts, sig_vals):
        if abs(sv) < tol:
            continue
        g_ind = induced_metric(chosen, x)
        ric = chart.curvature_tensors(x).ricci
        worst = max(worst, float(np.linalg.norm(ric - np.sign(sv) * (n - 1) * g_ind)))
    result.induced_residual = worst
    report.notes.update({"holonomy_dim": hol.dim, "kernel_dim": len(kernel),
                         "tractor_signature": list(result.tractor_signature.as_tuple()),
                         "einstein_residual": einstein, "induced_residual": worst})
    return result


def _constant_sigma_metric(conn, kernel, x0, pts, tol: float = 1e-7):
    """The tractor metric in the kernel whose top slot is constant over the points."""
    if not kernel:
        return None, 0
    if len(pts) > 60:
        pts = pts[np.sort(np.random.default_rng(0).choice(len(pts), 60, replace=False))]
    sample = pts
    cols = []
    for s in kernel:
        sol = NormalSolution(s)
        vals = sol.on(sample)
        cols.append(vals - sol(x0))
    system = np.array(cols).T
    coeffs = null_space(system, rcond=tol) if np.max(np.abs(system)) > tol else np.eye(len(kernel))
    if coeffs.shape[1] != 1:
        return None, coeffs.shape[1]
    h0 = np.einsum("k,kij->ij", coeffs[:, 0], np.array([s.base_value for s in kernel]))
    h0 = h0 / np.max(np.abs(h0))
    n = conn.dim
    # fix the overall sign by making the tangential block positive on average
    if np.trace(h0[:n, :n]) < 0:
        h0 = -h0
    if not SymmetricForm(h0).signature_cache.nondegenerate:
        return None, 1
    if abs(h0[-1, -1]) > ZERO_FLOOR:
        h0 = h0 / abs(h0[-1, -1])
    return ParallelSection(conn, x0, h0, Representation.METRIC), 1
