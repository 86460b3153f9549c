"""Tractor connections on metric charts, parallel transport and holonomy.

Fibre coordinates are taken in the coordinate frame of the chart:

* conformal, ``n + 2`` slots ``(σ, μ_1..μ_n, ρ)``::

      ∇_a σ   = ∂_a σ - μ_a
      ∇_a μ_b = D_a μ_b + P_ab σ + g_ab ρ
      ∇_a ρ   = ∂_a ρ - P_a^b μ_b

  with tractor metric ``h(s, s) = 2 σ ρ + g^{ab} μ_a μ_b``;
* projective, ``n + 1`` slots ``(ν^1..ν^n, ρ)``::

      ∇_a ν^b = D_a ν^b + δ_a^b ρ
      ∇_a ρ   = ∂_a ρ - P_ab ν^b

``D`` is the Levi-Civita connection of the chart metric and ``P`` the Schouten
tensor of the chart's structure kind.  In both cases the last slot spans the
distinguished line, so the chart frame lists the filtration in the reverse of
the order used by :mod:`cartan_orbits.model`.

Every connection is stored as ``∇_ξ s = ∂_ξ s + A(x, ξ) s``.
"""

from __future__ import annotations

import itertools
import logging
import threading
from dataclasses import dataclass
from functools import cached_property
from math import comb
from typing import Sequence

import jax
import jax.numpy as jnp
import numpy as np

from . import lie
from .charts import ChartGeometry, StructureKind
from .errors import DomainError, NoConvergence, NumericalError

log = logging.getLogger(__name__)

TRANSPORT_TOL = 1e-9
MAX_STEPS = 2 ** 20
MIN_STEPS = 8
BATCH = 32
SPAN_ATOL = 1e-6
SPAN_RTOL = 1e-8


# -- paths -----------------------------------------------------------------------

@dataclass(frozen=True)
class Path:
    """Piecewise Bezier curve; each segment is an array of control points."""

    segments: tuple

    @classmethod
    def polyline(cls, points) -> "Path":
        pts = np.asarray(points, dtype=float)
        return cls(tuple(np.array([a, b]) for a, b in zip(pts[:-1], pts[1:])))

    @classmethod
    def bezier(cls, control_points) -> "Path":
        return cls((np.asarray(control_points, dtype=float),))

    @classmethod
    def from_json(cls, desc: dict) -> "Path":
        kind = desc.get("kind", "polyline")
        if kind == "polyline":
            return cls.polyline(desc["points"])
        if kind == "bezier":
            return cls(tuple(np.asarray(c, dtype=float) for c in desc["segments"]))
        raise ValueError(f"unknown path kind {kind!r}")

    def to_json(self) -> dict:
        return {"kind": "bezier", "segments": [s.tolist() for s in self.segments]}

    def __add__(self, other: "Path") -> "Path":
        return Path(self.segments + other.segments)

    def reversed(self) -> "Path":
        return Path(tuple(s[::-1].copy() for s in reversed(self.segments)))

    @property
    def start(self) -> np.ndarray:
        return self.segments[0][0]

    @property
    def end(self) -> np.ndarray:
        return self.segments[-1][-1]

    def sample_points(self, per_segment: int = 16) -> np.ndarray:
        ts = np.linspace(0.0, 1.0, per_segment + 1)
        return np.vstack([np.array([_bezier_point(s, t) for t in ts]) for s in self.segments])


def _bezier_point(ctrl, t):
    k = ctrl.shape[0] - 1
    weights = jnp.array([comb(k, i) for i in range(k + 1)], dtype=float)
    idx = jnp.arange(k + 1)
    basis = weights * t ** idx * (1 - t) ** (k - idx)
    return basis @ ctrl


def straight(a, b) -> Path:
    return Path.polyline([a, b])


def square_loop(center, u, v, eps: float) -> Path:
    """Closed parallelogram ``c, c + eps u, c + eps(u + v), c + eps v, c``."""
    c = np.asarray(center, float)
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    return Path.polyline([c, c + eps * u, c + eps * (u + v), c + eps * v, c])


# -- connection ---------------------------------------------------------------------

class TractorConnection:
    """Standard tractor connection built from a chart metric."""

    def __init__(self, chart: ChartGeometry):
        if chart.kind is StructureKind.COMPLEX_PROJECTIVE:
            raise NotImplementedError("curved complex projective charts are not supported")
        self.chart = chart
        self.kind = chart.kind
        self._memo: dict[tuple, np.ndarray] = {}
        self._lock = threading.Lock()
        n = chart.dim
        self.dim = n
        if self.kind is StructureKind.CONFORMAL:
            self.fiber_dim = n + 2
            self.slots = {"sigma": slice(0, 1), "mu": slice(1, n + 1), "rho": slice(n + 1, n + 2)}
            self.filtration = {"T": [], "T0": [0], "T1": list(range(0, n + 1))}
        else:
            self.fiber_dim = n + 1
            self.slots = {"nu": slice(0, n), "rho": slice(n, n + 1)}
            self.filtration = {"T": [], "T1": list(range(0, n))}

    def __repr__(self):
        return f"TractorConnection({self.kind.value}, {self.chart!r})"

    @property
    def distinguished(self) -> np.ndarray:
        """Fibre vector spanning the distinguished line."""
        e = np.zeros(self.fiber_dim)
        e[-1] = 1.0
        return e

    # traceable pieces
    def connection_matrices(self, x):
        """Array ``A[a]`` with ``A(x, ξ) = ξ^a A[a]``."""
        chart = self.chart
        n = self.dim
        g = chart.g(x)
        gam = chart.christoffel_fn(x)
        p = chart.schouten_fn(x)
        eye = jnp.eye(n)
        if self.kind is StructureKind.CONFORMAL:
            ginv = jnp.linalg.inv(g)
            out = jnp.zeros((n, n + 2, n + 2))
            out = out.at[:, 0, 1:n + 1].set(-eye)
            out = out.at[:, 1:n + 1, 1:n + 1].set(-jnp.einsum("cab->abc", gam))
            out = out.at[:, 1:n + 1, 0].set(p)
            out = out.at[:, 1:n + 1, n + 1].set(g)
            out = out.at[:, n + 1, 1:n + 1].set(-p @ ginv)
            return out
        out = jnp.zeros((n, n + 1, n + 1))
        out = out.at[:, :n, :n].set(jnp.einsum("bac->abc", gam))
        out = out.at[:, :n, n].set(eye)
        out = out.at[:, n, :n].set(-p)
        return out

    def connection_matrix_fn(self, x, xi):
        return jnp.tensordot(xi, self.connection_matrices(x), axes=1)

    def curvature_fn(self, x):
        """``F[a, b] = ∂_a A_b - ∂_b A_a + [A_a, A_b]``."""
        a = self.connection_matrices(x)
        da = self.chart.d(self.connection_matrices)(x)  # da[b, i, j, a] = ∂_a (A_b)_ij
        d = jnp.einsum("bija->abij", da)
        comm = jnp.einsum("aij,bjk->abik", a, a)
        return d - jnp.swapaxes(d, 0, 1) + comm - jnp.swapaxes(comm, 0, 1)

    def fiber_metric_fn(self, x):
        n = self.dim
        ginv = jnp.linalg.inv(self.chart.g(x))
        h = jnp.zeros((n + 2, n + 2))
        h = h.at[0, n + 1].set(1.0).at[n + 1, 0].set(1.0)
        return h.at[1:n + 1, 1:n + 1].set(ginv)

    @cached_property
    def _jit(self):
        return {
            "A": jax.jit(self.connection_matrices),
            "F": jax.jit(self.curvature_fn),
            "h": jax.jit(self.fiber_metric_fn),
            "segment": jax.jit(self._segment_transport),
            "segments": jax.jit(jax.vmap(self._segment_transport, in_axes=(0, None))),
            "jet": jax.jit(lambda x: (self.connection_matrices(x),
                                      self.chart.d(self.connection_matrices)(x))),
        }

    # numpy interface
    def connection_matrix(self, x, xi) -> np.ndarray:
        x = self.chart.check_point(x)
        return np.tensordot(np.asarray(xi, float), np.asarray(self._jit["A"](jnp.asarray(x))), axes=1)

    def fiber_metric(self, x) -> np.ndarray | None:
        """Tractor metric at ``x`` in the chart frame (conformal only)."""
        if self.kind is not StructureKind.CONFORMAL:
            return None
        x = self.chart.check_point(x)
        self.chart.metric_at(x)
        return np.asarray(self._jit["h"](jnp.asarray(x)))

    def curvature_all(self, x) -> np.ndarray:
        x = self.chart.check_point(x)
        self.chart.metric_at(x)
        return np.asarray(self._jit["F"](jnp.asarray(x)))

    def derivative(self, x, xi, value, dvalue) -> np.ndarray:
        return np.asarray(dvalue, float) + self.connection_matrix(x, xi) @ np.asarray(value, float)

    def _segment_transport(self, ctrl, steps):
        dim = self.fiber_dim
        h = 1.0 / steps

        def rhs(t, mat):
            point, vel = jax.jvp(lambda s: _bezier_point(ctrl, s), (t,), (jnp.ones_like(t),))
            return -self.connection_matrix_fn(point, vel) @ mat

        def body(i, mat):
            t = i * h
            k1 = rhs(t, mat)
            k2 = rhs(t + h / 2, mat + h / 2 * k1)
            k3 = rhs(t + h / 2, mat + h / 2 * k2)
            k4 = rhs(t + h, mat + h * k3)
            return mat + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

        return jax.lax.fori_loop(0, steps, body, jnp.eye(dim))

    def _check_path(self, path: Path) -> None:
        for p in path.sample_points():
            try:
                self.chart.check_point(p)
            except DomainError as exc:
                raise DomainError(f"path leaves the chart domain: {exc}") from None

    def transport_matrix(self, path: Path, tol: float = TRANSPORT_TOL, max_steps: int = MAX_STEPS) -> np.ndarray:
        """Matrix of parallel transport from ``path.start`` to ``path.end``."""
        self._check_path(path)
        out = np.eye(self.fiber_dim)
        for ctrl in path.segments:
            if np.allclose(ctrl, ctrl[0], atol=0.0, rtol=0.0):
                continue
            ctrl_j = jnp.asarray(ctrl)
            steps = MIN_STEPS
            prev = np.asarray(self._jit["segment"](ctrl_j, steps))
            while True:
                steps *= 2
                if steps > max_steps:
                    raise NoConvergence(f"transport did not converge within {max_steps} steps")
                cur = np.asarray(self._jit["segment"](ctrl_j, steps))
                if np.max(np.abs(cur - prev)) < tol * max(1.0, np.max(np.abs(cur))):
                    break
                prev = cur
            out = cur @ out
        return out


    def radial_transports(self, basepoint, points, tol: float = TRANSPORT_TOL,
                          max_steps: int = MAX_STEPS) -> np.ndarray:
        """Transport matrices along straight segments from ``basepoint`` to each point.

        Results are memoised per ``(basepoint, point, tol)``; batches are padded to
        a fixed size so the compiled kernel is reused.
        """
        x0 = self.chart.check_point(basepoint)
        pts = np.atleast_2d(np.asarray(points, float))
        keys = [(x0.tobytes(), p.tobytes(), tol) for p in pts]
        with self._lock:
            first: dict[tuple, int] = {}
            for i, k in enumerate(keys):
                if k not in self._memo:
                    first.setdefault(k, i)
            missing = list(first.values())
        for p in pts[missing]:
            self._check_path(straight(x0, p))
        for start in range(0, len(missing), BATCH):
            idx = missing[start:start + BATCH]
            batch = pts[idx]
            padded = np.vstack([batch, np.repeat(batch[-1:], BATCH - len(batch), axis=0)])
            mats = self._batch_transport(x0, padded, tol, max_steps)
            with self._lock:
                for i, m in zip(idx, mats):
                    self._memo[keys[i]] = m
        with self._lock:
            return np.array([self._memo[k] for k in keys])

    def _batch_transport(self, x0, pts, tol, max_steps) -> np.ndarray:
        ctrl = jnp.asarray(np.stack([np.broadcast_to(x0, pts.shape), pts], axis=1))
        steps = MIN_STEPS
        prev = np.asarray(self._jit["segments"](ctrl, steps))
        while True:
            steps *= 2
            if steps > max_steps:
                raise NoConvergence(f"transport did not converge within {max_steps} steps")
            cur = np.asarray(self._jit["segments"](ctrl, steps))
            scale = np.maximum(1.0, np.max(np.abs(cur), axis=(1, 2)))
            if np.all(np.max(np.abs(cur - prev), axis=(1, 2)) < tol * scale):
                return cur
            prev = cur

    def jet(self, x) -> tuple[np.ndarray, np.ndarray]:
        """``(A[a], dA[a, :, :, b])`` with ``dA[a, i, j, b] = ∂_b (A_a)_ij``."""
        x = self.chart.check_point(x)
        a, da = self._jit["jet"](jnp.asarray(x))
        return np.asarray(a), np.asarray(da)


def tractor_derivative(conn: TractorConnection, x, xi, value, dvalue) -> np.ndarray:
    """``∇_ξ s`` from the value of ``s`` and its derivative along ``ξ``."""
    return conn.derivative(x, xi, value, dvalue)


def parallel_transport(conn: TractorConnection, path: Path, v0, tol: float = TRANSPORT_TOL,
                       max_steps: int = MAX_STEPS) -> np.ndarray:
    return conn.transport_matrix(path, tol, max_steps) @ np.asarray(v0, float)


def tractor_curvature(conn: TractorConnection, x, xi, eta) -> np.ndarray:
    f = conn.curvature_all(x)
    return np.einsum("a,b,abij->ij", np.asarray(xi, float), np.asarray(eta, float), f)


# -- conformal splitting ------------------------------------------------------------

def conformal_splitting_fn(chart: ChartGeometry, sigma):
    """Traceable ``x -> (σ, ∇σ, -(Δσ + J σ)/n)`` for a traceable scale ``σ``."""
    n = chart.dim

    def section(x):
        s = sigma(x)
        ds = jax.grad(sigma)(x)
        dds = jax.hessian(sigma)(x)
        gam = chart.christoffel_fn(x)
        ginv = jnp.linalg.inv(chart.g(x))
        hess = dds - jnp.einsum("cab,c->ab", gam, ds)
        lap = jnp.einsum("ab,ab->", ginv, hess)
        j = jnp.einsum("ab,ab->", ginv, chart.schouten_fn(x))
        rho = -(lap + j * s) / n
        return jnp.concatenate([jnp.atleast_1d(s), ds, jnp.atleast_1d(rho)])

    return section


def splitting_operator(chart: ChartGeometry, sigma, x) -> np.ndarray:
    x = chart.check_point(x)
    return np.asarray(conformal_splitting_fn(chart, sigma)(jnp.asarray(x)))


def covariant_derivative_of_section(conn: TractorConnection, section, x) -> np.ndarray:
    """``∇ s`` at ``x`` for a traceable section, shape ``(n, fiber_dim)``."""
    x = conn.chart.check_point(x)
    xj = jnp.asarray(x)
    value = np.asarray(section(xj))
    jac = np.asarray(jax.jacfwd(section)(xj))
    a = np.asarray(conn._jit["A"](xj))
    return jac.T + np.einsum("aij,j->ai", a, value)


# -- block probes ------------------------------------------------------------

def _g0_block(conn: TractorConnection, f: np.ndarray) -> np.ndarray:
    """``g_0`` part of curvature as endomorphisms of the tangent space."""
    n = conn.dim
    if conn.kind is StructureKind.CONFORMAL:
        # slots hold covectors: a tangent vector sees minus the transpose
        return -np.swapaxes(f[..., 1:n + 1, 1:n + 1], -1, -2)
    return f[..., :n, :n] - f[..., n:, n:] * np.eye(n)


def normality_residual(conn: TractorConnection, x, sample_directions=None) -> float:
    """Largest Ricci-type trace ``tr(W -> κ_0(W, Y) Z)`` over unit ``Y, Z``."""
    f = conn.curvature_all(x)
    k0 = _g0_block(conn, f)  # k0[w, y, i, j]
    trace = np.einsum("wywj->yj", k0)
    if sample_directions is None:
        return float(np.linalg.norm(trace, 2))
    dirs = np.asarray(sample_directions, float)
    return float(max(abs(y @ trace @ z) for y, z in itertools.product(dirs, dirs)))


def torsion_residual(conn: TractorConnection, x) -> float:
    """Size of the tangent-valued block of the curvature."""
    f = conn.curvature_all(x)
    n = conn.dim
    if conn.kind is StructureKind.CONFORMAL:
        return float(max(np.max(np.abs(f[..., 0, 1:])), np.max(np.abs(f[..., 1:n + 1, n + 1]))))
    return float(np.max(np.abs(f[..., :n, n])))


def weyl_block(conn: TractorConnection, x) -> np.ndarray:
    """Conformal curvature restricted to the middle slots, ``[c, d, b, e]``."""
    return conn.curvature_all(x)[:, :, 1:conn.dim + 1, 1:conn.dim + 1]


def cotton_block(conn: TractorConnection, x) -> np.ndarray:
    """Conformal curvature mapping middle slots to the last, ``[c, d, e]``."""
    return conn.curvature_all(x)[:, :, conn.dim + 1, 1:conn.dim + 1]


# -- holonomy ----------------------------------------------------------------------

def _rank(mats: list[np.ndarray], atol: float, rtol: float) -> int:
    if not mats:
        return 0
    s = np.linalg.svd(np.array([m.ravel() for m in mats]), compute_uv=False)
    return int(np.sum(s > max(atol, rtol * s[0])))


def _ambient_algebra_dim(conn: TractorConnection) -> int:
    m = conn.fiber_dim
    return m * (m - 1) // 2 if conn.kind is StructureKind.CONFORMAL else m * m - 1


def holonomy_algebra(conn: TractorConnection, basepoint, loop_family: Sequence | None = None,
                     budget: int = 4, seed: int = 0, radius: float = 0.8, loop_eps: float = 0.05,
                     max_points: int = 64, atol: float = SPAN_ATOL, rtol: float = SPAN_RTOL,
                     tol: float = TRANSPORT_TOL) -> lie.AlgebraBasis:
    """Ambrose–Singer span of transported curvatures and small-loop logarithms.

    Points are taken from ``loop_family`` or sampled in a ball around the
    basepoint.  Sampling stops once ``budget`` consecutive points leave the span
    dimension unchanged; the result is then closed under brackets.  The basis
    carries a ``diagnostics`` dictionary.
    """
    x0 = conn.chart.check_point(basepoint)
    n = conn.dim
    rng = np.random.default_rng(seed)
    mats: list[np.ndarray] = []
    log_norms: list[float] = []
    curv_norms: list[float] = []
    f0 = conn.curvature_all(x0)
    mats.extend(f0[a, b] for a, b in itertools.combinations(range(n), 2))
    curv_norms.append(float(np.max(np.abs(f0))))
    rank = _rank(mats, atol, rtol)
    cap = _ambient_algebra_dim(conn)
    stable = 0
    points = list(loop_family) if loop_family is not None else None
    used = 0
    while stable < budget and rank < cap:
        if points is not None:
            if used >= len(points):
                break
            x = np.asarray(points[used], float)
        else:
            if used >= max_points:
                raise NoConvergence(f"holonomy span still growing after {max_points} points")
            x = _sample_in_domain(conn, x0, radius, rng)
        used += 1
        out = straight(x0, x)
        t = conn.transport_matrix(out, tol)
        tinv = np.linalg.inv(t)
        f = conn.curvature_all(x)
        curv_norms.append(float(np.max(np.abs(f))))
        mats.extend(tinv @ f[a, b] @ t for a, b in itertools.combinations(range(n), 2))
        u, v = np.linalg.qr(rng.standard_normal((n, 2)))[0].T
        try:
            lasso = out + square_loop(x, u, v, loop_eps) + out.reversed()
            loop = conn.transport_matrix(lasso, tol)
            if np.linalg.norm(loop - np.eye(conn.fiber_dim), 2) < 0.5:
                lg = lie.logarithm(loop)
                log_norms.append(float(np.linalg.norm(lg)))
                mats.append(lg)
        except (DomainError, NumericalError) as exc:
            log.debug("skipping loop at %s: %s", x, exc)
        new_rank = _rank(mats, atol, rtol)
        stable = stable + 1 if new_rank == rank else 0
        rank = new_rank
    basis = _span(mats, atol, rtol, conn.fiber_dim)
    basis = _close_under_brackets(basis, atol, rtol)
    basis.tag = "hol"
    basis.closure_residual = basis.bracket_closure_residual()
    basis.diagnostics = {
        "points_used": used + 1,
        "span_dim": rank,
        "max_log_norm": max(log_norms, default=0.0),
        "max_curvature": max(curv_norms, default=0.0),
        "closure_residual": basis.closure_residual,
    }
    return basis


def _sample_in_domain(conn, x0, radius, rng, tries: int = 1000) -> np.ndarray:
    for _ in range(tries):
        d = rng.standard_normal(conn.dim)
        x = x0 + radius * rng.uniform() ** (1 / conn.dim) * d / np.linalg.norm(d)
        try:
            conn.chart.check_point(x)
            return x
        except DomainError:
            continue
    raise DomainError("could not sample points around the basepoint")


def _span(mats, atol, rtol, size) -> lie.AlgebraBasis:
    if not mats:
        return lie.AlgebraBasis(np.zeros((0, size, size)), "hol", size)
    return lie.AlgebraBasis.from_matrices(mats, "hol", size, rtol=rtol, atol=atol)


def _close_under_brackets(basis: lie.AlgebraBasis, atol, rtol) -> lie.AlgebraBasis:
    while basis.dim:
        mats = list(basis.elements)
        mats.extend(lie.bracket(a, b) for a, b in itertools.combinations(basis.elements, 2))
        grown = lie.AlgebraBasis.from_matrices(mats, basis.tag, basis.n, rtol=rtol, atol=atol)
        if grown.dim == basis.dim:
            return basis
        basis = grown
    return basis
