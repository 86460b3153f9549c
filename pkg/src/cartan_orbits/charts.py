"""Metric charts and their curvature tensors.

A :class:`ChartGeometry` wraps a JAX-traceable metric ``x -> g_ab(x)`` on a box.
Derivatives are taken either by nested forward-mode autodiff or by
Richardson-extrapolated central differences; every tensor below is built from
the chosen derivative operator, so both engines run the same formulas.

Index conventions: ``christoffel[a, b, c] = Γ^a_{bc}``,
``riemann[a, b, c, d] = R^a_{bcd}`` with ``R(∂_c, ∂_d) ∂_b = R^a_{bcd} ∂_a``,
``ricci[b, d] = R^a_{bad}``.  The unit round sphere has positive Ricci.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import jax
import jax.numpy as jnp
import numpy as np

from .errors import DegenerateMetric, DomainError
from .forms import signature

jax.config.update("jax_enable_x64", True)

COND_LIMIT = 1e8


class Engine(str, enum.Enum):
    FORWARD_AUTODIFF = "FORWARD_AUTODIFF"
    CENTRAL_DIFFERENCE = "CENTRAL_DIFFERENCE"


class StructureKind(str, enum.Enum):
    CONFORMAL = "CONFORMAL"
    PROJECTIVE = "PROJECTIVE"
    COMPLEX_PROJECTIVE = "COMPLEX_PROJECTIVE"


def derivative(f: Callable, engine: Engine = Engine.FORWARD_AUTODIFF, step: float = 1e-4) -> Callable:
    """``x -> ∂f(x)`` with the derivative index appended last."""
    if engine is Engine.FORWARD_AUTODIFF:
        return jax.jacfwd(f)

    def central(x):
        x = jnp.asarray(x)
        eye = jnp.eye(x.shape[0], dtype=x.dtype)

        def one(e):
            d1 = (f(x + step * e) - f(x - step * e)) / (2 * step)
            h = step / 2
            d2 = (f(x + h * e) - f(x - h * e)) / (2 * h)
            return (4 * d2 - d1) / 3

        out = jax.vmap(one)(eye)
        return jnp.moveaxis(out, 0, -1)

    return central


@dataclass
class CurvatureData:
    metric: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    schouten: np.ndarray

    def bianchi_residual(self) -> float:
        r = self.riemann
        cyc = r + np.transpose(r, (0, 2, 3, 1)) + np.transpose(r, (0, 3, 1, 2))
        return float(np.max(np.abs(cyc)))

    def ricci_asymmetry(self) -> float:
        return float(np.max(np.abs(self.ricci - self.ricci.T)))


class ChartGeometry:
    """A metric on a box ``∏ (lo_i, hi_i)`` with an optional extra domain test.

    ``kind`` decides which Schouten normalisation downstream connections use.
    """

    def __init__(self, metric: Callable, dim: int, metric_signature: Sequence[int],
                 kind: StructureKind = StructureKind.CONFORMAL,
                 engine: Engine = Engine.FORWARD_AUTODIFF, step: float = 1e-4,
                 box: Sequence[Sequence[float]] | None = None,
                 inside: Callable[[np.ndarray], bool] | None = None, name: str = "custom"):
        self.metric_fn = metric
        self.dim = int(dim)
        self.metric_signature = tuple(metric_signature)
        if sum(self.metric_signature) != self.dim:
            raise ValueError("signature does not match dimension")
        self.kind = StructureKind(kind)
        self.engine = Engine(engine)
        self.step = step
        self.box = np.asarray(box if box is not None else [(-np.inf, np.inf)] * self.dim, dtype=float)
        self.inside = inside
        self.name = name

    def __repr__(self):
        return f"ChartGeometry({self.name!r}, dim={self.dim}, signature={self.metric_signature})"

    def with_kind(self, kind: StructureKind) -> "ChartGeometry":
        return ChartGeometry(self.metric_fn, self.dim, self.metric_signature, kind, self.engine,
                             self.step, self.box, self.inside, self.name)

    def with_engine(self, engine: Engine, step: float | None = None) -> "ChartGeometry":
        return ChartGeometry(self.metric_fn, self.dim, self.metric_signature, self.kind, engine,
                             step or self.step, self.box, self.inside, self.name)

    def rescaled(self, log_factor: Callable, name: str | None = None) -> "ChartGeometry":
        """The chart of ``exp(2 f) g``."""
        g = self.metric_fn
        return ChartGeometry(lambda x: jnp.exp(2 * log_factor(x)) * g(x), self.dim,
                             self.metric_signature, self.kind, self.engine, self.step, self.box,
                             self.inside, name or f"{self.name}*exp(2f)")

    def d(self, f: Callable) -> Callable:
        return derivative(f, self.engine, self.step)

    # -- traceable tensor fields --------------------------------------------

    def g(self, x):
        return self.metric_fn(x)

    def christoffel_fn(self, x):
        g = self.g(x)
        dg = self.d(self.g)(x)  # dg[d, c, b] = ∂_b g_dc
        ginv = jnp.linalg.inv(g)
        low = 0.5 * (jnp.einsum("dcb->dbc", dg) + dg - jnp.einsum("bcd->dbc", dg))
        return jnp.einsum("ad,dbc->abc", ginv, low)

    def riemann_fn(self, x):
        gam = self.christoffel_fn(x)
        dgam = self.d(self.christoffel_fn)(x)  # dgam[a, d, b, c] = ∂_c Γ^a_{db}
        term = jnp.einsum("adbc->abcd", dgam)
        quad = jnp.einsum("ace,edb->abcd", gam, gam)
        return term - jnp.swapaxes(term, 2, 3) + quad - jnp.swapaxes(quad, 2, 3)

    def ricci_fn(self, x):
        return jnp.einsum("abad->bd", self.riemann_fn(x))

    def scalar_fn(self, x):
        return jnp.einsum("ab,ab->", jnp.linalg.inv(self.g(x)), self.ricci_fn(x))

    def schouten_fn(self, x):
        ric = self.ricci_fn(x)
        n = self.dim
        if self.kind is StructureKind.PROJECTIVE:
            return ric / (n - 1)
        scal = jnp.einsum("ab,ab->", jnp.linalg.inv(self.g(x)), ric)
        if n == 2:
            # the trace-free part of Ricci vanishes; keep the Einstein-case value
            return scal / 4 * self.g(x)
        return (ric - scal / (2 * (n - 1)) * self.g(x)) / (n - 2)

    # -- checked numpy evaluation --------------------------------------------

    def check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DomainError(f"expected a point of dimension {self.dim}")
        if np.any(x <= self.box[:, 0]) or np.any(x >= self.box[:, 1]):
            raise DomainError(f"{x} lies outside the chart box")
        if self.inside is not None and not self.inside(x):
            raise DomainError(f"{x} lies outside the chart domain")
        return x

    def metric_at(self, x) -> np.ndarray:
        x = self.check_point(x)
        g = np.asarray(self.g(jnp.asarray(x)))
        if np.max(np.abs(g - g.T)) > 1e-12 * max(1.0, np.max(np.abs(g))):
            raise DegenerateMetric("metric is not symmetric")
        if not np.all(np.isfinite(g)) or np.linalg.cond(g) > COND_LIMIT:
            raise DegenerateMetric(f"metric is degenerate at {x}")
        sig = signature(g)
        if (sig.positive, sig.negative) != self.metric_signature:
            raise DegenerateMetric(f"metric has signature {sig.as_tuple()} at {x}, "
                                   f"declared {self.metric_signature}")
        return g

    @cached_property
    def _jitted(self):
        return {
            "christoffel": jax.jit(self.christoffel_fn),
            "riemann": jax.jit(self.riemann_fn),
            "schouten": jax.jit(self.schouten_fn),
        }

    def curvature_tensors(self, x) -> CurvatureData:
        g = self.metric_at(x)
        xj = jnp.asarray(x, dtype=float)
        gam = np.asarray(self._jitted["christoffel"](xj))
        riem = np.asarray(self._jitted["riemann"](xj))
        ric = np.einsum("abad->bd", riem)
        ginv = np.linalg.inv(g)
        scal = float(np.einsum("ab,ab->", ginv, ric))
        return CurvatureData(g, gam, riem, ric, scal, np.asarray(self._jitted["schouten"](xj)))


def curvature_tensors(chart: ChartGeometry, x) -> CurvatureData:
    return chart.curvature_tensors(x)


# -- builtin metrics -----------------------------------------------------------

def _diag_signature(p: int, q: int):
    return jnp.diag(jnp.array([1.0] * p + [-1.0] * q))


def flat(n: int, signature_: Sequence[int] | None = None, half_width: float = 10.0,
         kind: StructureKind = StructureKind.CONFORMAL, **kw) -> ChartGeometry:
    p, q = signature_ if signature_ is not None else (n, 0)
    eta = _diag_signature(p, q)
    return ChartGeometry(lambda x: eta + 0.0 * x[0], n, (p, q), kind,
                         box=[(-half_width, half_width)] * n, name="flat", **kw)


def round_sphere(n: int, half_width: float = 10.0, kind: StructureKind = StructureKind.CONFORMAL,
                 **kw) -> ChartGeometry:
    """Unit sphere in stereographic coordinates, ``4 / (1 + |x|^2)^2 δ``."""
    eye = jnp.eye(n)
    return ChartGeometry(lambda x: 4.0 / (1.0 + x @ x) ** 2 * eye, n, (n, 0), kind,
                         box=[(-half_width, half_width)] * n, name="round_sphere", **kw)


def poincare_ball(n: int, kind: StructureKind = StructureKind.CONFORMAL, **kw) -> ChartGeometry:
    """Hyperbolic space of curvature -1 in the unit ball, ``4 / (1 - |x|^2)^2 δ``."""
    eye = jnp.eye(n)
    return ChartGeometry(lambda x: 4.0 / (1.0 - x @ x) ** 2 * eye, n, (n, 0), kind,
                         box=[(-1.0, 1.0)] * n, inside=lambda x: float(x @ x) < 1.0,
                         name="poincare_ball", **kw)


def bump_perturbation(n: int, eps: float, center: Sequence[float] | None = None, width: float = 1.0,
                      seed: int = 0, signature_: Sequence[int] | None = None, half_width: float = 3.0,
                      kind: StructureKind = StructureKind.CONFORMAL, **kw) -> ChartGeometry:
    """``η + eps * exp(-|x - c|^2 / w^2) * (S0 + x^i S_i)`` with seeded symmetric ``S``."""
    p, q = signature_ if signature_ is not None else (n, 0)
    eta = _diag_signature(p, q)
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((n + 1, n, n))
    sym = (raw + np.swapaxes(raw, 1, 2)) / 2
    sym /= np.linalg.norm(sym, ord=2, axis=(1, 2), keepdims=True) * 2
    s0 = jnp.asarray(sym[0])
    s1 = jnp.asarray(sym[1:])
    c = jnp.asarray(center if center is not None else np.zeros(n), dtype=float)

    def metric(x):
        bump = jnp.exp(-jnp.sum((x - c) ** 2) / width ** 2)
        return eta + eps * bump * (s0 + jnp.tensordot(x - c, s1, axes=1))

    return ChartGeometry(metric, n, (p, q), kind, box=[(-half_width, half_width)] * n,
                         name="bump_perturbation", **kw)


def polynomial(desc: dict, kind: StructureKind = StructureKind.CONFORMAL, **kw) -> ChartGeometry:
    """Metric with polynomial entries.

    ``desc = {"dim": n, "signature": [p, q], "half_width": r,
    "entries": [{"index": [i, j], "terms": [[coef, [k_1, ..., k_n]], ...]}, ...]}``;
    unspecified entries are zero, ``(j, i)`` mirrors ``(i, j)``.
    """
    n = int(desc["dim"])
    p, q = desc.get("signature", (n, 0))
    terms = []
    for entry in desc["entries"]:
        i, j = entry["index"]
        for coef, powers in entry["terms"]:
            if len(powers) != n:
                raise ValueError("exponent vector has the wrong length")
            terms.append((int(i), int(j), float(coef), tuple(int(k) for k in powers)))

    def metric(x):
        g = jnp.zeros((n, n)) + 0.0 * x[0]
        for i, j, coef, powers in terms:
            mono = coef * jnp.prod(x ** jnp.asarray(powers, dtype=float))
            g = g.at[i, j].add(mono)
            if i != j:
                g = g.at[j, i].add(mono)
        return g

    r = float(desc.get("half_width", 1.0))
    return ChartGeometry(metric, n, (p, q), kind, box=[(-r, r)] * n, name="polynomial", **kw)


def chart_from_descriptor(desc: dict | str, kind: StructureKind = StructureKind.CONFORMAL) -> ChartGeometry:
    """Build a builtin chart from a JSON descriptor such as ``{"name": "round_sphere", "dim": 3}``."""
    if isinstance(desc, str):
        desc = json.loads(desc)
    desc = dict(desc)
    name = desc.pop("name")
    engine = Engine(desc.pop("engine", Engine.FORWARD_AUTODIFF))
    common = {"kind": kind, "engine": engine}
    if "step" in desc:
        common["step"] = float(desc.pop("step"))
    if name == "polynomial":
        return polynomial(desc, **common)
    n = int(desc.pop("dim"))
    builders = {"flat": flat, "round_sphere": round_sphere, "poincare_ball": poincare_ball,
                "bump_perturbation": bump_perturbation}
    if name not in builders:
        raise ValueError(f"unknown metric {name!r}")
    if "signature" in desc:
        desc["signature_"] = tuple(desc.pop("signature"))
    return builders[name](n, **desc, **common)
