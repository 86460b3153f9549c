"""Builtin scenarios: validated configurations run into checked reports."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any, Callable

import jax.numpy as jnp
import numpy as np

from . import bgg, lie
from . import model as mdl
from .charts import bump_perturbation, chart_from_descriptor, flat, round_sphere
from .errors import ConfigError
from .forms import HermitianForm
from .report import StrataReport
from .tractor import (SPAN_ATOL, TractorConnection, holonomy_algebra, normality_residual,
                      splitting_operator, torsion_residual)

COMMON_KEYS = {"scenario", "seed", "threads", "output_dir"}


@dataclass
class Check:
    name: str
    measured: Any
    expected: Any
    tolerance: float | None
    passed: bool

    def to_json(self) -> dict:
        return {"name": self.name, "measured": _plain(self.measured), "expected": _plain(self.expected),
                "tolerance": self.tolerance, "passed": bool(self.passed)}


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (set, frozenset)):
        return sorted(str(x) for x in v)
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


@dataclass
class RunReport:
    scenario: str
    config: dict
    checks: list[Check] = field(default_factory=list)
    tables: dict[str, StrataReport] = field(default_factory=dict)
    wall_clock: float = 0.0
    artifacts: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check_below(self, name: str, measured: float, tol: float) -> None:
        self.checks.append(Check(name, float(measured), f"< {tol}", tol, bool(measured < tol)))

    def check_equal(self, name: str, measured, expected) -> None:
        self.checks.append(Check(name, measured, expected, None, measured == expected))

    def to_json(self) -> dict:
        return {"scenario": self.scenario, "config": self.config, "passed": self.passed,
                "checks": [c.to_json() for c in self.checks], "wall_clock": self.wall_clock,
                "artifacts": self.artifacts}


@dataclass(frozen=True)
class Scenario:
    name: str
    topic: str
    sampling: bool
    defaults: dict
    runner: Callable[[dict, RunReport], None]


def _labels(s) -> list[str]:
    return sorted(str(x) for x in s)


# -- model-level scenarios ---------------------------------------------------------

def _model_from_config(cfg: dict) -> mdl.HomogeneousModel:
    tag = cfg["model"]
    sig = tuple(cfg["signature"])
    if tag == "projective":
        return mdl.projective_model(sum(sig) - 1)
    if tag == "complex_projective":
        return mdl.complex_projective_model(sum(sig) - 1)
    if tag in ("conformal", "cr"):
        return mdl.build_model(tag, sig)
    raise ConfigError(f"unknown model {tag!r}")


def datum_from_config(model: mdl.HomogeneousModel, cfg: dict) -> mdl.ReductionDatum:
    """Datum from ``{"kind": ...}`` shorthands or an explicit ``{"variant", "payload"}``."""
    desc = cfg.get("datum") or {}
    if "variant" in desc:
        return mdl.ReductionDatum.from_json(desc)
    kind = desc.get("kind", "default")
    sig = tuple(cfg["signature"])
    if model.tag == "projective":
        return mdl.ReductionDatum.symmetric_form(np.diag([1.0] * sig[0] + [-1.0] * sig[1]))
    if model.tag == "complex_projective":
        return mdl.ReductionDatum.hermitian_form(np.diag([1.0] * sig[0] + [-1.0] * sig[1]).astype(complex))
    p, q = model.signature
    if kind == "complex_structure":
        return mdl.fefferman_complex_structure(model)
    if kind == "three_form":
        return mdl.g2_three_form_datum(model)
    frame = np.zeros(p + q + 2)
    if kind == "negative" or (kind == "default" and model.tag == "cr"):
        frame[p + 1] = 1.0
    elif kind in ("positive", "default"):
        frame[0] = 1.0
    elif kind == "null":
        frame[0] = frame[p + 1] = 1.0
    else:
        raise ConfigError(f"unknown datum kind {kind!r}")
    return mdl.ReductionDatum.vector(model.from_orthonormal(frame))


def run_model_orbits(cfg: dict, rep: RunReport) -> None:
    model = _model_from_config(cfg)
    datum = datum_from_config(model, cfg)
    rng = np.random.default_rng(cfg["seed"])
    points = mdl.uniform_points(model, rng, cfg["samples"])
    targeted = mdl.targeted_points(model, datum)
    if targeted:
        points = np.vstack([points] + targeted)
    table = mdl.orbit_decompose_grid(model, datum, points, "model-orbits", cfg["threads"],
                                     cfg["zero_tol"])
    rep.tables["model-orbits"] = table
    declared = _labels(mdl.declared_labels(model, datum))
    rep.check_equal("observed labels", sorted(table.observed_labels), declared)
    h = mdl.stabilizer(model, datum)
    worst = 0
    for label in table.observed_labels:
        x = next(np.array(s["coordinates"]) for s in table.samples if s["label"] == label)
        worst = max(worst, mdl.h_orbit_invariance_check(model, datum, x, cfg["invariance_samples"],
                                                        rng, 0.5, h))
    rep.check_equal("H-orbit label disagreements", worst, 0)


def run_flow_identity(cfg: dict, rep: RunReport) -> None:
    model = _model_from_config(cfg)
    datum = datum_from_config(model, cfg)
    rng = np.random.default_rng(cfg["seed"])
    worst = 0.0
    for _ in range(cfg["samples"]):
        u = lie.exponential(model.algebra.sample(rng, 0.5))
        x = model.g_minus.sample(rng)
        x *= rng.uniform() / max(np.linalg.norm(x), 1e-300)
        worst = max(worst, mdl.flow_identity_check(model, datum, u, x))
    rep.check_below("max flow residual", worst, cfg["tol"])


def _stabilizer_cases(p: int, q: int) -> list[tuple[str, mdl.HomogeneousModel, mdl.ReductionDatum, int]]:
    conf = mdl.conformal_model(p, q)
    n = p + q
    cr = mdl.cr_model(p, q)
    proj = mdl.projective_model(n)
    out = [
        ("projective form", proj,
         mdl.ReductionDatum.symmetric_form(np.diag([1.0] * (p + 1) + [-1.0] * q)), lie.so_dim(n + 1)),
        ("conformal positive", conf, datum_from_config(conf, {"signature": (p, q), "datum": {"kind": "positive"}}),
         lie.so_dim(n + 1)),
        ("conformal null", conf, datum_from_config(conf, {"signature": (p, q), "datum": {"kind": "null"}}),
         lie.so_dim(n) + n),
        ("cr negative", cr, datum_from_config(cr, {"signature": (p, q), "datum": {"kind": "negative"}}),
         lie.su_dim(n + 1)),
    ]
    return out


def run_stabilizer_dims(cfg: dict, rep: RunReport) -> None:
    p, q = cfg["signature"]
    for name, model, datum, expected in _stabilizer_cases(p, q):
        h = mdl.stabilizer(model, datum)
        rep.check_equal(f"{name} stabilizer dim", h.dim, expected)
        rep.check_below(f"{name} closure residual", h.closure_residual, cfg["closure_tol"])
    if cfg["include_three_form"]:
        _g2_checks(cfg, rep)


def _g2_checks(cfg: dict, rep: RunReport) -> None:
    model = mdl.conformal_model(2, 3)
    h = mdl.stabilizer(model, mdl.g2_three_form_datum(model))
    rep.check_equal("three-form stabilizer dim", h.dim, 14)
    rep.check_below("three-form closure residual", h.closure_residual, cfg["closure_tol"])


def run_g2(cfg: dict, rep: RunReport) -> None:
    _g2_checks(cfg, rep)


def run_fefferman(cfg: dict, rep: RunReport) -> None:
    p, q = cfg["signature"]
    model = mdl.conformal_model(p, q)
    datum = mdl.fefferman_complex_structure(model)
    h = mdl.stabilizer(model, datum)
    rng = np.random.default_rng(cfg["seed"])
    points = mdl.uniform_points(model, rng, cfg["samples"])
    table = StrataReport("fefferman-transitivity", ["SINGLE"])
    short = 0
    for x in points:
        label = mdl.p_type(model, datum, x)
        dim = mdl.orbit_dimension(model, h, x)
        short += dim != model.dimension
        table.add(x, str(label), orbit_dim=dim)
    rep.tables["fefferman-transitivity"] = table
    rep.check_equal("observed labels", sorted(table.observed_labels), ["SINGLE"])
    rep.check_equal("points with non-open H-orbit", short, 0)
    rep.check_equal("stabilizer dim", h.dim, lie.su_dim((p + q + 2) // 2) + 1)


def run_cr_codim2(cfg: dict, rep: RunReport) -> None:
    p, q = cfg["signature"]
    model = mdl.cr_model(p, q)
    datum = datum_from_config(model, {"signature": (p, q), "datum": {"kind": "negative"}})
    rng = np.random.default_rng(cfg["seed"])
    points = np.vstack([mdl.uniform_points(model, rng, cfg["samples"])] + mdl.targeted_points(model, datum))
    table = mdl.orbit_decompose_grid(model, datum, points, "cr-codim2", cfg["threads"])
    rep.tables["cr-codim2"] = table
    rep.check_equal("observed labels", sorted(table.observed_labels), ["OPEN", "ZERO"])
    rep.check_equal("ZERO stratum geometry", table.stratum_geometry.get("ZERO"), "CODIM2")
    h = mdl.stabilizer(model, datum)
    rep.check_equal("stabilizer dim", h.dim, lie.su_dim(p + q + 1))
    x_open = next(np.array(s["coordinates"]) for s in table.samples if s["label"] == "OPEN")
    _, inter = mdl.stabilizer_pair(model, datum, x_open, h)
    rep.check_equal("open-orbit isotropy dim", inter.dim, lie.su_dim(p + q) if p + q > 1 else 0)


# -- chart scenarios ---------------------------------------------------------------------

FLAT_SCALES = {
    "poincare": (lambda x: (1 - x @ x) / 2, 1.0, "HYPERSURFACE"),
    "sphere": (lambda x: (1 + x @ x) / 2, -1.0, None),
    "hyperplane": (lambda x: x[0], 1.0, "HYPERSURFACE"),
    "point": (lambda x: x @ x / 2, 0.0, "ISOLATED"),
}


def flat_scale_section(dim: int, name: str):
    """Connection on flat space and the parallel section of a closed-form scale."""
    if name not in FLAT_SCALES:
        raise ConfigError(f"unknown scale {name!r}")
    conn = TractorConnection(flat(dim))
    formula = FLAT_SCALES[name][0]
    x0 = np.zeros(dim)
    s = bgg.ParallelSection(conn, x0, splitting_operator(conn.chart, formula, x0))
    return conn, s, bgg.NormalSolution(s, formula)


def run_almost_einstein_flat(cfg: dict, rep: RunReport) -> None:
    n = cfg["dim"]
    name = cfg["sigma"]
    conn, s, sol = flat_scale_section(n, name)
    _, expected_h, expected_geometry = FLAT_SCALES[name]
    pts = bgg.grid_points(cfg["grid"]["box"] or [(-2, 2)] * n, cfg["grid"]["resolution"])
    h_ss = s.g_type
    rep.check_below("|h(s,s) - expected|", abs(h_ss - expected_h), cfg["tol_h"])
    rep.check_below("h(s,s) spread over grid", bgg.h_constancy_residual(s, pts), cfg["tol_h"])
    closed = np.array([float(sol.formula(jnp.asarray(p))) for p in pts])
    rep.check_below("max |Π(s) - σ|", float(np.max(np.abs(sol.on(pts) - closed))), cfg["tol_h"])
    sign = int(np.sign(-h_ss)) if abs(h_ss) > cfg["tol_h"] else 0
    away = pts[np.abs(closed) > cfg["margin"]]
    residual = bgg.einstein_verify(conn.chart, sol, sign, away, margin=cfg["margin"])
    rep.check_below(f"Einstein residual (lambda={sign * (n - 1)})", residual, cfg["tol_einstein"])
    if abs(h_ss) > cfg["tol_h"]:
        rep.check_equal("sign law", sign, -int(np.sign(h_ss)))
    table = bgg.curved_orbit_decompose(conn, s, pts, "almost-einstein-flat")
    rep.tables["almost-einstein-flat"] = table
    geometry = "/".join(sorted(set(table.stratum_geometry.values()))) or None
    rep.check_equal("zero-set geometry", geometry, expected_geometry)
    rep.check_equal("labels within model orbit set", table.notes["labels_subset_of_model"], True)
    if name == "poincare":
        zs = [np.array(r["coordinates"]) for r in table.samples if r["label"] == "ZERO"]
        rep.check_below("max ||x| - 1| on zero set",
                        max((abs(np.linalg.norm(z) - 1) for z in zs), default=np.inf), 1e-9)


def run_almost_einstein_null(cfg: dict, rep: RunReport) -> None:
    p, q = cfg["signature"]
    n = p + q
    conn = TractorConnection(flat(n, (p, q)))
    formula = lambda x: (jnp.sum(x[:p] ** 2) - jnp.sum(x[p:] ** 2)) / 2
    x0 = np.zeros(n)
    s = bgg.ParallelSection(conn, x0, splitting_operator(conn.chart, formula, x0))
    sol = bgg.NormalSolution(s, formula)
    pts = bgg.grid_points(cfg["grid"]["box"] or [(-2, 2)] * n, cfg["grid"]["resolution"])
    rep.check_below("|h(s,s)|", abs(s.g_type), cfg["tol_h"])
    table = bgg.curved_orbit_decompose(conn, s, pts, "almost-einstein-null")
    rep.tables["almost-einstein-null"] = table
    observed = table.observed_labels
    rep.check_equal("M2 (hypersurface) present", "HYPERSURFACE" in observed, True)
    rep.check_equal("M3 (isolated) present", bool({"ISOLATED_PLUS", "ISOLATED_MINUS"} & observed), True)
    rep.check_equal("labels within model orbit set", table.notes["labels_subset_of_model"], True)
    closed = np.array([float(formula(jnp.asarray(x))) for x in pts])
    away = pts[np.abs(closed) > cfg["margin"]]
    rep.check_below("Ricci-flat residual", bgg.einstein_verify(conn.chart, sol, 0, away, margin=cfg["margin"]),
                    cfg["tol_einstein"])
    model = mdl.conformal_model(p, q)
    datum = datum_from_config(model, {"signature": (p, q), "datum": {"kind": "null"}})
    rng = np.random.default_rng(cfg["seed"])
    h = mdl.stabilizer(model, datum)
    reps = {str(mdl.p_type(model, datum, x)): x for x in
            list(mdl.uniform_points(model, rng, 200)) + mdl.targeted_points(model, datum)}
    worst = max(mdl.h_orbit_invariance_check(model, datum, x, cfg["invariance_samples"], rng, 0.5, h)
                for x in reps.values())
    rep.check_equal("model labels", sorted(reps), _labels(mdl.declared_labels(model, datum)))
    rep.check_equal("H-orbit label disagreements", worst, 0)


def run_projective_metric(cfg: dict, rep: RunReport) -> None:
    n = cfg["dim"]
    name = cfg["chart"]
    if name == "round_sphere":
        chart, box, sign = round_sphere(n), [(-1.5, 1.5)] * n, 1
    elif name == "poincare_ball":
        chart = chart_from_descriptor({"name": "poincare_ball", "dim": n})
        box, sign = [(-0.5, 0.5)] * n, -1
    elif name == "flat":
        chart, box, sign = flat(n), [(-2, 2)] * n, 0
    else:
        raise ConfigError(f"unknown chart {name!r}")
    pts = bgg.grid_points(cfg["grid"]["box"] or box, cfg["grid"]["resolution"])
    result = bgg.projective_metric_scenario(chart, pts, sign)
    rep.check_below("Einstein residual of the chart metric", result.einstein_residual, cfg["tol_einstein"])
    rep.checks.append(Check("holonomy dim", result.holonomy_dim, 0, None, result.holonomy_dim == 0))
    if name == "flat":
        full = (n + 1) * (n + 2) // 2
        rep.check_equal("parallel metric family dim", result.kernel_dim, full)
        return
    rep.tables["projective-metric"] = result.report
    sig = result.tractor_signature
    expected = (n + 1, 0) if sign > 0 else (n, 1)
    rep.check_equal("tractor metric signature", None if sig is None else [sig.positive, sig.negative],
                    list(expected))
    rep.check_equal("observed labels", sorted(result.report.observed_labels),
                    ["PLUS"] if sign > 0 else ["MINUS"])
    if result.induced_residual is not None:
        rep.check_below("induced metric Einstein residual", result.induced_residual, cfg["tol_einstein"])


def run_holonomy_perturbed(cfg: dict, rep: RunReport) -> None:
    n = cfg["dim"]
    chart = bump_perturbation(n, cfg["eps"], width=cfg["width"], seed=cfg["seed"])
    conn = TractorConnection(chart)
    x0 = np.zeros(n)
    hol = holonomy_algebra(conn, x0, seed=cfg["seed"])
    rep.check_equal("holonomy dim", hol.dim, lie.so_dim(n + 2))
    rep.check_below("holonomy closure residual", hol.closure_residual, cfg["closure_tol"])
    sections = bgg.find_parallel_sections(conn, hol, x0)
    rep.check_equal("parallel sections", len(sections), 0)
    rng = np.random.default_rng(cfg["seed"])
    probes = x0 + 0.5 * rng.uniform(-1, 1, (cfg["probes"], n))
    rep.check_below("normality residual", max(normality_residual(conn, x) for x in probes), cfg["tol_normality"])
    rep.check_below("torsion residual", max(torsion_residual(conn, x) for x in probes), 1e-6)
    flat_conn = TractorConnection(round_sphere(n))
    flat_hol = holonomy_algebra(flat_conn, x0, seed=cfg["seed"])
    rep.check_equal("conformally flat holonomy dim", flat_hol.dim, 0)
    rep.check_below("conformally flat max log norm", flat_hol.diagnostics["max_log_norm"], 1e-6)


GRID = {"box": None, "resolution": 9}

SCENARIOS: dict[str, Scenario] = {s.name: s for s in [
    Scenario("almost-einstein-flat", "conformal almost Einstein scales on flat space", False,
             {"sigma": "poincare", "dim": 3, "grid": GRID, "tol_h": 1e-8, "tol_einstein": 1e-6,
              "margin": 0.05}, run_almost_einstein_flat),
    Scenario("almost-einstein-null", "null almost Einstein scales and the five P-types", True,
             {"signature": [1, 1], "grid": GRID, "tol_h": 1e-8, "tol_einstein": 1e-6, "margin": 0.05,
              "invariance_samples": 500}, run_almost_einstein_null),
    Scenario("cr-codim2", "CR tractors and the codimension-two zero set", True,
             {"signature": [0, 1], "samples": 2000}, run_cr_codim2),
    Scenario("fefferman-transitivity", "orthogonal complex structures (Fefferman type)", True,
             {"signature": [1, 1], "samples": 10000}, run_fefferman),
    Scenario("flow-identity", "comparison of P-types along constant vector field flows", True,
             {"model": "projective", "signature": [2, 1], "samples": 100, "tol": 1e-9, "datum": None},
             run_flow_identity),
    Scenario("g2-stabilizer", "generic 3-forms and the split exceptional algebra", False,
             {"closure_tol": 1e-8}, run_g2),
    Scenario("holonomy-perturbed", "holonomy of a generic conformal structure", True,
             {"dim": 3, "eps": 0.5, "width": 1.0, "probes": 5, "tol_normality": 1e-4,
              "closure_tol": SPAN_ATOL},
             run_holonomy_perturbed),
    Scenario("model-orbits", "H-orbit decomposition of homogeneous models", True,
             {"model": "projective", "signature": [2, 1], "samples": 2000, "datum": None, "zero_tol": 1e-9,
              "invariance_samples": 50}, run_model_orbits),
    Scenario("projective-metric", "projective structures with a parallel tractor metric", False,
             {"chart": "round_sphere", "dim": 3, "grid": {"box": None, "resolution": 5},
              "tol_einstein": 1e-5}, run_projective_metric),
    Scenario("stabilizer-dims", "stabilizers of holonomy reduction data", False,
             {"signature": [2, 1], "closure_tol": 1e-8, "include_three_form": True}, run_stabilizer_dims),
]}


def list_scenarios() -> list[str]:
    return [f"{name} → {SCENARIOS[name].topic}" for name in sorted(SCENARIOS)]


def validate_config(config: dict) -> dict:
    """Merge defaults, reject unknown keys and enforce seeds for sampling scenarios."""
    if not isinstance(config, dict):
        raise ConfigError("configuration must be a JSON object")
    name = config.get("scenario")
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    sc = SCENARIOS[name]
    unknown = set(config) - set(sc.defaults) - COMMON_KEYS
    if unknown:
        raise ConfigError(f"unknown keys for {name}: {sorted(unknown)}")
    cfg = {**sc.defaults, **config}
    if "grid" in sc.defaults:
        grid = dict(sc.defaults["grid"])
        extra = set(config.get("grid") or {}) - set(grid)
        if extra:
            raise ConfigError(f"unknown grid keys: {sorted(extra)}")
        grid.update(config.get("grid") or {})
        cfg["grid"] = grid
    if sc.sampling and cfg.get("seed") is None:
        raise ConfigError(f"scenario {name} samples randomly and needs a seed")
    if "seed" in cfg and cfg["seed"] is not None:
        if not isinstance(cfg["seed"], int) or cfg["seed"] < 0 or cfg["seed"] >= 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
    cfg.setdefault("threads", 1)
    if not isinstance(cfg["threads"], int) or cfg["threads"] < 1:
        raise ConfigError("threads must be a positive integer")
    if "signature" in cfg:
        sig = cfg["signature"]
        if (not isinstance(sig, (list, tuple)) or len(sig) != 2
                or not all(isinstance(v, int) and v >= 0 for v in sig)):
            raise ConfigError("signature must be a pair of non-negative integers")
    return cfg


def run_scenario(config: dict) -> RunReport:
    cfg = validate_config(config)
    rep = RunReport(cfg["scenario"], {k: v for k, v in sorted(cfg.items()) if k != "output_dir"})
    start = time.perf_counter()
    SCENARIOS[cfg["scenario"]].runner(cfg, rep)
    rep.wall_clock = time.perf_counter() - start
    return rep


def stabilizer_from_descriptor(desc: dict) -> lie.AlgebraBasis:
    """Stabilizer for ``{"algebra": ..., "representation": ..., "datum": ...}``.

    ``algebra`` is ``{"name": "sl", "n": k}``, ``{"name": "so", "form": M}``,
    ``{"name": "su", "form": H}`` (complex entries as ``[re, im]`` pairs) or
    ``{"name": "gl", "n": k}``; ``representation`` is one of ``vector``,
    ``bilinear``, ``endomorphism``, ``three_form``, ``ray``, ``complex_line``.
    """
    alg = desc.get("algebra")
    if not isinstance(alg, dict) or "name" not in alg:
        raise ConfigError("descriptor needs an algebra object with a name")
    name = alg["name"]
    if name == "sl":
        algebra = lie.sl_real(int(alg["n"]))
    elif name == "gl":
        algebra = lie.gl(int(alg["n"]))
    elif name == "so":
        algebra = lie.orthogonal_algebra(np.asarray(alg["form"], dtype=float))
    elif name == "su":
        raw = np.asarray(alg["form"], dtype=float)
        algebra = lie.unitary_algebra(HermitianForm(raw[..., 0] + 1j * raw[..., 1]).real)
    else:
        raise ConfigError(f"unknown algebra {name!r}")
    actions = {"vector": lie.act_vector, "bilinear": lie.act_bilinear,
               "endomorphism": lie.act_endomorphism, "three_form": lie.act_three_form,
               "ray": lie.act_ray, "complex_line": lie.act_complex_line}
    rep_name = desc.get("representation")
    if rep_name not in actions:
        raise ConfigError(f"unknown representation {rep_name!r}")
    if "datum" not in desc:
        raise ConfigError("descriptor needs a datum")
    datum = np.asarray(desc["datum"], dtype=float)
    return lie.stabilizer_algebra(algebra, actions[rep_name], datum)


__all__ = ["Check", "RunReport", "SCENARIOS", "list_scenarios", "run_scenario",
           "stabilizer_from_descriptor", "validate_config"]
