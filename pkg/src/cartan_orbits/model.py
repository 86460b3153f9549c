"""Homogeneous models ``G/P``, reduction data and P-type classifiers.

Four models are supported, all realised on a representation space in which
the parabolic ``P`` is the stabiliser of the (real or complex) line through the
first basis vector ``e0``:

* ``projective``: ``SL(n+1, R)`` acting on rays of ``R^{n+1}`` (the sphere ``S^n``);
* ``conformal``: ``SO(p+1, q+1)`` acting on isotropic rays, with the ambient
  form written in a Witt basis ``[[0,0,1],[0,I_{p,q},0],[1,0,0]]``;
* ``complex_projective``: ``SL(n+1, C)`` (as a real group) acting on ``CP^n``;
* ``cr``: ``SU(p+1, q+1)`` acting on isotropic complex lines.

On the model the reduction is given by a fixed element ``alpha`` and the
P-type of ``gP`` is the P-orbit of ``g^{-1} alpha``; it is evaluated through the
pairing of ``alpha`` with the representative ``x = g e0``.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import lie
from .errors import InvalidDirection, InvalidForm, InvalidPoint, ScenarioMismatch
from .forms import (HermitianForm, SymmetricForm, complex_to_real, null_vector, orthocomplement,
                    real_to_complex, standard_complex_structure, ZERO_TOL)
from .report import StrataReport

AMBIGUITY_FACTOR = 100.0
PARALLEL_TOL = 1e-8


class Quotient(str, enum.Enum):
    RAY = "RAY"
    LINE = "LINE"
    COMPLEX_LINE = "COMPLEX_LINE"


class Label(str, enum.Enum):
    PLUS = "PLUS"
    ZERO = "ZERO"
    MINUS = "MINUS"
    ISOLATED_PLUS = "ISOLATED_PLUS"
    ISOLATED_MINUS = "ISOLATED_MINUS"
    HYPERSURFACE = "HYPERSURFACE"
    OPEN_PLUS = "OPEN_PLUS"
    OPEN_MINUS = "OPEN_MINUS"
    OPEN = "OPEN"
    SINGLE = "SINGLE"
    AMBIGUOUS = "AMBIGUOUS"

    def __str__(self):
        return self.value


OPEN_LABELS = {Label.PLUS, Label.MINUS, Label.OPEN_PLUS, Label.OPEN_MINUS, Label.OPEN, Label.SINGLE}


class Variant(str, enum.Enum):
    SYMMETRIC_FORM = "SYMMETRIC_FORM"
    VECTOR = "VECTOR"
    HERMITIAN_FORM = "HERMITIAN_FORM"
    COMPLEX_STRUCTURE = "COMPLEX_STRUCTURE"
    THREE_FORM = "THREE_FORM"


def _as_array(x) -> np.ndarray:
    return np.asarray(x.representative if isinstance(x, ModelPoint) else x, dtype=float)


@dataclass(frozen=True)
class ReductionDatum:
    """An element ``alpha`` of a G-homogeneous space of tensors.

    ``payload`` is always real: Hermitian forms are stored as the doubled real
    symmetric matrix and complex vectors as ``(Re z, Im z)``.
    """

    variant: Variant
    payload: np.ndarray

    def __post_init__(self):
        p = np.array(self.payload, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "payload", p)
        if self.variant is Variant.COMPLEX_STRUCTURE:
            n = p.shape[0]
            if np.max(np.abs(p @ p + np.eye(n))) > 1e-10:
                raise InvalidForm("complex structure must square to -1")
        if self.variant is Variant.THREE_FORM:
            if (np.max(np.abs(p + p.transpose(1, 0, 2))) > 1e-12
                    or np.max(np.abs(p + p.transpose(0, 2, 1))) > 1e-12):
                raise InvalidForm("3-form must be totally antisymmetric")

    @classmethod
    def symmetric_form(cls, m) -> "ReductionDatum":
        m = SymmetricForm(m).matrix
        return cls(Variant.SYMMETRIC_FORM, m)

    @classmethod
    def hermitian_form(cls, h) -> "ReductionDatum":
        return cls(Variant.HERMITIAN_FORM, HermitianForm(h).real)

    @classmethod
    def vector(cls, v) -> "ReductionDatum":
        v = np.asarray(v)
        if np.iscomplexobj(v):
            v = complex_to_real(v)
        return cls(Variant.VECTOR, v.astype(float))

    @classmethod
    def complex_structure(cls, j) -> "ReductionDatum":
        return cls(Variant.COMPLEX_STRUCTURE, j)

    @classmethod
    def three_form(cls, phi) -> "ReductionDatum":
        return cls(Variant.THREE_FORM, phi)

    def act(self, g: np.ndarray) -> np.ndarray:
        """Payload of ``g . alpha``."""
        g = np.asarray(g, dtype=float)
        p = self.payload
        if self.variant is Variant.VECTOR:
            return g @ p
        ginv = np.linalg.inv(g)
        if self.variant in (Variant.SYMMETRIC_FORM, Variant.HERMITIAN_FORM):
            return ginv.T @ p @ ginv
        if self.variant is Variant.COMPLEX_STRUCTURE:
            return g @ p @ ginv
        return np.einsum("abc,ai,bj,ck->ijk", p, ginv, ginv, ginv)

    def infinitesimal(self, a: np.ndarray) -> np.ndarray:
        """Payload of ``A . alpha`` for ``A`` in the Lie algebra."""
        if self.variant is Variant.VECTOR:
            return lie.act_vector(a, self.payload)
        if self.variant in (Variant.SYMMETRIC_FORM, Variant.HERMITIAN_FORM):
            return lie.act_bilinear(a, self.payload)
        if self.variant is Variant.COMPLEX_STRUCTURE:
            return lie.act_endomorphism(a, self.payload)
        return lie.act_three_form(a, self.payload)

    def with_payload(self, payload) -> "ReductionDatum":
        return ReductionDatum(self.variant, payload)

    def to_json(self) -> dict:
        return {"variant": self.variant.value, "payload": np.asarray(self.payload).tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "ReductionDatum":
        return cls(Variant(data["variant"]), np.asarray(data["payload"], dtype=float))


@dataclass(frozen=True)
class ModelPoint:
    representative: np.ndarray
    quotient: Quotient

    def __post_init__(self):
        r = np.array(self.representative, dtype=float)
        norm = np.linalg.norm(r)
        if norm < 1e-12:
            raise InvalidPoint("model points need a nonzero representative")
        r = r / norm
        r.setflags(write=False)
        object.__setattr__(self, "representative", r)


def witt_form(p: int, q: int) -> np.ndarray:
    """``[[0,0,1],[0,I_{p,q},0],[1,0,0]]`` of signature ``(p+1, q+1)``."""
    n = p + q
    w = np.zeros((n + 2, n + 2))
    w[0, -1] = w[-1, 0] = 1.0
    w[1:-1, 1:-1] = np.diag([1.0] * p + [-1.0] * q)
    return w


def witt_orthonormal_frame(p: int, q: int) -> np.ndarray:
    """Columns: an orthonormal basis for :func:`witt_form`, positive vectors first."""
    n = p + q
    size = n + 2
    cols = []
    e = np.eye(size)
    cols.append((e[0] + e[-1]) / np.sqrt(2))
    cols.extend(e[1 + i] for i in range(p))
    cols.append((e[0] - e[-1]) / np.sqrt(2))
    cols.extend(e[1 + p + i] for i in range(q))
    return np.column_stack(cols)


class HomogeneousModel:
    """A model ``G/P`` realised on rays or lines of a representation space."""

    def __init__(self, tag: str, signature, ambient_dim: int, ambient_form, quotient: Quotient,
                 algebra: lie.AlgebraBasis, blocks: Sequence[int], orthonormal_frame=None):
        self.tag = tag
        self.signature = tuple(signature) if signature is not None else None
        self.ambient_dim = ambient_dim
        self.ambient_form = ambient_form
        self.quotient = quotient
        self.algebra = algebra
        self.blocks = tuple(blocks)
        self.orthonormal_frame = orthonormal_frame
        if ambient_form is not None:
            base = np.zeros(ambient_dim)
            base[0] = 1.0
            if abs(self._form_value(base, base)) > 1e-14:
                raise ValueError("the distinguished line must be isotropic for the ambient form")

    def __repr__(self):
        return f"HomogeneousModel({self.tag!r}, signature={self.signature}, dim={self.dimension})"

    @property
    def is_complex(self) -> bool:
        return self.quotient is Quotient.COMPLEX_LINE

    @property
    def form_matrix(self) -> np.ndarray | None:
        if self.ambient_form is None:
            return None
        if isinstance(self.ambient_form, HermitianForm):
            return self.ambient_form.real
        return self.ambient_form.matrix

    def _form_value(self, x, y) -> float:
        return float(x @ self.form_matrix @ y)

    @cached_property
    def base_point(self) -> np.ndarray:
        e = np.zeros(self.ambient_dim)
        e[0] = 1.0
        return e

    def line_action(self) -> Callable:
        return lie.act_complex_line if self.is_complex else lie.act_ray

    @cached_property
    def parabolic(self) -> lie.AlgebraBasis:
        out = lie.stabilizer_algebra(self.algebra, self.line_action(), self.base_point)
        out.tag = f"p in {self.algebra.tag}"
        return out

    @cached_property
    def g_minus(self) -> lie.AlgebraBasis:
        """``g`` intersected with strictly lower block-triangular matrices."""
        starts = np.cumsum((0,) + self.blocks)
        size = int(starts[-1])
        block_of = np.zeros(size, dtype=int)
        for k in range(len(self.blocks)):
            block_of[starts[k]:starts[k + 1]] = k
        mats = []
        for i in range(size):
            for j in range(size):
                if block_of[i] > block_of[j]:
                    e = np.zeros((size, size), dtype=complex)
                    e[i, j] = 1.0
                    if self.is_complex:
                        mats.append(complex_to_real(e))
                        mats.append(complex_to_real(1j * e))
                    else:
                        mats.append(e.real)
        lower = lie.AlgebraBasis.from_matrices(mats, "lower", self.ambient_dim)
        out = lie.intersect_algebras(self.algebra, lower)
        out.tag = f"g_- in {self.algebra.tag}"
        if out.dim + self.parabolic.dim != self.algebra.dim:
            raise ValueError("lower block part is not complementary to the parabolic")
        return out

    @property
    def dimension(self) -> int:
        """Real dimension of ``G/P``."""
        return self.algebra.dim - self.parabolic.dim

    def quotient_directions(self, x: np.ndarray) -> np.ndarray:
        """Columns spanning the fibre of the quotient map through ``x``."""
        if self.is_complex:
            j0 = standard_complex_structure(self.ambient_dim // 2)
            return np.column_stack([x, j0 @ x])
        return x[:, None]

    def validate_point(self, x, zero_tol: float = ZERO_TOL) -> np.ndarray:
        x = _as_array(x)
        if x.shape != (self.ambient_dim,):
            raise InvalidPoint(f"expected a vector of length {self.ambient_dim}")
        norm2 = float(x @ x)
        if norm2 < 1e-24:
            raise InvalidPoint("zero representative")
        if self.ambient_form is not None:
            scale = float(np.max(np.abs(np.linalg.eigvalsh(self.form_matrix))))
            if abs(self._form_value(x, x)) > zero_tol * scale * norm2 * 10:
                raise InvalidPoint("point is not isotropic for the ambient form")
        return x

    def point(self, x) -> ModelPoint:
        return ModelPoint(self.validate_point(x), self.quotient)

    def from_orthonormal(self, v) -> np.ndarray:
        """Vector given in the orthonormal frame, converted to model coordinates."""
        frame = self.orthonormal_frame
        v = np.asarray(v)
        if self.is_complex:
            return complex_to_real(frame @ v.astype(complex))
        return frame @ v

    def group_element(self, a: np.ndarray) -> np.ndarray:
        return lie.exponential(a)


def projective_model(n: int) -> HomogeneousModel:
    """The projective sphere ``S^n`` as rays in ``R^{n+1}``."""
    return HomogeneousModel("projective", None, n + 1, None, Quotient.RAY,
                            lie.sl_real(n + 1), (1, n))


def conformal_model(p: int, q: int) -> HomogeneousModel:
    """Isotropic rays in ``R^{p+1,q+1}``; the model of signature ``(p, q)`` conformal geometry."""
    w = witt_form(p, q)
    alg = lie.orthogonal_algebra(w, tag=f"so({p + 1},{q + 1})")
    return HomogeneousModel("conformal", (p, q), p + q + 2, SymmetricForm(w), Quotient.RAY,
                            alg, (1, p + q, 1), witt_orthonormal_frame(p, q))


def complex_projective_model(n: int) -> HomogeneousModel:
    """``CP^n`` as complex lines in ``C^{n+1}``."""
    return HomogeneousModel("complex_projective", None, 2 * (n + 1), None, Quotient.COMPLEX_LINE,
                            lie.sl_complex(n + 1), (1, n))


def cr_model(p: int, q: int) -> HomogeneousModel:
    """Isotropic complex lines in ``C^{p+1,q+1}``; the CR model of signature ``(p, q)``."""
    w = witt_form(p, q).astype(complex)
    herm = HermitianForm(w)
    alg = lie.unitary_algebra(herm.real, tag=f"su({p + 1},{q + 1})")
    return HomogeneousModel("cr", (p, q), 2 * (p + q + 2), herm, Quotient.COMPLEX_LINE,
                            alg, (1, p + q, 1), witt_orthonormal_frame(p, q).astype(complex))


def build_model(tag: str, signature=None, n: int | None = None) -> HomogeneousModel:
    if tag == "projective":
        return projective_model(n if n is not None else sum(signature) - 1)
    if tag == "conformal":
        return conformal_model(*signature)
    if tag == "complex_projective":
        return complex_projective_model(n if n is not None else sum(signature) - 1)
    if tag == "cr":
        return cr_model(*signature)
    raise ScenarioMismatch(f"unknown model {tag!r}")


# -- reduction data on the conformal model ----------------------------------

def _orthonormal_to_model_endomorphism(model: HomogeneousModel, j_orth: np.ndarray) -> np.ndarray:
    c = model.orthonormal_frame
    return c @ j_orth @ np.linalg.inv(c)


def fefferman_complex_structure(model: HomogeneousModel) -> ReductionDatum:
    """Orthogonal complex structure rotating consecutive pairs of an orthonormal frame."""
    p, q = model.signature
    if model.tag != "conformal" or p % 2 == 0 or q % 2 == 0:
        raise ScenarioMismatch("needs a conformal model with p and q odd")
    size = p + q + 2
    j = np.zeros((size, size))
    for k in range(0, size, 2):
        j[k + 1, k] = 1.0
        j[k, k + 1] = -1.0
    return ReductionDatum.complex_structure(_orthonormal_to_model_endomorphism(model, j))


SPLIT_G2_TERMS = ((1, (0, 1, 2)), (-1, (0, 3, 4)), (-1, (0, 5, 6)), (-1, (1, 3, 5)),
                  (1, (1, 4, 6)), (1, (2, 3, 6)), (1, (2, 4, 5)))


def three_form_from_terms(terms, dim: int = 7) -> np.ndarray:
    phi = np.zeros((dim, dim, dim))
    for sign, (i, j, k) in terms:
        for perm, parity in (((i, j, k), 1), ((j, k, i), 1), ((k, i, j), 1),
                             ((j, i, k), -1), ((i, k, j), -1), ((k, j, i), -1)):
            phi[perm] = sign * parity
    return phi


def split_g2_three_form() -> np.ndarray:
    """A generic 3-form on ``R^{3,4}`` whose induced metric is ``diag(1,1,1,-1,-1,-1,-1)``."""
    return three_form_from_terms(SPLIT_G2_TERMS)


def g2_three_form_datum(model: HomogeneousModel) -> ReductionDatum:
    if model.tag != "conformal" or tuple(model.signature) != (2, 3):
        raise ScenarioMismatch("the generic 3-form lives on the (2,3) conformal model")
    cinv = np.linalg.inv(model.orthonormal_frame)
    phi = np.einsum("abc,ai,bj,ck->ijk", split_g2_three_form(), cinv, cinv, cinv)
    return ReductionDatum.three_form(phi)


# -- validation -------------------------------------------------------------

_ALLOWED = {
    "projective": {Variant.SYMMETRIC_FORM},
    "conformal": {Variant.VECTOR, Variant.COMPLEX_STRUCTURE, Variant.THREE_FORM},
    "complex_projective": {Variant.HERMITIAN_FORM},
    "cr": {Variant.VECTOR},
}


def check_datum(model: HomogeneousModel, datum: ReductionDatum) -> None:
    if datum.variant not in _ALLOWED[model.tag]:
        raise ScenarioMismatch(f"{datum.variant.value} is not a reduction datum for the {model.tag} model")
    size = model.ambient_dim
    if datum.payload.shape[0] != size:
        raise ScenarioMismatch("datum does not live on the model's representation space")
    if datum.variant is Variant.COMPLEX_STRUCTURE:
        w = model.form_matrix
        if np.max(np.abs(datum.payload.T @ w @ datum.payload - w)) > 1e-10:
            raise ScenarioMismatch("complex structure is not orthogonal for the ambient form")
    if datum.variant is Variant.VECTOR and model.tag == "cr":
        if abs(_norm_class(model, datum)) == 0:
            raise ScenarioMismatch("only non-null CR tractors are classified")


def _norm_class(model: HomogeneousModel, datum: ReductionDatum) -> int:
    """Sign of ``h(v, v)`` for a vector datum with a relative zero threshold."""
    v = datum.payload
    w = model.form_matrix
    value = float(v @ w @ v)
    if abs(value) <= ZERO_TOL * float(v @ v) * float(np.max(np.abs(np.linalg.eigvalsh(w)))):
        return 0
    return 1 if value > 0 else -1


def is_null_datum(model: HomogeneousModel, datum: ReductionDatum) -> bool:
    return datum.variant is Variant.VECTOR and _norm_class(model, datum) == 0


# -- P-type classification ---------------------------------------------------

def _sign_label(value: float, scale: float, zero_tol: float, plus, zero, minus) -> Label:
    tol = zero_tol * scale
    if abs(value) <= tol:
        return zero
    if abs(value) <= AMBIGUITY_FACTOR * tol:
        return Label.AMBIGUOUS
    return plus if value > 0 else minus


def defining_function(model: HomogeneousModel, datum: ReductionDatum) -> Callable[[np.ndarray], np.ndarray]:
    """Homogeneous function on representatives whose zero set is the non-open part.

    Real valued except for CR, where it returns ``(Re, Im)`` of ``h(x, v)``.
    """
    p = datum.payload
    if datum.variant in (Variant.SYMMETRIC_FORM, Variant.HERMITIAN_FORM):
        return lambda x: np.atleast_1d(x @ p @ x)
    if datum.variant is Variant.VECTOR:
        w = model.form_matrix
        if model.tag == "cr":
            j0 = standard_complex_structure(model.ambient_dim // 2)
            # h(x, v) = Re - i Re(x, J0 v) in the doubled representation
            return lambda x: np.array([x @ w @ p, -(x @ w @ (j0 @ p))])
        return lambda x: np.atleast_1d(x @ w @ p)
    return lambda x: np.zeros(1)


def _pairing_scale(model: HomogeneousModel, datum: ReductionDatum, x: np.ndarray) -> float:
    p = datum.payload
    if datum.variant in (Variant.SYMMETRIC_FORM, Variant.HERMITIAN_FORM):
        return float(np.max(np.abs(np.linalg.eigvalsh(p)))) * float(x @ x)
    w = model.form_matrix
    return float(np.max(np.abs(np.linalg.eigvalsh(w)))) * float(np.linalg.norm(x) * np.linalg.norm(p))


def p_type(model: HomogeneousModel, datum: ReductionDatum, x, zero_tol: float = ZERO_TOL) -> Label:
    """P-type of the point represented by ``x`` with respect to ``datum``."""
    check_datum(model, datum)
    x = model.validate_point(x, zero_tol)
    f = defining_function(model, datum)(x)
    scale = _pairing_scale(model, datum, x)
    variant = datum.variant
    if variant in (Variant.SYMMETRIC_FORM, Variant.HERMITIAN_FORM):
        return _sign_label(float(f[0]), scale, zero_tol, Label.PLUS, Label.ZERO, Label.MINUS)
    if variant is Variant.VECTOR and model.tag == "cr":
        value = float(np.hypot(*f))
        tol = zero_tol * scale
        if value <= tol:
            return Label.ZERO
        return Label.AMBIGUOUS if value <= AMBIGUITY_FACTOR * tol else Label.OPEN
    if variant is Variant.VECTOR:
        v = datum.payload
        if _norm_class(model, datum) != 0:
            return _sign_label(float(f[0]), scale, zero_tol, Label.PLUS, Label.ZERO, Label.MINUS)
        xn = x / np.linalg.norm(x)
        vn = v / np.linalg.norm(v)
        along = float(xn @ vn)
        if np.linalg.norm(xn - along * vn) <= PARALLEL_TOL:
            return Label.ISOLATED_PLUS if along > 0 else Label.ISOLATED_MINUS
        return _sign_label(float(f[0]), scale, zero_tol, Label.OPEN_PLUS, Label.HYPERSURFACE,
                           Label.OPEN_MINUS)
    if variant is Variant.COMPLEX_STRUCTURE:
        jx = datum.payload @ x
        w = model.form_matrix
        independent = np.linalg.norm(jx - x * (x @ jx) / (x @ x)) > PARALLEL_TOL * np.linalg.norm(jx)
        if not independent or abs(jx @ w @ x) > 1e-8 or abs(jx @ w @ jx) > 1e-8 * (jx @ jx):
            raise InvalidPoint("complex structure is not compatible at this point")
        return Label.SINGLE
    return Label.SINGLE


def declared_labels(model: HomogeneousModel, datum: ReductionDatum) -> set[Label]:
    """The orbit set the P-type decomposition should exhibit for this datum."""
    check_datum(model, datum)
    variant = datum.variant
    if variant in (Variant.COMPLEX_STRUCTURE, Variant.THREE_FORM):
        return {Label.SINGLE}
    if variant in (Variant.SYMMETRIC_FORM, Variant.HERMITIAN_FORM):
        form = (SymmetricForm(datum.payload) if variant is Variant.SYMMETRIC_FORM
                else HermitianForm.from_real(datum.payload))
        pos, neg, _ = form.signature_cache
        out = set()
        if pos:
            out.add(Label.PLUS)
        if neg:
            out.add(Label.MINUS)
        if pos and neg:
            out.add(Label.ZERO)
        return out
    p, q = model.signature
    sign = _norm_class(model, datum)
    if model.tag == "cr":
        # v^perp has signature (p+1, q) for negative v and (p, q+1) for positive v
        return {Label.OPEN} | ({Label.ZERO} if (q if sign < 0 else p) >= 1 else set())
    if sign == 0:
        out = {Label.ISOLATED_PLUS, Label.ISOLATED_MINUS, Label.OPEN_PLUS, Label.OPEN_MINUS}
        if p >= 1 and q >= 1:
            out.add(Label.HYPERSURFACE)
        return out
    out = {Label.PLUS, Label.MINUS}
    if (p if sign > 0 else q) >= 1:
        out.add(Label.ZERO)
    return out


# -- sampling ----------------------------------------------------------------

def _unit_sphere(rng: np.random.Generator, n_samples: int, dim: int, complex_: bool = False) -> np.ndarray:
    if complex_:
        z = rng.standard_normal((n_samples, dim)) + 1j * rng.standard_normal((n_samples, dim))
    else:
        z = rng.standard_normal((n_samples, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def uniform_points(model: HomogeneousModel, rng: np.random.Generator, n_samples: int) -> np.ndarray:
    """Representatives sampled uniformly, one per row, unit Euclidean norm."""
    if model.tag == "projective":
        return _unit_sphere(rng, n_samples, model.ambient_dim)
    if model.tag == "complex_projective":
        z = _unit_sphere(rng, n_samples, model.ambient_dim // 2, True)
        return np.hstack([z.real, z.imag])
    p, q = model.signature
    complex_ = model.tag == "cr"
    a = _unit_sphere(rng, n_samples, p + 1, complex_)
    b = _unit_sphere(rng, n_samples, q + 1, complex_)
    orth = np.hstack([a, b]) / np.sqrt(2.0)
    x = orth @ model.orthonormal_frame.T
    if complex_:
        x = np.hstack([x.real, x.imag])
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def targeted_points(model: HomogeneousModel, datum: ReductionDatum) -> list[np.ndarray]:
    """Explicit representatives on the measure-zero strata, where they exist."""
    check_datum(model, datum)
    out: list[np.ndarray] = []
    variant = datum.variant
    if variant is Variant.SYMMETRIC_FORM:
        z = null_vector(SymmetricForm(datum.payload))
        if z is not None:
            out.append(z)
    elif variant is Variant.HERMITIAN_FORM:
        z = null_vector(HermitianForm.from_real(datum.payload))
        if z is not None:
            out.append(complex_to_real(z))
    elif variant is Variant.VECTOR and model.tag == "cr":
        herm = model.ambient_form
        v = real_to_complex(datum.payload)
        comp = orthocomplement(herm, [v])
        z = null_vector(herm, comp)
        if z is not None and abs(herm.quadratic(z)) < 1e-12:
            out.append(complex_to_real(z))
    elif variant is Variant.VECTOR:
        form = model.ambient_form
        v = datum.payload
        if is_null_datum(model, datum):
            out.extend([v / np.linalg.norm(v), -v / np.linalg.norm(v)])
            k = int(np.argmax(np.abs(form.matrix @ v)))
            w = np.zeros_like(v)
            w[k] = 1.0
            comp = orthocomplement(form, [v, w])
            z = null_vector(form, comp)
        else:
            z = null_vector(form, orthocomplement(form, [v]))
        if z is not None and abs(form.quadratic(z)) < 1e-12:
            out.append(z)
    return [x / np.linalg.norm(x) for x in out]


# -- local geometry ----------------------------------------------------------

def _transverse(model: HomogeneousModel, x: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(model.quotient_directions(x))
    return vectors - q @ (q.T @ vectors)


def orbit_dimension(model: HomogeneousModel, algebra: lie.AlgebraBasis, x, rtol: float = 1e-8) -> int:
    """Dimension of the orbit through ``[x]`` of the group generated by ``algebra``."""
    x = _as_array(x)
    if algebra.dim == 0:
        return 0
    vecs = _transverse(model, x, np.einsum("kij,j->ik", algebra.elements, x))
    s = np.linalg.svd(vecs, compute_uv=False)
    return int(np.sum(s > rtol * max(1.0, s[0])))


def local_chart(model: HomogeneousModel, x) -> Callable[[np.ndarray], np.ndarray]:
    """Chart ``t -> exp(sum t_j B_j) x`` of ``G/P`` around ``[x]``, ``t in R^dim``."""
    x = _as_array(x)
    g = model.algebra
    vecs = _transverse(model, x, np.einsum("kij,j->ik", g.elements, x))
    _, s, vt = np.linalg.svd(vecs, full_matrices=False)
    coeffs = vt[: model.dimension]
    gens = np.einsum("jk,kab->jab", coeffs, g.elements)

    def chart(t):
        return lie.exponential(np.tensordot(np.asarray(t, float), gens, axes=1)) @ x

    return chart


def local_derivatives(model: HomogeneousModel, datum: ReductionDatum, x,
                      step: float = 1e-4) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference Jacobian and (first component) Hessian of the defining function."""
    x = _as_array(x)
    x = x / np.linalg.norm(x)
    f = defining_function(model, datum)
    chart = local_chart(model, x)
    n = model.dimension
    eye = np.eye(n)
    f0 = f(chart(np.zeros(n)))
    jac = np.zeros((f0.size, n))
    hess = np.zeros((n, n))
    for i in range(n):
        fp = f(chart(step * eye[i]))
        fm = f(chart(-step * eye[i]))
        jac[:, i] = (fp - fm) / (2 * step)
        hess[i, i] = (fp[0] - 2 * f0[0] + fm[0]) / step ** 2
        for j in range(i + 1, n):
            fpp = f(chart(step * (eye[i] + eye[j])))[0]
            fpm = f(chart(step * (eye[i] - eye[j])))[0]
            fmp = f(chart(step * (-eye[i] + eye[j])))[0]
            fmm = f(chart(-step * (eye[i] + eye[j])))[0]
            hess[i, j] = hess[j, i] = (fpp - fpm - fmp + fmm) / (4 * step ** 2)
    return jac, hess


def classify_stratum(jac: np.ndarray, hess: np.ndarray, tol: float = 1e-6) -> str:
    """Local geometry of a zero point from the differential of its defining map."""
    sv = np.linalg.svd(jac, compute_uv=False)
    rank = int(np.sum(sv > 10 * tol))
    if rank == jac.shape[0] and rank > 0:
        return "HYPERSURFACE" if rank == 1 else f"CODIM{rank}"
    if sv.max(initial=0.0) <= tol and abs(np.linalg.det(hess)) > tol:
        return "ISOLATED"
    return "UNRESOLVED"


# -- operations ----------------------------------------------------------------

def model_solution_value(datum: ReductionDatum, g: np.ndarray) -> ReductionDatum:
    """Value ``g^{-1} . alpha`` of the model's parallel section at ``g``."""
    return datum.with_payload(datum.act(np.linalg.inv(np.asarray(g, float))))


def flow_identity_check(model: HomogeneousModel, datum: ReductionDatum, u: np.ndarray,
                        x_dir: np.ndarray, tol: float = 1e-10) -> float:
    """``|s(u exp X) - exp(-X) . s(u)|`` for ``X`` in the complement ``g_-``."""
    x_dir = np.asarray(x_dir, dtype=float)
    if model.g_minus.residual(x_dir) > tol * max(1.0, float(np.linalg.norm(x_dir))):
        raise InvalidDirection("X does not lie in the complement g_-")
    alpha = model_solution_value(datum, u)
    lhs = model_solution_value(datum, np.asarray(u) @ lie.exponential(x_dir)).payload
    rhs = alpha.act(lie.exponential(-x_dir))
    return float(np.linalg.norm(lhs - rhs))


def stabilizer(model: HomogeneousModel, datum: ReductionDatum) -> lie.AlgebraBasis:
    check_datum(model, datum)
    out = lie.stabilizer_algebra(model.algebra, lambda a, _: datum.infinitesimal(a), None)
    out.tag = f"h in {model.algebra.tag}"
    return out


def stabilizer_pair(model: HomogeneousModel, datum: ReductionDatum, x,
                    h: lie.AlgebraBasis | None = None) -> tuple[lie.AlgebraBasis, lie.AlgebraBasis]:
    """``(h, h ∩ p_x)``: the model type of the curved orbit through points of this type."""
    x = model.validate_point(x)
    h = h if h is not None else stabilizer(model, datum)
    p_x = lie.stabilizer_algebra(model.algebra, model.line_action(), x, check_closure=False)
    inter = lie.intersect_algebras(h, p_x)
    inter.closure_residual = inter.bracket_closure_residual()
    return h, inter


def h_orbit_invariance_check(model: HomogeneousModel, datum: ReductionDatum, x, n_group_samples: int,
                             rng: np.random.Generator, scale: float = 1.0,
                             h: lie.AlgebraBasis | None = None) -> int:
    """Number of sampled ``h in H`` for which ``p_type(h x) != p_type(x)``."""
    x = model.validate_point(x)
    h = h if h is not None else stabilizer(model, datum)
    ref = p_type(model, datum, x)
    bad = 0
    for _ in range(n_group_samples):
        g = lie.exponential(h.sample(rng, scale))
        y = g @ x
        if p_type(model, datum, y / np.linalg.norm(y)) != ref:
            bad += 1
    return bad


def orbit_decompose_grid(model: HomogeneousModel, datum: ReductionDatum, points: np.ndarray,
                         scenario: str = "model-orbits", threads: int = 1,
                         zero_tol: float = ZERO_TOL, geometry_tol: float = 1e-6) -> StrataReport:
    """Label every representative and diagnose the geometry of the non-open strata."""
    check_datum(model, datum)
    h = stabilizer(model, datum)
    f = defining_function(model, datum)

    def one(x):
        x = x / np.linalg.norm(x)
        label = p_type(model, datum, x, zero_tol)
        row = {"orbit_dim": orbit_dimension(model, h, x),
               "pairing": float(np.linalg.norm(f(x)))}
        if label not in OPEN_LABELS and label is not Label.AMBIGUOUS:
            jac, hess = local_derivatives(model, datum, x)
            row["grad_norm"] = float(np.linalg.norm(jac))
            row["hess_det"] = float(np.linalg.det(hess))
            row["geometry"] = classify_stratum(jac, hess, geometry_tol)
        return x, label, row

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, list(points)))
    else:
        results = [one(x) for x in points]
    report = StrataReport(scenario, sorted(str(l) for l in declared_labels(model, datum)))
    geometry: dict[str, set] = {}
    for x, label, row in results:
        report.add(x, str(label), **row)
        if "geometry" in row:
            geometry.setdefault(str(label), set()).add(row["geometry"])
    report.stratum_geometry = {k: "/".join(sorted(v)) for k, v in geometry.items()}
    report.notes["model_dimension"] = model.dimension
    report.notes["stabilizer_dimension"] = h.dim
    return report
