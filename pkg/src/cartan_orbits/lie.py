"""Matrix Lie algebras: brackets, exponentials, stabilizers and intersections.

Algebra elements and group elements are plain square ``numpy`` arrays.  Finite
dimensional subalgebras are carried as :class:`AlgebraBasis`, a Frobenius
orthonormal family of matrices.  Complex algebras use the doubled real
representation of :mod:`cartan_orbits.forms`.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from typing import Callable, Iterable

import numpy as np
from scipy.linalg import expm, logm, null_space

from .errors import DimensionError, NumericalError
from .forms import standard_complex_structure

NULLSPACE_RTOL = 1e-8
CLOSURE_TOL = 1e-8
COND_LIMIT = 1e12


def bracket(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"cannot bracket shapes {a.shape} and {b.shape}")
    return a @ b - b @ a


def exponential(a: np.ndarray) -> np.ndarray:
    """Matrix exponential (Padé scaling and squaring)."""
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise NumericalError("non-finite entries in exponent")
    return expm(a)


def logarithm(g: np.ndarray) -> np.ndarray:
    """Principal real logarithm; ``g`` must be close enough to the identity."""
    g = np.asarray(g, dtype=float)
    out = logm(g)
    if np.iscomplexobj(out):
        if np.max(np.abs(out.imag), initial=0.0) > 1e-8 * max(1.0, np.max(np.abs(out.real))):
            raise NumericalError("matrix has no real principal logarithm")
        out = out.real
    return out


def adjoint(g: np.ndarray, a: np.ndarray) -> np.ndarray:
    """``Ad(g) a = g a g^{-1}``."""
    g = np.asarray(g, dtype=float)
    a = np.asarray(a, dtype=float)
    if g.shape != a.shape:
        raise DimensionError(f"shapes {g.shape} and {a.shape} differ")
    if np.linalg.cond(g) > COND_LIMIT:
        raise NumericalError("group element is numerically singular")
    return np.linalg.solve(g.T, (g @ a).T).T


class AlgebraBasis:
    """Frobenius-orthonormal basis of a linear space of ``n x n`` matrices."""

    def __init__(self, elements: np.ndarray, tag: str = "", n: int | None = None):
        elements = np.asarray(elements, dtype=float)
        if elements.size == 0:
            if n is None:
                raise DimensionError("empty basis needs an explicit matrix size")
            elements = np.zeros((0, n, n))
        self.elements = elements
        self.elements.setflags(write=False)
        self.tag = tag
        self.closure_residual: float | None = None

    @classmethod
    def from_matrices(cls, matrices: Iterable[np.ndarray], tag: str = "", n: int | None = None,
                      rtol: float = NULLSPACE_RTOL, atol: float = 0.0) -> "AlgebraBasis":
        """Orthonormal basis of the span, dropping numerically dependent parts."""
        mats = [np.asarray(m, dtype=float) for m in matrices]
        if not mats:
            return cls(np.zeros((0, n, n)), tag, n)
        size = mats[0].shape[0]
        flat = np.array([m.ravel() for m in mats])
        u, s, vt = np.linalg.svd(flat, full_matrices=False)
        if s.size == 0 or s[0] == 0.0:
            return cls(np.zeros((0, size, size)), tag, size)
        keep = s > max(rtol * s[0], atol)
        return cls(vt[keep].reshape(-1, size, size), tag, size)

    @property
    def dim(self) -> int:
        return self.elements.shape[0]

    @property
    def n(self) -> int:
        return self.elements.shape[1]

    @property
    def flat(self) -> np.ndarray:
        return self.elements.reshape(self.dim, -1)

    def __len__(self):
        return self.dim

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, i):
        return self.elements[i]

    def coefficients(self, a: np.ndarray) -> np.ndarray:
        return self.flat @ np.asarray(a, dtype=float).ravel()

    def combination(self, coeffs) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        if self.dim == 0:
            return np.zeros((self.n, self.n))
        return np.tensordot(coeffs, self.elements, axes=1)

    def project(self, a: np.ndarray) -> np.ndarray:
        return self.combination(self.coefficients(a))

    def residual(self, a: np.ndarray) -> float:
        """Distance of ``a`` from the span."""
        a = np.asarray(a, dtype=float)
        return float(np.linalg.norm(a - self.project(a)))

    def contains(self, a: np.ndarray, tol: float = 1e-8) -> bool:
        return self.residual(a) <= tol * max(1.0, float(np.linalg.norm(a)))

    def bracket_closure_residual(self) -> float:
        """Largest distance from the span of a bracket of two basis elements."""
        worst = 0.0
        for i, j in itertools.combinations(range(self.dim), 2):
            worst = max(worst, self.residual(bracket(self.elements[i], self.elements[j])))
        return worst

    def same_span(self, other: "AlgebraBasis", tol: float = 1e-8) -> bool:
        if self.dim != other.dim:
            return False
        return all(other.residual(e) <= tol for e in self.elements)

    def sample(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        return self.combination(scale * rng.standard_normal(self.dim))

    def to_json(self) -> dict:
        return {"tag": self.tag, "dim": self.dim, "n": self.n,
                "elements": [e.tolist() for e in self.elements]}

    def __repr__(self):
        return f"AlgebraBasis(tag={self.tag!r}, dim={self.dim}, n={self.n})"


# -- linear actions ---------------------------------------------------------

def act_vector(a, v):
    return a @ v


def act_bilinear(a, m):
    """Infinitesimal action on bilinear forms, ``-(a^T m + m a)``."""
    return -(a.T @ m + m @ a)


def act_endomorphism(a, j):
    return a @ j - j @ a


def act_three_form(a, phi):
    """Infinitesimal action on covariant 3-tensors."""
    return -(np.einsum("li,ljk->ijk", a, phi)
             + np.einsum("lj,ilk->ijk", a, phi)
             + np.einsum("lk,ijl->ijk", a, phi))


def act_ray(a, x):
    """Component of ``a x`` transverse to the line through ``x``."""
    x = np.asarray(x, dtype=float)
    ax = a @ x
    return ax - x * (x @ ax) / (x @ x)


def act_complex_line(a, x):
    """Component of ``a x`` transverse to the complex line through ``x``."""
    x = np.asarray(x, dtype=float)
    j0 = standard_complex_structure(x.size // 2)
    q, _ = np.linalg.qr(np.column_stack([x, j0 @ x]))
    ax = a @ x
    return ax - q @ (q.T @ ax)


def stabilizer_algebra(algebra: AlgebraBasis, act: Callable, v,
                       rtol: float = NULLSPACE_RTOL, atol: float = 1e-12,
                       check_closure: bool = True) -> AlgebraBasis:
    """Basis of ``{A in algebra : act(A, v) = 0}``.

    Singular values below ``rtol * sigma_max`` (or ``atol``) count as zero.
    The bracket-closure residual of the result is stored on the basis.
    """
    if algebra.dim == 0:
        return algebra
    columns = np.array([np.ravel(act(e, v)) for e in algebra.elements]).T
    smax = np.linalg.norm(columns, 2) if columns.size else 0.0
    if smax <= atol:
        result = AlgebraBasis(np.array(algebra.elements), algebra.tag, algebra.n)
    else:
        coeffs = null_space(columns, rcond=max(rtol, atol / smax))
        result = AlgebraBasis(np.einsum("kc,kij->cij", coeffs, algebra.elements)
                              if coeffs.shape[1] else np.zeros((0, algebra.n, algebra.n)),
                              f"stab in {algebra.tag}", algebra.n)
    if check_closure:
        result.closure_residual = result.bracket_closure_residual()
    return result


def intersect_algebras(a: AlgebraBasis, b: AlgebraBasis, rtol: float = NULLSPACE_RTOL) -> AlgebraBasis:
    """Basis of ``span(a) ∩ span(b)``."""
    if a.n != b.n:
        raise DimensionError("algebras act on different spaces")
    if a.dim == 0 or b.dim == 0:
        return AlgebraBasis(np.zeros((0, a.n, a.n)), f"{a.tag} ∩ {b.tag}", a.n)
    system = np.hstack([a.flat.T, -b.flat.T])
    coeffs = null_space(system, rcond=rtol)
    mats = np.einsum("kc,kij->cij", coeffs[: a.dim], a.elements) if coeffs.shape[1] else []
    inter = AlgebraBasis.from_matrices(mats, f"{a.tag} ∩ {b.tag}", a.n)
    s = np.linalg.svd(system, compute_uv=False)
    rank = int(np.sum(s > rtol * s[0]))
    if a.dim + b.dim != rank + inter.dim:
        raise NumericalError("dimension formula failed for intersection "
                             f"({a.dim}+{b.dim} != {rank}+{inter.dim})")
    return inter


def algebra_sum(a: AlgebraBasis, b: AlgebraBasis) -> AlgebraBasis:
    return AlgebraBasis.from_matrices(list(a.elements) + list(b.elements),
                                      f"{a.tag} + {b.tag}", a.n)


# -- standard matrix algebras ----------------------------------------------

def _unit(n, i, j):
    e = np.zeros((n, n))
    e[i, j] = 1.0
    return e


@lru_cache(maxsize=None)
def gl(n: int) -> AlgebraBasis:
    return AlgebraBasis(np.array([_unit(n, i, j) for i in range(n) for j in range(n)]), f"gl({n},R)")


@lru_cache(maxsize=None)
def sl_real(n: int) -> AlgebraBasis:
    out = stabilizer_algebra(gl(n), lambda a, _: np.trace(a), None, check_closure=False)
    out.tag = f"sl({n},R)"
    return out


@lru_cache(maxsize=None)
def gl_complex(n: int) -> AlgebraBasis:
    """``gl(n, C)`` as a real algebra of ``2n x 2n`` matrices."""
    mats = []
    j0 = standard_complex_structure(n)
    for i in range(n):
        for k in range(n):
            e = np.zeros((2 * n, 2 * n))
            e[i, k] = e[n + i, n + k] = 1.0
            mats.append(e)
            mats.append(j0 @ e)
    return AlgebraBasis.from_matrices(mats, f"gl({n},C)")


def complex_trace(a: np.ndarray) -> np.ndarray:
    n = a.shape[0] // 2
    return np.array([np.trace(a[:n, :n]), np.trace(a[n:, :n])])


@lru_cache(maxsize=None)
def sl_complex(n: int) -> AlgebraBasis:
    out = stabilizer_algebra(gl_complex(n), lambda a, _: complex_trace(a), None, check_closure=False)
    out.tag = f"sl({n},C)"
    return out


_FORM_CACHE: dict = {}


def orthogonal_algebra(form: np.ndarray, tag: str | None = None) -> AlgebraBasis:
    """``so(form)`` for a non-degenerate real symmetric matrix."""
    form = np.asarray(form, dtype=float)
    key = ("so", form.shape, form.tobytes())
    if key not in _FORM_CACHE:
        out = stabilizer_algebra(gl(form.shape[0]), act_bilinear, form, check_closure=False)
        out.tag = tag or f"so(form {form.shape[0]})"
        _FORM_CACHE[key] = out
    return _FORM_CACHE[key]


def unitary_algebra(real_form: np.ndarray, special: bool = True, tag: str | None = None) -> AlgebraBasis:
    """``su`` (or ``u``) of a Hermitian form given in doubled real form."""
    real_form = np.asarray(real_form, dtype=float)
    key = ("su" if special else "u", real_form.shape, real_form.tobytes())
    if key not in _FORM_CACHE:
        base = sl_complex(real_form.shape[0] // 2) if special else gl_complex(real_form.shape[0] // 2)
        out = stabilizer_algebra(base, act_bilinear, real_form, check_closure=False)
        out.tag = tag or ("su" if special else "u") + f"(form {real_form.shape[0] // 2})"
        _FORM_CACHE[key] = out
    return _FORM_CACHE[key]


def so_dim(n: int) -> int:
    """Dimension of ``so(p, q)`` with ``p + q = n``."""
    return n * (n - 1) // 2


def su_dim(n: int) -> int:
    """Dimension of ``su(p, q)`` with ``p + q = n``."""
    return n * n - 1
