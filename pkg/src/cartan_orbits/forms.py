"""Signature-aware symmetric and Hermitian forms.

Complex objects live in a fixed doubled real representation: a vector
``z = a + ib`` in ``C^n`` is stored as ``(a, b)`` in ``R^{2n}`` and a complex
matrix ``B + iC`` as the real block matrix ``[[B, -C], [C, B]]``.  Multiplication
by ``i`` is then the block matrix ``J0 = [[0, -I], [I, 0]]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np
from scipy.linalg import null_space

from .errors import DegenerateBasis, DegenerateForm, DimensionError, InvalidForm, InvalidPoint

ZERO_TOL = 1e-9
SYMMETRY_TOL = 1e-12
RANK_TOL = 1e-10


# -- doubled real representation -------------------------------------------

def standard_complex_structure(n: int) -> np.ndarray:
    """The matrix ``J0`` of multiplication by ``i`` on ``R^{2n} = C^n``."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, -eye], [eye, zero]])


def complex_to_real(a: np.ndarray) -> np.ndarray:
    """Doubled real form of a complex matrix, or of a complex vector."""
    a = np.asarray(a, dtype=complex)
    if a.ndim == 1:
        return np.concatenate([a.real, a.imag])
    return np.block([[a.real, -a.imag], [a.imag, a.real]])


def real_to_complex(r: np.ndarray) -> np.ndarray:
    """Inverse of :func:`complex_to_real` (the commuting part is kept)."""
    r = np.asarray(r, dtype=float)
    n = r.shape[0] // 2
    if r.ndim == 1:
        return r[:n] + 1j * r[n:]
    return 0.5 * (r[:n, :n] + r[n:, n:]) + 0.5j * (r[n:, :n] - r[:n, n:])


def _zero_threshold(eigenvalues: np.ndarray, zero_tol: float) -> float:
    scale = float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
    return zero_tol * scale if scale >= zero_tol else zero_tol


@dataclass(frozen=True)
class Signature:
    positive: int
    negative: int
    null: int = 0

    def __post_init__(self):
        if min(self.positive, self.negative, self.null) < 0:
            raise ValueError("signature counts must be non-negative")

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.positive, self.negative, self.null)

    def __iter__(self):
        return iter(self.as_tuple())

    def __eq__(self, other):
        if isinstance(other, tuple):
            return self.as_tuple() == other
        if isinstance(other, Signature):
            return self.as_tuple() == other.as_tuple()
        return NotImplemented

    def __hash__(self):
        return hash(self.as_tuple())

    @property
    def dim(self) -> int:
        return self.positive + self.negative + self.null

    @property
    def nondegenerate(self) -> bool:
        return self.null == 0


class SymmetricForm:
    """A real symmetric bilinear form on ``R^n``."""

    kind = "symmetric"

    def __init__(self, matrix, tol: float = SYMMETRY_TOL):
        m = np.array(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidForm(f"expected a square matrix, got shape {m.shape}")
        scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
        if np.max(np.abs(m - m.T), initial=0.0) > tol * scale:
            raise InvalidForm("matrix is not symmetric within tolerance")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        self._matrix = m

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def dim(self) -> int:
        return self._matrix.shape[0]

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self._matrix)

    @cached_property
    def signature_cache(self) -> Signature:
        return signature(self)

    def __call__(self, u, v) -> float:
        return float(np.asarray(u, float) @ self._matrix @ np.asarray(v, float))

    def quadratic(self, u) -> float:
        return self(u, u)

    def to_json(self) -> dict:
        return {"kind": "symmetric", "dim": self.dim,
                "entries": [float(x) for x in self._matrix.ravel()]}

    def __repr__(self):
        return f"SymmetricForm(dim={self.dim}, signature={self.signature_cache.as_tuple()})"


class HermitianForm:
    """A Hermitian form ``h(z, w) = z^* H w`` on ``C^n``.

    ``real`` is the symmetric ``2n x 2n`` matrix of ``Re h`` in the doubled
    representation; it commutes with ``J0``.
    """

    kind = "hermitian"

    def __init__(self, matrix, tol: float = SYMMETRY_TOL):
        h = np.array(matrix, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise InvalidForm(f"expected a square matrix, got shape {h.shape}")
        scale = max(1.0, float(np.max(np.abs(h))) if h.size else 1.0)
        if np.max(np.abs(h - h.conj().T), initial=0.0) > tol * scale:
            raise InvalidForm("matrix is not Hermitian within tolerance")
        h = 0.5 * (h + h.conj().T)
        h.setflags(write=False)
        self._matrix = h
        r = complex_to_real(h)
        r.setflags(write=False)
        self._real = r

    @classmethod
    def from_real(cls, real, tol: float = SYMMETRY_TOL) -> "HermitianForm":
        r = np.asarray(real, dtype=float)
        n = r.shape[0] // 2
        j0 = standard_complex_structure(n)
        scale = max(1.0, float(np.max(np.abs(r))))
        if np.max(np.abs(r @ j0 - j0 @ r)) > tol * scale:
            raise InvalidForm("real form does not commute with the complex structure")
        if np.max(np.abs(r - r.T)) > tol * scale:
            raise InvalidForm("real form is not symmetric")
        return cls(real_to_complex(r), tol=tol)

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def real(self) -> np.ndarray:
        return self._real

    @property
    def dim(self) -> int:
        return self._matrix.shape[0]

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self._matrix)

    @cached_property
    def signature_cache(self) -> Signature:
        return signature(self)

    def __call__(self, z, w) -> complex:
        z = _as_complex_vector(z, self.dim)
        w = _as_complex_vector(w, self.dim)
        return complex(z.conj() @ self._matrix @ w)

    def quadratic(self, z) -> float:
        return self(z, z).real

    def to_json(self) -> dict:
        entries = []
        for x in self._matrix.ravel():
            entries.extend([float(x.real), float(x.imag)])
        return {"kind": "hermitian", "dim": self.dim, "entries": entries}

    def __repr__(self):
        return f"HermitianForm(dim={self.dim}, signature={self.signature_cache.as_tuple()})"


Form = Union[SymmetricForm, HermitianForm]


def _as_complex_vector(z, n: int) -> np.ndarray:
    z = np.asarray(z)
    if np.iscomplexobj(z):
        return z.astype(complex)
    if z.shape[-1] == 2 * n and n > 0:
        return real_to_complex(z.astype(float))
    return z.astype(complex)


def form_from_json(data: dict) -> Form:
    kind = data.get("kind")
    n = int(data["dim"])
    entries = np.asarray(data["entries"], dtype=float)
    if kind == "symmetric":
        if entries.size != n * n:
            raise InvalidForm("entry count does not match dim")
        return SymmetricForm(entries.reshape(n, n))
    if kind == "hermitian":
        if entries.size != 2 * n * n:
            raise InvalidForm("entry count does not match dim")
        pairs = entries.reshape(n * n, 2)
        return HermitianForm((pairs[:, 0] + 1j * pairs[:, 1]).reshape(n, n))
    raise InvalidForm(f"unknown form kind {kind!r}")


def signature(form: Form, zero_tol: float = ZERO_TOL) -> Signature:
    """Counts of positive, negative and (relatively) zero eigenvalues.

    For a Hermitian form the counts are complex, i.e. those of the ``n x n``
    complex matrix rather than its doubled real form.
    """
    form = _as_form(form)
    ev = form.eigenvalues
    eps = _zero_threshold(ev, zero_tol)
    return Signature(int(np.sum(ev > eps)), int(np.sum(ev < -eps)),
                     int(np.sum(np.abs(ev) <= eps)))


def _as_form(form) -> Form:
    """Plain arrays are read as real symmetric forms."""
    if isinstance(form, (SymmetricForm, HermitianForm)):
        return form
    return SymmetricForm(form)


def _basis_array(form: Form, subspace_basis) -> np.ndarray:
    if isinstance(form, HermitianForm):
        rows = [_as_complex_vector(b, form.dim) for b in subspace_basis]
        basis = np.array(rows, dtype=complex).reshape(len(rows), -1)
    else:
        basis = np.array(subspace_basis, dtype=float).reshape(len(subspace_basis), -1)
    if basis.shape[1] != form.dim:
        raise DimensionError(f"basis vectors have length {basis.shape[1]}, form has dim {form.dim}")
    return basis


def _check_independent(basis: np.ndarray) -> None:
    if basis.shape[0] == 0:
        return
    norms = np.linalg.norm(basis, axis=1)
    if np.any(norms < RANK_TOL):
        raise DegenerateBasis("basis contains a zero vector")
    sv = np.linalg.svd(basis / norms[:, None], compute_uv=False)
    if sv[-1] < RANK_TOL or sv.size < basis.shape[0]:
        raise DegenerateBasis("subspace basis is linearly dependent")


def restrict(form: Form, subspace_basis: Sequence) -> Form:
    """Gram matrix of ``form`` on the given basis, as a form of the same kind."""
    form = _as_form(form)
    basis = _basis_array(form, subspace_basis)
    _check_independent(basis)
    if isinstance(form, HermitianForm):
        return HermitianForm(basis.conj() @ form.matrix @ basis.T, tol=1e-9)
    return SymmetricForm(basis @ form.matrix @ basis.T, tol=1e-9)


class VectorClass(str, enum.Enum):
    POS = "POS"
    NULL = "NULL"
    NEG = "NEG"


def classify_vector(form: Form, v, zero_tol: float = ZERO_TOL) -> VectorClass:
    """Causal character of ``v``; the threshold scales with ``|v|^2 max|λ|``."""
    form = _as_form(form)
    if isinstance(form, HermitianForm):
        z = _as_complex_vector(v, form.dim)
        norm2 = float(np.vdot(z, z).real)
        value = form.quadratic(z)
    else:
        v = np.asarray(v, dtype=float)
        norm2 = float(v @ v)
        value = form.quadratic(v)
    if norm2 <= 1e-24:
        raise InvalidPoint("cannot classify the zero vector")
    scale = float(np.max(np.abs(form.eigenvalues))) * norm2
    threshold = zero_tol * scale if scale >= zero_tol else zero_tol
    if value > threshold:
        return VectorClass.POS
    if value < -threshold:
        return VectorClass.NEG
    return VectorClass.NULL


def orthocomplement(form: Form, subspace_basis: Sequence) -> np.ndarray:
    """Basis (as rows) of the ``form``-orthogonal complement of a subspace."""
    form = _as_form(form)
    if not signature(form).nondegenerate:
        raise DegenerateForm("orthogonal complement needs a non-degenerate form")
    basis = _basis_array(form, subspace_basis)
    if basis.shape[0] == 0:
        return np.eye(form.dim, dtype=basis.dtype)
    if isinstance(form, HermitianForm):
        pairing = basis.conj() @ form.matrix
    else:
        pairing = basis @ form.matrix
    comp = null_space(pairing, rcond=RANK_TOL)
    return comp.T


def null_vector(form: Form, subspace_basis: Sequence | None = None) -> np.ndarray | None:
    """Some nonzero null vector inside the subspace, or ``None`` if definite.

    Degenerate directions of the restricted form are returned first, since
    they are null.
    """
    form = _as_form(form)
    if subspace_basis is None:
        subspace_basis = np.eye(form.dim)
    basis = _basis_array(form, subspace_basis)
    if isinstance(form, HermitianForm):
        gram = basis.conj() @ form.matrix @ basis.T
    else:
        gram = basis @ form.matrix @ basis.T
    ev, vecs = np.linalg.eigh(gram)
    eps = _zero_threshold(ev, ZERO_TOL)
    pos = np.flatnonzero(ev > eps)
    neg = np.flatnonzero(ev < -eps)
    if pos.size and neg.size:
        i, j = pos[-1], neg[0]
        coeff = vecs[:, i] / np.sqrt(ev[i]) + vecs[:, j] / np.sqrt(-ev[j])
    else:
        zero = np.flatnonzero(np.abs(ev) <= eps)
        if not zero.size:
            return None
        coeff = vecs[:, zero[0]]
    out = coeff @ basis
    return out / np.linalg.norm(out)
