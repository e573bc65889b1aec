"""Truncated tensor-product Hilbert space.

Every composite object uses the subsystem order ``(a, b, c, q)``: oscillator
a, oscillator b, the optional oscillator c, then the four-level coupler
``q``.  The composite index is row-major over that order, so the coupler level
is the fastest-varying digit.  Oscillator ``c`` is simply absent when
``n_c == 0``.

Operators are stored sparse (CSR), states dense.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

SUBSYSTEMS = ("a", "b", "c", "q")

#: coupler level indices
G, GP, E, F = 0, 1, 2, 3
LEVEL_NAMES = ("g", "gp", "e", "f")

HERMITIAN_TOL = 1e-12


class DimensionError(ValueError):
    """Raised when operator/state dimensions do not fit together."""


class NotHermitianError(ValueError):
    """Raised when an operator flagged (or required to be) Hermitian is not."""


@dataclass(frozen=True)
class SystemDims:
    """Truncation sizes of the composite space.

    ``n_a``/``n_b``/``n_c`` are Fock cutoffs (states ``0..n-1``); ``n_c == 0``
    removes oscillator c.  The coupler always has four levels.
    """

    n_a: int
    n_b: int
    n_c: int = 0
    n_q: int = 4

    def __post_init__(self):
        if self.n_a < 2 or self.n_b < 2:
            raise DimensionError(f"oscillator truncations must be >= 2, got n_a={self.n_a}, n_b={self.n_b}")
        if self.n_c not in (0, 2):
            raise DimensionError(f"n_c must be 0 (absent) or 2, got {self.n_c}")
        if self.n_q != 4:
            raise DimensionError(f"coupler must have 4 levels, got {self.n_q}")

    @property
    def labels(self) -> tuple[str, ...]:
        return ("a", "b", "c", "q") if self.n_c else ("a", "b", "q")

    @property
    def shape(self) -> tuple[int, ...]:
        if self.n_c:
            return (self.n_a, self.n_b, self.n_c, self.n_q)
        return (self.n_a, self.n_b, self.n_q)

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape))

    def size(self, label: str) -> int:
        return self.shape[self.position(label)]

    def position(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise DimensionError(f"subsystem {label!r} not present in {self.labels}") from None

    def basis_index(self, a: int = 0, b: int = 0, q: int = 0, c: int = 0) -> int:
        digits = {"a": a, "b": b, "c": c, "q": q}
        return int(np.ravel_multi_index(tuple(digits[l] for l in self.labels), self.shape))

    def digits(self, label: str) -> np.ndarray:
        """Value of one subsystem's digit for every composite basis index."""
        grids = np.unravel_index(np.arange(self.dim), self.shape)
        return grids[self.position(label)]


def _shape_of(dims) -> tuple[tuple[int, ...], tuple[str, ...]]:
    if isinstance(dims, SystemDims):
        return dims.shape, dims.labels
    shape, labels = dims
    return tuple(shape), tuple(labels)


@dataclass(frozen=True, eq=False)
class Operator:
    """Sparse operator on a (possibly composite) truncated space."""

    data: sp.csr_matrix
    shape_: tuple[int, ...]
    labels: tuple[str, ...]
    hermitian: bool = False

    def __post_init__(self):
        d = int(np.prod(self.shape_))
        if self.data.shape != (d, d):
            raise DimensionError(f"matrix shape {self.data.shape} does not match factors {self.shape_}")
        if self.hermitian and hermiticity_error(self.data) > HERMITIAN_TOL * max(1.0, abs(self.data).max() if self.data.nnz else 1.0):
            raise NotHermitianError("operator flagged Hermitian but O != O^dagger")

    @classmethod
    def from_matrix(cls, m, dims, hermitian: bool = False) -> Operator:
        shape, labels = _shape_of(dims)
        return cls(sp.csr_matrix(m, dtype=complex), shape, labels, hermitian)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def nnz(self) -> int:
        return self.data.nnz

    def dag(self) -> Operator:
        return Operator(self.data.conj().T.tocsr(), self.shape_, self.labels, self.hermitian)

    def toarray(self) -> np.ndarray:
        return self.data.toarray()

    def _check(self, other: Operator):
        if self.shape_ != other.shape_ or self.labels != other.labels:
            raise DimensionError(f"operator spaces differ: {self.labels}{self.shape_} vs {other.labels}{other.shape_}")

    def __add__(self, other: Operator) -> Operator:
        self._check(other)
        return Operator(
            (self.data + other.data).tocsr(), self.shape_, self.labels, self.hermitian and other.hermitian
        )

    def __sub__(self, other: Operator) -> Operator:
        return self + (-1.0) * other

    def __mul__(self, c) -> Operator:
        herm = self.hermitian and np.isreal(c)
        return Operator((self.data * complex(c)).tocsr(), self.shape_, self.labels, bool(herm))

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator((self.data @ other.data).tocsr(), self.shape_, self.labels, False)
        if isinstance(other, Ket):
            if other.shape_ != self.shape_:
                raise DimensionError("operator and ket spaces differ")
            return Ket(self.data @ other.data, self.shape_, self.labels)
        raise TypeError(f"cannot multiply Operator by {type(other).__name__}")

    def with_hermitian(self) -> Operator:
        """Re-flag as Hermitian after checking."""
        return Operator(self.data, self.shape_, self.labels, True)


@dataclass(frozen=True, eq=False)
class Ket:
    data: np.ndarray
    shape_: tuple[int, ...]
    labels: tuple[str, ...]
    #: probability weight lost to truncation before renormalization
    tail_mass: float = 0.0

    def __post_init__(self):
        if self.data.ndim != 1 or self.data.size != int(np.prod(self.shape_)):
            raise DimensionError(f"amplitude vector of length {self.data.size} does not match factors {self.shape_}")

    @classmethod
    def from_array(cls, v, dims, tail_mass: float = 0.0) -> Ket:
        shape, labels = _shape_of(dims)
        return cls(np.asarray(v, dtype=complex).copy(), shape, labels, tail_mass)

    @property
    def dim(self) -> int:
        return self.data.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def normalized(self) -> Ket:
        nrm = self.norm()
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return Ket(self.data / nrm, self.shape_, self.labels, self.tail_mass)

    def dm(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.data, self.data.conj()), self.shape_, self.labels)

    def __add__(self, other: Ket) -> Ket:
        _same_space(self, other)
        return Ket(self.data + other.data, self.shape_, self.labels, max(self.tail_mass, other.tail_mass))

    def __sub__(self, other: Ket) -> Ket:
        return self + (-1.0) * other

    def __mul__(self, c) -> Ket:
        return Ket(self.data * complex(c), self.shape_, self.labels, self.tail_mass)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    data: np.ndarray
    shape_: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        d = int(np.prod(self.shape_))
        if self.data.shape != (d, d):
            raise DimensionError(f"matrix shape {self.data.shape} does not match factors {self.shape_}")

    @classmethod
    def from_array(cls, m, dims) -> DensityMatrix:
        shape, labels = _shape_of(dims)
        return cls(np.asarray(m, dtype=complex), shape, labels)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.data - self.data.conj().T))) if self.dim else 0.0

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.data + self.data.conj().T))[0])


def _same_space(x, y):
    if x.shape_ != y.shape_ or x.labels != y.labels:
        raise DimensionError(f"spaces differ: {x.labels}{x.shape_} vs {y.labels}{y.shape_}")


def hermiticity_error(m) -> float:
    """Largest entry of |M - M^dagger| (sparse or dense)."""
    if sp.issparse(m):
        diff = (m - m.conj().T).tocoo()
        return float(np.abs(diff.data).max()) if diff.nnz else 0.0
    return float(np.max(np.abs(m - m.conj().T)))


# --------------------------------------------------------------------------- #
# elementary operators


def annihilation(n: int) -> Operator:
    """Truncated annihilation operator, ``<m-1|a|m> = sqrt(m)``."""
    if n < 2:
        raise DimensionError(f"truncation must be >= 2, got {n}")
    m = sp.diags(np.sqrt(np.arange(1, n, dtype=float)), 1, shape=(n, n), format="csr", dtype=complex)
    return Operator(m, (n,), ("osc",))


def creation(n: int) -> Operator:
    return annihilation(n).dag()


def number(n: int) -> Operator:
    return Operator(sp.diags(np.arange(n, dtype=complex), 0, format="csr"), (n,), ("osc",), True)


def identity(n: int, label: str = "osc") -> Operator:
    return Operator(sp.identity(n, dtype=complex, format="csr"), (n,), (label,), True)


def transition(i: int, j: int, n_levels: int = 4) -> Operator:
    """Coupler operator ``|i><j|``; ``transition(f, g)`` is sigma_fg^+."""
    m = sp.csr_matrix(([1.0 + 0j], ([i], [j])), shape=(n_levels, n_levels))
    return Operator(m, (n_levels,), ("q",), i == j)


def basis(n: int, k: int, label: str = "osc") -> Ket:
    if not 0 <= k < n:
        raise DimensionError(f"basis index {k} outside 0..{n - 1}")
    v = np.zeros(n, dtype=complex)
    v[k] = 1.0
    return Ket(v, (n,), (label,))


def lift(op: Operator, subsystem: str, dims: SystemDims) -> Operator:
    """Embed a single-factor operator as ``I (x) ... (x) op (x) ... (x) I``."""
    if len(op.shape_) != 1:
        raise DimensionError("lift expects a single-factor operator")
    pos = dims.position(subsystem)
    if op.shape_[0] != dims.shape[pos]:
        raise DimensionError(
            f"operator dimension {op.shape_[0]} does not match subsystem {subsystem!r} of size {dims.shape[pos]}"
        )
    factors = [
        op.data if k == pos else sp.identity(n, dtype=complex, format="csr") for k, n in enumerate(dims.shape)
    ]
    m = reduce(lambda x, y: sp.kron(x, y, format="csr"), factors)
    return Operator(m, dims.shape, dims.labels, op.hermitian)


def tensor(*kets: Ket) -> Ket:
    """Kronecker product of kets, factors concatenated in the given order."""
    data = reduce(np.kron, (k.data for k in kets))
    shape = sum((k.shape_ for k in kets), ())
    labels = sum((k.labels for k in kets), ())
    return Ket(data, shape, labels, max(k.tail_mass for k in kets))


def relabel(x, dims: SystemDims):
    """Attach composite labels to a ket/operator/density matrix built by kron."""
    if x.shape_ != dims.shape:
        raise DimensionError(f"factors {x.shape_} do not match {dims.shape}")
    if isinstance(x, Ket):
        return Ket(x.data, dims.shape, dims.labels, x.tail_mass)
    if isinstance(x, Operator):
        return Operator(x.data, dims.shape, dims.labels, x.hermitian)
    return DensityMatrix(x.data, dims.shape, dims.labels)


# --------------------------------------------------------------------------- #
# linear algebra


def inner(psi: Ket, phi: Ket) -> complex:
    """``<psi|phi>``."""
    _same_space(psi, phi)
    return complex(np.vdot(psi.data, phi.data))


def require_hermitian(H: Operator) -> None:
    scale = max(1.0, float(np.abs(H.data.data).max()) if H.nnz else 1.0)
    err = hermiticity_error(H.data)
    if err > HERMITIAN_TOL * scale:
        raise NotHermitianError(f"Hamiltonian is not Hermitian (max |H - H^dag| = {err:.3e})")


def expm_apply(H: Operator, psi: Ket, t: float) -> Ket:
    """``exp(-i H t) psi`` for Hermitian ``H``.

    Uses the truncated-Taylor scaling scheme of Al-Mohy and Higham
    (``scipy.sparse.linalg.expm_multiply``); no renormalization is applied.
    """
    if not np.isfinite(t):
        raise ValueError(f"time must be finite, got {t}")
    require_hermitian(H)
    if H.shape_ != psi.shape_:
        raise DimensionError("Hamiltonian and state spaces differ")
    if t == 0.0 or H.nnz == 0:
        return Ket(psi.data.copy(), psi.shape_, psi.labels, psi.tail_mass)
    out = expm_multiply((-1j * t) * H.data.tocsc(), psi.data)
    return Ket(np.asarray(out), psi.shape_, psi.labels, psi.tail_mass)


def expm_apply_dense(H: Operator, psi: Ket, t: float) -> Ket:
    """Reference propagator through a dense Hermitian eigendecomposition."""
    w, v = np.linalg.eigh(H.toarray())
    out = v @ (np.exp(-1j * w * t) * (v.conj().T @ psi.data))
    return Ket(out, psi.shape_, psi.labels, psi.tail_mass)


def partial_trace(rho: DensityMatrix | Ket, keep) -> DensityMatrix:
    """Reduced density matrix on the subsystems in ``keep`` (labels or positions).

    The kept factors stay in their original global order.
    """
    if isinstance(rho, Ket):
        rho = rho.dm()
    keep = [rho.labels.index(k) if isinstance(k, str) else int(k) for k in keep]
    if not keep:
        raise DimensionError("partial trace needs at least one subsystem to keep")
    keep = sorted(set(keep))
    n = len(rho.shape_)
    if keep[-1] >= n:
        raise DimensionError(f"subsystem index out of range for {rho.labels}")
    if len(keep) == n:
        return DensityMatrix(rho.data.copy(), rho.shape_, rho.labels)
    t = rho.data.reshape(rho.shape_ + rho.shape_)
    traced = [k for k in range(n) if k not in keep]
    # letters: row indices i0.., column indices j0..; traced pairs share a letter
    row = [chr(97 + k) for k in range(n)]
    col = [chr(97 + k) if k in traced else chr(65 + k) for k in range(n)]
    out = [chr(97 + k) for k in keep] + [chr(65 + k) for k in keep]
    red = np.einsum("".join(row) + "".join(col) + "->" + "".join(out), t)
    kshape = tuple(rho.shape_[k] for k in keep)
    d = int(np.prod(kshape))
    return DensityMatrix(red.reshape(d, d), kshape, tuple(rho.labels[k] for k in keep))
