"""Quantum objects and the linear-algebra kernel.

A :class:`Qobj` wraps a complex matrix (dense ``numpy.ndarray`` or
``scipy.sparse`` CSC) together with a kind tag and the list of subsystem
Hilbert-space dimensions. Values are treated as immutable: every operation
returns a new object.

Conventions
-----------
- Kets are column vectors, bras are row vectors.
- Superoperators and operator-kets carry the dims of the Hilbert space they
  act on, so their matrix size is ``prod(dims) ** 2``.
- Vectorization is column stacking (see :mod:`qsim.superop`).
- Sparse and dense operands can be mixed; the result is dense.
"""

from __future__ import annotations

import enum
import math
import numbers
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimsMismatch, InvalidSubsystem, KindMismatch

__all__ = [
    "Kind",
    "Qobj",
    "EigenDecomposition",
    "tensor",
    "ptrace",
    "dag",
    "expect",
    "expm",
    "expm_array",
    "eigen",
    "norm",
    "normalize",
    "tr",
    "purity",
    "ket2dm",
    "commutator",
    "isherm",
]


class Kind(enum.Enum):
    KET = "Ket"
    BRA = "Bra"
    OPERATOR = "Operator"
    SUPEROPERATOR = "SuperOperator"
    OPERATOR_KET = "OperatorKet"
    OPERATOR_BRA = "OperatorBra"


_ADJOINT_KIND = {
    Kind.KET: Kind.BRA,
    Kind.BRA: Kind.KET,
    Kind.OPERATOR: Kind.OPERATOR,
    Kind.SUPEROPERATOR: Kind.SUPEROPERATOR,
    Kind.OPERATOR_KET: Kind.OPERATOR_BRA,
    Kind.OPERATOR_BRA: Kind.OPERATOR_KET,
}

# (left kind, right kind) -> product kind; None means scalar result.
_MATMUL_KIND = {
    (Kind.OPERATOR, Kind.OPERATOR): Kind.OPERATOR,
    (Kind.OPERATOR, Kind.KET): Kind.KET,
    (Kind.BRA, Kind.OPERATOR): Kind.BRA,
    (Kind.KET, Kind.BRA): Kind.OPERATOR,
    (Kind.BRA, Kind.KET): None,
    (Kind.SUPEROPERATOR, Kind.SUPEROPERATOR): Kind.SUPEROPERATOR,
    (Kind.SUPEROPERATOR, Kind.OPERATOR_KET): Kind.OPERATOR_KET,
    (Kind.OPERATOR_BRA, Kind.SUPEROPERATOR): Kind.OPERATOR_BRA,
    (Kind.OPERATOR_KET, Kind.OPERATOR_BRA): Kind.SUPEROPERATOR,
    (Kind.OPERATOR_BRA, Kind.OPERATOR_KET): None,
}


def _expected_shape(kind: Kind, dims: tuple[int, ...]) -> tuple[int, int]:
    d = math.prod(dims)
    return {
        Kind.KET: (d, 1),
        Kind.BRA: (1, d),
        Kind.OPERATOR: (d, d),
        Kind.SUPEROPERATOR: (d * d, d * d),
        Kind.OPERATOR_KET: (d * d, 1),
        Kind.OPERATOR_BRA: (1, d * d),
    }[kind]


def _infer_kind(shape: tuple[int, int]) -> Kind:
    rows, cols = shape
    if cols == 1 and rows > 1:
        return Kind.KET
    if rows == 1 and cols > 1:
        return Kind.BRA
    if rows == cols:
        return Kind.OPERATOR
    raise KindMismatch(f"cannot infer kind for shape {shape}")


def _as_data(data):
    if sp.issparse(data):
        return sp.csc_array(data, dtype=np.complex128)
    arr = np.asarray(data, dtype=np.complex128)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise KindMismatch(f"data must be 1-d or 2-d, got {arr.ndim}-d")
    return arr


class Qobj:
    """A complex matrix tagged with a kind and subsystem dimensions.

    Parameters
    ----------
    data : array_like or scipy.sparse matrix
        Matrix payload. One-dimensional input is read as a ket.
    kind : Kind or str, optional
        Inferred from the shape when omitted (column -> Ket, row -> Bra,
        square -> Operator).
    dims : int or sequence of int, optional
        Subsystem dimensions. Defaults to a single subsystem.
    """

    __slots__ = ("_data", "_kind", "_dims")
    __array_priority__ = 100

    def __init__(self, data, kind=None, dims=None):
        data = _as_data(data)
        if kind is None:
            kind = _infer_kind(data.shape)
        elif isinstance(kind, str):
            kind = _kind_from_name(kind)
        if dims is None:
            rows, cols = data.shape
            n = max(rows, cols)
            if kind in (Kind.SUPEROPERATOR, Kind.OPERATOR_KET, Kind.OPERATOR_BRA):
                n = math.isqrt(n)
            dims = (n,)
        elif isinstance(dims, numbers.Integral):
            dims = (int(dims),)
        else:
            dims = tuple(int(d) for d in dims)
        if not dims or any(d < 1 for d in dims):
            raise DimsMismatch(f"dims must be a non-empty list of positive integers, got {dims}")
        if data.shape != _expected_shape(kind, dims):
            raise DimsMismatch(
                f"{kind.value} with dims {list(dims)} needs shape "
                f"{_expected_shape(kind, dims)}, got {data.shape}"
            )
        self._data = data
        self._kind = kind
        self._dims = dims

    # -- accessors --------------------------------------------------------

    @property
    def data(self):
        return self._data

    @property
    def kind(self) -> Kind:
        return self._kind

    @property
    def dims(self) -> list[int]:
        return list(self._dims)

    @property
    def shape(self) -> tuple[int, int]:
        return self._data.shape

    @property
    def issparse(self) -> bool:
        return sp.issparse(self._data)

    @property
    def isket(self) -> bool:
        return self._kind is Kind.KET

    @property
    def isbra(self) -> bool:
        return self._kind is Kind.BRA

    @property
    def isoper(self) -> bool:
        return self._kind is Kind.OPERATOR

    @property
    def issuper(self) -> bool:
        return self._kind is Kind.SUPEROPERATOR

    def full(self) -> np.ndarray:
        """Dense copy of the payload."""
        if self.issparse:
            return self._data.toarray()
        return np.array(self._data)

    def to_dense(self) -> "Qobj":
        return self if not self.issparse else Qobj(self._data.toarray(), self._kind, self._dims)

    def to_sparse(self) -> "Qobj":
        return self if self.issparse else Qobj(sp.csc_array(self._data), self._kind, self._dims)

    def _new(self, data, kind=None, dims=None) -> "Qobj":
        return Qobj(data, kind or self._kind, self._dims if dims is None else dims)

    # -- arithmetic -------------------------------------------------------

    def _check_same(self, other: "Qobj", op: str):
        if self._kind is not other._kind:
            raise KindMismatch(f"cannot {op} {self._kind.value} and {other._kind.value}")
        if self._dims != other._dims:
            raise DimsMismatch(f"cannot {op} objects with dims {self.dims} and {other.dims}")

    def __add__(self, other):
        if isinstance(other, Qobj):
            self._check_same(other, "add")
            return self._new(_add(self._data, other._data))
        if isinstance(other, numbers.Number):
            if other == 0:
                return self
            if self._kind not in (Kind.OPERATOR, Kind.SUPEROPERATOR):
                raise KindMismatch("scalar addition needs a square operator")
            eye = sp.identity(self.shape[0], dtype=np.complex128, format="csc")
            return self._new(_add(self._data, other * eye))
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (Qobj, numbers.Number)):
            return self + (-1) * other
        return NotImplemented

    def __rsub__(self, other):
        return (-1) * self + other

    def __neg__(self):
        return self._new(-self._data)

    def __mul__(self, other):
        if isinstance(other, numbers.Number):
            return self._new(self._data * complex(other))
        if isinstance(other, Qobj):
            return self @ other
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, numbers.Number):
            return self._new(self._data * complex(other))
        return NotImplemented

    def __truediv__(self, other):
        if isinstance(other, numbers.Number):
            return self._new(self._data / complex(other))
        return NotImplemented

    def __matmul__(self, other):
        if not isinstance(other, Qobj):
            return NotImplemented
        # superoperator acting on a plain operator: apply to its vectorization
        if self._kind is Kind.SUPEROPERATOR and other._kind is Kind.OPERATOR:
            from .superop import mat2vec, vec2mat

            return vec2mat(self @ mat2vec(other))
        key = (self._kind, other._kind)
        if key not in _MATMUL_KIND:
            raise KindMismatch(f"cannot multiply {self._kind.value} by {other._kind.value}")
        if self._dims != other._dims:
            raise DimsMismatch(f"cannot multiply objects with dims {self.dims} and {other.dims}")
        out = _matmul(self._data, other._data)
        kind = _MATMUL_KIND[key]
        if kind is None:
            return complex(out[0, 0]) if not sp.issparse(out) else complex(out.toarray()[0, 0])
        return Qobj(out, kind, self._dims)

    def __pow__(self, n: int):
        if not isinstance(n, numbers.Integral) or n < 0:
            return NotImplemented
        if self._kind not in (Kind.OPERATOR, Kind.SUPEROPERATOR):
            raise KindMismatch("power needs a square operator")
        out = sp.identity(self.shape[0], dtype=np.complex128, format="csc")
        if not self.issparse:
            out = out.toarray()
        for _ in range(int(n)):
            out = _matmul(out, self._data)
        return self._new(out)

    def __eq__(self, other):
        if not isinstance(other, Qobj):
            return NotImplemented
        if self._kind is not other._kind or self._dims != other._dims:
            return False
        return bool(np.allclose(self.full(), other.full(), rtol=0, atol=1e-14))

    __hash__ = None

    # -- linear algebra shortcuts ----------------------------------------

    def dag(self) -> "Qobj":
        return dag(self)

    def conj(self) -> "Qobj":
        return self._new(self._data.conj())

    def trans(self) -> "Qobj":
        kind = {
            Kind.KET: Kind.BRA,
            Kind.BRA: Kind.KET,
            Kind.OPERATOR_KET: Kind.OPERATOR_BRA,
            Kind.OPERATOR_BRA: Kind.OPERATOR_KET,
        }.get(self._kind, self._kind)
        data = self._data.T
        return Qobj(sp.csc_array(data) if sp.issparse(data) else data, kind, self._dims)

    def tr(self) -> complex:
        return tr(self)

    def norm(self, kind: str | None = None) -> float:
        return norm(self, kind)

    def unit(self) -> "Qobj":
        return normalize(self)

    def expm(self) -> "Qobj":
        return expm(self)

    def eigen(self) -> "EigenDecomposition":
        return eigen(self)

    def proj(self) -> "Qobj":
        return ket2dm(self)

    def ptrace(self, keep) -> "Qobj":
        return ptrace(self, keep)

    def isherm(self, atol: float = 1e-12) -> bool:
        return isherm(self, atol)

    def __call__(self, params=None, t=0.0):
        # constant objects evaluate to themselves, like time-dependent ones
        return self

    def __repr__(self):
        storage = "sparse" if self.issparse else "dense"
        head = f"Qobj(kind={self._kind.value}, dims={self.dims}, shape={self.shape}, {storage})"
        if max(self.shape) <= 8:
            return head + "\n" + np.array2string(self.full(), precision=4, suppress_small=True)
        return head


def _kind_from_name(name: str) -> Kind:
    for k in Kind:
        if k.value.lower() == name.lower() or k.name.lower() == name.lower():
            return k
    raise KindMismatch(f"unknown kind {name!r}")


def _add(a, b):
    if sp.issparse(a) and sp.issparse(b):
        return sp.csc_array(a + b)
    return _dense(a) + _dense(b)


def _matmul(a, b):
    if sp.issparse(a) and sp.issparse(b):
        return sp.csc_array(a @ b)
    return _dense(a) @ _dense(b)


def _dense(a) -> np.ndarray:
    return a.toarray() if sp.issparse(a) else a


# -- structural operations ---------------------------------------------------


def tensor(*args) -> Qobj:
    """Kronecker product of quantum objects of the same kind.

    Accepts either several objects or a single list of them.
    """
    if len(args) == 1 and isinstance(args[0], (list, tuple)):
        args = tuple(args[0])
    if not args:
        raise KindMismatch("tensor needs at least one object")
    out = args[0]
    for nxt in args[1:]:
        if out.kind is not nxt.kind or out.kind not in (
            Kind.KET,
            Kind.BRA,
            Kind.OPERATOR,
        ):
            raise KindMismatch(f"cannot tensor {out.kind.value} with {nxt.kind.value}")
        if out.issparse or nxt.issparse:
            data = sp.kron(out.data, nxt.data, format="csc")
            if not (out.issparse and nxt.issparse):
                data = data.toarray()
        else:
            data = np.kron(out.data, nxt.data)
        out = Qobj(data, out.kind, out.dims + nxt.dims)
    return out


def _check_keep(keep, n: int) -> list[int]:
    if isinstance(keep, numbers.Integral):
        keep = [int(keep)]
    keep = [int(k) for k in keep]
    if any(k < 0 or k >= n for k in keep):
        raise InvalidSubsystem(f"subsystem indices {keep} out of range for {n} subsystems")
    if any(b <= a for a, b in zip(keep, keep[1:])):
        raise InvalidSubsystem(f"subsystem indices {keep} must be strictly increasing")
    return keep


def ptrace(x: Qobj, keep) -> Qobj | complex:
    """Partial trace keeping the listed subsystems.

    Kets are promoted to projectors first. Keeping no subsystem returns the
    full trace as a scalar.
    """
    if x.kind not in (Kind.KET, Kind.OPERATOR):
        raise KindMismatch(f"ptrace needs a Ket or Operator, got {x.kind.value}")
    dims = x.dims
    keep = _check_keep(keep, len(dims))
    n = len(dims)
    traced = [i for i in range(n) if i not in keep]
    kdims = [dims[i] for i in keep]
    dk = math.prod(kdims) if kdims else 1
    if x.kind is Kind.KET:
        psi = x.full().reshape(dims)
        psi = np.transpose(psi, keep + traced).reshape(dk, -1)
        rho = psi @ psi.conj().T
    else:
        rho = x.full().reshape(dims + dims)
        rho = np.transpose(rho, keep + traced + [n + i for i in keep] + [n + i for i in traced])
        rest = math.prod(dims) // dk
        rho = np.einsum("ajbj->ab", rho.reshape(dk, rest, dk, rest))
    if not keep:
        return complex(rho[0, 0])
    return Qobj(rho, Kind.OPERATOR, kdims)


def dag(x: Qobj) -> Qobj:
    data = x.data.conj().T
    if sp.issparse(data):
        data = sp.csc_array(data)
    return Qobj(data, _ADJOINT_KIND[x.kind], x.dims)


def ket2dm(x: Qobj) -> Qobj:
    if x.kind is Kind.OPERATOR:
        return x
    if x.kind is not Kind.KET:
        raise KindMismatch(f"ket2dm needs a Ket, got {x.kind.value}")
    v = x.full()
    return Qobj(v @ v.conj().T, Kind.OPERATOR, x.dims)


def commutator(a: Qobj, b: Qobj) -> Qobj:
    return a @ b - b @ a


def expect(op: Qobj, state: Qobj) -> complex:
    """Expectation value of ``op`` in a ket or density operator."""
    if op.kind is not Kind.OPERATOR:
        raise KindMismatch(f"expect needs an Operator, got {op.kind.value}")
    if op.dims != state.dims:
        raise DimsMismatch(f"operator dims {op.dims} do not match state dims {state.dims}")
    if state.kind is Kind.KET:
        psi = state.full()[:, 0]
        return complex(np.vdot(psi, op.data @ psi))
    if state.kind is Kind.OPERATOR:
        return _trace_product(op.data, state.data)
    raise KindMismatch(f"expect needs a Ket or Operator state, got {state.kind.value}")


def _trace_product(a, b) -> complex:
    """tr(a @ b) without forming the product."""
    if sp.issparse(a):
        return complex(a.multiply(_dense(b).T).sum())
    if sp.issparse(b):
        return complex(b.multiply(a.T).sum())
    return complex(np.sum(a * b.T))


def tr(x: Qobj) -> complex:
    if x.kind not in (Kind.OPERATOR, Kind.SUPEROPERATOR):
        raise KindMismatch(f"trace needs a square operator, got {x.kind.value}")
    return complex(x.data.diagonal().sum())


def isherm(x: Qobj, atol: float = 1e-12) -> bool:
    if x.kind not in (Kind.OPERATOR, Kind.SUPEROPERATOR):
        return False
    diff = x.data - x.data.conj().T
    if sp.issparse(diff):
        return diff.nnz == 0 or float(abs(diff).max()) <= atol
    return bool(np.max(np.abs(diff), initial=0.0) <= atol)


def norm(x: Qobj, kind: str | None = None) -> float:
    """L2 norm for kets/bras; trace norm (default) or Frobenius for operators."""
    if x.kind in (Kind.KET, Kind.BRA, Kind.OPERATOR_KET, Kind.OPERATOR_BRA):
        return float(np.linalg.norm(x.full()))
    kind = kind or "tr"
    if kind == "fro":
        return float(np.linalg.norm(x.full()))
    if kind == "tr":
        m = x.full()
        if isherm(x):
            return float(np.sum(np.abs(np.linalg.eigvalsh(m))))
        return float(np.sum(np.linalg.svd(m, compute_uv=False)))
    raise ValueError(f"unknown norm {kind!r}")


def normalize(x: Qobj) -> Qobj:
    if x.kind is Kind.OPERATOR:
        return x / tr(x)
    return x / norm(x)


def purity(rho: Qobj) -> float:
    if rho.kind is Kind.KET:
        return 1.0
    if rho.kind is not Kind.OPERATOR:
        raise KindMismatch("purity needs a density operator")
    return float(_trace_product(rho.data, rho.data).real)


# -- matrix exponential --------------------------------------------------------

_TAYLOR_ORDER = 18


def expm_array(a: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring of a truncated Taylor series.

    The input is scaled by ``2**-s`` so that its 1-norm is at most 0.5; the
    degree-18 Taylor remainder is then below ``0.5**19 / 19!`` relative.
    """
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise KindMismatch(f"expm needs a square matrix, got shape {a.shape}")
    n = a.shape[0]
    nrm = np.linalg.norm(a, 1)
    s = 0
    if nrm > 0.5:
        s = int(math.ceil(math.log2(nrm / 0.5)))
    x = a / (2.0**s)
    out = np.eye(n, dtype=np.complex128)
    term = np.eye(n, dtype=np.complex128)
    for k in range(1, _TAYLOR_ORDER + 1):
        term = term @ x / k
        out += term
    for _ in range(s):
        out = out @ out
    return out


def expm(x: Qobj) -> Qobj:
    if x.kind not in (Kind.OPERATOR, Kind.SUPEROPERATOR):
        raise KindMismatch(f"expm needs a square operator, got {x.kind.value}")
    return Qobj(expm_array(x.full()), x.kind, x.dims)


# -- eigen decomposition -------------------------------------------------------


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues sorted by real part, eigenvectors as matrix columns."""

    values: np.ndarray
    vectors: np.ndarray

    def __iter__(self):
        yield self.values
        yield self.vectors


def eigen(x: Qobj, atol: float = 1e-12) -> EigenDecomposition:
    if x.kind not in (Kind.OPERATOR, Kind.SUPEROPERATOR):
        raise KindMismatch(f"eigen needs a square operator, got {x.kind.value}")
    m = x.full()
    if isherm(x, atol):
        w, v = np.linalg.eigh((m + m.conj().T) / 2)
        return EigenDecomposition(w.astype(np.complex128), v)
    w, v = np.linalg.eig(m)
    order = np.lexsort((w.imag, w.real))
    return EigenDecomposition(w[order], v[:, order])
