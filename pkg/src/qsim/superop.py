"""Vectorization and Lindblad superoperators.

Vectorization stacks columns: ``vec(X)[i + d*j] = X[i, j]``. With this
convention ``vec(A X B) = (B^T kron A) vec(X)``, hence

- ``spre(A)      = I kron A``
- ``spost(B)     = B^T kron I``
- ``sprepost(A,B) = B^T kron A``

Everything else in the package (solvers, steady states, the Fourier block
system) relies on this one convention.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from .core import Kind, Qobj
from .errors import DimsMismatch, KindMismatch

__all__ = [
    "mat2vec",
    "vec2mat",
    "spre",
    "spost",
    "sprepost",
    "lindblad_dissipator",
    "liouvillian",
    "trace_functional",
]


def mat2vec(rho: Qobj) -> Qobj:
    if rho.kind is not Kind.OPERATOR:
        raise KindMismatch(f"mat2vec needs an Operator, got {rho.kind.value}")
    data = rho.data
    if sp.issparse(data):
        d = data.shape[0]
        vec = sp.csc_array(data.reshape((d * d, 1), order="F"))
    else:
        vec = data.reshape(-1, 1, order="F")
    return Qobj(vec, Kind.OPERATOR_KET, rho.dims)


def vec2mat(v: Qobj) -> Qobj:
    if v.kind is not Kind.OPERATOR_KET:
        raise KindMismatch(f"vec2mat needs an OperatorKet, got {v.kind.value}")
    d = math.prod(v.dims)
    data = v.data
    if sp.issparse(data):
        mat = sp.csc_array(data.reshape((d, d), order="F"))
    else:
        mat = data.reshape(d, d, order="F")
    return Qobj(mat, Kind.OPERATOR, v.dims)


def trace_functional(d: int) -> np.ndarray:
    """Row vector ``t`` with ``t @ vec(X) == tr(X)``."""
    t = np.zeros(d * d, dtype=np.complex128)
    t[np.arange(d) * (d + 1)] = 1.0
    return t


def _square(op: Qobj) -> Qobj:
    if op.kind is not Kind.OPERATOR:
        raise KindMismatch(f"expected an Operator, got {op.kind.value}")
    return op


def _super(data, dims) -> Qobj:
    return Qobj(sp.csc_array(data), Kind.SUPEROPERATOR, dims)


def _eye(d: int):
    return sp.identity(d, dtype=np.complex128, format="csc")


def spre(a: Qobj) -> Qobj:
    a = _square(a)
    return _super(sp.kron(_eye(a.shape[0]), sp.csc_array(a.data)), a.dims)


def spost(b: Qobj) -> Qobj:
    b = _square(b)
    return _super(sp.kron(sp.csc_array(b.data).T, _eye(b.shape[0])), b.dims)


def sprepost(a: Qobj, b: Qobj) -> Qobj:
    a, b = _square(a), _square(b)
    if a.dims != b.dims:
        raise DimsMismatch(f"sprepost operands have dims {a.dims} and {b.dims}")
    return _super(sp.kron(sp.csc_array(b.data).T, sp.csc_array(a.data)), a.dims)


def lindblad_dissipator(c: Qobj) -> Qobj:
    """Superoperator of ``C rho C^dag - (C^dag C rho + rho C^dag C) / 2``."""
    c = _square(c)
    cd = c.dag()
    cdc = cd @ c
    return sprepost(c, cd) - 0.5 * spre(cdc) - 0.5 * spost(cdc)


def _hamiltonian_part(h: Qobj) -> Qobj:
    return -1j * (spre(h) - spost(h))


def liouvillian(H, c_ops=()):
    """Lindblad generator ``-i[H, .] + sum_k D[C_k]``.

    ``H`` may be an Operator, ``None`` (no Hamiltonian), an existing
    SuperOperator (collapse terms are added to it) or a
    :class:`~qsim.evolve.TimeDependentOperator`; in the last case every
    time-dependent Hamiltonian term maps to ``-i(spre - spost)`` of that
    term with the same coefficient and a time-dependent generator is
    returned.
    """
    from .evolve import TimeDependentOperator

    c_ops = list(c_ops or [])
    if isinstance(H, TimeDependentOperator):
        const = liouvillian(H.constant, c_ops) if H.constant is not None else None
        if const is None and c_ops:
            const = liouvillian(None, c_ops)
        if const is not None and const.dims != H.dims:
            raise DimsMismatch("collapse operators and Hamiltonian have different dims")
        terms = [
            (op if op.kind is Kind.SUPEROPERATOR else _hamiltonian_part(op), f)
            for op, f in H.terms
        ]
        return TimeDependentOperator(const, terms)
    if H is None:
        if not c_ops:
            raise KindMismatch("liouvillian needs a Hamiltonian or collapse operators")
        dims = c_ops[0].dims
        d = math.prod(dims)
        L = Qobj(sp.csc_array((d * d, d * d), dtype=np.complex128), Kind.SUPEROPERATOR, dims)
    elif H.kind is Kind.SUPEROPERATOR:
        L = H
    else:
        L = _hamiltonian_part(_square(H))
    for c in c_ops:
        if c.dims != L.dims:
            raise DimsMismatch(f"collapse operator dims {c.dims} differ from {L.dims}")
        L = L + lindblad_dissipator(c)
    return L
