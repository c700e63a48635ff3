"""Standard states and operators on truncated Hilbert spaces.

Operators are built sparse, kets dense. ``basis(2, 0)`` is the sigma_z = +1
eigenstate, which the two-level models in this package call "excited".
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from .core import Kind, Qobj, tensor
from .errors import DimsMismatch, InvalidDimension, InvalidIndex, TooLarge
from .rng import stream

__all__ = [
    "destroy",
    "create",
    "num",
    "qeye",
    "position",
    "momentum",
    "sigmax",
    "sigmay",
    "sigmaz",
    "sigmap",
    "sigmam",
    "basis",
    "fock",
    "fock_dm",
    "projection",
    "thermal_dm",
    "maximally_mixed_dm",
    "coherent",
    "coherent_dm",
    "displace",
    "rand_ket",
    "rand_dm",
    "rand_unitary",
    "embed_site",
    "lattice_bonds",
    "ising_model",
]


def _check_dim(n) -> int:
    if int(n) != n or n < 1:
        raise InvalidDimension(f"dimension must be a positive integer, got {n}")
    return int(n)


def _op(data, n: int) -> Qobj:
    return Qobj(sp.csc_array(data, dtype=np.complex128), Kind.OPERATOR, [n])


def destroy(n: int) -> Qobj:
    n = _check_dim(n)
    return _op(sp.diags(np.sqrt(np.arange(1, n, dtype=float)), 1, shape=(n, n)), n)


def create(n: int) -> Qobj:
    return destroy(n).dag()


def num(n: int) -> Qobj:
    n = _check_dim(n)
    return _op(sp.diags(np.arange(n, dtype=float), 0, shape=(n, n)), n)


def qeye(n) -> Qobj:
    """Identity; ``n`` may be a list of subsystem dims."""
    if isinstance(n, (list, tuple)):
        dims = [_check_dim(d) for d in n]
        d = math.prod(dims)
        return Qobj(sp.identity(d, dtype=np.complex128, format="csc"), Kind.OPERATOR, dims)
    n = _check_dim(n)
    return _op(sp.identity(n, format="csc"), n)


def position(n: int) -> Qobj:
    a = destroy(n)
    return (a + a.dag()) / math.sqrt(2)


def momentum(n: int) -> Qobj:
    a = destroy(n)
    return 1j * (a.dag() - a) / math.sqrt(2)


def sigmax() -> Qobj:
    return _op([[0, 1.0], [1.0, 0]], 2)


def sigmay() -> Qobj:
    return _op([[0, -1.0j], [1.0j, 0]], 2)


def sigmaz() -> Qobj:
    return _op([[1.0, 0], [0, -1.0]], 2)


def sigmap() -> Qobj:
    return _op([[0, 1.0], [0, 0]], 2)


def sigmam() -> Qobj:
    return _op([[0, 0], [1.0, 0]], 2)


def basis(n, i=0) -> Qobj:
    """Canonical basis ket. ``n`` and ``i`` may be lists for composite spaces."""
    if isinstance(n, (list, tuple)):
        idx = i if isinstance(i, (list, tuple)) else [i] * len(n)
        return tensor([basis(d, j) for d, j in zip(n, idx)])
    n = _check_dim(n)
    if not 0 <= i < n:
        raise InvalidIndex(f"basis index {i} out of range for dimension {n}")
    v = np.zeros((n, 1), dtype=np.complex128)
    v[i, 0] = 1.0
    return Qobj(v, Kind.KET, [n])


fock = basis


def fock_dm(n: int, i: int = 0) -> Qobj:
    return projection(n, i, i)


def projection(n: int, i: int, j: int) -> Qobj:
    n = _check_dim(n)
    if not (0 <= i < n and 0 <= j < n):
        raise InvalidIndex(f"projection indices ({i}, {j}) out of range for dimension {n}")
    return _op(sp.coo_array(([1.0], ([i], [j])), shape=(n, n)), n)


def thermal_dm(n: int, nbar: float) -> Qobj:
    """Thermal state with Bose occupation ``nbar``, renormalized on the truncated space."""
    n = _check_dim(n)
    if nbar < 0:
        raise ValueError("mean occupation must be non-negative")
    if nbar == 0:
        return fock_dm(n, 0)
    ratio = nbar / (1.0 + nbar)
    p = ratio ** np.arange(n)
    return _op(sp.diags(p / p.sum(), 0, shape=(n, n)), n)


def maximally_mixed_dm(n: int) -> Qobj:
    n = _check_dim(n)
    return _op(sp.identity(n, format="csc") / n, n)


def coherent(n: int, alpha: complex) -> Qobj:
    """Coherent state from its Fock-basis series, renormalized after truncation."""
    n = _check_dim(n)
    if n < 2:
        raise InvalidDimension("coherent states need n >= 2")
    alpha = complex(alpha)
    c = np.empty(n, dtype=np.complex128)
    c[0] = 1.0
    # alpha**k / sqrt(k!) by recurrence, no factorial overflow
    for k in range(1, n):
        c[k] = c[k - 1] * alpha / math.sqrt(k)
    c *= math.exp(-abs(alpha) ** 2 / 2)
    c /= np.linalg.norm(c)
    return Qobj(c.reshape(-1, 1), Kind.KET, [n])


def coherent_dm(n: int, alpha: complex) -> Qobj:
    return coherent(n, alpha).proj()


def displace(n: int, alpha: complex) -> Qobj:
    a = destroy(n)
    return (alpha * a.dag() - np.conj(alpha) * a).expm()


# -- random objects -----------------------------------------------------------


def _gaussian(n: int, m: int, seed) -> np.ndarray:
    rng = stream(seed, 0)
    return rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))


def rand_ket(n: int, seed: int = 0) -> Qobj:
    n = _check_dim(n)
    v = _gaussian(n, 1, seed)
    return Qobj(v / np.linalg.norm(v), Kind.KET, [n])


def rand_dm(n: int, seed: int = 0) -> Qobj:
    n = _check_dim(n)
    g = _gaussian(n, n, seed)
    rho = g @ g.conj().T
    return Qobj(rho / np.trace(rho), Kind.OPERATOR, [n])


def rand_unitary(n: int, seed: int = 0) -> Qobj:
    n = _check_dim(n)
    q, r = np.linalg.qr(_gaussian(n, n, seed))
    d = np.diag(r)
    phases = d / np.abs(d)
    return Qobj(q * phases, Kind.OPERATOR, [n])


# -- composite systems ---------------------------------------------------------


def embed_site(dims, site: int, op: Qobj) -> Qobj:
    """Place ``op`` on subsystem ``site`` with identities elsewhere."""
    dims = [int(d) for d in dims]
    if not 0 <= site < len(dims):
        raise InvalidIndex(f"site {site} out of range for {len(dims)} subsystems")
    if op.dims != [dims[site]]:
        raise DimsMismatch(f"operator dims {op.dims} do not match site dimension {dims[site]}")
    parts = [qeye(d) for d in dims]
    parts[site] = op
    return tensor(parts)


def lattice_bonds(nx: int, ny: int, periodic: bool = False) -> list[tuple[int, int]]:
    """Nearest-neighbour bonds of a rectangular lattice, sites ordered row-major.

    Each site contributes its right and down bond. With periodic wrap a
    length-2 direction yields two bonds between the same pair (the direct
    one and the wrapped one); a length-1 direction never bonds a site to
    itself.
    """
    bonds = []
    for y in range(ny):
        for x in range(nx):
            s = y * nx + x
            if x + 1 < nx:
                bonds.append((s, y * nx + x + 1))
            elif periodic and nx > 1:
                bonds.append((s, y * nx))
            if y + 1 < ny:
                bonds.append((s, (y + 1) * nx + x))
            elif periodic and ny > 1:
                bonds.append((s, x))
    return [(min(i, j), max(i, j)) for i, j in bonds]


ISING_MAX_SITES = 12


def ising_model(nx, ny, Jz, hx, gamma, periodic=False):
    """Dissipative transverse-field Ising model on an ``nx`` x ``ny`` lattice.

    Returns
    -------
    H : Qobj
        ``Jz * sum_<ij> sz_i sz_j + hx * sum_i sx_i``.
    c_ops : list of Qobj
        ``sqrt(gamma) * sm_i`` for every site.
    """
    n_sites = nx * ny
    if n_sites > ISING_MAX_SITES:
        raise TooLarge(f"{n_sites} sites exceed the limit of {ISING_MAX_SITES}")
    dims = [2] * n_sites
    sz = [embed_site(dims, i, sigmaz()) for i in range(n_sites)]
    sx = [embed_site(dims, i, sigmax()) for i in range(n_sites)]
    H = 0 * qeye(dims)
    for i, j in lattice_bonds(nx, ny, periodic):
        H = H + Jz * (sz[i] @ sz[j])
    for i in range(n_sites):
        H = H + hx * sx[i]
    c_ops = [math.sqrt(gamma) * embed_site(dims, i, sigmam()) for i in range(n_sites)]
    return H, c_ops
