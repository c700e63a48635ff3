"""Named models and observables used by the scenario runner.

Each model declares its parameters (with defaults where a sensible one
exists), the solvers it supports and a registry of named observables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import Qobj, tensor
from .factories import (basis, coherent, destroy, embed_site, fock, ising_model, qeye,
                        sigmam, sigmax, sigmay, sigmaz)
from .superop import liouvillian

__all__ = ["MODELS", "ModelSpec", "Setup", "build"]

REQUIRED = object()


@dataclass
class Setup:
    """Everything a solver needs for one model instance."""

    psi0: Qobj
    H: object = None
    c_ops: list = field(default_factory=list)
    sc_ops: list = field(default_factory=list)
    sme_c_ops: list = field(default_factory=list)
    observables: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ModelSpec:
    params: dict
    solvers: frozenset
    observables: tuple
    builder: Callable


def _cavity_qubit(N):
    a = tensor(destroy(N), qeye(2))
    sm = tensor(qeye(N), sigmam())
    sz = tensor(qeye(N), sigmaz())
    return a, sm, sz


def _jc(p):
    N = int(p["N"])
    a, sm, sz = _cavity_qubit(N)
    H = p["wc"] * a.dag() @ a + p["wa"] * sz / 2 + p["g"] * (a.dag() @ sm + a @ sm.dag())
    atom = basis(2, 0) if p["atom_excited"] else basis(2, 1)
    field_state = coherent(N, p["alpha"]) if p["alpha"] else fock(N, int(p["n0"]))
    c_ops = []
    if p["kappa"]:
        c_ops.append(math.sqrt(p["kappa"]) * a)
    if p["gamma"]:
        c_ops.append(math.sqrt(p["gamma"]) * sm)
    if p["kappa_phi"]:
        c_ops.append(math.sqrt(p["kappa_phi"]) * a.dag() @ a)
    sme_c = [math.sqrt(p["gamma"]) * sm] if p["gamma"] else []
    if p["kappa_phi"]:
        sme_c.append(math.sqrt(p["kappa_phi"]) * a.dag() @ a)
    S = math.sqrt(p["kappa"]) * a
    obs = {
        "n_cavity": a.dag() @ a,
        "a_cavity": a,
        "sz_atom": sz,
        "X_quadrature": S + S.dag(),
    }
    return Setup(tensor(field_state, atom), H, c_ops, [S], sme_c, obs)


def _optomech(p):
    Nc, Nm = int(p["Nc"]), int(p["Nm"])
    a = tensor(destroy(Nc), qeye(Nm))
    b = tensor(qeye(Nc), destroy(Nm))
    x = a + a.dag()
    H0 = p["wc"] * a.dag() @ a + p["wm"] * b.dag() @ b + p["g"] / 2 * (x @ x) @ (b + b.dag())
    c_ops = [math.sqrt(p["kappa"]) * a, math.sqrt(p["gamma"]) * b]
    F, wd = p["F"], p["wd"]
    H = (H0, (x, lambda params, t: F * math.cos(wd * t)))
    drive = liouvillian(F / 2 * x)
    extra = {"L0": liouvillian(H0, c_ops), "L1": drive, "Lm1": drive, "wd": wd}
    obs = {"n_cavity": a.dag() @ a, "n_mech": b.dag() @ b, "X_quadrature": x}
    return Setup(tensor(fock(Nc, 0), fock(Nm, 0)), H, c_ops, observables=obs, extra=extra)


def _kerr_jc(p):
    N = int(p["N"])
    a, sm, sz = _cavity_qubit(N)

    def H_fn(ops, params):
        b = ops[0]
        return (p["Dc"] * b.dag() @ b + p["Da"] / 2 * sz + p["U"] * (b @ b).dag() @ (b @ b)
                + p["g"] * (b @ sm.dag() + b.dag() @ sm) + p["F"] * (b + b.dag()))

    def c_ops_fn(ops, params):
        return [math.sqrt(p["gamma"]) * ops[0], math.sqrt(p["gamma"]) * sm]

    def e_ops_fn(ops, params):
        b = ops[0]
        return [b.dag() @ b, b, sz, b + b.dag()]

    obs_index = {"n_cavity": 0, "a_cavity": 1, "sz_atom": 2, "X_quadrature": 3}
    full = e_ops_fn([a], None)
    obs = {name: full[i] for name, i in obs_index.items()}
    extra = {"H_fn": H_fn, "c_ops_fn": c_ops_fn, "e_ops_fn": e_ops_fn, "op_list": [a],
             "obs_index": obs_index}
    psi0 = tensor(fock(N, 0), basis(2, 1))
    return Setup(psi0, H_fn([a], None), c_ops_fn([a], None), observables=obs, extra=extra)


def _driven_cavity(p):
    N = int(p["N"])
    ramp = p["t_ramp"]
    F = p["F"]

    def drive(params, t):
        return F * min(1.0, t / ramp) if ramp > 0 else F

    def H_of(a):
        H0 = p["delta"] * a.dag() @ a
        x = a + a.dag()
        return (H0, (x, drive)) if ramp > 0 else H0 + F * x

    def H_dims(dims, params):
        return H_of(destroy(dims[0]))

    def c_dims(dims, params):
        return [math.sqrt(p["gamma"]) * destroy(dims[0])]

    def e_dims(dims, params):
        a = destroy(dims[0])
        return [a.dag() @ a, a, a + a.dag()]

    a = destroy(N)
    obs = {"n_cavity": a.dag() @ a, "a_cavity": a, "X_quadrature": a + a.dag()}
    obs_index = {"n_cavity": 0, "a_cavity": 1, "X_quadrature": 2}

    def H_fn(ops, params):
        b = ops[0]
        return p["delta"] * b.dag() @ b + F * (b + b.dag())

    extra = {
        "H_dims": H_dims, "c_dims": c_dims, "e_dims": e_dims, "obs_index": obs_index,
        "H_fn": H_fn, "c_ops_fn": lambda ops, params: [math.sqrt(p["gamma"]) * ops[0]],
        "e_ops_fn": lambda ops, params: [ops[0].dag() @ ops[0], ops[0], ops[0] + ops[0].dag()],
        "op_list": [a],
    }
    return Setup(fock(N, 0), H_of(a), [math.sqrt(p["gamma"]) * a], observables=obs, extra=extra)


def _ising(p):
    nx, ny = int(p["nx"]), int(p["ny"])
    H, c_ops = ising_model(nx, ny, p["Jz"], p["hx"], p["gamma"], periodic=bool(p["periodic"]))
    dims = [2] * (nx * ny)
    obs = {}
    for name, op in (("Sx_total", sigmax), ("Sy_total", sigmay), ("Sz_total", sigmaz)):
        total = embed_site(dims, 0, op())
        for i in range(1, nx * ny):
            total = total + embed_site(dims, i, op())
        obs[name] = total
    psi0 = tensor(*[basis(2, 0) for _ in dims])
    return Setup(psi0, H, c_ops, observables=obs)


MODELS = {
    "jc": ModelSpec(
        {"N": REQUIRED, "wc": REQUIRED, "wa": REQUIRED, "g": REQUIRED, "kappa": 0.0,
         "gamma": 0.0, "kappa_phi": 0.0, "alpha": 0.0, "n0": 0, "atom_excited": 1},
        frozenset({"sesolve", "mesolve", "mcsolve", "ssesolve", "smesolve", "steadystate"}),
        ("n_cavity", "a_cavity", "sz_atom", "X_quadrature"), _jc),
    "optomech_driven": ModelSpec(
        {"Nc": REQUIRED, "Nm": REQUIRED, "wc": REQUIRED, "wm": REQUIRED, "g": REQUIRED,
         "kappa": REQUIRED, "gamma": REQUIRED, "F": REQUIRED, "wd": REQUIRED},
        frozenset({"mesolve", "steadystate_fourier"}),
        ("n_cavity", "n_mech", "X_quadrature"), _optomech),
    "kerr_jc": ModelSpec(
        {"N": REQUIRED, "F": REQUIRED, "Dc": REQUIRED, "Da": REQUIRED, "gamma": REQUIRED,
         "U": REQUIRED, "g": REQUIRED},
        frozenset({"mesolve", "mcsolve", "dsf_mesolve", "dsf_mcsolve"}),
        ("n_cavity", "a_cavity", "sz_atom", "X_quadrature"), _kerr_jc),
    "driven_cavity": ModelSpec(
        {"N": REQUIRED, "delta": REQUIRED, "F": REQUIRED, "gamma": REQUIRED, "t_ramp": 0.0},
        frozenset({"mesolve", "mcsolve", "steadystate", "dfd_mesolve", "dsf_mesolve"}),
        ("n_cavity", "a_cavity", "X_quadrature"), _driven_cavity),
    "ising": ModelSpec(
        {"nx": REQUIRED, "ny": REQUIRED, "Jz": REQUIRED, "hx": REQUIRED, "gamma": REQUIRED,
         "periodic": 0},
        frozenset({"mesolve", "mcsolve"}),
        ("Sx_total", "Sy_total", "Sz_total"), _ising),
}

# solver controls accepted in the flat params map next to model parameters
SOLVER_PARAMS = {
    "abstol", "reltol", "dt_max", "n_max", "dalpha_max", "gradient_h",
    "dim_max", "dim_min", "tau_up", "tau_down", "grow", "shrink", "m",
}

INTEGER_PARAMS = {"N", "Nc", "Nm", "n0", "nx", "ny", "n_max", "dim_max", "dim_min", "grow",
                  "shrink", "m", "periodic", "atom_excited"}


def model_params(model: str, given: dict) -> dict:
    """Model parameters with defaults filled in (validation happens elsewhere)."""
    spec = MODELS[model]
    out = {k: v for k, v in spec.params.items() if v is not REQUIRED}
    out.update({k: v for k, v in given.items() if k in spec.params})
    return out


def build(model: str, params: dict) -> Setup:
    return MODELS[model].builder(model_params(model, params))


def finite(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and np.isfinite(value)
