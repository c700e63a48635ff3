import math

import numpy as np
import pytest

from qsim import (SteadyStateFailure, SteadyStateMethod, destroy, expect, fock_dm, liouvillian,
                  mesolve,
                  num, qobjevo, sigmam, sigmax, sigmaz, steadystate, steadystate_fourier,
                  thermal_dm)
from qsim.steadystate import (fourier_matrix, fourier_residuals,
                              steadystate_detuning_gradient)
from qsim.superop import mat2vec


def excited_population(omega, gamma, delta=0.0):
    # resonance-fluorescence closed form for H = delta/2 sz + omega/2 sx
    return (omega**2 / 4) / (delta**2 + gamma**2 / 4 + omega**2 / 2)


@pytest.mark.parametrize("method", ["Direct", "Eigen"])
@pytest.mark.parametrize("omega,gamma,delta", [(1.0, 1.0, 0.0), (0.3, 2.0, 0.7), (4.0, 0.5, -1.0)])
def test_two_level_fluorescence(method, omega, gamma, delta):
    H = delta / 2 * sigmaz() + omega / 2 * sigmax()
    rho = steadystate(H, [math.sqrt(gamma) * sigmam()], method=method)
    pe = rho.full()[0, 0].real
    assert abs(pe - excited_population(omega, gamma, delta)) < 1e-12


def test_thermal_detailed_balance():
    N, nbar, kappa = 15, 0.4, 0.7
    a = destroy(N)
    c_ops = [math.sqrt(kappa * (nbar + 1)) * a, math.sqrt(kappa * nbar) * a.dag()]
    rho = steadystate(num(N), c_ops)
    # truncation keeps the level ratios nbar / (nbar + 1) exactly
    p = np.diag(rho.full()).real
    assert np.allclose(p[1:] / p[:-1], nbar / (nbar + 1), rtol=1e-10)
    ref = np.diag(thermal_dm(N, nbar).full()).real
    assert np.all(np.abs(np.diff(np.log(ref)) - np.log(nbar / (nbar + 1))) < 1e-10)


def test_direct_residual_and_agreement():
    a = destroy(12)
    H = 0.5 * a.dag() @ a + 0.8 * (a + a.dag()) + 0.1 * a.dag() @ a.dag() @ a @ a
    c_ops = [math.sqrt(0.6) * a]
    L = liouvillian(H, c_ops)
    rho = steadystate(H, c_ops)
    res = np.linalg.norm(L.full() @ mat2vec(rho).full()[:, 0])
    assert res < 1e-9 * np.linalg.norm(L.full())
    eig = steadystate(L, method=SteadyStateMethod.EIGEN)
    assert np.max(np.abs(eig.full() - rho.full())) < 1e-10


def test_singular_generator_fails():
    with pytest.raises(SteadyStateFailure) as info:
        steadystate(sigmaz(), [])
    assert info.value.condition > 1e10


def test_large_sparse_path():
    # 900-dim Liouvillian space: sparse LU branch
    a = destroy(30)
    rho = steadystate(a.dag() @ a + 0.5 * (a + a.dag()), [a])
    alpha = -0.5 / (1 - 0.5j)
    assert abs(expect(a, rho) - alpha) < 1e-10


def test_detuning_gradient_matches_closed_form():
    # <n> = F^2 / (delta^2 + gamma^2 / 4)
    delta, F, gamma = 0.6, 0.7, 1.3
    exact = -2 * delta * F**2 / (delta**2 + gamma**2 / 4) ** 2
    assert abs(steadystate_detuning_gradient(delta, F, gamma, 25) - exact) < 1e-6


def _driven_qubit(w0=1.0, F=0.05, wd=0.9, gamma=0.2):
    H0 = w0 / 2 * sigmaz()
    c_ops = [math.sqrt(gamma) * sigmam()]
    drive = liouvillian(F / 2 * sigmax())
    return H0, c_ops, drive, wd, F


def test_fourier_reduces_to_steadystate_without_drive():
    H0, c_ops, drive, wd, _ = _driven_qubit()
    L0 = liouvillian(H0 + 0.3 * sigmax(), c_ops)
    zero = 0 * drive
    fss = steadystate_fourier(L0, zero, zero, wd, 2)
    ref = steadystate(L0)
    assert np.max(np.abs(fss.rho0.full() - ref.full())) < 1e-12
    for n in (1, 2):
        assert np.max(np.abs(fss.component(n).full())) < 1e-14


def test_fourier_properties_and_time_domain():
    H0, c_ops, drive, wd, F = _driven_qubit()
    L0 = liouvillian(H0, c_ops)
    fss = steadystate_fourier(L0, drive, drive, wd, 4)
    assert np.max(fourier_residuals(fss, L0, drive, drive)) < 1e-8
    for n in range(1, 5):
        assert np.max(np.abs(fss.component(-n).full() - fss.component(n).full().conj().T)) < 1e-10
    assert abs(np.trace(fss.rho0.full()) - 1) < 1e-14
    # long-time mesolve with H(t) = H0 + F cos(wd t) sx
    H = qobjevo(H0, (sigmax(), lambda p, t: F * math.cos(wd * t)))
    period = 2 * math.pi / wd
    t0 = 120.0
    t = t0 + np.linspace(0, period, 9)
    r = mesolve(H, fock_dm(2, 1), np.concatenate([[0], t]),
                c_ops, [sigmaz()])
    for k, tk in enumerate(t):
        assert abs(r.expect[0, k + 1] - expect(sigmaz(), fss.at(tk))) < 1e-4


def test_fourier_block_structure():
    H0, c_ops, drive, wd, _ = _driven_qubit()
    L0 = liouvillian(H0, c_ops)
    A = fourier_matrix(L0, 2 * drive, drive, wd, 1).toarray()
    n2 = 4
    # L1 couples rho_{n-1} into row block n: sub-diagonal
    assert np.allclose(A[n2:2 * n2, 0:n2], 2 * drive.full())
    assert np.allclose(A[0:n2, n2:2 * n2], drive.full())
    assert np.allclose(A[2 * n2:, 2 * n2:], L0.full() - 1j * wd * np.eye(n2))
