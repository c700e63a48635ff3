import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from qsim import (
    InvalidGrid,
    InvalidSubsystem,
    KindMismatch,
    Qobj,
    coherent,
    correlation_2op_1t,
    correlation_fourier_transform,
    destroy,
    displace,
    entropy_vn,
    fidelity,
    fock,
    fock_dm,
    liouvillian,
    maximally_mixed_dm,
    normalize,
    rand_dm,
    rand_ket,
    rand_unitary,
    spectrum_correlation_fft,
    tensor,
    thermal_dm,
    wigner,
)
from qsim.core import Kind


def _parity_wigner(rho, x, p, n_big=60):
    """W(x, p) = tr[D(-alpha) rho D(alpha) Pi] / pi with alpha = (x + i p)/sqrt(2)."""
    d = rho.shape[0]
    big = np.zeros((n_big, n_big), complex)
    big[:d, :d] = rho
    alpha = (x + 1j * p) / math.sqrt(2)
    D = displace(n_big, -alpha).full()
    shifted = D @ big @ D.conj().T
    parity = (-1.0) ** np.arange(n_big)
    return float(np.real(np.sum(np.diag(shifted) * parity)) / math.pi)


def test_wigner_vacuum_gaussian():
    xv = np.linspace(-4, 4, 41)
    w = wigner(fock(8, 0), xv, xv)
    X, P = np.meshgrid(xv, xv)
    assert np.abs(w.values - np.exp(-X**2 - P**2) / math.pi).max() < 1e-12


def test_wigner_fock_one_closed_form():
    xv = np.linspace(-3, 3, 25)
    w = wigner(fock(5, 1), xv, xv)
    X, P = np.meshgrid(xv, xv)
    r2 = X**2 + P**2
    assert np.allclose(w.values, (2 * r2 - 1) * np.exp(-r2) / math.pi, atol=1e-12)


def test_wigner_matches_displaced_parity():
    rho = rand_dm(5, seed=3).full()
    pts = [(0.0, 0.0), (0.7, -0.4), (-1.1, 0.9), (1.5, 0.2)]
    xv = np.array(sorted({x for x, _ in pts}))
    pv = np.array(sorted({p for _, p in pts}))
    w = wigner(Qobj(rho, Kind.OPERATOR, [5]), xv, pv)
    for x, p in pts:
        i, j = np.searchsorted(xv, x), np.searchsorted(pv, p)
        assert w.values[j, i] == pytest.approx(_parity_wigner(rho, x, p), abs=1e-10)


def test_wigner_coherent_peak_location():
    alpha = 1.0 + 0.5j
    xv = np.linspace(-2, 4, 121)
    w = wigner(coherent(30, alpha), xv, xv)
    j, i = np.unravel_index(np.argmax(w.values), w.values.shape)
    assert xv[i] == pytest.approx(math.sqrt(2) * alpha.real, abs=0.05)
    assert xv[j] == pytest.approx(math.sqrt(2) * alpha.imag, abs=0.05)


def test_wigner_marginal_is_position_density():
    psi = normalize(fock(10, 0) + fock(10, 2))
    xv = np.linspace(-7, 7, 281)
    w = wigner(psi, xv, xv)
    marg = np.trapezoid(w.values, xv, axis=0)
    # harmonic-oscillator eigenfunctions in x with [x, p] = i
    h0 = np.exp(-xv**2 / 2) / math.pi**0.25
    h2 = (2 * xv**2 - 1) / math.sqrt(2) * h0
    dens = np.abs((h0 + h2) / math.sqrt(2)) ** 2
    assert np.abs(marg - dens).max() < 1e-6


def test_wigner_cat_is_negative_and_normalized():
    n = 30
    cat = normalize(coherent(n, 2.0) + coherent(n, -2.0))
    xv = np.linspace(-6, 6, 161)
    w = wigner(cat, xv, xv)
    assert abs(w.integral() - 1) < 1e-3
    assert w.values.min() < -0.1


def test_wigner_ket_equals_density():
    psi = rand_ket(6, seed=1)
    xv = np.linspace(-2, 2, 9)
    a = wigner(psi, xv, xv).values
    b = wigner(Qobj(psi.full() @ psi.full().conj().T, Kind.OPERATOR, [6]), xv, xv).values
    assert np.allclose(a, b, atol=1e-14)


def test_wigner_errors():
    with pytest.raises(InvalidGrid):
        wigner(fock(3, 0), [1.0, 0.0], [0.0])
    with pytest.raises(InvalidGrid):
        wigner(fock(3, 0), [np.nan], [0.0])
    with pytest.raises(InvalidSubsystem):
        wigner(tensor(fock(2, 0), fock(2, 0)), [0.0], [0.0])
    with pytest.raises(KindMismatch):
        wigner(fock(3, 0).dag(), [0.0], [0.0])


def test_entropy_values():
    assert entropy_vn(fock_dm(4, 2)) == pytest.approx(0.0, abs=1e-12)
    assert entropy_vn(maximally_mixed_dm(4)) == pytest.approx(math.log(4))
    assert entropy_vn(maximally_mixed_dm(4), base=2) == pytest.approx(2.0)
    nb = 0.7
    th = (nb + 1) * math.log(nb + 1) - nb * math.log(nb)
    assert entropy_vn(thermal_dm(60, nb)) == pytest.approx(th, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6))
def test_entropy_unitary_invariance(seed, d):
    rho = rand_dm(d, seed=seed)
    U = rand_unitary(d, seed=seed + 1)
    assert entropy_vn(U @ rho @ U.dag()) == pytest.approx(entropy_vn(rho), abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6))
def test_fidelity_symmetric_and_bounded(seed, d):
    a, b = rand_dm(d, seed=seed), rand_dm(d, seed=seed + 7)
    f = fidelity(a, b)
    assert f == pytest.approx(fidelity(b, a), abs=1e-8)
    assert -1e-12 <= f <= 1 + 1e-9
    assert fidelity(a, a) == pytest.approx(1.0, abs=1e-7)


def test_fidelity_pure_states():
    psi, phi = rand_ket(5, seed=2), rand_ket(5, seed=3)
    overlap = abs(np.vdot(psi.full(), phi.full()))
    assert fidelity(psi, phi) == pytest.approx(overlap)
    assert fidelity(psi, phi @ phi.dag()) == pytest.approx(overlap, abs=1e-7)
    with pytest.raises(KindMismatch):
        fidelity(fock(3, 0), fock(4, 0))


def _cavity(n=15, w=1.0, gamma=0.2):
    a = destroy(n)
    return a, w * a.dag() @ a, [math.sqrt(gamma) * a]


def test_correlation_at_zero_delay():
    a, H, c = _cavity()
    psi = coherent(15, 0.8)
    corr = correlation_2op_1t(H, psi, np.linspace(0, 1, 5), c, a.dag(), a)
    assert corr[0] == pytest.approx(abs(0.8) ** 2, abs=1e-8)


def test_correlation_matches_dense_propagator():
    n = 6
    a, H, c = _cavity(n, 0.9, 0.3)
    rho = rand_dm(n, seed=4)
    taus = np.linspace(0, 3, 7)
    corr = correlation_2op_1t(H, rho, taus, c, a.dag(), a)
    L = liouvillian(H, c).full()
    sigma = (a @ rho).full().reshape(-1, order="F")
    Ad = a.dag().full()
    for k, tau in enumerate(taus):
        s = (sla.expm(L * tau) @ sigma).reshape(n, n, order="F")
        assert corr[k] == pytest.approx(np.trace(Ad @ s), abs=1e-6)


def test_correlation_coherent_closed_form():
    w, gamma, alpha = 1.3, 0.2, 1.2
    a, H, c = _cavity(20, w, gamma)
    taus = np.linspace(0, 10, 51)
    corr = correlation_2op_1t(H, coherent(20, alpha), taus, c, a.dag(), a)
    exact = alpha**2 * np.exp((1j * w - gamma / 2) * taus)
    assert np.abs(corr - exact).max() < 1e-5


def test_correlation_from_vacuum_steady_state():
    # undriven cavity relaxes to vacuum, so <a^dag(tau) a> vanishes
    a, H, c = _cavity(6)
    corr = correlation_2op_1t(H, None, np.linspace(0, 2, 5), c, a.dag(), a)
    assert np.abs(corr).max() < 1e-10


def test_spectrum_is_lorentzian():
    w0, gamma = 2.0, 0.5
    taus = np.linspace(0, 200, 8001)
    corr = np.exp((1j * w0 - gamma / 2) * taus)
    omega, spec = spectrum_correlation_fft(taus, corr)
    lor = gamma / ((omega - w0) ** 2 + gamma**2 / 4)
    near = np.abs(omega - w0) < 3
    assert omega[np.argmax(spec)] == pytest.approx(w0, abs=2 * math.pi / 200)
    assert np.abs(spec[near] - lor[near]).max() < 0.03 * lor.max()


def test_fourier_transform_of_gaussian():
    taus = np.linspace(-20, 20, 2001)
    omega, ft = correlation_fourier_transform(taus, np.exp(-taus**2 / 2))
    exact = math.sqrt(2 * math.pi) * np.exp(-omega**2 / 2)
    assert np.abs(ft - exact).max() < 1e-10
    assert np.all(np.diff(omega) > 0)


def test_spectrum_grid_errors():
    with pytest.raises(InvalidGrid):
        spectrum_correlation_fft([0.0, 1.0, 3.0], [1, 1, 1])
    with pytest.raises(InvalidGrid):
        spectrum_correlation_fft([0.0], [1])
    with pytest.raises(InvalidGrid):
        correlation_fourier_transform([0.0, 1.0, 2.0], [1, 1])

