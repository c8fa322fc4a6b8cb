import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from squeezed_laser import metrology as met
from squeezed_laser import states as st
from squeezed_laser.operators import HilbertSpace


def _pure(ket):
    return np.outer(ket, ket.conj())


def _random_mixed(dim, rank, rng):
    m = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = m @ m.conj().T
    return rho / np.trace(rho).real


def _momentum(n_fock):
    a = np.diag(np.sqrt(np.arange(1, n_fock)), 1).astype(complex)
    return (a - a.conj().T) / (1j * math.sqrt(2))


def test_qfi_coherent_state():
    for alpha in (1.0, 2.0 - 1.0j, 0.3j):
        rho = _pure(st.coherent_ket(60, alpha))
        assert met.qfi(rho) == pytest.approx(abs(alpha) ** 2, abs=1e-8)


@pytest.mark.parametrize("r,alpha", [(0.3, 1.5), (0.6, 2.0 * np.exp(0.7j)), (1.0, 1.0j)])
def test_qfi_phase_squeezed_state(r, alpha):
    theta = 2 * np.angle(alpha) + math.pi
    space = HilbertSpace(200)
    rho = st.prepare_squeezed_coherent(space, r * np.exp(1j * theta), alpha, ordering="D_then_S")
    expected = abs(alpha) ** 2 * math.exp(2 * r) + 2 * math.sinh(r) ** 2 * math.cosh(r) ** 2
    assert met.qfi(rho) == pytest.approx(expected, abs=1e-7)


def test_qfi_maximally_mixed():
    rho = np.eye(6) / 6
    rng = np.random.default_rng(0)
    g = rng.normal(size=(6, 6))
    assert met.qfi(rho, g + g.T) == pytest.approx(0.0, abs=1e-15)
    assert met.qfi(rho) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=20, deadline=None)
@given(seed=hst.integers(0, 10_000))
def test_qfi_pure_state_reduction(seed):
    rng = np.random.default_rng(seed)
    ket = rng.normal(size=12) + 1j * rng.normal(size=12)
    ket /= np.linalg.norm(ket)
    rho = _pure(ket)
    g = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    g = g + g.conj().T
    assert met.qfi(rho, g) == pytest.approx(met.variance(rho, g), abs=1e-8)
    assert met.qfi(rho) == pytest.approx(met.variance(rho, met.number_generator(12)), abs=1e-8)


@pytest.mark.parametrize("phi", [0.0, 0.1])
def test_qfi_encoding_invariance(phi):
    rng = np.random.default_rng(3)
    rho = _random_mixed(10, 3, rng)
    g = rng.normal(size=(10, 10)) + 1j * rng.normal(size=(10, 10))
    g = g + g.conj().T
    assert met.qfi(met.encode(rho, phi, g), g) == pytest.approx(met.qfi(rho, g), abs=1e-8)
    assert met.qfi(met.encode(rho, phi)) == pytest.approx(met.qfi(rho), abs=1e-8)


def test_qfi_mixed_below_variance():
    rng = np.random.default_rng(4)
    for _ in range(5):
        rho = _random_mixed(8, 3, rng)
        assert 0 <= met.qfi(rho) <= met.variance(rho, met.number_generator(8)) + 1e-10


def test_encode_diagonal_and_general_agree():
    rng = np.random.default_rng(5)
    rho = _random_mixed(7, 2, rng)
    g = met.number_generator(7)
    shifted = g + 1e-3 * np.diag(rng.normal(size=7))  # still diagonal
    assert np.allclose(met.encode(rho, 0.4, g), met.encode(rho, 0.4))
    w, v = np.linalg.eigh(shifted)
    u = (v * np.exp(0.2j * w)) @ v.conj().T
    assert np.allclose(met.encode(rho, 0.4, shifted), u @ rho @ u.conj().T)


@pytest.mark.parametrize("r", [0.0, 0.4])
def test_cfi_gaussian_shift(r):
    # G = -2 p shifts x by Phi, so F = 1/sigma^2 with sigma^2 = e^{-2r}/2
    n_fock = 70
    space = HilbertSpace(n_fock - 1)
    rho = st.prepare_squeezed_coherent(space, r, 0.0)
    g = -2.0 * _momentum(n_fock)
    x = np.linspace(-8, 8, 3201)
    f = met.cfi_quadrature(rho, g, x=x)
    assert f == pytest.approx(2.0 * math.exp(2 * r), rel=1e-5)
    assert f <= met.qfi(rho, g) + 1e-6


def test_cfi_coherent_state():
    alpha = 2.0
    rho = _pure(st.coherent_ket(60, alpha))
    f_p = met.cfi_quadrature(rho, theta_meas=math.pi / 2)
    assert f_p == pytest.approx(abs(alpha) ** 2, rel=1e-4)
    f_x = met.cfi_quadrature(rho, theta_meas=0.0)
    assert f_x == pytest.approx(0.0, abs=1e-5)
    assert max(f_p, f_x) <= met.qfi(rho) + 1e-6


def test_cfi_exact_matches_finite_difference():
    space = HilbertSpace(100)
    rho = st.prepare_phase_diffused(space, 0.5 * np.exp(0.3j), 2.0)
    for theta_meas in (0.0, 0.9):
        fd = met.cfi_quadrature(rho, theta_meas=theta_meas)
        exact = met.cfi_quadrature_exact(rho, theta_meas=theta_meas)
        assert fd == pytest.approx(exact, rel=1e-4, abs=1e-6)
        assert fd <= met.qfi(rho) + 1e-6


def test_cfi_grid_check():
    rho = _pure(st.coherent_ket(60, 3.0))
    with pytest.raises(ValueError, match="grid"):
        met.cfi_quadrature(rho, x=np.linspace(-1, 1, 101))


def test_michelson_encode():
    alpha = 1.5 + 0.5j
    rho = _pure(st.coherent_ket(50, alpha))
    assert np.allclose(met.michelson_encode(rho, 0.0), rho)
    phi = 0.05
    out = met.michelson_encode(rho, phi)
    target = st.coherent_ket(50, alpha * np.exp(-0.5j * phi))
    assert np.real(target.conj() @ out @ target) > 1 - 1e-6
    approx = met.michelson_encode(rho, phi, "displacement_approx")
    assert np.real(target.conj() @ approx @ target) > 1 - 1e-3
    diffused = st.prepare_phase_diffused(HilbertSpace(49), 0.0, 2.0)
    with pytest.raises(ValueError, match="phase-diffused"):
        met.michelson_encode(diffused, phi, "displacement_approx")
    with pytest.warns(RuntimeWarning):
        met.michelson_encode(rho, 0.5)
    with pytest.raises(ValueError):
        met.michelson_encode(rho, phi, "other")


def test_michelson_with_atom_leaves_atom_alone():
    space = HilbertSpace(20, 2)
    rho = st.prepare_squeezed_coherent(space, 0.0, 1.0, atom_state=1)
    out = met.michelson_encode(rho, 0.1, space=space)
    assert np.allclose(st.atom_reduced(out, space), st.atom_reduced(rho, space))


def test_heisenberg_fit():
    n_s = 4.0
    n = np.array([5.0, 8.0, 12.0, 20.0, 30.0])
    for beta in (2.0, 5.0):
        f = (n**2 - n_s**2) / (beta * n_s)
        fitted, resid = met.heisenberg_fit(zip(n, f), n_s)
        assert fitted == pytest.approx(beta, abs=1e-6)
        assert resid < 1e-12
    with pytest.raises(ValueError):
        met.heisenberg_fit([(5, 1), (8, 2), (20, 3)], n_s)
    with pytest.raises(ValueError):
        met.heisenberg_fit([(5, 1), (6, 2), (7, 3), (8, 4)], n_s)
    with pytest.raises(ValueError):
        met.heisenberg_fit([(5, -1), (8, -2), (12, -3), (20, -4)], n_s)


def test_sql_surpassed_at_r1():
    res = met.fisher_point(4.0, 1.0, with_classical=False)
    # default cutoff drops a tail of relative weight ~1e-7
    assert res.n_mean == pytest.approx(4 * math.cosh(2) + math.sinh(1) ** 2, rel=1e-6)
    assert res.f_q > res.n_mean


def test_fisher_point_bound_and_csv(tmp_path):
    from squeezed_laser.io import read_csv

    res = met.fisher_point(2.0, 0.5)
    assert res.f_classical <= res.f_q + 1e-6
    assert 0 <= res.params["theta_opt"] < 2 * math.pi + 1
    coarse = max(
        met.cfi_quadrature_exact(met.encode(met.phase_diffused_state(2.0, 0.5)[1], t)) for t in met.THETA_GRID
    )
    assert res.f_classical >= coarse * (1 - 1e-3)
    meta, cols, data = read_csv(met.fisher_csv(tmp_path / "f.csv", [res], {"note": "x"}))
    assert "F_Q" in cols and data.shape[0] == 1
