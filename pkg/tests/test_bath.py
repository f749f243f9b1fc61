import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from qcmd_langevin.bath import (HeavyModel, SpectralBathModel, bath_from_wave, build_debye_bath,
                                build_flat_bath, friction_limit_debye, hamiltonian_total,
                                heavy_force, kappa_residual, kernel_table, memory_kernel_debye,
                                memory_kernel_spectral, rank_one_factor, scaled_bath,
                                wave_from_bath)
from qcmd_langevin.errors import ContractViolation, ModelInvalidError, UnsupportedModelError


def random_bath(rng, J=8, dof=2):
    lam = np.sort(rng.uniform(0.5, 5.0, J))
    return SpectralBathModel(lam, rng.normal(size=(J, dof)), mass=1.7)


# -- heavy potentials --------------------------------------------------------

@pytest.mark.parametrize("kind", ["free", "quadratic", "double_well"])
def test_gradient_matches_central_difference(kind, rng):
    hv = HeavyModel(kind, 3) if kind != "quadratic" else HeavyModel("quadratic", 3, np.diag([1., 2., 3.]))
    for _ in range(20):
        X = rng.normal(size=3)
        eps = 1e-6
        fd = np.array([(hv.potential(X + eps * e) - hv.potential(X - eps * e)) / (2 * eps)
                       for e in np.eye(3)])
        np.testing.assert_allclose(hv.gradient(X), fd, rtol=1e-6, atol=1e-8)
        hfd = np.array([(hv.gradient(X + eps * e) - hv.gradient(X - eps * e)) / (2 * eps)
                        for e in np.eye(3)])
        np.testing.assert_allclose(hv.hessian(X), hfd, rtol=1e-5, atol=1e-7)


def test_heavy_model_rejects_unknown_kind():
    with pytest.raises(ModelInvalidError):
        HeavyModel("morse", 1)


# -- total energy and force --------------------------------------------------

def test_energy_zero_state():
    bath = SpectralBathModel([1.0, 2.0], [[1.0], [0.5]])
    assert hamiltonian_total([0.0], [0.0], [0.0, 0.0], [0.0, 0.0], bath, HeavyModel("free", 1)) == 0.0


def test_energy_single_mode_plug_in():
    bath = SpectralBathModel([2.0], [[0.0]], mass=2.0)
    E = hamiltonian_total([0.0], [0.0], [1.0], [1.0], bath, HeavyModel("free", 1))
    assert E == pytest.approx(2.5, abs=1e-15)


def test_energy_matches_per_mode_summation(rng):
    bath = random_bath(rng)
    hv = HeavyModel("double_well", 2)
    X, p = rng.normal(size=2), rng.normal(size=2)
    x, q = rng.normal(size=8), rng.normal(size=8)
    E = 0.5 * p @ p + hv.potential(X)
    for j in range(8):
        d = x[j] - bath.couplings[j] @ X
        E += 0.5 * bath.mass * bath.eigenvalues[j] * d * d
        E += bath.eigenvalues[j] * q[j] ** 2 / (2 * bath.mass)
    assert hamiltonian_total(X, p, x, q, bath, hv) == pytest.approx(E, rel=1e-12)


def test_energy_dimension_mismatch():
    bath = SpectralBathModel([1.0, 2.0], [[1.0], [0.5]])
    with pytest.raises(ContractViolation):
        hamiltonian_total([0.0, 1.0], [0.0], [0.0, 0.0], [0.0, 0.0], bath, HeavyModel("free", 1))


def test_nonpositive_frequency_rejected():
    with pytest.raises(ModelInvalidError):
        SpectralBathModel([0.0, 1.0], [[1.0], [1.0]])
    with pytest.raises(ModelInvalidError):
        SpectralBathModel([2.0, 1.0], [[1.0], [1.0]])


def test_force_vanishes_coupling_at_equilibrium(rng):
    bath = random_bath(rng)
    hv = HeavyModel("double_well", 2)
    X = rng.normal(size=2)
    np.testing.assert_allclose(heavy_force(X, bath.coupling(X), bath, hv), -hv.gradient(X))


def test_force_single_mode_plug_in():
    bath = SpectralBathModel([3.0], [[1.0, 0.0]], mass=1.0)
    f = heavy_force([0.0, 0.0], [2.0], bath, HeavyModel("free", 2))
    np.testing.assert_allclose(f, [6.0, 0.0])


def test_force_is_minus_energy_gradient(rng):
    hv = HeavyModel("double_well", 2)
    for _ in range(100):
        bath = random_bath(rng)
        X, p = rng.normal(size=2), rng.normal(size=2)
        x, q = rng.normal(size=8), rng.normal(size=8)
        eps = 1e-6
        fd = -np.array([(hamiltonian_total(X + eps * e, p, x, q, bath, hv)
                         - hamiltonian_total(X - eps * e, p, x, q, bath, hv)) / (2 * eps)
                        for e in np.eye(2)])
        np.testing.assert_allclose(heavy_force(X, x, bath, hv), fd, rtol=1e-6, atol=1e-6)


# -- wave coordinates -------------------------------------------------------

def test_wave_at_equilibrium_is_zero(rng):
    bath = random_bath(rng)
    X = rng.normal(size=2)
    np.testing.assert_array_equal(wave_from_bath(bath.coupling(X), np.zeros(8), X, bath), 0)


def test_wave_plug_in():
    bath = SpectralBathModel([1.0], [[0.0]], mass=2.0)
    assert wave_from_bath([1.0], [4.0], [0.0], bath)[0] == 1 + 2j


@given(st.integers(0, 2**32 - 1))
def test_wave_round_trip(seed):
    rng = np.random.default_rng(seed)
    bath = random_bath(rng)
    X, x, q = rng.normal(size=2), rng.normal(size=8), rng.normal(size=8)
    x2, q2 = bath_from_wave(wave_from_bath(x, q, X, bath), X, bath)
    np.testing.assert_allclose(x2, x, atol=1e-14, rtol=1e-14)
    np.testing.assert_allclose(q2, q, atol=1e-14, rtol=1e-14)


# -- kernels ----------------------------------------------------------------

def test_kernel_at_zero_lag(rng):
    bath = random_bath(rng)
    expected = bath.mass * np.einsum("j,ja,jb->ab", bath.eigenvalues, bath.couplings, bath.couplings)
    np.testing.assert_allclose(memory_kernel_spectral(bath, 0.0), expected, rtol=1e-14)


def test_kernel_single_mode_half_period():
    bath = SpectralBathModel([2.0], [[1.0]], mass=1.0)
    assert memory_kernel_spectral(bath, np.pi / 2)[0, 0] == pytest.approx(-2.0, abs=1e-14)


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 50.0))
def test_kernel_symmetric_and_bounded(seed, tau):
    bath = random_bath(np.random.default_rng(seed), J=6, dof=3)
    f = memory_kernel_spectral(bath, tau)
    np.testing.assert_allclose(f, f.T, atol=1e-14)
    assert np.linalg.norm(f, 2) <= bath.kernel_bound * (1 + 1e-12)
    assert np.linalg.eigvalsh(memory_kernel_spectral(bath, 0.0)).min() >= -1e-12


def test_debye_kernel_zero_lag_continuity():
    f0 = memory_kernel_debye(2.0, 1.5, 3.0, 0.0)
    assert f0[0, 0] == pytest.approx(1.5 * 2.0 / 9.0, rel=1e-15)
    assert memory_kernel_debye(2.0, 1.5, 3.0, 1e-9)[0, 0] == pytest.approx(f0[0, 0], rel=1e-12)


def test_debye_kernel_zeros():
    assert abs(memory_kernel_debye(1.0, 1.0, 1.0, np.pi)[0, 0]) < 1e-16
    k = np.arange(1, 6)
    np.testing.assert_allclose(memory_kernel_debye(1.0, 1.0, 2.0, k * np.pi / 2.0)[:, 0, 0], 0,
                               atol=1e-15)


def test_friction_limit_plug_in():
    assert friction_limit_debye(1.0, 2.0, 1.0)[0, 0] == pytest.approx(np.pi)
    np.testing.assert_array_equal(friction_limit_debye(0.0, 2.0, 1.0), 0)


def test_friction_limit_rejects_indefinite_kappa():
    with pytest.raises(ModelInvalidError):
        friction_limit_debye(np.diag([1.0, -1.0]), 1.0, 1.0)


def test_truncated_kernel_integral_approaches_friction_limit():
    cutoff = 10.0
    f = lambda t: memory_kernel_debye(1.0, 1.0, cutoff, t)[..., 0, 0]
    val, _ = integrate.quad(f, 0.0, 1e3 / cutoff, limit=5000)
    K = friction_limit_debye(1.0, 1.0, cutoff)[0, 0]
    assert abs(val - K) / K < 0.01


# -- Debye bath construction -------------------------------------------------

def test_debye_median_mode():
    bath = build_debye_bath(1000, 4.0, 1.0)
    mid = 0.5 * (bath.eigenvalues[499] + bath.eigenvalues[500])
    assert mid == pytest.approx(4.0 * 2 ** (-1 / 3), rel=1e-5)


def test_debye_single_mode():
    bath = build_debye_bath(1, 2.0, 3.0)
    lam = 2.0 * 0.5 ** (1 / 3)
    assert bath.eigenvalues[0] == pytest.approx(lam, rel=1e-15)
    assert bath.couplings[0, 0] == pytest.approx(np.sqrt(3.0 / (3 * lam**3)), rel=1e-14)


@given(st.integers(1, 300), st.floats(0.1, 50.0), st.floats(0.01, 10.0),
       st.integers(0, 2**32 - 1))
def test_kappa_identity_holds_per_mode(J, cutoff, k, seed):
    u = np.random.default_rng(seed).normal(size=3)
    u /= np.linalg.norm(u)
    bath = build_debye_bath(J, cutoff, k * np.outer(u, u))
    assert kappa_residual(bath) <= 1e-12 * max(1.0, k)


def test_rank_two_kappa_unsupported():
    with pytest.raises(UnsupportedModelError):
        build_debye_bath(10, 1.0, np.eye(2))
    k, u = rank_one_factor(np.diag([0.0, 2.0]))
    assert k == pytest.approx(2.0) and abs(u[1]) == pytest.approx(1.0)


def test_iid_placement_is_reproducible():
    a = build_debye_bath(50, 2.0, 1.0, placement="iid", rng=np.random.default_rng(1))
    b = build_debye_bath(50, 2.0, 1.0, placement="iid", rng=np.random.default_rng(1))
    np.testing.assert_array_equal(a.eigenvalues, b.eigenvalues)
    assert np.all(a.eigenvalues <= 2.0)


def _debye_oracle(tau, cutoff, kappa=1.0, m=1.0):
    # sum_j m lambda_j c_j^2 cos(tau lambda_j) with density 3 l^2 / cutoff^3
    # and c^2 = kappa / (3 l^3)
    g = lambda l: m * l * (kappa / (3 * l**3)) * np.cos(tau * l) * 3 * l**2 / cutoff**3
    return integrate.quad(g, 0.0, cutoff, limit=400)[0]


def test_spectral_kernel_matches_debye_quadrature():
    cutoff = 10.0
    bath = build_debye_bath(10**4, cutoff, 1.0)
    tau = np.linspace(0.0, 10.0, 41)
    spec = memory_kernel_spectral(bath, tau)[:, 0, 0]
    oracle = np.array([_debye_oracle(t, cutoff) for t in tau])
    np.testing.assert_allclose(memory_kernel_debye(1.0, 1.0, cutoff, tau)[:, 0, 0], oracle,
                               atol=1e-12)
    assert np.max(np.abs(spec - oracle)) < 3 * np.max(np.abs(oracle)) / np.sqrt(10**4)


def test_kernel_gap_decreases_with_mode_count():
    tau = np.linspace(0.0, 10.0, 2001)
    fd = memory_kernel_debye(1.0, 1.0, 10.0, tau)
    gaps = [np.max(np.abs(memory_kernel_spectral(build_debye_bath(J, 10.0, 1.0), tau) - fd))
            for J in (100, 1000, 10000)]
    assert gaps[0] > gaps[1] > gaps[2]


def test_flat_bath_carries_debye_kernel():
    bath = build_flat_bath(4000, 10.0, 1.0)
    tau = np.linspace(0.0, 5.0, 51)
    np.testing.assert_allclose(memory_kernel_spectral(bath, tau), memory_kernel_debye(1.0, 1.0, 10.0, tau),
                               atol=1e-6)


def test_scaled_bath_friction():
    bath = scaled_bath(1e4, 3.0, 2.0, 200)
    K = friction_limit_debye(bath.kappa, bath.mass, bath.debye_cutoff)
    assert K[0, 0] == pytest.approx(3.0 / 100.0, rel=1e-12)
    assert bath.mass == pytest.approx(0.02)


def test_json_round_trip_exact(rng):
    bath = build_debye_bath(17, 3.3, 0.7, m=1.3)
    again = SpectralBathModel.from_json(bath.to_json())
    np.testing.assert_array_equal(again.eigenvalues, bath.eigenvalues)
    np.testing.assert_array_equal(again.couplings, bath.couplings)
    np.testing.assert_array_equal(again.kappa, bath.kappa)
    assert again.mass == bath.mass and again.debye_cutoff == bath.debye_cutoff
    assert again.digest() == bath.digest()
    assert set(bath.to_dict()) >= {"J", "lambda", "couplings", "m", "lambda_d", "kappa"}


def test_kernel_table_provenance():
    bath = build_debye_bath(10, 1.0, 1.0)
    tab = kernel_table(bath, [0.0, 1.0])
    assert tab.provenance == "spectral-sum" and tab.values.shape == (2, 1, 1)
