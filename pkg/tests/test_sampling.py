import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from qcmd_langevin.bath import SpectralBathModel, build_debye_bath
from qcmd_langevin.errors import ContractViolation, ModelInvalidError
from qcmd_langevin.rng import stream_rng, stream_rngs
from qcmd_langevin.sampling import (GibbsSpec, LowTemperatureWarning, check_low_temperature,
                                    pure_state_probabilities, read_draws_csv,
                                    sample_ehrenfest_modes, sample_pure_states,
                                    sample_zwanzig_bath, write_draws_csv)


def test_zero_temperature_gives_zero_wave():
    bath = build_debye_bath(20, 3.0, 1.0)
    w = sample_zwanzig_bath(bath, GibbsSpec(0.0, seed=3), size=5)
    np.testing.assert_array_equal(w.amplitudes, 0)


@pytest.mark.parametrize("convention,factor", [("covariance", 2.0), ("density", 1.0)])
def test_bath_mode_variance_within_five_sigma(convention, factor):
    bath = SpectralBathModel([1.0, 4.0], [[1.0], [1.0]], mass=2.0)
    T, n = 0.5, 40000
    g = sample_zwanzig_bath(bath, GibbsSpec(T, seed=1, convention=convention), size=n).amplitudes
    for j, lam in enumerate(bath.eigenvalues):
        target = factor * T / (bath.mass * lam)
        for comp in (g[:, j].real, g[:, j].imag):
            v = comp**2
            assert abs(v.mean() - target) <= 5 * v.std(ddof=1) / np.sqrt(n)
            assert abs(comp.mean()) <= 5 * np.sqrt(target / n)
    # distinct modes and the two quadratures are uncorrelated
    r = np.corrcoef(np.stack([g[:, 0].real, g[:, 0].imag, g[:, 1].real]))
    assert np.all(np.abs(r[np.triu_indices(3, 1)]) < 5 / np.sqrt(n))


def test_bath_draws_are_gaussian():
    bath = SpectralBathModel([2.0], [[1.0]])
    g = sample_zwanzig_bath(bath, GibbsSpec(1.0, seed=9), size=5000).amplitudes[:, 0]
    sd = np.sqrt(2.0 / 2.0)
    assert stats.kstest(g.real / sd, "norm").pvalue > 1e-3


def test_same_seed_and_stream_reproduce():
    bath = build_debye_bath(10, 2.0, 1.0)
    a = sample_zwanzig_bath(bath, GibbsSpec(0.3, seed=7, stream=2), size=4).amplitudes
    b = sample_zwanzig_bath(bath, GibbsSpec(0.3, seed=7, stream=2), size=4).amplitudes
    c = sample_zwanzig_bath(bath, GibbsSpec(0.3, seed=7, stream=3), size=4).amplitudes
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


@given(st.integers(0, 2**64 - 1), st.integers(0, 2**32))
def test_streams_are_deterministic(seed, stream):
    a = stream_rng(seed, stream).standard_normal(3)
    b = stream_rng(seed, stream).standard_normal(3)
    np.testing.assert_array_equal(a, b)


def test_stream_list_matches_individual():
    gens = stream_rngs(11, [0, 5])
    np.testing.assert_array_equal(gens[1].random(3), stream_rng(11, 5).random(3))


def test_negative_temperature_rejected():
    with pytest.raises(ModelInvalidError):
        GibbsSpec(-0.1)
    with pytest.raises(ModelInvalidError):
        GibbsSpec(0.1, normalization=0.0)
    with pytest.raises(ContractViolation):
        GibbsSpec(0.1, convention="other")


def test_ehrenfest_zero_temperature_is_ground_state():
    w = sample_ehrenfest_modes([1.0, 2.0], GibbsSpec(0.0, seed=1))
    np.testing.assert_allclose(w.amplitudes, [1, 0, 0])
    assert w.normalized and w.ratio == 0.0


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.02))
def test_ehrenfest_draws_are_unit_norm(seed, T):
    w = sample_ehrenfest_modes([0.5, 1.0, 3.0], GibbsSpec(T, seed=seed), size=7,
                               random_phase=True)
    np.testing.assert_allclose(w.norms, 1.0, atol=1e-14)


def test_ehrenfest_excited_ratio_moment():
    lam = np.array([1.0, 2.0, 5.0])
    T, C, n = 0.01, 3.0, 40000
    w = sample_ehrenfest_modes(lam, GibbsSpec(T, normalization=C, seed=4), size=n)
    target = 2 * np.sum(T / (C * lam))
    assert abs(w.ratio.mean() - target) <= 5 * w.ratio.std(ddof=1) / np.sqrt(n)


def test_low_temperature_warning():
    assert check_low_temperature([1.0, 2.0], 0.1) == pytest.approx(0.15)
    with pytest.warns(LowTemperatureWarning):
        w = sample_ehrenfest_modes([0.01, 0.02], GibbsSpec(1.0, seed=0))
    assert w.warning
    with pytest.raises(ModelInvalidError):
        check_low_temperature([0.0, 1.0], 0.1)


def test_no_warning_in_low_temperature_regime():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sample_ehrenfest_modes([1.0, 2.0], GibbsSpec(0.01, seed=0))


def test_pure_state_probabilities():
    np.testing.assert_allclose(pure_state_probabilities([0.0, 1.0], 0.0), [1, 0])
    q = pure_state_probabilities([0.0, np.log(2.0)], 1.0)
    np.testing.assert_allclose(q, [2 / 3, 1 / 3], rtol=1e-14)


def test_pure_state_frequencies_chi_square():
    levels = np.array([0.0, 0.5, 1.0, 2.0])
    T, n = 0.7, 20000
    w, idx = sample_pure_states(levels, T, np.random.default_rng(8), size=n)
    counts = np.bincount(idx, minlength=4)
    expected = n * pure_state_probabilities(levels, T)
    assert stats.chisquare(counts, expected).pvalue > 1e-3
    mods = np.abs(w.amplitudes)
    np.testing.assert_allclose(mods.max(axis=1), 1.0)
    np.testing.assert_allclose(mods.sum(axis=1), 1.0)


def test_pure_state_single_draw_shape():
    w, idx = sample_pure_states([0.0, 1.0], 0.0, np.random.default_rng(0))
    assert w.amplitudes.shape == (2,) and idx == 0


def test_draws_csv_round_trip(tmp_path):
    amp = np.array([[1 + 2j, 0.1 - 0.3j], [1e-17 + 0j, -4j]])
    p = tmp_path / "draws.csv"
    write_draws_csv(p, amp, [3, 7])
    streams, back = read_draws_csv(p)
    np.testing.assert_array_equal(streams, [3, 7])
    np.testing.assert_array_equal(back, amp)
    with pytest.raises(ContractViolation):
        write_draws_csv(p, amp, [1])
