import numpy as np
import pytest
from hypothesis import given, strategies as st

from qcmd_langevin.bath import HeavyModel, build_debye_bath
from qcmd_langevin.config import validate_config
from qcmd_langevin.ehrenfest import default_model
from qcmd_langevin.errors import ConfigError, ContractViolation
from qcmd_langevin.harness import (CoupledBathLangevin, EnsembleResult, ObservableSpec,
                                   ObservableStats, WeakErrorEstimate, adiabatic_sweep,
                                   convergence_sweep, fdt_check, fit_loglog_slope,
                                   long_time_average, pure_state_contrast, run_ensemble,
                                   sample_values, weak_error, weak_error_configs)


def small_config(**run):
    return validate_config({"dynamics": "langevin", "seed": 5,
                            "run": {"h": 0.05, "horizon": 1.0, "n_samples": 24, "stride": 5,
                                    "temperature": 0.3, **run},
                            "observables": [{"name": "g", "kind": "diffusion"},
                                            {"name": "kt", "kind": "kinetic_temperature"}]})


# -- observables ------------------------------------------------------------

def test_diffusion_observable():
    t = np.array([0.0, 2.0])
    X = np.array([[1.0, 0.0], [3.0, 2.0]])
    g = ObservableSpec("g", "diffusion").evaluate(t, X, np.zeros_like(X))
    np.testing.assert_allclose(g, [0.0, 8.0 / (2 * 2 * 2.0)])


def test_polynomial_and_potential_observables():
    t = np.array([0.0])
    X = np.array([[2.0, -1.0]])
    poly = ObservableSpec("q", "polynomial", coefficients=(1.0, 0.0, 1.0))
    np.testing.assert_allclose(poly.evaluate(t, X, X), [(5.0 + 2.0) / 2])
    pot = ObservableSpec("v", "potential")
    dw = HeavyModel("double_well", 2)
    np.testing.assert_allclose(pot.evaluate(t, X, X, dw), [dw.potential(X[0])])
    with pytest.raises(ContractViolation):
        pot.evaluate(t, X, X)
    with pytest.raises(ContractViolation):
        ObservableSpec("z", "entropy")


# -- ensemble statistics -------------------------------------------------------

@given(st.integers(0, 2**32 - 1), st.integers(1, 30), st.integers(1, 30))
def test_merge_equals_pooled_statistics(seed, n1, n2):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 1, 3)
    a, b = rng.normal(size=(n1, 3)), rng.normal(size=(n2, 3))
    merged = ObservableStats.from_samples(t, a).merge(ObservableStats.from_samples(t, b))
    pooled = ObservableStats.from_samples(t, np.vstack([a, b]))
    assert merged.count == pooled.count
    np.testing.assert_allclose(merged.mean, pooled.mean, atol=1e-12)
    np.testing.assert_allclose(merged.m2, pooled.m2, atol=1e-10)


def test_merge_rejects_different_grids():
    a = ObservableStats.from_samples([0.0, 1.0], np.ones((2, 2)))
    b = ObservableStats.from_samples([0.0, 2.0], np.ones((2, 2)))
    with pytest.raises(ContractViolation):
        a.merge(b)


def test_ensemble_is_independent_of_worker_count():
    cfg = small_config()
    one = run_ensemble(cfg, workers=1)
    two = run_ensemble(cfg, workers=2)
    assert one.to_json() == two.to_json()
    assert one.n_samples == 24 and not one.partial
    assert one.observables["g"].times.size == 5


def test_ensemble_split_and_merge_matches_full_run():
    cfg = small_config()
    full = run_ensemble(cfg)
    parts = run_ensemble(cfg, chunk=5)
    np.testing.assert_array_equal(full.observables["kt"].mean, parts.observables["kt"].mean)
    half = EnsembleResult({"g": ObservableStats.from_samples(
        full.observables["g"].times, np.ones((3, 5)))})
    merged = half.merge(half)
    assert merged.n_samples == 6


def test_ensemble_json_round_trip():
    res = run_ensemble(small_config(n_samples=4))
    back = EnsembleResult.from_json(res.to_json())
    assert back.to_json() == res.to_json()
    assert res.to_csv().splitlines()[0] == "observable,time,count,mean,variance,stderr"


def test_partial_flag_on_aborts():
    res = EnsembleResult({"g": ObservableStats.from_samples([0.0], np.ones((10, 1)))},
                         aborted=[{"sample": 3, "error": "x"}])
    assert res.partial


@pytest.mark.parametrize("dynamics,extra", [
    ("zwanzig", {"model": {"bath": {"J": 50, "cutoff": 5.0}}}),
    ("ehrenfest", {"run": {"h": 1e-3, "horizon": 0.05, "n_samples": 3, "temperature": 0.01,
                           "mass_ratio": 1e3}}),
    ("born-oppenheimer", {"run": {"h": 0.01, "horizon": 0.1, "n_samples": 2}}),
])
def test_every_dynamics_runs(dynamics, extra):
    base = {"dynamics": dynamics, "run": {"h": 0.05, "horizon": 0.5, "n_samples": 3}}
    for k, v in extra.items():
        base[k] = {**base.get(k, {}), **v}
    res = run_ensemble(validate_config(base))
    assert res.n_samples == base["run"]["n_samples"]
    assert np.all(np.isfinite(res.observables["g"].mean))


def test_pure_state_and_zero_samplers():
    for kind in ("pure-state", "zero"):
        cfg = validate_config({"dynamics": "ehrenfest", "sampler": {"kind": kind},
                               "run": {"h": 1e-3, "horizon": 0.02, "n_samples": 2,
                                       "mass_ratio": 1e3, "temperature": 0.01}})
        assert run_ensemble(cfg).n_samples == 2


# -- weak error and slopes -------------------------------------------------------

def test_weak_error_identical_samples():
    x = np.random.default_rng(0).normal(size=320)
    est = weak_error(x, x)
    assert est.signed == 0.0 and est.ci_halfwidth == 0.0 and not est.inconclusive


def test_weak_error_shift_is_recovered():
    rng = np.random.default_rng(1)
    x = rng.normal(size=6400)
    est = weak_error(x + 0.5, x + 0.01 * rng.normal(size=6400))
    assert est.error == pytest.approx(0.5, abs=5 * est.stderr)
    with pytest.raises(ContractViolation):
        weak_error(np.ones(3), np.ones(3))


def test_weak_error_configs_requires_matching_initial_data():
    with pytest.raises(ConfigError):
        weak_error_configs(small_config(X0=[0.0]), small_config(X0=[1.0]), "g")
    with pytest.raises(ConfigError):
        weak_error_configs(small_config(), small_config(horizon=2.0), "g")
    est = weak_error_configs(small_config(n_samples=64), small_config(n_samples=64), "g")
    assert est.signed == 0.0


def test_sample_values_order():
    v = sample_values(small_config(n_samples=6), "kt")
    assert v.shape == (6,)


def test_slope_fit_recovers_exact_power_laws():
    M = np.array([1e2, 1e3, 1e4, 1e5])
    assert fit_loglog_slope(M, 3.0 / M).slope == pytest.approx(-1.0, abs=1e-12)
    assert fit_loglog_slope(M, np.full(4, 0.2)).slope == pytest.approx(0.0, abs=1e-12)
    fit = fit_loglog_slope(M, M**-0.5, 0.01 * M**-0.5)
    assert fit.slope == pytest.approx(-0.5, abs=1e-10)
    assert fit.slope_stderr > 0 and fit.bound_ok(-0.5)
    with pytest.raises(ContractViolation):
        fit_loglog_slope(M, [1.0, 0.0, 1.0, 1.0])


def _fake(errors, se):
    table = dict(errors)
    return lambda M: WeakErrorEstimate(table[M], se, 2 * se, 1000, 32)


def test_convergence_sweep_statuses():
    Ms = [1e2, 1e3, 1e4]
    good = convergence_sweep(Ms, _fake({m: 1.0 / m for m in Ms}, 1e-7))
    assert good.status == "pass" and good.monotone
    flat = convergence_sweep(Ms, _fake({m: 0.1 for m in Ms}, 1e-4))
    assert flat.status == "fail"
    noisy = convergence_sweep(Ms, _fake({m: 1.0 / m for m in Ms}, 1e-3))
    assert noisy.status == "inconclusive"
    with pytest.raises(ContractViolation):
        convergence_sweep(Ms[:2], _fake({m: 1.0 for m in Ms}, 1e-3))


def test_coupled_bath_shares_noise_and_is_reproducible():
    exp = CoupledBathLangevin(horizon=0.5)
    a1, b1 = exp.run(100.0, 64, seed=3)
    a2, b2 = exp.run(100.0, 64, seed=3)
    np.testing.assert_array_equal(a1, a2)
    np.testing.assert_array_equal(b1, b2)
    # the two dynamics are driven by one Brownian path, so they are strongly correlated
    assert np.corrcoef(a1, b1)[0, 1] > 0.9


def test_coupled_bath_initial_law_is_gibbs():
    exp = CoupledBathLangevin(horizon=0.5)
    bath = exp.bath(100.0)
    P, h = exp.period_factor * exp.horizon, exp.h
    N = int(round(P / h))
    t = (np.arange(N) + 0.5) * h
    C = np.cos(np.outer(t, bath.eigenvalues))
    gram = C.T @ C * h / (P / 2.0)
    np.testing.assert_allclose(gram, np.eye(bath.J), atol=1e-10)


# -- checks -------------------------------------------------------------------

def test_fdt_check_under_both_conventions():
    bath = build_debye_bath(200, 5.0, 1.0)
    lags = [0.0, 0.5, 1.0]
    cov = fdt_check(bath, 0.5, lags, 4000, seed=1)
    assert cov.passed and cov.summary["factor"] == 2.0
    dens = fdt_check(bath, 0.5, lags, 4000, seed=1, convention="density")
    assert dens.passed and dens.summary["factor"] == 1.0
    np.testing.assert_allclose(np.array(cov.summary["empirical"]),
                               2.0 * np.array(dens.summary["empirical"]), rtol=1e-12)


def test_long_time_average():
    t = np.linspace(0, 10, 101)
    rep = long_time_average(np.ones_like(t), 1.0 + 0 * t, t, [5.0, 10.0])
    assert rep.status == "pass" and rep.summary["rows"][-1]["gap"] == 0.0
    drift = long_time_average(t, t, t, [10.0])
    assert drift.status == "inconclusive"


def test_pure_state_contrast_small():
    rep = pure_state_contrast(default_model(), [-1.0], 0.02, n_draws=500, seed=1)
    assert rep.passed
    assert rep.summary["pure_mean"] < 1e-20 < rep.summary["gibbs_mean"]


def test_adiabatic_sweep_small():
    rep = adiabatic_sweep(default_model(), [1e3, 1e4], [-1.0], [1.0], 2e-4, 0.3, stride=10)
    assert rep.passed
