"""Ensembles, weak errors, convergence fits and consistency checks."""

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import __version__
from .bath import (HeavyModel, build_debye_bath, build_flat_bath, memory_kernel_spectral,
                   scaled_bath)
from .config import ExperimentConfig, validate_config
from .ehrenfest import (EhrenfestState,
                        adiabatic_overlap, default_model, fluctuation_term, ground_state,
                        integrate_born_oppenheimer, integrate_ehrenfest, model_from_dict)
from .errors import (ConfigError, ContractViolation, GapViolationError,
                     InternalConsistencyError, QuadratureResolutionError, StepSizeError)
from .langevin import (FrictionModel, GroundStateSurface, LangevinIntegrator, LangevinState,
                       batch_means, integrate_langevin, invariant_measure_check)
from .rng import stream_rng
from .sampling import (GibbsSpec, sample_ehrenfest_modes, sample_pure_states,
                       sample_zwanzig_bath)
from .zwanzig import FullState, ZwanzigIntegrator, integrate, noise_process

NUMERICAL_ABORTS = (StepSizeError, GapViolationError, InternalConsistencyError,
                    QuadratureResolutionError)
OBSERVABLE_KINDS = ("diffusion", "kinetic_temperature", "potential", "polynomial")


# ---------------------------------------------------------------------------
# observables


@dataclass(frozen=True)
class ObservableSpec:
    """Scalar observable of the heavy trajectory.

    ``diffusion`` is ``|X(t) - X(0)|^2 / (2 dof t)``; ``kinetic_temperature``
    is ``|p|^2 / dof``; ``potential`` is ``V(X)``; ``polynomial`` is
    ``mean_k P(X_k)`` with ``P`` given by ``coefficients`` (constant term first).
    """

    name: str
    kind: str
    horizon: float = None
    coefficients: tuple = ()

    def __post_init__(self):
        if self.kind not in OBSERVABLE_KINDS:
            raise ContractViolation(f"observable kind must be one of {OBSERVABLE_KINDS}")

    def evaluate(self, times, X, p, potential=None):
        """Series over the leading time axis of ``X`` and ``p``."""
        times = np.asarray(times, dtype=float)
        X, p = np.asarray(X, dtype=float), np.asarray(p, dtype=float)
        dof = X.shape[-1]
        if self.kind == "diffusion":
            el = times - times[0]
            el = el.reshape(el.shape + (1,) * (X.ndim - 2))
            sq = np.sum((X - X[0]) ** 2, axis=-1)
            with np.errstate(invalid="ignore", divide="ignore"):
                return np.where(el > 0, sq / (2.0 * dof * el), 0.0)
        if self.kind == "kinetic_temperature":
            return np.sum(p**2, axis=-1) / dof
        if self.kind == "potential":
            if potential is None:
                raise ContractViolation("potential observable needs a potential")
            return np.asarray(potential.potential(X))
        c = np.asarray(self.coefficients, dtype=float)
        return np.polynomial.polynomial.polyval(X, c).mean(axis=-1)


def observables_from_config(cfg):
    return [ObservableSpec(o.name, o.kind, cfg.run.horizon, tuple(o.coefficients))
            for o in cfg.observables]


# ---------------------------------------------------------------------------
# ensemble statistics


@dataclass
class ObservableStats:
    times: np.ndarray
    count: int
    mean: np.ndarray
    m2: np.ndarray

    @classmethod
    def from_samples(cls, times, values):
        values = np.asarray(values, dtype=float)
        n = values.shape[0]
        mean = values.mean(axis=0) if n else np.zeros(len(times))
        m2 = np.sum((values - mean) ** 2, axis=0) if n else np.zeros(len(times))
        return cls(np.asarray(times, dtype=float), n, mean, m2)

    @property
    def variance(self):
        return self.m2 / (self.count - 1) if self.count > 1 else np.zeros_like(self.mean)

    @property
    def stderr(self):
        return np.sqrt(self.variance / self.count) if self.count else np.zeros_like(self.mean)

    def merge(self, other):
        if not np.array_equal(self.times, other.times):
            raise ContractViolation("cannot merge series on different time grids")
        n = self.count + other.count
        if n == 0:
            return self
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta**2 * self.count * other.count / n
        return ObservableStats(self.times, n, mean, m2)

    def to_dict(self):
        return {"times": self.times.tolist(), "count": self.count, "mean": self.mean.tolist(),
                "m2": self.m2.tolist(), "variance": self.variance.tolist(),
                "stderr": self.stderr.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["times"]), int(d["count"]), np.array(d["mean"]), np.array(d["m2"]))


@dataclass
class EnsembleResult:
    """Per-observable, per-time statistics with reproducibility metadata."""

    observables: dict
    config_hash: str = ""
    seeds: dict = field(default_factory=dict)
    aborted: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def n_samples(self):
        return next(iter(self.observables.values())).count if self.observables else 0

    @property
    def partial(self):
        total = self.n_samples + len(self.aborted)
        return total > 0 and len(self.aborted) > 0.01 * total

    def final(self, name):
        s = self.observables[name]
        return float(s.mean[-1]), float(s.stderr[-1])

    def merge(self, other):
        names = set(self.observables) | set(other.observables)
        if set(self.observables) != set(other.observables):
            raise ContractViolation(f"observable sets differ: {sorted(names)}")
        obs = {k: self.observables[k].merge(other.observables[k]) for k in sorted(names)}
        seeds = {"parts": [self.seeds, other.seeds]}
        return EnsembleResult(obs, self.config_hash if self.config_hash == other.config_hash
                              else "mixed", seeds, self.aborted + other.aborted, dict(self.meta))

    def to_dict(self):
        return {"config_hash": self.config_hash, "seeds": self.seeds,
                "n_samples": self.n_samples, "partial": self.partial,
                "aborted": self.aborted, "meta": self.meta,
                "observables": {k: v.to_dict() for k, v in self.observables.items()}}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls({k: ObservableStats.from_dict(v) for k, v in d["observables"].items()},
                   d["config_hash"], d["seeds"], d["aborted"], d["meta"])

    def to_csv(self):
        lines = ["observable,time,count,mean,variance,stderr"]
        for name, s in self.observables.items():
            var, se = s.variance, s.stderr
            for i, t in enumerate(s.times):
                vals = (float(t), float(s.mean[i]), float(var[i]), float(se[i]))
                lines.append(f"{name},{vals[0]!r},{s.count},{vals[1]!r},{vals[2]!r},{vals[3]!r}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# building models from a config


def heavy_from_config(cfg):
    h = cfg.model.heavy
    if h.kind == "quadratic":
        return HeavyModel.harmonic(h.omega, h.dof)
    return HeavyModel(h.kind, h.dof)


def bath_from_config(cfg, mass_ratio=None):
    b = cfg.model.bath
    dof = cfg.model.heavy.dof
    M = cfg.run.mass_ratio if mass_ratio is None else mass_ratio
    u = np.zeros(dof)
    u[0] = 1.0
    if b.construction == "scaled":
        J = b.J
        if J == 0:
            period = 8.0 * cfg.run.horizon
            J = max(1, int(round(np.sqrt(M) * b.reduced_cutoff * period / (2 * np.pi))))
        return scaled_bath(M, b.friction * np.outer(u, u), b.reduced_cutoff, J)
    kappa = b.kappa * np.outer(u, u)
    if b.construction == "flat":
        return build_flat_bath(b.J, b.cutoff, kappa, b.m)
    rng = stream_rng(cfg.seed, 2**63) if b.placement == "iid" else None
    return build_debye_bath(b.J, b.cutoff, kappa, b.m, b.placement, rng)


def matrix_from_config(cfg, mass_ratio=None):
    mm = cfg.model.matrix
    M = cfg.run.mass_ratio if mass_ratio is None else mass_ratio
    if mm.family == "default":
        return default_model(M, cfg.model.heavy.dof, mm.levels, mm.epsilon)
    params = dict(mm.parameters)
    params.setdefault("family", mm.family)
    params["mass_ratio"] = M
    return model_from_dict(params)


def friction_from_config(cfg, mass_ratio=None):
    f = cfg.model.friction
    T = cfg.run.temperature
    M = cfg.run.mass_ratio if mass_ratio is None else mass_ratio
    if f.kind == "constant":
        return FrictionModel.constant(f.K * np.eye(cfg.model.heavy.dof), T, M, f.diffusion_factor)
    if f.kind == "debye":
        b = cfg.model.bath
        u = np.zeros(cfg.model.heavy.dof)
        u[0] = 1.0
        return FrictionModel.debye(b.kappa * np.outer(u, u), b.m, b.cutoff, T, M,
                                   f.diffusion_factor)
    return FrictionModel.from_ehrenfest(matrix_from_config(cfg, M), T, f.bandwidth,
                                        f.diffusion_factor)


def _initial(cfg):
    dof = cfg.model.heavy.dof
    X0 = np.resize(np.asarray(cfg.run.X0, dtype=float), dof)
    p0 = np.resize(np.asarray(cfg.run.p0, dtype=float), dof)
    return X0, p0


def _steps(cfg):
    n = int(round(cfg.run.horizon / cfg.run.h))
    if n < 1:
        raise ConfigError("run.horizon must cover at least one step")
    stride = cfg.run.stride if cfg.run.stride > 0 else n
    return n, stride


def simulate_sample(cfg, index, mass_ratio=None):
    """Run trajectory ``index`` of the ensemble; returns ``(times, X, p, potential)``."""
    M = cfg.run.mass_ratio if mass_ratio is None else mass_ratio
    rng = stream_rng(cfg.seed, index)
    n, stride = _steps(cfg)
    X0, p0 = _initial(cfg)
    T = cfg.run.temperature * cfg.sampler.temperature_factor
    smp = cfg.sampler
    if cfg.dynamics == "zwanzig":
        bath = bath_from_config(cfg, M)
        heavy = heavy_from_config(cfg)
        if smp.kind == "gibbs":
            spec = GibbsSpec(T, convention=smp.convention)
            g0 = sample_zwanzig_bath(bath, spec, rng).amplitudes
        else:
            g0 = np.zeros(bath.J, dtype=complex)
        rec, _ = integrate(FullState(0.0, X0, p0, g0), cfg.run.h, n, bath, heavy, stride)
        return rec.times, rec.X, rec.p, heavy
    if cfg.dynamics == "langevin":
        fr = friction_from_config(cfg, M)
        pot = (GroundStateSurface(matrix_from_config(cfg, M)) if fr.kind == "ehrenfest"
               else heavy_from_config(cfg))
        rec = integrate_langevin(LangevinState(0.0, X0, p0), cfg.run.h, n, fr, pot, rng, stride)
        return rec.times, rec.X, rec.p, pot
    model = matrix_from_config(cfg, M)
    surface = GroundStateSurface(model)
    if cfg.dynamics == "born-oppenheimer":
        rec = integrate_born_oppenheimer(X0, p0, cfg.run.h, n, model, stride)
        return rec.times, rec.X, rec.p, surface
    lam, vec = model.eigensystem(X0)
    if smp.kind == "gibbs":
        spec = GibbsSpec(T, smp.normalization, convention=smp.convention)
        amp = sample_ehrenfest_modes(lam[1:] - lam[0], spec, rng,
                                     random_phase=smp.random_phase).amplitudes
    elif smp.kind == "pure-state":
        amp = sample_pure_states(lam - lam[0], T, rng)[0].amplitudes
    else:
        amp = np.zeros(lam.size, dtype=complex)
        amp[0] = 1.0
    psi = vec @ amp
    rec, _, _ = integrate_ehrenfest(EhrenfestState(0.0, X0, p0, psi), cfg.run.h, n, model,
                                    stride, keep_wave=False)
    return rec.times, rec.X, rec.p, surface


def _build_models(cfg, mass_ratio=None):
    """Construct the configured models once so invalid ones fail before any sampling."""
    heavy_from_config(cfg)
    if cfg.dynamics == "zwanzig":
        bath_from_config(cfg, mass_ratio)
    elif cfg.dynamics == "langevin":
        friction_from_config(cfg, mass_ratio)
    else:
        matrix_from_config(cfg, mass_ratio)


def _run_chunk(args):
    cfg_json, indices, mass_ratio = args
    cfg = validate_config(json.loads(cfg_json))
    specs = observables_from_config(cfg)
    out = []
    for i in indices:
        try:
            times, X, p, pot = simulate_sample(cfg, i, mass_ratio)
            out.append((i, times, {s.name: s.evaluate(times, X, p, pot) for s in specs}, None))
        except NUMERICAL_ABORTS as exc:
            out.append((i, None, None, f"{type(exc).__name__}: {exc}"))
    return out


def run_ensemble(config, workers=1, mass_ratio=None, chunk=None):
    """Run ``config.run.n_samples`` trajectories on per-sample RNG streams.

    Sample ``i`` always uses stream ``i`` of the master seed, and statistics
    are accumulated in sample order, so the result does not depend on
    ``workers``.
    """
    cfg = config if isinstance(config, ExperimentConfig) else validate_config(config)
    _build_models(cfg, mass_ratio)
    n = cfg.run.n_samples
    chunk = chunk or max(1, math.ceil(n / (4 * workers)))
    parts = [list(range(a, min(n, a + chunk))) for a in range(0, n, chunk)]
    payload = [(cfg.canonical_json(), idx, mass_ratio) for idx in parts]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = [r for part in ex.map(_run_chunk, payload) for r in part]
    else:
        results = [r for part in map(_run_chunk, payload) for r in part]
    results.sort(key=lambda r: r[0])
    good = [r for r in results if r[3] is None]
    aborted = [{"sample": r[0], "error": r[3]} for r in results if r[3] is not None]
    obs = {}
    names = [o.name for o in cfg.observables]
    times = good[0][1] if good else np.zeros(0)
    for name in names:
        vals = np.array([r[2][name] for r in good]) if good else np.zeros((0, times.size))
        obs[name] = ObservableStats.from_samples(times, vals)
    seeds = {"master_seed": cfg.seed, "streams": [0, n]}
    meta = {"dynamics": cfg.dynamics, "version": __version__,
            "mass_ratio": cfg.run.mass_ratio if mass_ratio is None else mass_ratio}
    return EnsembleResult(obs, cfg.digest(), seeds, aborted, meta)


def sample_values(config, name, mass_ratio=None, workers=1):
    """Per-sample final-time values of one observable, in sample order."""
    cfg = config if isinstance(config, ExperimentConfig) else validate_config(config)
    payload = (cfg.canonical_json(), list(range(cfg.run.n_samples)), mass_ratio)
    rows = _run_chunk(payload)
    return np.array([r[2][name][-1] for r in rows if r[3] is None])


# ---------------------------------------------------------------------------
# weak error


@dataclass(frozen=True)
class WeakErrorEstimate:
    signed: float
    stderr: float
    ci_halfwidth: float
    n_samples: int
    n_batches: int

    @property
    def error(self):
        return abs(self.signed)

    @property
    def inconclusive(self):
        return self.ci_halfwidth > self.error

    def to_dict(self):
        return {"error": self.error, "signed": self.signed, "stderr": self.stderr,
                "ci_halfwidth": self.ci_halfwidth, "n_samples": self.n_samples,
                "inconclusive": self.inconclusive}


def weak_error(values_a, values_b, n_batches=32, confidence=0.95):
    """``|mean(a) - mean(b)|`` with a batch-means confidence interval.

    Samples are split into ``n_batches`` contiguous batches; paired samples
    (common random numbers) keep their pairing inside each batch.
    """
    a = np.asarray(values_a, dtype=float)
    b = np.asarray(values_b, dtype=float)
    n = min(a.size, b.size)
    if n < n_batches:
        raise ContractViolation("need at least one sample per batch")
    size = n // n_batches
    da = a[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    db = b[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    d = da - db
    se = float(d.std(ddof=1) / np.sqrt(n_batches))
    q = float(stats.t.ppf(0.5 + confidence / 2.0, n_batches - 1))
    return WeakErrorEstimate(float(d.mean()), se, q * se, size * n_batches, n_batches)


def weak_error_configs(config_a, config_b, observable, n_batches=32, workers=1):
    """Weak error between two configured ensembles sharing heavy initial data."""
    if tuple(config_a.run.X0) != tuple(config_b.run.X0) or \
            tuple(config_a.run.p0) != tuple(config_b.run.p0):
        raise ConfigError("both ensembles must start from the same heavy initial data")
    if config_a.run.horizon != config_b.run.horizon:
        raise ConfigError("both ensembles must use the same horizon")
    a = sample_values(config_a, observable, workers=workers)
    b = sample_values(config_b, observable, workers=workers)
    return weak_error(a, b, n_batches)


@dataclass(frozen=True)
class CoupledBathLangevin:
    """Zwanzig bath and Langevin noise driven by one Brownian path.

    The Brownian increments on a grid of spacing ``h`` over a period ``P`` are
    projected on the cosines and sines of the flat-bath frequencies
    ``(j - 1/2) 2 pi / P``. Those projections are exactly independent standard
    normals, so the bath starts from its Gibbs law (density convention), while
    the Langevin path uses the same increments directly.
    """

    friction: float = 4.0
    reduced_cutoff: float = 2.0
    temperature: float = 0.1
    h: float = 0.01
    horizon: float = 2.0
    period_factor: float = 8.0
    X0: tuple = (-1.0,)
    p0: tuple = (1.0,)
    heavy: HeavyModel = HeavyModel("double_well", 1)

    def bath(self, M):
        P = self.period_factor * self.horizon
        spacing = 2.0 * np.pi / P
        J = max(1, int(round(np.sqrt(M) * self.reduced_cutoff / spacing)))
        sM = np.sqrt(M)
        m = 2.0 / sM
        cutoff = J * spacing
        u = np.zeros(self.heavy.dof)
        u[0] = 1.0
        kappa = 2.0 * cutoff**3 * (self.friction / sM) / (np.pi * m) * np.outer(u, u)
        return build_flat_bath(J, cutoff, kappa, m)

    def run(self, M, n_samples, seed=0, chunk=1000, observable=None):
        """Per-sample observable values ``(zwanzig, langevin)``."""
        obs = observable or ObservableSpec("g", "diffusion", self.horizon)
        bath = self.bath(M)
        P = self.period_factor * self.horizon
        N = int(round(P / self.h))
        if 2 * bath.J - 1 >= N:
            raise ContractViolation("time grid too coarse for the bath bandwidth")
        t = (np.arange(N) + 0.5) * self.h
        phase = np.outer(t, bath.eigenvalues)
        C, S = np.cos(phase), np.sin(phase)
        norm = np.sqrt(P / 2.0)
        sd = np.sqrt(self.temperature / (bath.mass * bath.eigenvalues))
        zi = ZwanzigIntegrator(bath, self.heavy, self.h)
        fr = FrictionModel.constant(self.friction * np.eye(self.heavy.dof), self.temperature, M)
        li = LangevinIntegrator(fr, self.heavy, self.h)
        n_steps = int(round(self.horizon / self.h))
        dof = self.heavy.dof
        gz, gl = [], []
        for c, start in enumerate(range(0, n_samples, chunk)):
            size = min(chunk, n_samples - start)
            rng = stream_rng(seed, c)
            dW = rng.standard_normal((size, dof, N)) * np.sqrt(self.h)
            # bath couples to the first heavy direction; other directions get
            # their own Langevin noise but no bath (kappa is rank one)
            w = dW[:, 0, :]
            g = sd * ((w @ C) + 1j * (w @ S)) / norm
            X = np.tile(np.asarray(self.X0, dtype=float), (size, 1))
            p = np.tile(np.asarray(self.p0, dtype=float), (size, 1))
            Xl, pl = X.copy(), p.copy()
            for k in range(n_steps):
                X, p, g = zi.advance(X, p, g)
                Xl, pl = li.advance(Xl, pl, dW[:, :, k] / np.sqrt(self.h))
            times = np.array([0.0, self.horizon])
            X0 = np.tile(np.asarray(self.X0, dtype=float), (size, 1))
            gz.append(obs.evaluate(times, np.stack([X0, X]), np.stack([p, p]), self.heavy)[-1])
            gl.append(obs.evaluate(times, np.stack([X0, Xl]), np.stack([pl, pl]), self.heavy)[-1])
        return np.concatenate(gz), np.concatenate(gl)

    def weak_error(self, M, n_samples, seed=0, n_batches=32):
        a, b = self.run(M, n_samples, seed)
        return weak_error(a, b, n_batches)


# ---------------------------------------------------------------------------
# convergence in M


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    slope_stderr: float
    intercept: float

    def bound_ok(self, target=-0.5, k=1.0):
        return self.slope <= target + k * self.slope_stderr


def fit_loglog_slope(M, errors, stderr=None):
    """Weighted least-squares slope of ``log(error)`` against ``log(M)``.

    Weights use the delta-method variance ``(stderr / error)^2``; without
    ``stderr`` the fit is unweighted and the uncertainty comes from residuals.
    """
    x = np.log(np.asarray(M, dtype=float))
    e = np.asarray(errors, dtype=float)
    if x.size < 2:
        raise ContractViolation("need at least two points")
    if np.any(e <= 0):
        raise ContractViolation("errors must be positive for a log-log fit")
    y = np.log(e)
    A = np.column_stack([np.ones_like(x), x])
    if stderr is None:
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        dof = x.size - 2
        resid = y - A @ coef
        s2 = float(resid @ resid / dof) if dof > 0 else 0.0
        cov = s2 * np.linalg.inv(A.T @ A)
    else:
        sig = np.maximum(np.asarray(stderr, dtype=float) / e, 1e-12)
        W = 1.0 / sig**2
        cov = np.linalg.inv(A.T @ (A * W[:, None]))
        coef = cov @ (A.T @ (W * y))
    return SlopeFit(float(coef[1]), float(np.sqrt(cov[1, 1])), float(coef[0]))


@dataclass
class SweepReport:
    mass_ratios: list
    estimates: list
    fit: SlopeFit
    monotone: bool
    status: str

    def rows(self):
        return [{"M": M, **e.to_dict()} for M, e in zip(self.mass_ratios, self.estimates)]

    def to_dict(self):
        return {"rows": self.rows(), "slope": self.fit.slope, "slope_stderr": self.fit.slope_stderr,
                "monotone": self.monotone, "status": self.status}


def convergence_sweep(mass_ratios, estimator, target=-0.5):
    """Weak error at each ``M`` (via ``estimator(M) -> WeakErrorEstimate``) and a slope fit.

    Status is ``pass`` when errors strictly decrease and the slope is at most
    ``target`` plus one fit standard error, ``fail`` otherwise, and
    ``inconclusive`` if any confidence interval is wider than its estimate.
    """
    Ms = sorted(float(m) for m in mass_ratios)
    if len(Ms) < 3:
        raise ContractViolation("a sweep needs at least three mass ratios")
    est = [estimator(M) for M in Ms]
    errs = [max(e.error, 1e-300) for e in est]
    fit = fit_loglog_slope(Ms, errs, [max(e.stderr, 1e-300) for e in est])
    monotone = all(a > b for a, b in zip(errs, errs[1:]))
    if any(e.inconclusive for e in est):
        status = "inconclusive"
    else:
        status = "pass" if (monotone and fit.bound_ok(target)) else "fail"
    return SweepReport(Ms, est, fit, monotone, status)


# ---------------------------------------------------------------------------
# checks


@dataclass
class CheckReport:
    status: str
    summary: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.status == "pass"

    def to_dict(self):
        return {"status": self.status, **self.summary}


def fdt_check(bath, temperature, lags, n_draws=10**4, seed=0, convention="covariance",
              z=5.0, chunk=2000):
    """Compare the empirical noise covariance with ``2T`` times the memory kernel.

    Draws the bath ``n_draws`` times at frozen heavy coordinates and compares
    ``E[zeta(0) zeta(t)^T]`` with the kernel at each lag, componentwise, in
    units of the Monte Carlo standard error. Under the density convention
    the expected factor is ``T`` instead of ``2T``.
    """
    lags = np.asarray(lags, dtype=float)
    spec = GibbsSpec(temperature, seed=seed, convention=convention)
    dof = bath.dof
    s1 = np.zeros((lags.size, dof, dof))
    s2 = np.zeros_like(s1)
    done = 0
    c = 0
    while done < n_draws:
        size = min(chunk, n_draws - done)
        g = sample_zwanzig_bath(bath, spec, stream_rng(seed, c), size=size).amplitudes
        zeta = noise_process(g, bath, np.concatenate([[0.0], lags]))     # (size, L+1, dof)
        prod = zeta[:, :1, :, None] * zeta[:, 1:, None, :]
        s1 += prod.sum(axis=0)
        s2 += (prod**2).sum(axis=0)
        done += size
        c += 1
    mean = s1 / n_draws
    se = np.sqrt(np.maximum(s2 / n_draws - mean**2, 0.0) / (n_draws - 1))
    factor = 2.0 * spec.variance_factor
    target = factor * temperature * memory_kernel_spectral(bath, lags)
    with np.errstate(invalid="ignore", divide="ignore"):
        zscore = np.where(se > 0, np.abs(mean - target) / se,
                          np.where(np.abs(mean - target) > 0, np.inf, 0.0))
    ok = bool(np.all(zscore <= z))
    return CheckReport("pass" if ok else "fail", {
        "lags": lags.tolist(), "empirical": mean[:, 0, 0].tolist(),
        "target": target[:, 0, 0].tolist(), "stderr": se[:, 0, 0].tolist(),
        "max_z": float(np.max(zscore)), "z_threshold": z, "n_draws": n_draws,
        "factor": factor})


def gibbs_consistency_test(bath, heavy, temperature, X0, p0, h, horizon, n_samples=4000,
                           seed=0, temperature_factor=1.0, convention="density", z=3.0,
                           chunk=500):
    """Heavy-particle law after long Hamiltonian evolution over Gibbs bath draws.

    Each sample draws the bath at ``temperature_factor * T``, integrates to
    ``horizon`` and keeps the final heavy state. The final states are
    compared with the heavy Gibbs marginal at ``T`` (moments and KS).
    """
    T_bath = temperature * temperature_factor
    spec = GibbsSpec(T_bath, seed=seed, convention=convention)
    integ = ZwanzigIntegrator(bath, heavy, h)
    n_steps = int(round(horizon / h))
    Xs, ps = [], []
    for c, start in enumerate(range(0, n_samples, chunk)):
        size = min(chunk, n_samples - start)
        g = sample_zwanzig_bath(bath, spec, stream_rng(seed, c), size=size).amplitudes
        X = np.tile(np.asarray(X0, dtype=float), (size, 1))
        p = np.tile(np.asarray(p0, dtype=float), (size, 1))
        for _ in range(n_steps):
            X, p, g = integ.advance(X, p, g)
        Xs.append(X)
        ps.append(p)
    X, p = np.concatenate(Xs), np.concatenate(ps)
    rep = invariant_measure_check(X, p, heavy, temperature, z=z, min_samples=min(2048, n_samples))
    m2x, sx = batch_means(X[:, 0] ** 2)
    m2p, sp = batch_means(p[:, 0] ** 2)
    exact_x = rep.moments.get("X0", {}).get("m2", {}).get("exact")
    return CheckReport(rep.status, {
        "X2": float(m2x), "X2_stderr": float(sx), "X2_exact": exact_x,
        "p2": float(m2p), "p2_stderr": float(sp), "p2_exact": temperature,
        "temperature_factor": temperature_factor, "n_samples": n_samples,
        "horizon": horizon, "moments": rep.moments, "ks": rep.ks})


def long_time_average(series_a, series_b, times, horizons, settle_tol=0.05):
    """Compare running time averages ``(1/t) int_0^t E[g]`` of two mean series.

    ``series_a`` and ``series_b`` are ensemble means sampled at ``times``.
    Reports the gap at each horizon and flags non-mixing when the running
    average of either series still moves by more than ``settle_tol``
    (relative) over the last half of the longest horizon.
    """
    times = np.asarray(times, dtype=float)
    out = []
    status = "pass"
    for H in horizons:
        sel = times <= H + 1e-12
        t = times[sel]
        if t.size < 3:
            raise ContractViolation("too few samples inside the horizon")
        avg = []
        for s in (series_a, series_b):
            s = np.asarray(s, dtype=float)[sel]
            run = np.concatenate([[s[0]], np.cumsum(0.5 * (s[1:] + s[:-1]) * np.diff(t))
                                  / (t[1:] - t[0])])
            avg.append(run)
        out.append({"horizon": float(H), "a": float(avg[0][-1]), "b": float(avg[1][-1]),
                    "gap": float(abs(avg[0][-1] - avg[1][-1]))})
        half = t >= t[0] + 0.5 * (t[-1] - t[0])
        for run in avg:
            ref = max(abs(run[-1]), 1e-12)
            if np.ptp(run[half]) / ref > settle_tol and H == max(horizons):
                status = "inconclusive"
    return CheckReport(status, {"rows": out})


def pure_state_contrast(model, X, temperature, n_draws=10**4, seed=0, normalization=1.0,
                        convention="density", z=5.0):
    """Squared coupling fluctuation under Gibbs and pure-state initial waves.

    The statistic is ``(Re<psi~, H~ g0 dPsi_0>)^2`` summed over heavy
    directions. Pure eigenstates make it vanish identically; the Gibbs
    superposition does not.
    """
    gs = ground_state(model, X)
    lt = gs.levels - gs.energy
    rng_g = stream_rng(seed, 0)
    rng_p = stream_rng(seed, 1)
    spec = GibbsSpec(temperature, normalization, convention=convention)
    amp_g = sample_ehrenfest_modes(lt[1:], spec, rng_g, size=n_draws).amplitudes
    amp_p = sample_pure_states(lt, temperature, rng_p, size=n_draws)[0].amplitudes

    def stat(amps):
        psis = amps @ gs.basis.T
        return np.array([np.sum(fluctuation_term(model, X, psi, gs) ** 2) for psi in psis])

    vg, vp = stat(amp_g), stat(amp_p)
    mg, sg = float(vg.mean()), float(vg.std(ddof=1) / np.sqrt(n_draws))
    mp, sp = float(vp.mean()), float(vp.std(ddof=1) / np.sqrt(n_draws))
    # pure-state values are zero up to round-off in the ground-state overlap
    floor = 1e-12 * max(mg, np.finfo(float).tiny)
    pure_zero = abs(mp) <= 3.0 * sp + floor
    gibbs_nonzero = mg > z * sg
    return CheckReport("pass" if (pure_zero and gibbs_nonzero) else "fail", {
        "gibbs_mean": mg, "gibbs_stderr": sg, "pure_mean": mp, "pure_stderr": sp,
        "n_draws": n_draws})


def adiabatic_sweep(model, mass_ratios, X0, p0, h, horizon, stride=10):
    """Maximum orthogonal remainder of the tracked ground state for each ``M``.

    The wave starts in the ground state at ``X0``; ``status`` is ``pass``
    when the maximum remainder strictly decreases with ``M``.
    """
    rows = []
    for M in sorted(mass_ratios):
        mm = model.with_mass_ratio(M)
        gs = ground_state(mm, X0)
        st = EhrenfestState(0.0, np.asarray(X0, float), np.asarray(p0, float),
                            gs.vector.astype(complex))
        rec, _, _ = integrate_ehrenfest(st, h, int(round(horizon / h)), mm, stride)
        rows.append({"M": float(M), "max_remainder": float(adiabatic_overlap(mm, rec).max())})
    vals = [r["max_remainder"] for r in rows]
    ok = all(a > b for a, b in zip(vals, vals[1:]))
    return CheckReport("pass" if ok else "fail", {"rows": rows})
