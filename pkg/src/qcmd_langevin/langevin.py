"""Ito Langevin dynamics with position-dependent friction.

    dX = p dtau
    dp = (-grad V(X) - K'(X) p) dtau + sqrt(2 T) K'(X)^{1/2} dW,    K' = K / sqrt(M)

Integrated by a kick / drift / exact Ornstein-Uhlenbeck / drift / kick
splitting with ``K`` frozen at the mid-drift position. The OU substep is
exact, so for ``grad V = 0`` and constant ``K`` the momentum law is exact and
with ``K = 0`` the step is velocity Verlet.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats
from scipy.linalg import expm

from .bath import HeavyModel, friction_limit_debye
from .errors import ContractViolation, NotPSDError, StepSizeError, UnsupportedModelError

FRICTION_KINDS = ("constant", "debye", "ehrenfest")


def matrix_sqrt_psd(K, tol=1e-10):
    """Symmetric square root with small negative eigenvalues clamped to zero.

    Works on stacks of matrices (leading axes).
    """
    K = np.asarray(K, dtype=float)
    sym = 0.5 * (K + np.swapaxes(K, -1, -2))
    w, v = np.linalg.eigh(sym)
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    if np.any(w < -tol * scale):
        raise NotPSDError(f"matrix has eigenvalue {w.min():.3g} below -tol")
    return (v * np.sqrt(np.clip(w, 0.0, None))[..., None, :]) @ np.swapaxes(v, -1, -2)


@dataclass(frozen=True)
class FrictionModel:
    """Friction source with temperature and mass ratio.

    ``matrix(X)`` returns ``K(X)``; the dynamics uses ``K / sqrt(M)``.
    ``diffusion_factor`` scales the noise covariance (1 is the Einstein
    pairing; other values are for negative controls).
    """

    kind: str
    temperature: float
    mass_ratio: float = 1.0
    K: np.ndarray = None
    ehrenfest_model: object = None
    bandwidth: float = None
    diffusion_factor: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FRICTION_KINDS:
            raise ContractViolation(f"friction kind must be one of {FRICTION_KINDS}")
        if not self.temperature >= 0:
            raise ContractViolation("temperature must be nonnegative")
        if not self.mass_ratio > 0:
            raise ContractViolation("mass ratio must be positive")
        if self.kind != "ehrenfest":
            K = np.atleast_2d(np.asarray(self.K, dtype=float))
            if not np.allclose(K, K.T):
                raise NotPSDError("friction matrix must be symmetric")
            w = np.linalg.eigvalsh(K)
            if w.min() < -1e-12 * max(1.0, abs(w).max()):
                raise NotPSDError("friction matrix must be positive semidefinite")
            object.__setattr__(self, "K", K)
        elif self.ehrenfest_model is None:
            raise ContractViolation("ehrenfest friction needs a matrix model")

    @classmethod
    def constant(cls, K, temperature, mass_ratio=1.0, diffusion_factor=1.0):
        return cls("constant", temperature, mass_ratio, K, diffusion_factor=diffusion_factor)

    @classmethod
    def debye(cls, kappa, m, cutoff, temperature, mass_ratio=1.0, diffusion_factor=1.0):
        """Point-mass limit of a Debye bath; ``K = sqrt(M) * pi m kappa / (2 cutoff^3)``."""
        Khat = friction_limit_debye(kappa, m, cutoff)
        return cls("debye", temperature, mass_ratio, np.sqrt(mass_ratio) * Khat,
                   diffusion_factor=diffusion_factor,
                   meta={"kappa": np.atleast_2d(kappa).tolist(), "m": m, "cutoff": cutoff})

    @classmethod
    def from_ehrenfest(cls, model, temperature, bandwidth=None, diffusion_factor=1.0):
        return cls("ehrenfest", temperature, model.mass_ratio, None, model, bandwidth,
                   diffusion_factor)

    @property
    def is_constant(self):
        return self.kind != "ehrenfest"

    def matrix(self, X):
        if self.is_constant:
            return self.K
        from .ehrenfest import friction_matrix
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            return friction_matrix(self.ehrenfest_model, X, self.bandwidth).K
        flat = X.reshape(-1, X.shape[-1])
        out = np.array([friction_matrix(self.ehrenfest_model, x, self.bandwidth).K for x in flat])
        return out.reshape(X.shape + (X.shape[-1],))

    def scaled(self, X):
        return self.matrix(X) / np.sqrt(self.mass_ratio)


class GroundStateSurface:
    """Potential interface ``potential / gradient`` for ``lambda_0`` of a matrix model."""

    def __init__(self, model):
        self.model = model
        self.dof = model.dof

    def _each(self, X, attr):
        from .ehrenfest import ground_state
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            return getattr(ground_state(self.model, X), attr)
        flat = X.reshape(-1, X.shape[-1])
        out = np.array([getattr(ground_state(self.model, x), attr) for x in flat])
        return out.reshape(X.shape[:-1] + np.shape(out[0]))

    def potential(self, X):
        return self._each(X, "energy")

    def gradient(self, X):
        return self._each(X, "energy_gradient")


def as_potential(obj):
    if isinstance(obj, HeavyModel) or isinstance(obj, GroundStateSurface):
        return obj
    if hasattr(obj, "eigensystem"):
        return GroundStateSurface(obj)
    if hasattr(obj, "gradient"):
        return obj
    raise ContractViolation("potential must provide gradient(X)")


@dataclass(frozen=True)
class LangevinState:
    tau: float
    X: np.ndarray
    p: np.ndarray


class LangevinIntegrator:
    """Splitting integrator; supports a batch of paths along leading axes."""

    def __init__(self, friction, potential, h):
        if not h > 0:
            raise StepSizeError("time step must be positive")
        self.friction, self.potential, self.h = friction, as_potential(potential), float(h)
        self._fixed = None
        if friction.is_constant:
            self._fixed = self._ou_factors(friction.scaled(None))

    def _ou_factors(self, Ks):
        w, v = np.linalg.eigh(0.5 * (Ks + np.swapaxes(Ks, -1, -2)))
        if self.h * np.max(np.abs(w)) >= 1.0:
            raise StepSizeError("h * |K / sqrt(M)| must stay below 1")
        w = np.clip(w, 0.0, None)
        decay = np.exp(-self.h * w)
        var = self.friction.diffusion_factor * self.friction.temperature * (1.0 - decay**2)
        vt = np.swapaxes(v, -1, -2)
        E = (v * decay[..., None, :]) @ vt
        S = (v * np.sqrt(var)[..., None, :]) @ vt
        return E, S, bool(np.all(w == 0))

    def advance(self, X, p, xi):
        """One step; ``xi`` are standard normals shaped like ``p``."""
        h = self.h
        p = p - 0.5 * h * self.potential.gradient(X)
        E, S, zero = self._fixed if self._fixed is not None else (None, None, False)
        if zero:
            X = X + h * p
        else:
            X = X + 0.5 * h * p
            if E is None:
                E, S, _ = self._ou_factors(self.friction.scaled(X))
                p = np.einsum("...ij,...j->...i", E, p) + np.einsum("...ij,...j->...i", S, xi)
            else:
                p = p @ E.T + xi @ S.T
            X = X + 0.5 * h * p
        p = p - 0.5 * h * self.potential.gradient(X)
        return X, p

    def step(self, state, rng=None, noise=None):
        xi = self._noise(np.shape(state.p), rng, noise)
        X, p = self.advance(np.asarray(state.X, float), np.asarray(state.p, float), xi)
        return LangevinState(state.tau + self.h, X, p)

    @staticmethod
    def _noise(shape, rng, noise):
        if noise is not None:
            noise = np.asarray(noise, dtype=float)
            if noise.shape != tuple(shape):
                raise ContractViolation("supplied noise must match the momentum shape")
            return noise
        if rng is None:
            raise ContractViolation("either an rng or explicit noise is required")
        return rng.standard_normal(shape)


def langevin_step(state, h, friction, potential, rng=None, noise=None):
    """One step of the Langevin splitting. ``noise`` overrides ``rng`` draws."""
    return LangevinIntegrator(friction, potential, h).step(state, rng, noise)


def integrate_langevin(state0, h, n_steps, friction, potential, rng, stride=1, observers=None):
    """Integrate one path or a batch of paths (leading axes of ``X``)."""
    integ = LangevinIntegrator(friction, potential, h)
    X = np.array(state0.X, dtype=float)
    p = np.array(state0.p, dtype=float)
    observers = observers or {}
    times, Xs, ps, Es = [], [], [], []
    obs = {k: [] for k in observers}
    pot = integ.potential

    def record(n):
        st = LangevinState(state0.tau + n * h, X, p)
        times.append(st.tau)
        Xs.append(X.copy())
        ps.append(p.copy())
        Es.append(0.5 * np.sum(p**2, axis=-1) + pot.potential(X))
        for k, f in observers.items():
            obs[k].append(np.asarray(f(st)))

    from .zwanzig import TrajectoryRecord
    record(0)
    for n in range(1, n_steps + 1):
        X, p = integ.advance(X, p, rng.standard_normal(p.shape))
        if n % stride == 0:
            record(n)
    return TrajectoryRecord(np.array(times), np.array(Xs), np.array(ps), np.array(Es),
                            observables={k: np.array(v) for k, v in obs.items()},
                            meta={"h": h, "stride": stride, "dynamics": "langevin"})


def ou_covariance_exact(K, temperature, mass_ratio, p0_second_moment, tau, sigma,
                        stationary="doubled"):
    """Second moment ``E[p(tau) p(sigma)^T]`` of the free-particle OU momentum.

    ``stationary="doubled"`` gives ``2T e^{-K'|tau-sigma|} + e^{-K'(tau+sigma)}(E|p0|^2 - 2T)``;
    ``stationary="gibbs"`` replaces ``2T`` by ``T``, the stationary variance of
    the Langevin equation with Einstein-paired diffusion. ``K`` must be a
    constant matrix (or scalar); ``p0_second_moment`` is a matrix or scalar.
    """
    if callable(K):
        raise UnsupportedModelError("the closed form needs constant friction")
    K = np.atleast_2d(np.asarray(K, dtype=float))
    d = K.shape[0]
    level = {"doubled": 2.0, "gibbs": 1.0}[stationary] * temperature
    P0 = np.asarray(p0_second_moment, dtype=float)
    P0 = P0 * np.eye(d) if P0.ndim == 0 else P0
    Ks = K / np.sqrt(mass_ratio)
    lag = expm(-Ks * abs(tau - sigma))
    Et, Es = expm(-Ks * tau), expm(-Ks * sigma)
    return level * lag + Et @ (P0 - level * np.eye(d)) @ Es.T


# ---------------------------------------------------------------------------
# invariant-measure diagnostics


def batch_means(x, n_batches=32, axis=0):
    """Mean and batch-means standard error along ``axis``."""
    x = np.moveaxis(np.asarray(x, dtype=float), axis, 0)
    n = (x.shape[0] // n_batches) * n_batches
    if n == 0:
        raise ContractViolation("fewer samples than batches")
    b = x[:n].reshape((n_batches, n // n_batches) + x.shape[1:]).mean(axis=1)
    return x.mean(axis=0), b.std(axis=0, ddof=1) / np.sqrt(n_batches)


@dataclass
class MarginalLaw:
    """One-dimensional target law via its moments and CDF."""

    moments: np.ndarray
    cdf: object


def gaussian_marginal(var):
    sd = np.sqrt(var)
    return MarginalLaw(np.array([0.0, var, 0.0, 3.0 * var**2]), stats.norm(scale=sd).cdf)


def gibbs_marginal(potential_1d, temperature, lo, hi, n_grid=4001):
    """Marginal of ``exp(-V(x)/T)`` on ``[lo, hi]`` by quadrature."""
    x = np.linspace(lo, hi, n_grid)
    v = potential_1d(x)
    w = np.exp(-(v - v.min()) / temperature)
    Z = integrate.trapezoid(w, x)
    moments = np.array([integrate.trapezoid(x**k * w, x) / Z for k in range(1, 5)])
    cdf_vals = integrate.cumulative_trapezoid(w, x, initial=0.0) / Z
    return MarginalLaw(moments, lambda y: np.interp(y, x, cdf_vals))


def heavy_marginals(potential, temperature, dof):
    """Target position marginals for the analytic heavy potentials."""
    if not isinstance(potential, HeavyModel):
        raise UnsupportedModelError("position marginals need an analytic heavy model")
    if potential.kind == "free":
        return None
    if potential.kind == "quadratic":
        cov = temperature * np.linalg.inv(potential.stiffness)
        return [gaussian_marginal(cov[k, k]) for k in range(dof)]
    span = 1.0 + 8.0 * np.sqrt(max(temperature, 1e-12))
    law = gibbs_marginal(lambda x: (x**2 - 1.0) ** 2 / 4.0, temperature, -span - 1, span + 1)
    return [law] * dof


@dataclass
class InvariantReport:
    status: str
    moments: dict
    ks: dict
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.status == "pass"


def _coordinate_check(samples, law, z, n_batches, significance):
    res = {}
    ok = True
    for k in range(4):
        m, se = batch_means(samples ** (k + 1), n_batches)
        dev = abs(m - law.moments[k]) / se if se > 0 else np.inf
        res[f"m{k + 1}"] = {"empirical": float(m), "exact": float(law.moments[k]),
                            "stderr": float(se), "z": float(dev)}
        ok &= bool(dev <= z)
    # effective sample size from the batch error of the second moment
    m2, se2 = batch_means(samples**2, n_batches)
    n_eff = max(2, int(np.var(samples**2) / se2**2)) if se2 > 0 else samples.size
    n_eff = min(n_eff, samples.size)
    D = float(stats.ks_1samp(samples, law.cdf).statistic)
    pval = float(stats.kstwo.sf(D, n_eff))
    ok &= pval >= significance
    return ok, res, {"D": D, "n_eff": n_eff, "pvalue": pval}


def invariant_measure_check(X, p, potential, temperature, z=3.0, significance=1e-3,
                            n_batches=32, min_samples=2048):
    """Compare sampled ``(X, p)`` against ``exp(-(|p|^2/2 + V(X)) / T)``.

    ``X`` and ``p`` have shape ``(n_samples, dof)`` in sampling order (time
    correlation is handled by batch means). Each coordinate must match the
    first four moments within ``z`` batch standard errors and pass a
    Kolmogorov-Smirnov test at an effective sample size.
    """
    X = np.asarray(X, dtype=float).reshape(len(X), -1)
    p = np.asarray(p, dtype=float).reshape(len(p), -1)
    if X.shape[0] < min_samples:
        return InvariantReport("inconclusive", {}, {}, {"reason": "too few samples",
                                                        "n": int(X.shape[0])})
    dof = X.shape[1]
    ok = True
    moments, ks = {}, {}
    laws_p = [gaussian_marginal(temperature)] * dof
    laws_x = heavy_marginals(potential, temperature, dof)
    for k in range(dof):
        good, mo, kk = _coordinate_check(p[:, k], laws_p[k], z, n_batches, significance)
        ok &= good
        moments[f"p{k}"], ks[f"p{k}"] = mo, kk
        if laws_x is not None:
            good, mo, kk = _coordinate_check(X[:, k], laws_x[k], z, n_batches, significance)
            ok &= good
            moments[f"X{k}"], ks[f"X{k}"] = mo, kk
    return InvariantReport("pass" if ok else "fail", moments, ks,
                           {"n": int(X.shape[0]), "z": z, "significance": significance})
