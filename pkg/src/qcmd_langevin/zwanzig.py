"""Deterministic heavy-particle + harmonic-bath dynamics.

The bath is carried as the complex wave ``gamma = x - Psi_hat(X) + i q / m``
in its eigenbasis. The integrator is the symmetric splitting

    bath(h/2) . drift(h) . bath(h/2)

where ``drift`` moves ``X`` with frozen bath coordinates ``x`` (so ``gamma``
shifts by ``-c . dX``) and ``bath`` is the exact flow with ``X`` frozen: each
mode rotates by ``exp(-i lambda_j s)`` and the heavy momentum receives the
time integral of the bath force over the substep. The scheme is symplectic,
time reversible and second order; with zero coupling it is velocity Verlet.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .bath import memory_kernel_spectral
from .errors import ContractViolation, QuadratureResolutionError, StepSizeError


@dataclass(frozen=True)
class FullState:
    tau: float
    X: np.ndarray
    p: np.ndarray
    gamma: np.ndarray


@dataclass
class TrajectoryRecord:
    """Sampled trajectory (or batch of trajectories; time is axis 0)."""

    times: np.ndarray
    X: np.ndarray
    p: np.ndarray
    energy: np.ndarray = None
    gamma: np.ndarray = None
    observables: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ContractViolation("sample times must be strictly increasing")


def zwanzig_energy(state, bath, heavy):
    lam = bath.eigenvalues
    return (0.5 * np.sum(state.p**2, axis=-1) + heavy.potential(state.X)
            + 0.5 * bath.mass * np.sum(lam * np.abs(state.gamma) ** 2, axis=-1))


def check_step(h, bath):
    if not h > 0:
        raise StepSizeError("time step must be positive")
    if h * bath.eigenvalues[-1] >= np.pi:
        raise StepSizeError(
            f"h * lambda_max = {h * bath.eigenvalues[-1]:.3g} must stay below pi")


class ZwanzigIntegrator:
    """Precomputes the per-mode rotation factors for a fixed step size."""

    def __init__(self, bath, heavy, h):
        check_step(h, bath)
        if heavy.dof != bath.dof:
            raise ContractViolation("heavy model and bath disagree on dof")
        self.bath, self.heavy, self.h = bath, heavy, float(h)
        lam = bath.eigenvalues
        self._rot = np.exp(-0.5j * h * lam)
        # m * lam * int_0^{h/2} exp(-i lam t) dt
        self._kick = bath.mass * (1.0 - self._rot) / 1j
        self._c = bath.couplings

    def _bath_flow(self, X, p, g):
        impulse = (g * self._kick).real @ self._c
        p = p - 0.5 * self.h * self.heavy.gradient(X) + impulse
        return p, g * self._rot

    def advance(self, X, p, g):
        p, g = self._bath_flow(X, p, g)
        dX = self.h * p
        X = X + dX
        g = g - dX @ self._c.T
        p, g = self._bath_flow(X, p, g)
        return X, p, g

    def step(self, state):
        X, p, g = self.advance(state.X, state.p, state.gamma)
        return FullState(state.tau + self.h, X, p, g)


def step_zwanzig(state, h, bath, heavy):
    """One splitting step of length ``h``."""
    return ZwanzigIntegrator(bath, heavy, h).step(state)


def reverse(state):
    """Time-reversal involution: flip heavy and bath momenta."""
    return replace(state, p=-state.p, gamma=np.conj(state.gamma))


def integrate(state0, h, n_steps, bath, heavy, stride=1, observers=None, keep_bath=False):
    """Advance ``n_steps`` steps, recording every ``stride`` steps.

    ``observers`` maps names to callables ``f(state) -> array`` evaluated at
    each recorded time. The record holds ``n_steps // stride + 1`` samples.
    """
    if stride < 1:
        raise ContractViolation("stride must be at least 1")
    integ = ZwanzigIntegrator(bath, heavy, h)
    observers = observers or {}
    X = np.array(state0.X, dtype=float)
    p = np.array(state0.p, dtype=float)
    g = np.array(state0.gamma, dtype=complex)
    times, Xs, ps, Es, gs = [], [], [], [], []
    obs = {k: [] for k in observers}

    def record(n):
        st = FullState(state0.tau + n * h, X, p, g)
        times.append(st.tau)
        Xs.append(X.copy())
        ps.append(p.copy())
        Es.append(zwanzig_energy(st, bath, heavy))
        if keep_bath:
            gs.append(g.copy())
        for k, f in observers.items():
            obs[k].append(np.asarray(f(st)))

    record(0)
    for n in range(1, n_steps + 1):
        X, p, g = integ.advance(X, p, g)
        if n % stride == 0:
            record(n)
    return TrajectoryRecord(
        np.array(times), np.array(Xs), np.array(ps), np.array(Es),
        np.array(gs) if keep_bath else None,
        {k: np.array(v) for k, v in obs.items()},
        {"h": h, "stride": stride, "bath_hash": bath.digest(), "dynamics": "zwanzig"},
    ), FullState(state0.tau + n_steps * h, X, p, g)


def noise_process(gamma0, bath, taus, X_path=None):
    """Bath-generated force ``zeta(tau) = sum_j m lambda_j Re(e^{-i tau lambda_j} gamma_j) c_j``.

    Couplings are linear, so ``X_path`` does not change the result; it is
    accepted so callers can pass the trajectory they integrated.

    Returns shape ``gamma0.shape[:-1] + (len(taus), dof)``.
    """
    gamma0 = np.asarray(gamma0, dtype=complex)
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    lam = bath.eigenvalues
    phase = np.exp(-1j * taus[:, None] * lam)                # (n_tau, J)
    amp = (gamma0[..., None, :] * phase).real * (bath.mass * lam)
    return amp @ bath.couplings


def generalized_langevin_residual(record, bath, heavy, gamma0, max_phase=1.0):
    """Residual of the generalized Langevin equation along a recorded path.

    ``r = dp/dtau + lambda'(X) + int_0^tau f(tau - s) p(s) ds - zeta(tau)``,
    with the derivative by second-order finite differences and the memory
    integral by the trapezoid rule on the record grid. The memory kernel is
    the frozen-coupling one, which is exact here because couplings are linear.
    """
    t = record.times - record.times[0]
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
        raise ContractViolation("residual needs a uniformly sampled record")
    dt = dt[0]
    if dt * bath.eigenvalues[-1] > max_phase:
        raise QuadratureResolutionError(
            f"sample spacing {dt:.3g} too coarse for lambda_max {bath.eigenvalues[-1]:.3g}")
    n = t.size
    p = record.p
    acc = np.gradient(p, dt, axis=0, edge_order=2)
    F = memory_kernel_spectral(bath, t)                    # (n, dof, dof)
    mem = np.zeros_like(p)
    for k in range(1, n):
        w = F[k::-1] @ p[: k + 1, :, None]                 # f(t_k - t_l) p_l
        w = w[..., 0]
        mem[k] = dt * (w.sum(axis=0) - 0.5 * (w[0] + w[-1]))
    zeta = noise_process(gamma0, bath, t)
    return acc + heavy.gradient(record.X) + mem - zeta
