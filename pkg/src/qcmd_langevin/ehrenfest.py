"""Finite-dimensional Ehrenfest dynamics in the slow time scale.

Heavy coordinates ``X`` move under the mean force ``-<psi, dH(X) psi>`` while
the electron wave follows ``i dpsi/dtau = sqrt(M) (H(X) - lambda_0(X)) psi``.
The conserved energy is ``|p|^2 / 2 + <psi, H(X) psi>``.

Matrix families provide ``hamiltonian(X)`` and ``derivative(X)`` (shape
``(dof, n, n)``); a confinement potential ``U(X)`` enters as ``U(X) I`` so it
shifts every level equally.
"""

from dataclasses import dataclass, field, replace
import warnings

import numpy as np
from scipy.linalg import expm, expm_frechet

from .bath import HeavyModel
from .errors import (ContractViolation, GapViolationError, InternalConsistencyError,
                     ModelInvalidError, StepSizeError)
from .rng import stream_rng
from .zwanzig import TrajectoryRecord


class ZeroFrictionWarning(UserWarning):
    """No excited level lies within a few bandwidths of zero."""


def _confinement(model):
    return model.confinement if model.confinement is not None else HeavyModel("free", model.dof)


class _MatrixFamily:
    """Shared behaviour; subclasses define ``_core`` and ``_core_derivative``."""

    @property
    def n_levels(self):
        return self._size()

    def hamiltonian(self, X):
        X = self._point(X)
        U = _confinement(self).potential(X)
        return self._core(X) + U * np.eye(self.n_levels)

    def derivative(self, X):
        X = self._point(X)
        dU = _confinement(self).gradient(X)
        return self._core_derivative(X) + dU[:, None, None] * np.eye(self.n_levels)

    def eigensystem(self, X):
        """Ascending eigenvalues and eigenvectors with the gap floor enforced."""
        X = self._point(X)
        lam, vec = np.linalg.eigh(self.hamiltonian(X))
        gap = float(np.min(np.diff(lam))) if lam.size > 1 else np.inf
        if gap <= self.gap_floor:
            raise GapViolationError(f"eigenvalue gap {gap:.3g} below floor {self.gap_floor}",
                                    gap=gap, X=X)
        return lam, vec

    def _point(self, X):
        X = np.asarray(X, dtype=float).reshape(-1)
        if X.size != self.dof:
            raise ContractViolation(f"expected {self.dof} heavy coordinates, got {X.size}")
        return X

    def _check_common(self):
        if not self.mass_ratio > 0:
            raise ModelInvalidError("mass ratio must be positive")
        if not self.gap_floor >= 0:
            raise ModelInvalidError("gap floor must be nonnegative")
        if self.confinement is not None and self.confinement.dof != self.dof:
            raise ContractViolation("confinement dof does not match the family")

    def _common_dict(self):
        return {"mass_ratio": self.mass_ratio, "gap_floor": self.gap_floor,
                "confinement": None if self.confinement is None else self.confinement.to_dict()}

    def with_mass_ratio(self, M):
        return replace(self, mass_ratio=float(M))


def _symmetric(a, name):
    a = np.array(a, dtype=float)
    if not np.allclose(a, np.swapaxes(a, 0, 1)):
        raise ModelInvalidError(f"{name} must be symmetric in its first two axes")
    a.flags.writeable = False
    return a


def _conf_from(d):
    c = d.get("confinement")
    return None if c is None else HeavyModel.from_dict(c)


@dataclass(frozen=True)
class LinearFamily(_MatrixFamily):
    """``H(X) = H_0 + sum_k X_k H_k``."""

    base: np.ndarray
    slopes: np.ndarray
    mass_ratio: float = 1e4
    gap_floor: float = 1e-3
    confinement: HeavyModel = None

    def __post_init__(self):
        object.__setattr__(self, "base", _symmetric(self.base, "base"))
        s = np.asarray(self.slopes, dtype=float)
        if s.ndim == 2:
            s = s[None]
        s = np.ascontiguousarray(s)
        if not np.allclose(s, np.swapaxes(s, 1, 2)):
            raise ModelInvalidError("slope matrices must be symmetric")
        s.flags.writeable = False
        object.__setattr__(self, "slopes", s)
        if s.shape[1:] != self.base.shape:
            raise ContractViolation("slope matrices must match the base matrix")
        self._check_common()

    @property
    def dof(self):
        return self.slopes.shape[0]

    def _size(self):
        return self.base.shape[0]

    def _core(self, X):
        return self.base + np.tensordot(X, self.slopes, axes=1)

    def _core_derivative(self, X):
        return self.slopes.copy()

    def to_dict(self):
        return {"family": "linear", "base": self.base.tolist(), "slopes": self.slopes.tolist(),
                **self._common_dict()}


@dataclass(frozen=True)
class TanhFamily(_MatrixFamily):
    """``H(X) = diag(D) + eps * A o tanh(B . X)`` with symmetric ``A`` and ``B``.

    ``rates`` has shape ``(n, n, dof)``; entry ``(j, k)`` of the perturbation
    is ``a_jk tanh(b_jk . X)``.
    """

    diagonal: np.ndarray
    amplitudes: np.ndarray
    rates: np.ndarray
    epsilon: float = 0.1
    mass_ratio: float = 1e4
    gap_floor: float = 1e-3
    confinement: HeavyModel = None

    def __post_init__(self):
        d = np.array(self.diagonal, dtype=float)
        if np.unique(d).size != d.size:
            raise ModelInvalidError("diagonal entries must be distinct")
        d.flags.writeable = False
        object.__setattr__(self, "diagonal", d)
        object.__setattr__(self, "amplitudes", _symmetric(self.amplitudes, "amplitudes"))
        r = np.asarray(self.rates, dtype=float)
        if r.ndim == 2:
            r = r[..., None]
        object.__setattr__(self, "rates", _symmetric(r, "rates"))
        n = d.size
        if self.amplitudes.shape != (n, n) or self.rates.shape[:2] != (n, n):
            raise ContractViolation("amplitudes and rates must be n x n")
        self._check_common()

    @property
    def dof(self):
        return self.rates.shape[2]

    def _size(self):
        return self.diagonal.size

    def _core(self, X):
        return np.diag(self.diagonal) + self.epsilon * self.amplitudes * np.tanh(self.rates @ X)

    def _core_derivative(self, X):
        sech2 = 1.0 / np.cosh(self.rates @ X) ** 2
        dv = (self.epsilon * self.amplitudes * sech2)[..., None] * self.rates
        return np.moveaxis(dv, -1, 0)

    def redraw(self, rng):
        """Same structure with freshly drawn perturbation amplitudes."""
        n = self.diagonal.size
        a = rng.standard_normal((n, n))
        return replace(self, amplitudes=(a + a.T) / np.sqrt(2.0))

    def to_dict(self):
        return {"family": "tanh", "diagonal": self.diagonal.tolist(),
                "amplitudes": self.amplitudes.tolist(), "rates": self.rates.tolist(),
                "epsilon": self.epsilon, **self._common_dict()}


@dataclass(frozen=True)
class RotatedSpectrumFamily(_MatrixFamily):
    """``H(X) = Q(X) diag(levels) Q(X)^T`` with ``Q(X) = expm(sum_k X_k A_k)``.

    The spectrum is independent of ``X``; at ``X = 0`` the ground-state
    derivative is the first column of each antisymmetric generator ``A_k``.
    """

    levels: np.ndarray
    generators: np.ndarray
    mass_ratio: float = 1e4
    gap_floor: float = 0.0
    confinement: HeavyModel = None

    def __post_init__(self):
        lv = np.array(self.levels, dtype=float)
        if np.any(np.diff(lv) <= 0):
            raise ModelInvalidError("levels must be strictly increasing")
        lv.flags.writeable = False
        g = np.array(self.generators, dtype=float)
        if g.ndim == 2:
            g = g[None]
        if not np.allclose(g, -np.swapaxes(g, 1, 2)):
            raise ModelInvalidError("generators must be antisymmetric")
        g.flags.writeable = False
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "generators", g)
        if g.shape[1:] != (lv.size, lv.size):
            raise ContractViolation("generator size does not match the level count")
        self._check_common()

    @classmethod
    def from_bath(cls, bath, mass_ratio, confinement=None):
        """Electron model whose friction reproduces a slow-scale bath.

        Levels ``lambda_j / sqrt(M)`` above a ground level 0 and ground-state
        couplings equal to the bath couplings ``c_j``.
        """
        n = bath.J + 1
        lv = np.concatenate([[0.0], bath.eigenvalues / np.sqrt(mass_ratio)])
        g = np.zeros((bath.dof, n, n))
        g[:, 1:, 0] = bath.couplings.T
        g[:, 0, 1:] = -bath.couplings.T
        return cls(lv, g, mass_ratio, 0.0, confinement)

    @property
    def dof(self):
        return self.generators.shape[0]

    def _size(self):
        return self.levels.size

    def _generator(self, X):
        return np.tensordot(X, self.generators, axes=1)

    def _core(self, X):
        Q = expm(self._generator(X))
        return (Q * self.levels) @ Q.T

    def _core_derivative(self, X):
        S = self._generator(X)
        out = np.empty((self.dof,) + S.shape)
        for k in range(self.dof):
            Q, dQ = expm_frechet(S, self.generators[k])
            t = (dQ * self.levels) @ Q.T
            out[k] = t + t.T
        return out

    def to_dict(self):
        return {"family": "rotated", "levels": self.levels.tolist(),
                "generators": self.generators.tolist(), **self._common_dict()}


def model_from_dict(d):
    d = dict(d)
    fam = d.pop("family")
    conf = _conf_from(d)
    d.pop("confinement", None)
    cls = {"linear": LinearFamily, "tanh": TanhFamily, "rotated": RotatedSpectrumFamily}.get(fam)
    if cls is None:
        raise ContractViolation(f"unknown matrix family {fam!r}")
    return cls(**d, confinement=conf)


def default_model(mass_ratio=1e4, dof=1, levels=4, epsilon=0.3, seed=7):
    """Tanh family on a double-well confinement with well separated levels."""
    rng = stream_rng(seed, 0)
    a = rng.standard_normal((levels, levels))
    a = (a + a.T) / 2.0
    b = rng.uniform(0.5, 1.5, (levels, levels, dof))
    b = (b + np.swapaxes(b, 0, 1)) / 2.0
    diag = np.arange(levels, dtype=float)
    return TanhFamily(diag, a, b, epsilon, mass_ratio, 0.2, HeavyModel("double_well", dof))


# ---------------------------------------------------------------------------
# ground state


@dataclass(frozen=True)
class GroundState:
    energy: float
    vector: np.ndarray
    energy_gradient: np.ndarray
    vector_gradient: np.ndarray        # (dof, n)
    levels: np.ndarray = None          # all eigenvalues
    basis: np.ndarray = None           # all eigenvectors, columns


def _fix_phase(vec):
    idx = np.argmax(np.abs(vec), axis=0)
    sign = np.sign(vec[idx, np.arange(vec.shape[1])])
    sign[sign == 0] = 1.0
    return vec * sign


def ground_state(model, X):
    """Lowest eigenpair with Hellmann-Feynman and first-order perturbation derivatives."""
    X = model._point(X)
    lam, vec = model.eigensystem(X)
    vec = _fix_phase(vec)
    dH = model.derivative(X)
    G = np.einsum("im,kij,j->km", vec, dH, vec[:, 0])     # <Psi_m, dH_k Psi_0>
    dlam = G[:, 0].copy()
    coef = np.zeros_like(G)
    coef[:, 1:] = G[:, 1:] / (lam[0] - lam[1:])
    dpsi = coef @ vec.T
    return GroundState(float(lam[0]), vec[:, 0].copy(), dlam, dpsi, lam, vec)


# ---------------------------------------------------------------------------
# forces and energy


@dataclass(frozen=True)
class EhrenfestState:
    tau: float
    X: np.ndarray
    p: np.ndarray
    psi: np.ndarray


def _mean_force(dH, psi):
    return -np.einsum("i,kij,j->k", np.conj(psi), dH, psi).real


def force_terms(model, X, psi, gs=None):
    """The three pieces of the mean force around the ground state.

    Returns ``(-dlambda_0, 2 Re<psi~, H~ g0 dPsi_0>, -<psi~, dH~ psi~>)`` where
    ``g0 = <Psi_0, psi>`` and ``psi~ = psi - g0 Psi_0``.
    """
    gs = ground_state(model, X) if gs is None else gs
    psi = np.asarray(psi, dtype=complex)
    n = psi.size
    Ht = (gs.basis * (gs.levels - gs.energy)) @ gs.basis.T
    g0 = np.vdot(gs.vector, psi)
    rest = psi - g0 * gs.vector
    dHt = model.derivative(X) - gs.energy_gradient[:, None, None] * np.eye(n)
    cross = 2.0 * (np.conj(rest) @ (Ht @ (g0 * gs.vector_gradient.T))).real
    tail = _mean_force(dHt, rest)
    return -gs.energy_gradient, cross, tail


def ehrenfest_force(model, X, psi, rtol=1e-10, check=True):
    """Mean force ``-<psi, dH psi>`` with an optional decomposition cross-check."""
    psi = np.asarray(psi, dtype=complex)
    X = model._point(X)
    direct = _mean_force(model.derivative(X), psi)
    if check:
        parts = force_terms(model, X, psi)
        split = parts[0] + parts[1] + parts[2]
        scale = max(1.0, float(np.max(np.abs(direct))))
        if np.max(np.abs(split - direct)) > rtol * scale:
            raise InternalConsistencyError(
                f"force decomposition mismatch {np.max(np.abs(split - direct)):.3g}")
    return direct


def fluctuation_term(model, X, psi, gs=None):
    """``Re<psi~, H~ g0 dPsi_0>``, the coupling that drives friction and noise."""
    return 0.5 * force_terms(model, X, psi, gs)[1]


def ehrenfest_energy(state, model):
    H = model.hamiltonian(state.X)
    return float(0.5 * np.sum(state.p**2) + np.vdot(state.psi, H @ state.psi).real)


# ---------------------------------------------------------------------------
# propagation


class EhrenfestIntegrator:
    """Symmetric splitting ``wave(h/2) . drift(h) . wave(h/2)``.

    The wave substep holds ``X`` fixed, rotates ``psi`` exactly in the
    eigenbasis of ``H(X)`` and gives ``p`` the exact time integral of the mean
    force over the substep. Extra wave columns may be carried along; they
    see the same unitary but exert no force.
    """

    def __init__(self, model, h):
        if not h > 0:
            raise StepSizeError("time step must be positive")
        self.model, self.h = model, float(h)
        self.rate = np.sqrt(model.mass_ratio)
        self._cache = None

    def _eig(self, X):
        if self._cache is not None and np.array_equal(self._cache[0], X):
            return self._cache[1:]
        lam, vec = self.model.eigensystem(X)
        if self.h * self.rate * (lam[-1] - lam[0]) >= np.pi:
            raise StepSizeError("h * sqrt(M) * spread of levels must stay below pi")
        G = np.einsum("ia,kij,jb->kab", vec, self.model.derivative(X), vec)
        self._cache = (X.copy(), lam, vec, G)
        return lam, vec, G

    def _wave_flow(self, X, p, psi, extra):
        lam, vec, G = self._eig(X)
        s = 0.5 * self.h
        w = self.rate * (lam - lam[0])
        a = vec.T @ psi
        omega = w[:, None] - w[None, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            phi = np.where(omega == 0, s, (np.exp(1j * omega * s) - 1.0) / (1j * omega))
        kick = np.einsum("a,kab,b,ab->k", np.conj(a), G, a, phi).real
        rot = np.exp(-1j * w * s)
        psi = vec @ (rot * a)
        if extra is not None:
            extra = vec @ (rot[:, None] * (vec.T @ extra))
        return p - kick, psi, extra

    def advance(self, X, p, psi, extra=None):
        p, psi, extra = self._wave_flow(X, p, psi, extra)
        X = X + self.h * p
        p, psi, extra = self._wave_flow(X, p, psi, extra)
        return X, p, psi, extra

    def step(self, state):
        X, p, psi, _ = self.advance(state.X, state.p, state.psi)
        return EhrenfestState(state.tau + self.h, X, p, psi)


def ehrenfest_step(state, h, model):
    return EhrenfestIntegrator(model, h).step(state)


def integrate_ehrenfest(state0, h, n_steps, model, stride=1, observers=None,
                        keep_wave=True, carry=None):
    """Integrate and record; ``carry`` is an optional ``(n, k)`` block of extra waves.

    Returns ``(record, final_state, carried)``.
    """
    integ = EhrenfestIntegrator(model, h)
    observers = observers or {}
    X = np.array(state0.X, dtype=float)
    p = np.array(state0.p, dtype=float)
    psi = np.array(state0.psi, dtype=complex)
    extra = None if carry is None else np.array(carry, dtype=complex)
    times, Xs, ps, Es, waves = [], [], [], [], []
    obs = {k: [] for k in observers}

    def record(n):
        st = EhrenfestState(state0.tau + n * h, X, p, psi)
        times.append(st.tau)
        Xs.append(X.copy())
        ps.append(p.copy())
        Es.append(ehrenfest_energy(st, model))
        if keep_wave:
            waves.append(psi.copy())
        for k, f in observers.items():
            obs[k].append(np.asarray(f(st)))

    record(0)
    for n in range(1, n_steps + 1):
        X, p, psi, extra = integ.advance(X, p, psi, extra)
        if n % stride == 0:
            record(n)
    rec = TrajectoryRecord(np.array(times), np.array(Xs), np.array(ps), np.array(Es),
                           np.array(waves) if keep_wave else None,
                           {k: np.array(v) for k, v in obs.items()},
                           {"h": h, "stride": stride, "dynamics": "ehrenfest",
                            "mass_ratio": model.mass_ratio})
    return rec, EhrenfestState(state0.tau + n_steps * h, X, p, psi), extra


def born_oppenheimer_step(X, p, h, model, force=None):
    """Velocity Verlet on the ground-state surface. Returns ``(X, p, force)``."""
    if not h > 0:
        raise StepSizeError("time step must be positive")
    f = -ground_state(model, X).energy_gradient if force is None else force
    p = p + 0.5 * h * f
    X = X + h * p
    f = -ground_state(model, X).energy_gradient
    p = p + 0.5 * h * f
    return X, p, f


def integrate_born_oppenheimer(X0, p0, h, n_steps, model, stride=1):
    X, p = np.array(X0, dtype=float), np.array(p0, dtype=float)
    f = None
    times, Xs, ps, Es = [], [], [], []
    for n in range(n_steps + 1):
        if n:
            X, p, f = born_oppenheimer_step(X, p, h, model, f)
        if n % stride == 0:
            times.append(n * h)
            Xs.append(X.copy())
            ps.append(p.copy())
            Es.append(0.5 * np.sum(p**2) + ground_state(model, X).energy)
    return TrajectoryRecord(np.array(times), np.array(Xs), np.array(ps), np.array(Es),
                            meta={"h": h, "stride": stride, "dynamics": "born-oppenheimer"})


# ---------------------------------------------------------------------------
# friction


@dataclass(frozen=True)
class FrictionEstimate:
    """Friction matrix with both estimators and their settings.

    ``K`` is the PSD projection of the spectral-density estimate. ``time`` and
    ``cesaro`` are the truncated time integral and its running average.
    """

    K: np.ndarray
    spectral: np.ndarray
    time: np.ndarray
    cesaro: np.ndarray
    bandwidth: float
    cutoff: float
    clamped_fraction: float
    warning: str = None
    meta: dict = field(default_factory=dict)


def _psd_project(A):
    A = 0.5 * (A + A.T)
    w, v = np.linalg.eigh(A)
    clamped = (v * np.clip(w, 0.0, None)) @ v.T
    norm = np.linalg.norm(A)
    frac = float(np.linalg.norm(clamped - A) / norm) if norm > 0 else 0.0
    return clamped, frac


def friction_matrix(model, X, bandwidth=None, cutoff=None, bandwidth_factor=4.0):
    """Friction ``K(X) = pi Gamma(0, X)`` from the discrete electron spectrum.

    ``Gamma(l) = sum_j l_j d_j d_j^T delta(l - l_j)`` with ``d_j = <Psi_j, dPsi_0>``
    and translated levels ``l_j``. The delta functions are smoothed by a
    Gaussian of width ``bandwidth`` reflected at zero (default: a multiple of
    the mean level spacing). ``cutoff`` is the fast-time horizon of the time
    estimator (default ``1 / bandwidth``).
    """
    gs = ground_state(model, X)
    lt = gs.levels[1:] - gs.energy
    d = gs.vector_gradient @ gs.basis[:, 1:]              # (dof, J)
    spacing = lt[-1] / lt.size
    w = bandwidth_factor * spacing if bandwidth is None else float(bandwidth)
    S = 1.0 / w if cutoff is None else float(cutoff)
    kde = 2.0 * np.exp(-0.5 * (lt / w) ** 2) / (np.sqrt(2.0 * np.pi) * w)
    spectral = np.pi * (d * (lt * kde)) @ d.T
    time = 2.0 * (d * np.sin(S * lt)) @ d.T
    cesaro = 2.0 * (d * ((1.0 - np.cos(S * lt)) / (S * lt))) @ d.T
    K, frac = _psd_project(spectral)
    msg = None
    if not np.any(lt < 3.0 * w):
        msg = "no electron level within three bandwidths of zero; friction is ~0"
        warnings.warn(msg, ZeroFrictionWarning, stacklevel=2)
    elif frac > 0.05:
        msg = f"PSD projection removed {frac:.1%} of the estimate"
    return FrictionEstimate(K, 0.5 * (spectral + spectral.T), 0.5 * (time + time.T),
                            0.5 * (cesaro + cesaro.T), w, S, frac, msg,
                            {"levels": int(lt.size), "spacing": float(spacing)})


# ---------------------------------------------------------------------------
# adiabaticity


def adiabatic_overlap(model, record, level=0):
    """Norm of the part of ``psi`` orthogonal to the tracked eigenvector ``Psi_level(X)``."""
    if record.gamma is None:
        raise ContractViolation("record carries no wave states")
    out = np.empty(record.times.size)
    for i, (X, psi) in enumerate(zip(record.X, record.gamma)):
        _, vec = model.eigensystem(X)
        v = vec[:, level]
        out[i] = np.linalg.norm(psi - v * np.vdot(v, psi))
    return out


def basis_gram_error(model, X0, p0, h, n_steps, psi0=None):
    """Propagate all initial eigenvectors along a trajectory; return ``max|Gram - I|``."""
    _, vec = model.eigensystem(np.asarray(X0, dtype=float))
    psi0 = vec[:, 0].astype(complex) if psi0 is None else psi0
    st = EhrenfestState(0.0, np.asarray(X0, dtype=float), np.asarray(p0, dtype=float), psi0)
    _, _, carried = integrate_ehrenfest(st, h, n_steps, model, stride=max(n_steps, 1),
                                        keep_wave=False, carry=vec)
    gram = carried.conj().T @ carried
    return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))
