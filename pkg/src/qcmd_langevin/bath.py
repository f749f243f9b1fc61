"""Heat-bath model: light harmonic modes linearly coupled to heavy particles.

The bath is always stored in the eigenbasis of its frequency operator, so the
frequency operator is the diagonal ``eigenvalues`` and the coupling Jacobian
is the ``(J, dof)`` array ``couplings`` whose row ``j`` is the gradient of the
coupling ``Psi_j(X) = couplings[j] @ X``.

All state arrays may carry leading batch axes; the trailing axis is ``dof``
for heavy coordinates and ``J`` for bath coordinates.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, ModelInvalidError, UnsupportedModelError

POTENTIAL_KINDS = ("free", "quadratic", "double_well")


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class HeavyModel:
    """Analytic potential for the heavy coordinates.

    ``free`` is zero, ``quadratic`` is ``0.5 * X @ stiffness @ X`` and
    ``double_well`` is ``sum_k (X_k**2 - 1)**2 / 4``. The heavy mass is one.
    """

    kind: str = "quadratic"
    dof: int = 1
    stiffness: np.ndarray = None

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ModelInvalidError(f"unknown potential kind {self.kind!r}")
        if int(self.dof) < 1:
            raise ModelInvalidError("dof must be a positive integer")
        object.__setattr__(self, "dof", int(self.dof))
        A = np.eye(self.dof) if self.stiffness is None else np.atleast_2d(self.stiffness)
        if A.shape != (self.dof, self.dof):
            raise ContractViolation(f"stiffness must be ({self.dof}, {self.dof})")
        if not np.allclose(A, A.T):
            raise ModelInvalidError("stiffness must be symmetric")
        object.__setattr__(self, "stiffness", _frozen(A))

    @classmethod
    def harmonic(cls, omega=1.0, dof=1):
        return cls("quadratic", dof, omega**2 * np.eye(dof))

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape[-1:] != (self.dof,):
            raise ContractViolation(f"heavy coordinates need trailing axis {self.dof}, got {X.shape}")
        return X

    def potential(self, X):
        X = self._check(X)
        if self.kind == "free":
            return np.zeros(X.shape[:-1])
        if self.kind == "quadratic":
            return 0.5 * np.einsum("...i,ij,...j->...", X, self.stiffness, X)
        return 0.25 * np.sum((X**2 - 1.0) ** 2, axis=-1)

    def gradient(self, X):
        X = self._check(X)
        if self.kind == "free":
            return np.zeros_like(X)
        if self.kind == "quadratic":
            return X @ self.stiffness
        return X * (X**2 - 1.0)

    def hessian(self, X):
        X = self._check(X)
        out = np.zeros(X.shape + (self.dof,))
        if self.kind == "quadratic":
            out[...] = self.stiffness
        elif self.kind == "double_well":
            idx = np.arange(self.dof)
            out[..., idx, idx] = 3.0 * X**2 - 1.0
        return out

    def to_dict(self):
        return {"kind": self.kind, "dof": self.dof, "stiffness": self.stiffness.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], d["dof"], d.get("stiffness"))


@dataclass(frozen=True)
class SpectralBathModel:
    """Discrete bath spectrum with linear coupling to ``dof`` heavy coordinates.

    Attributes
    ----------
    eigenvalues : (J,) array
        Bath frequencies, positive and strictly increasing.
    couplings : (J, dof) array
        Row ``j`` is the coupling gradient ``c_j``.
    mass : float
        Light-particle mass ``m``.
    debye_cutoff : float or None
        Cutoff frequency when the bath discretizes a Debye-type kernel.
    kappa : (dof, dof) array or None
        Coupling strength matrix of the Debye construction.
    placement : str
        How the frequencies were chosen (``debye-quantile``, ``debye-iid``,
        ``flat`` or ``custom``).
    """

    eigenvalues: np.ndarray
    couplings: np.ndarray
    mass: float = 1.0
    debye_cutoff: float = None
    kappa: np.ndarray = None
    placement: str = "custom"

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.eigenvalues, dtype=float))
        c = np.asarray(self.couplings, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        if lam.ndim != 1 or c.ndim != 2 or c.shape[0] != lam.size:
            raise ContractViolation("couplings must have shape (J, dof) matching eigenvalues (J,)")
        if lam.size == 0:
            raise ModelInvalidError("bath needs at least one mode")
        if np.any(lam <= 0):
            raise ModelInvalidError("bath eigenvalues must be positive")
        if np.any(np.diff(lam) <= 0):
            raise ModelInvalidError("bath eigenvalues must be strictly increasing")
        if not self.mass > 0:
            raise ModelInvalidError("bath mass must be positive")
        object.__setattr__(self, "eigenvalues", _frozen(lam))
        object.__setattr__(self, "couplings", _frozen(c))
        object.__setattr__(self, "mass", float(self.mass))
        if self.debye_cutoff is not None:
            if not self.debye_cutoff > 0:
                raise ModelInvalidError("Debye cutoff must be positive")
            object.__setattr__(self, "debye_cutoff", float(self.debye_cutoff))
        if self.kappa is not None:
            k = np.atleast_2d(np.asarray(self.kappa, dtype=float))
            if k.shape != (self.dof, self.dof):
                raise ContractViolation(f"kappa must be ({self.dof}, {self.dof})")
            object.__setattr__(self, "kappa", _frozen(k))

    @property
    def J(self):
        return self.eigenvalues.size

    @property
    def dof(self):
        return self.couplings.shape[1]

    @property
    def kernel_bound(self):
        """Upper bound ``m sum_j lambda_j |c_j|^2`` on the spectral kernel norm."""
        return self.mass * float(np.sum(self.eigenvalues * np.sum(self.couplings**2, axis=1)))

    def coupling(self, X):
        """Linear coupling ``Psi_hat(X)``, shape ``(..., J)``."""
        X = np.asarray(X, dtype=float)
        if X.shape[-1:] != (self.dof,):
            raise ContractViolation(f"heavy coordinates need trailing axis {self.dof}")
        return X @ self.couplings.T

    def to_dict(self):
        return {
            "J": self.J,
            "lambda": self.eigenvalues.tolist(),
            "couplings": self.couplings.tolist(),
            "m": self.mass,
            "lambda_d": self.debye_cutoff,
            "kappa": None if self.kappa is None else self.kappa.tolist(),
            "placement": self.placement,
        }

    @classmethod
    def from_dict(cls, d):
        if d["J"] != len(d["lambda"]):
            raise ContractViolation("J does not match the number of eigenvalues")
        return cls(
            eigenvalues=d["lambda"],
            couplings=d["couplings"],
            mass=d["m"],
            debye_cutoff=d.get("lambda_d"),
            kappa=d.get("kappa"),
            placement=d.get("placement", "custom"),
        )

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def digest(self):
        """Short content hash used in trajectory headers and manifests."""
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


@dataclass(frozen=True)
class MemoryKernel:
    grid: np.ndarray
    values: np.ndarray
    provenance: str = "spectral-sum"
    meta: dict = field(default_factory=dict)


def _check_state(X, x, bath, heavy):
    X = np.asarray(X, dtype=float)
    x = np.asarray(x, dtype=float)
    if heavy is not None and heavy.dof != bath.dof:
        raise ContractViolation("heavy model and bath disagree on dof")
    if X.shape[-1:] != (bath.dof,):
        raise ContractViolation(f"X needs trailing axis {bath.dof}, got {X.shape}")
    if x.shape[-1:] != (bath.J,):
        raise ContractViolation(f"bath coordinates need trailing axis {bath.J}, got {x.shape}")
    return X, x


def hamiltonian_total(X, p, x, q, bath, heavy):
    """Total energy of heavy particles plus bath."""
    X, x = _check_state(X, x, bath, heavy)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape[-1:] != X.shape[-1:] or q.shape[-1:] != x.shape[-1:]:
        raise ContractViolation("momenta must match their coordinates")
    lam, m = bath.eigenvalues, bath.mass
    d = x - bath.coupling(X)
    return (
        0.5 * np.sum(p**2, axis=-1)
        + heavy.potential(X)
        + 0.5 * m * np.sum(lam * d**2, axis=-1)
        + np.sum(lam * q**2, axis=-1) / (2.0 * m)
    )


def heavy_force(X, x, bath, heavy):
    """Force on the heavy coordinates, ``-d/dX`` of the total energy."""
    X, x = _check_state(X, x, bath, heavy)
    d = x - bath.coupling(X)
    return -heavy.gradient(X) + (bath.mass * bath.eigenvalues * d) @ bath.couplings


def wave_from_bath(x, q, X, bath):
    """Complex bath wave ``x - Psi_hat(X) + i q / m``."""
    X, x = _check_state(X, x, bath, None)
    return (x - bath.coupling(X)) + 1j * (np.asarray(q, dtype=float) / bath.mass)


def bath_from_wave(psi, X, bath):
    """Inverse of :func:`wave_from_bath`; returns ``(x, q)``."""
    psi = np.asarray(psi)
    X = np.asarray(X, dtype=float)
    x = psi.real + bath.coupling(X)
    q = bath.mass * psi.imag
    return x, q


def memory_kernel_spectral(bath, tau):
    """Frozen-coupling friction kernel ``sum_j m lambda_j cos(tau lambda_j) c_j c_j^T``.

    Returns an array of shape ``tau.shape + (dof, dof)``.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ContractViolation("kernel lag must be nonnegative")
    lam, c = bath.eigenvalues, bath.couplings
    w = bath.mass * lam * np.cos(tau[..., None] * lam)
    return np.einsum("...j,ja,jb->...ab", w, c, c)


def memory_kernel_debye(kappa, m, cutoff, tau):
    """Debye-limit kernel ``(m kappa / cutoff^3) sin(cutoff tau) / tau``.

    The value at ``tau = 0`` is the continuous extension ``m kappa / cutoff^2``.
    """
    if not cutoff > 0:
        raise ModelInvalidError("Debye cutoff must be positive")
    kappa = np.atleast_2d(np.asarray(kappa, dtype=float))
    tau = np.asarray(tau, dtype=float)
    # sin(a t)/t = a sinc(a t / pi)
    shape = np.sinc(cutoff * tau / np.pi) * cutoff
    return (m / cutoff**3) * shape[..., None, None] * kappa


def _require_psd(kappa, tol=1e-12):
    kappa = np.atleast_2d(np.asarray(kappa, dtype=float))
    if not np.allclose(kappa, kappa.T, atol=tol * max(1.0, np.abs(kappa).max())):
        raise ModelInvalidError("kappa must be symmetric")
    w = np.linalg.eigvalsh(kappa)
    if w.min() < -tol * max(1.0, abs(w).max()):
        raise ModelInvalidError("kappa must be positive semi-definite")
    return kappa


def friction_limit_debye(kappa, m, cutoff):
    """Point-mass friction ``pi m kappa / (2 cutoff^3)`` of the Debye kernel."""
    if not cutoff > 0:
        raise ModelInvalidError("Debye cutoff must be positive")
    kappa = _require_psd(kappa)
    return np.pi * m * kappa / (2.0 * cutoff**3)


def rank_one_factor(kappa, rtol=1e-10):
    """Split ``kappa = k u u^T`` with ``|u| = 1``; reject higher rank."""
    kappa = _require_psd(kappa)
    w, V = np.linalg.eigh(kappa)
    k = w[-1]
    if k <= 0:
        u = np.zeros(kappa.shape[0])
        u[0] = 1.0
        return 0.0, u
    if np.any(np.abs(w[:-1]) > rtol * k):
        raise UnsupportedModelError("kappa must be rank one for a linearly coupled bath")
    u = V[:, -1]
    if u[np.argmax(np.abs(u))] < 0:
        u = -u
    return float(k), u


def debye_frequencies(J, cutoff, placement="quantile", rng=None):
    """Frequencies whose empirical law approximates the density ``3 l^2 / cutoff^3``."""
    J = int(J)
    if J < 1:
        raise ModelInvalidError("J must be at least 1")
    if placement == "quantile":
        u = (np.arange(1, J + 1) - 0.5) / J
    elif placement == "iid":
        if rng is None:
            raise ContractViolation("iid placement needs an rng")
        u = np.sort(rng.random(J))
    else:
        raise ContractViolation(f"unknown placement {placement!r}")
    return cutoff * np.cbrt(u)


def build_debye_bath(J, cutoff, kappa, m=1.0, placement="quantile", rng=None):
    """Bath whose spectral sum discretizes the Debye kernel.

    Couplings satisfy ``3 lambda_j^3 J c_j c_j^T = kappa`` mode by mode, so
    ``kappa`` has to be rank one.
    """
    if not cutoff > 0:
        raise ModelInvalidError("Debye cutoff must be positive")
    kappa = np.atleast_2d(np.asarray(kappa, dtype=float))
    k, u = rank_one_factor(kappa)
    lam = debye_frequencies(J, cutoff, placement, rng)
    c = np.sqrt(k / (3.0 * lam**3 * J))[:, None] * u[None, :]
    return SpectralBathModel(lam, c, m, cutoff, kappa, f"debye-{placement}")


def build_flat_bath(J, cutoff, kappa, m=1.0):
    """Equally spaced modes carrying the same kernel as the Debye construction.

    Frequencies are the midpoints ``(j - 1/2) cutoff / J``; each mode gets the
    weight of its frequency cell, so the spectral sum is a midpoint rule for
    ``(m kappa / cutoff^3) int_0^cutoff cos(tau l) dl``. Unlike the Debye
    quantiles this resolves low frequencies evenly, and the kernel is periodic
    with period ``2 pi J / cutoff``.
    """
    if not cutoff > 0:
        raise ModelInvalidError("cutoff must be positive")
    J = int(J)
    if J < 1:
        raise ModelInvalidError("J must be at least 1")
    kappa = np.atleast_2d(np.asarray(kappa, dtype=float))
    k, u = rank_one_factor(kappa)
    spacing = cutoff / J
    lam = (np.arange(1, J + 1) - 0.5) * spacing
    c = np.sqrt(k * spacing / (cutoff**3 * lam))[:, None] * u[None, :]
    return SpectralBathModel(lam, c, m, cutoff, kappa, "flat")


def kappa_residual(bath):
    """Largest deviation of ``3 lambda_j^3 J c_j c_j^T`` from ``kappa``."""
    if bath.kappa is None:
        raise UnsupportedModelError("bath has no kappa")
    lam, c = bath.eigenvalues, bath.couplings
    outer = 3.0 * (lam**3 * bath.J)[:, None, None] * np.einsum("ja,jb->jab", c, c)
    return float(np.max(np.abs(outer - bath.kappa)))


def scaled_bath(mass_ratio, friction, reduced_cutoff, J, placement="flat"):
    """Bath in the slow time scale for nuclei/electron mass ratio ``M``.

    Uses frequencies ``sqrt(M) * reduced`` and light mass ``2 / sqrt(M)``,
    and picks ``kappa`` so the point-mass friction equals ``friction / sqrt(M)``.
    ``friction`` may be a scalar (one heavy coordinate) or a rank-one matrix.
    """
    M = float(mass_ratio)
    if not M > 0:
        raise ModelInvalidError("mass ratio must be positive")
    sM = np.sqrt(M)
    cutoff = sM * reduced_cutoff
    m = 2.0 / sM
    K = np.atleast_2d(np.asarray(friction, dtype=float))
    kappa = 2.0 * cutoff**3 * (K / sM) / (np.pi * m)
    if placement == "flat":
        return build_flat_bath(J, cutoff, kappa, m)
    return build_debye_bath(J, cutoff, kappa, m, placement=placement.replace("debye-", ""))


def kernel_table(bath, grid):
    """Sampled spectral kernel with its provenance."""
    grid = np.asarray(grid, dtype=float)
    return MemoryKernel(grid, memory_kernel_spectral(bath, grid), "spectral-sum", {"J": bath.J})
