"""Random initial data for bath modes and electron wave functions.

Two variance conventions are supported for the Gaussian mode amplitudes:

``covariance``
    Each real and imaginary part has variance ``2T / (m lambda_j)`` (bath) or
    ``T / (C lambda_j)`` (electrons), so ``E|gamma_j|^2 = 4T / (m lambda_j)``.
    With this choice the bath noise covariance is exactly ``2T`` times the
    memory kernel.
``density``
    The variances are half as large, which is what the Gibbs density
    ``exp(-H/T)`` of the quadratic mode energy prescribes. This is the
    convention under which the heavy particles relax to temperature ``T``.

The ``covariance`` law at temperature ``T`` equals the ``density`` law at
``2T``.
"""

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, ModelInvalidError
from .rng import stream_rng

CONVENTIONS = ("covariance", "density")
LOW_TEMPERATURE_THRESHOLD = 0.1


class LowTemperatureWarning(UserWarning):
    """The excited-state weight is not small compared to the ground state."""


@dataclass(frozen=True)
class GibbsSpec:
    temperature: float
    normalization: float = 1.0
    seed: int = 0
    stream: int = 0
    convention: str = "covariance"

    def __post_init__(self):
        if not self.temperature >= 0:
            raise ModelInvalidError("temperature must be nonnegative")
        if not self.normalization > 0:
            raise ModelInvalidError("normalization constant must be positive")
        if self.convention not in CONVENTIONS:
            raise ContractViolation(f"convention must be one of {CONVENTIONS}")

    def rng(self):
        return stream_rng(self.seed, self.stream)

    @property
    def variance_factor(self):
        return 1.0 if self.convention == "covariance" else 0.5


@dataclass(frozen=True)
class WaveVector:
    """Complex amplitudes in a fixed eigenbasis, possibly batched.

    ``ratio`` is the excited-to-ground weight ``sum_{j>=1}|gamma_j|^2 / |gamma_0|^2``
    (per draw) and ``warning`` is set when the low-temperature check fails.
    """

    amplitudes: np.ndarray
    basis: str = "bath-eigenbasis"
    normalized: bool = False
    ratio: np.ndarray = None
    warning: str = None

    @property
    def norms(self):
        return np.sqrt(np.sum(np.abs(self.amplitudes) ** 2, axis=-1))


def _gaussian_modes(variance, size, rng):
    shape = (() if size is None else tuple(np.atleast_1d(size))) + variance.shape
    sd = np.sqrt(variance)
    return sd * rng.standard_normal(shape) + 1j * sd * rng.standard_normal(shape)


def sample_zwanzig_bath(bath, spec, rng=None, size=None):
    """Gibbs-distributed bath wave conditioned on the heavy coordinates."""
    rng = spec.rng() if rng is None else rng
    var = 2.0 * spec.variance_factor * spec.temperature / (bath.mass * bath.eigenvalues)
    return WaveVector(_gaussian_modes(var, size, rng), "bath-eigenbasis", False)


def check_low_temperature(spectrum, temperature):
    """Return ``T * sum_j 1/lambda_j`` over the excited levels in ``spectrum``."""
    spectrum = np.asarray(spectrum, dtype=float)
    if np.any(spectrum <= 0):
        raise ModelInvalidError("excited-state energies must be positive")
    return float(temperature * np.sum(1.0 / spectrum))


def sample_ehrenfest_modes(excited, spec, rng=None, size=None, random_phase=False,
                           threshold=LOW_TEMPERATURE_THRESHOLD):
    """Normalized electron wave in the eigenbasis of the translated Hamiltonian.

    Parameters
    ----------
    excited : (J,) array
        Translated energies ``lambda_1..lambda_J`` (all positive); the ground
        level ``lambda_0 = 0`` is implicit.
    spec : GibbsSpec
        ``spec.normalization`` is the constant ``C`` in the mode variance.
    random_phase : bool
        Give the ground amplitude a uniform random phase instead of ``1``.

    Returns
    -------
    WaveVector with ``J + 1`` normalized components, index 0 the ground state.
    """
    excited = np.asarray(excited, dtype=float)
    ratio_bound = check_low_temperature(excited, spec.temperature)
    rng = spec.rng() if rng is None else rng
    var = spec.variance_factor * spec.temperature / (spec.normalization * excited)
    gam = _gaussian_modes(var, size, rng)
    lead = gam.shape[:-1]
    g0 = np.ones(lead + (1,), dtype=complex)
    if random_phase:
        g0 = np.exp(2j * np.pi * rng.random(lead + (1,)))
    full = np.concatenate([g0, gam], axis=-1)
    weight = np.sum(np.abs(full) ** 2, axis=-1, keepdims=True)
    ratio = np.sum(np.abs(gam) ** 2, axis=-1) / np.abs(g0[..., 0]) ** 2
    msg = None
    if ratio_bound > threshold:
        msg = (f"T * sum(1/lambda_j) = {ratio_bound:.3g} exceeds {threshold}; "
               "the ground state does not dominate")
        warnings.warn(msg, LowTemperatureWarning, stacklevel=2)
    return WaveVector(full / np.sqrt(weight), "electron-eigenbasis", True, ratio, msg)


def pure_state_probabilities(levels, temperature):
    """Canonical weights ``exp(-l_j/T) / sum exp(-l/T)``; ground state at ``T = 0``."""
    levels = np.asarray(levels, dtype=float)
    if temperature <= 0:
        q = np.zeros_like(levels)
        q[np.argmin(levels)] = 1.0
        return q
    z = -(levels - levels.min()) / temperature
    w = np.exp(z)
    return w / w.sum()


def sample_pure_states(levels, temperature, rng, size=None):
    """Pure eigenstates ``exp(i alpha) e_j`` drawn with canonical weights.

    Returns the WaveVector and the drawn level indices.
    """
    levels = np.asarray(levels, dtype=float)
    q = pure_state_probabilities(levels, temperature)
    n = 1 if size is None else int(np.prod(size))
    idx = rng.choice(levels.size, size=n, p=q)
    phase = np.exp(2j * np.pi * rng.random(n))
    amp = np.zeros((n, levels.size), dtype=complex)
    amp[np.arange(n), idx] = phase
    if size is None:
        amp, idx = amp[0], idx[0]
    else:
        amp = amp.reshape(tuple(np.atleast_1d(size)) + (levels.size,))
        idx = idx.reshape(tuple(np.atleast_1d(size)))
    return WaveVector(amp, "electron-eigenbasis", True), idx


def write_draws_csv(path, amplitudes, streams):
    """Dump draws as rows ``stream, j, re, im`` for auditing."""
    amplitudes = np.atleast_2d(amplitudes)
    streams = np.atleast_1d(streams)
    if amplitudes.shape[0] != streams.size:
        raise ContractViolation("one stream id per draw is required")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["stream", "j", "re", "im"])
        for s, row in zip(streams, amplitudes):
            for j, a in enumerate(row):
                w.writerow([int(s), j, repr(float(a.real)), repr(float(a.imag))])


def read_draws_csv(path):
    rows = {}
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            rows.setdefault(int(r["stream"]), []).append(complex(float(r["re"]), float(r["im"])))
    streams = sorted(rows)
    return np.array(streams), np.array([rows[s] for s in streams])
