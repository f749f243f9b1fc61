"""Declarative experiment configuration.

All times are in the slow (heavy-particle) time scale, temperatures in the
same energy units as the potentials, and ``mass_ratio`` is dimensionless.
Unknown keys are rejected.
"""

import hashlib
import json
import os
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigError

SCHEMA_VERSION = 1
ENV_PREFIX = "QCMD_"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class HeavySection(_Strict):
    kind: Literal["free", "quadratic", "double_well"] = "double_well"
    dof: int = Field(1, ge=1)
    omega: float = Field(1.0, gt=0, description="frequency of the quadratic well")


class BathSection(_Strict):
    """Zwanzig bath.

    ``construction`` ``debye``/``flat`` use ``J``, ``cutoff``, ``kappa`` and
    ``m`` directly. ``scaled`` derives them from the mass ratio: cutoff
    ``sqrt(M) * reduced_cutoff``, light mass ``2 / sqrt(M)`` and coupling so
    the point-mass friction is ``friction / sqrt(M)``. ``J = 0`` with
    ``scaled`` picks the mode count from the noise period.
    """

    construction: Literal["debye", "flat", "scaled"] = "debye"
    placement: Literal["quantile", "iid"] = "quantile"
    J: int = Field(1000, ge=0)
    cutoff: float = Field(10.0, gt=0)
    kappa: float = Field(1.0, ge=0)
    m: float = Field(1.0, gt=0)
    friction: float = Field(4.0, ge=0)
    reduced_cutoff: float = Field(1.0, gt=0)


class MatrixSection(_Strict):
    family: Literal["default", "linear", "tanh", "rotated"] = "default"
    levels: int = Field(4, ge=2)
    epsilon: float = 0.3
    parameters: dict = Field(default_factory=dict,
                             description="family-specific arrays (see ehrenfest.model_from_dict)")


class FrictionSection(_Strict):
    kind: Literal["constant", "debye", "ehrenfest"] = "constant"
    K: float = Field(1.0, ge=0)
    bandwidth: Optional[float] = Field(None, gt=0)
    diffusion_factor: float = Field(1.0, ge=0)


class ModelSection(_Strict):
    heavy: HeavySection = HeavySection()
    bath: BathSection = BathSection()
    matrix: MatrixSection = MatrixSection()
    friction: FrictionSection = FrictionSection()


class SamplerSection(_Strict):
    kind: Literal["gibbs", "pure-state", "zero"] = "gibbs"
    convention: Literal["covariance", "density"] = "density"
    normalization: float = Field(1.0, gt=0)
    random_phase: bool = False
    temperature_factor: float = Field(1.0, gt=0, description="bath drawn at factor * T")


class RunSection(_Strict):
    h: float = Field(0.01, gt=0)
    horizon: float = Field(1.0, gt=0)
    n_samples: int = Field(100, ge=1)
    temperature: float = Field(0.1, ge=0)
    mass_ratio: float = Field(1e4, gt=0)
    mass_ratios: List[float] = Field(default_factory=list)
    stride: int = Field(0, ge=0, description="0 records only the initial and final time")
    X0: List[float] = Field(default_factory=lambda: [-1.0])
    p0: List[float] = Field(default_factory=lambda: [1.0])
    batches: int = Field(32, ge=2)
    lags: List[float] = Field(default_factory=lambda: [0.1 * k for k in range(11)])

    @field_validator("mass_ratios")
    @classmethod
    def _positive(cls, v):
        if any(m <= 0 for m in v):
            raise ValueError("mass ratios must be positive")
        return v


class ObservableSection(_Strict):
    name: str
    kind: Literal["diffusion", "kinetic_temperature", "potential", "polynomial"]
    coefficients: List[float] = Field(default_factory=list)


class OutputSection(_Strict):
    dir: str = "results"
    format: Literal["csv", "json"] = "json"


class ExperimentConfig(_Strict):
    schema_version: Literal[1] = SCHEMA_VERSION
    dynamics: Literal["zwanzig", "ehrenfest", "langevin", "born-oppenheimer"] = "langevin"
    seed: int = Field(0, ge=0, lt=2**64)
    model: ModelSection = ModelSection()
    sampler: SamplerSection = SamplerSection()
    run: RunSection = RunSection()
    observables: List[ObservableSection] = Field(
        default_factory=lambda: [ObservableSection(name="g", kind="diffusion")])
    output: OutputSection = OutputSection()

    def canonical_json(self):
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def digest(self):
        """Hash of everything that determines results (the output section is excluded)."""
        data = self.model_dump(mode="json")
        data.pop("output")
        text = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def with_updates(self, **sections):
        data = self.model_dump()
        for key, val in sections.items():
            if isinstance(val, dict) and isinstance(data.get(key), dict):
                data[key] = {**data[key], **val}
            else:
                data[key] = val
        return validate_config(data)


def _error_paths(exc):
    parts = []
    for e in exc.errors():
        loc = ".".join(str(x) for x in e["loc"]) or "<root>"
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def validate_config(data):
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_error_paths(exc)) from None


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return validate_config(data)


ENV_KEYS = {
    "SEED": ("seed", int),
    "WORKERS": ("workers", int),
    "OUT": ("out", str),
    "FORMAT": ("format", str),
}


def env_overrides(environ=None):
    """Values from ``QCMD_SEED``, ``QCMD_WORKERS``, ``QCMD_OUT``, ``QCMD_FORMAT``."""
    environ = os.environ if environ is None else environ
    out = {}
    for key, (name, conv) in ENV_KEYS.items():
        raw = environ.get(ENV_PREFIX + key)
        if raw is None or raw == "":
            continue
        try:
            out[name] = conv(raw)
        except ValueError:
            raise ConfigError(f"{ENV_PREFIX + key}: cannot parse {raw!r}") from None
    return out


def resolve(config, flags, environ=None):
    """Apply overrides with precedence flag > environment > file.

    Returns ``(config, workers)``.
    """
    env = env_overrides(environ)
    pick = {k: flags.get(k) if flags.get(k) is not None else env.get(k)
            for k in ("seed", "workers", "out", "format")}
    updates = {}
    if pick["seed"] is not None:
        updates["seed"] = pick["seed"]
    out = {}
    if pick["out"] is not None:
        out["dir"] = pick["out"]
    if pick["format"] is not None:
        out["format"] = pick["format"]
    if out:
        updates["output"] = out
    if updates:
        config = config.with_updates(**updates)
    workers = pick["workers"] if pick["workers"] is not None else 1
    if workers < 1:
        raise ConfigError("workers: must be at least 1")
    return config, workers


def dump_schema():
    return ExperimentConfig.model_json_schema()
