"""Heat-bath and Ehrenfest dynamics compared against their Langevin limit."""

__version__ = "0.1.0"

from .bath import (HeavyModel, MemoryKernel, SpectralBathModel, bath_from_wave,
                   build_debye_bath, build_flat_bath, friction_limit_debye, hamiltonian_total,
                   heavy_force, memory_kernel_debye, memory_kernel_spectral, scaled_bath,
                   wave_from_bath)
from .ehrenfest import (EhrenfestState, GroundState, LinearFamily, RotatedSpectrumFamily,
                        TanhFamily, adiabatic_overlap, born_oppenheimer_step, default_model,
                        ehrenfest_force, ehrenfest_step, friction_matrix, ground_state)
from .errors import (ConfigError, ContractViolation, GapViolationError, ModelInvalidError,
                     NotPSDError, QCMDError, StepSizeError, UnsupportedModelError)
from .harness import (CoupledBathLangevin, EnsembleResult, ObservableSpec, convergence_sweep,
                      fdt_check, gibbs_consistency_test, run_ensemble, weak_error)
from .langevin import (FrictionModel, LangevinState, invariant_measure_check, langevin_step,
                       matrix_sqrt_psd, ou_covariance_exact)
from .rng import stream_rng
from .sampling import (GibbsSpec, WaveVector, check_low_temperature, sample_ehrenfest_modes,
                       sample_pure_states, sample_zwanzig_bath)
from .zwanzig import FullState, TrajectoryRecord, integrate, noise_process, step_zwanzig

__all__ = [
    "__version__",
    "HeavyModel",
    "MemoryKernel",
    "SpectralBathModel",
    "bath_from_wave",
    "build_debye_bath",
    "build_flat_bath",
    "friction_limit_debye",
    "hamiltonian_total",
    "heavy_force",
    "memory_kernel_debye",
    "memory_kernel_spectral",
    "scaled_bath",
    "wave_from_bath",
    "EhrenfestState",
    "GroundState",
    "LinearFamily",
    "RotatedSpectrumFamily",
    "TanhFamily",
    "adiabatic_overlap",
    "born_oppenheimer_step",
    "default_model",
    "ehrenfest_force",
    "ehrenfest_step",
    "friction_matrix",
    "ground_state",
    "ConfigError",
    "ContractViolation",
    "GapViolationError",
    "ModelInvalidError",
    "NotPSDError",
    "QCMDError",
    "StepSizeError",
    "UnsupportedModelError",
    "CoupledBathLangevin",
    "EnsembleResult",
    "ObservableSpec",
    "convergence_sweep",
    "fdt_check",
    "gibbs_consistency_test",
    "run_ensemble",
    "weak_error",
    "FrictionModel",
    "LangevinState",
    "invariant_measure_check",
    "langevin_step",
    "matrix_sqrt_psd",
    "ou_covariance_exact",
    "stream_rng",
    "GibbsSpec",
    "WaveVector",
    "check_low_temperature",
    "sample_ehrenfest_modes",
    "sample_pure_states",
    "sample_zwanzig_bath",
    "FullState",
    "TrajectoryRecord",
    "integrate",
    "noise_process",
    "step_zwanzig",
]
