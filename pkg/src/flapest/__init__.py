"""flapest: oscillation-aware state estimation for flapping-wing vehicles.

Learns the flapping-induced periodic component of MARG signals online
(sliding FFT frequency tracking, phase dead reckoning with correlation
correction, spherical k-means + periodic-kernel GP regression), feeds the
oscillation-free streams to attitude and translational EKFs, and
reconstructs the full oscillatory state.  Includes a synthetic longitudinal
flapping-flight simulator as the reproducible test substrate.
"""

from ._kernels import BACKEND, HAVE_COMPILED
from .attitude import AttitudeEkf, AttitudeNoise, AttitudeState, GravityEstimate
from .frequency import (
    FrequencyEstimate,
    FrequencyTracker,
    Spectrum,
    band_peak,
    estimate_variance,
    fft_radix2,
    fuse_gaussian,
)
from .internal import (
    AeroConfig,
    FlightCondition,
    InternalEkf,
    InternalState,
    OscillationParams,
    cycle_avg_closed,
    cycle_avg_numeric,
    theodorsen,
    wind_force,
)
from .patterns import (
    ClusterSet,
    PeriodicPattern,
    PhaseSample,
    cosine_distance,
    detrend,
    fourier_features,
    kmeans_fit,
)
from .phase import PhaseState, advance, correct, cross_correlation
from .pipeline import Pipeline, PipelineConfig, PipelineOutput, run_pipeline
from .signals import (
    Channel,
    MemoryStack,
    TimedSample,
    butterworth2_lowpass,
    centered_cycle_average,
    resample_uniform,
    trailing_cycle_average,
)
from .simulator import FwavSimulator, SimConfig, TruthRecord

__version__ = "0.1.0"
