"""Single-scan near-field user localization with controllable beam squint."""

from ._version import __version__
from .baselines import TwoStepResult, cbs_low_localize, power_peak_localize, quantization_floor
from .beamforming import (
    PsBeamformer,
    TrajectoryTable,
    TtdBeamformer,
    array_gain,
    gain_surface,
    jad_trajectory,
    ps_beamformer,
    squint_focal_point,
    synthesize_ttd,
)
from .channel import fresnel_distance, path_gain, steering_vector
from .coarse import CoarseEstimate, coarse_estimate, find_peaks, power_spectrum
from .config import (
    FarFieldWarning,
    PolarPosition,
    SensingRegion,
    SystemConfig,
    config_hash,
    load_config,
)
from .crlb import CrlbValues, FisherInfo, crlb, fisher_matrix, phase_derivatives
from .estimators import PowerPeakLocalizer, SquintLocalizer
from .exceptions import (
    ConfigError,
    DecompositionFailure,
    DegenerateGeometry,
    InfeasibleSquint,
    InfeasibleTrajectory,
    InvalidSubarray,
    SquintLocError,
    TooFewPeaks,
    WindowExhausted,
)
from .harness import Campaign, RmseRecord, emit_spectrum_artifacts, run_campaign
from .music import (
    FusedSpectrum,
    SearchWindow,
    SmoothingConfig,
    SubspaceDecomposition,
    decompose,
    estimate_num_users,
    fuse_and_refine,
    music_spectrum,
    sample_covariance,
    spatial_smooth,
)
from .signals import SnapshotSet, User, UserSet, echo_snapshots, snr_to_sigma

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
