"""Heart and respiration rate from the forehead hue of facial video."""

__version__ = "0.1.0"

from .color import HsvPixel, RgbPixel, rgb_to_hsv, yuv420_to_rgb  # noqa: E402
from .estimator import (  # noqa: E402
    EstimatorConfig,
    StreamingEstimator,
    VitalsEstimate,
    VitalsEstimator,
    run_offline,
)
from .ingest import Frame, StreamMeta, open_stream, simulate_drops  # noqa: E402
from .roi import (  # noqa: E402
    ForeheadRect,
    HueMask,
    LandmarkSet,
    RoiSample,
    forehead_from_landmarks,
    mean_green,
    mean_hue_masked,
    parse_landmark_sidecar,
)
from .signal import (  # noqa: E402
    HR_BAND,
    RR_BAND,
    Band,
    BandPeak,
    IppgSeries,
    Spectrum,
    UniformSeries,
    band_filter,
    band_peak,
    resample_uniform,
    spectrum,
)

__all__ = [
    "Band", "BandPeak", "EstimatorConfig", "ForeheadRect", "Frame", "HR_BAND", "HsvPixel",
    "HueMask", "IppgSeries", "LandmarkSet", "RR_BAND", "RgbPixel", "RoiSample", "Spectrum",
    "StreamMeta", "StreamingEstimator", "UniformSeries", "VitalsEstimate", "VitalsEstimator",
    "band_filter", "band_peak", "forehead_from_landmarks", "mean_green", "mean_hue_masked",
    "open_stream", "parse_landmark_sidecar", "resample_uniform", "rgb_to_hsv",
    "run_offline", "simulate_drops", "spectrum", "yuv420_to_rgb",
]
