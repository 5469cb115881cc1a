"""End-to-end imaging protocols built on the advanced-wave engine."""

from .ghost import GhostImagingConfig, LensPlacement, ghost_image
from .holography import HolographyConfig, fit_equivalent_distance, holography_run
from .metrics import centroid, four_step_phase, four_step_visibility, fwhm_through_peak, median_visibility
from .qiup import Momentum, Position, QiupConfig, SingleMode, qiup_frames, qiup_metrics, qiup_run

__all__ = [
    "GhostImagingConfig", "LensPlacement", "ghost_image",
    "HolographyConfig", "fit_equivalent_distance", "holography_run",
    "centroid", "four_step_phase", "four_step_visibility", "fwhm_through_peak", "median_visibility",
    "Momentum", "Position", "QiupConfig", "SingleMode", "qiup_frames", "qiup_metrics", "qiup_run",
]
