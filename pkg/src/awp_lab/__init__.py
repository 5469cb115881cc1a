"""Advanced-wave simulation of photon pairs from parametric down-conversion.

Biphoton correlations are computed as classical wave optics: a wave launched
backward from one detector is converted at the crystal by a correlation
kernel and propagated forward to the other detector.
"""

__version__ = "0.1.0"

from .crystal import CrystalSpec, PhaseMatchingError, PMType
from .elements import (ConstantPhase, FourfSystem, FourierLens, JonesMask, Polarizer, Propagate,
                       PropagateExtraordinary, SamplingError, ThinLens, ThinMask)
from .engine import (Point, PolarizedPoint, PolarizedSetup, PureState, UnfoldedSetup, bucket_jpd,
                     conditional_polarized, conditional_wavefunction, ensemble_intensity, undetected_ensemble)
from .grid import Grid2D, GridMismatchError, ScalarField, gaussian_beam, impulse, plane_wave
from .kernels import (BiphotonKernel, DoubleGaussianState, Ordering, beamlike_type2_kernel, momentum_transfer,
                      position_kernel, propagate_double_gaussian)
from .special import fwhm, si, ssi

__all__ = [
    "__version__",
    "CrystalSpec", "PhaseMatchingError", "PMType",
    "ConstantPhase", "FourfSystem", "FourierLens", "JonesMask", "Polarizer", "Propagate",
    "PropagateExtraordinary", "SamplingError", "ThinLens", "ThinMask",
    "Point", "PolarizedPoint", "PolarizedSetup", "PureState", "UnfoldedSetup", "bucket_jpd",
    "conditional_polarized", "conditional_wavefunction", "ensemble_intensity", "undetected_ensemble",
    "Grid2D", "GridMismatchError", "ScalarField", "gaussian_beam", "impulse", "plane_wave",
    "BiphotonKernel", "DoubleGaussianState", "Ordering", "beamlike_type2_kernel", "momentum_transfer",
    "position_kernel", "propagate_double_gaussian",
    "fwhm", "si", "ssi",
]
