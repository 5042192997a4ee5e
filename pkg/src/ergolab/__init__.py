"""Numerical laboratory for ergodic averages over homogeneous dilations of measures."""
__version__ = "0.1.0"

from .errors import (ConfigError, DimensionError, ErgodicityError, ErgolabError, ResolutionError,
                     StageError, UnresolvedDecayError, UnsupportedError)
from .measures import (Atomic, BrownianImage, CurvePushforward, Density, Dilated, Dilation, Dirac,
                       Estimate, LebesgueBox, SphereSurface, apply_dilation, dilate_pushforward,
                       integrate, make_brownian_image, make_curve_measure, measure_from_dict,
                       sample)
from .fourier import (DecayProfile, critical_exponent, decay_profile, estimate_fourier_dimension,
                      fourier_of_dilated, fourier_transform, rajchman_defect, sobolev_energy)
from .spectral import (LatticeWeights, SpectralMeasure, TorusSpectralMeasure, autocorrelation,
                       mean_average_norm, mean_convergence_curve, projection_mass,
                       zd_average_norm, zd_cesaro)
from .dynamics import (TorusAction, TrigObservable, act, convergence_sweep, ergodic_average,
                       ergodicity_certificate, orbit_maximal, smooth_observable, transfer_ratio)
from .maximal import (GridFunction, curve_maximal, dilated_convolution, lp_norm,
                      maximal_function, weak_type_ratio)
