"""Spectral laboratory for amalgam-space norms, wave-equation Picard series
and norm-inflation experiments."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .spectral import (DataPair, Domain, GridSpec, SpectralField, WindowBump,  # noqa: F401
                       box_op, cube_restrict, forward_transform, inverse_transform,
                       make_grid, pointwise_product)
from .norms import (Family, PairSpec, SpaceSpec, algebra_check, fl_norm,  # noqa: F401
                    fourier_amalgam_norm, modulation_norm, norm, pair_norm,
                    restricted_norm, sobolev_norm, wiener_amalgam_norm)
from .quadrature import TimeMesh  # noqa: F401
from .engine import (NlwProblem, PicardSeries, duhamel, nonlinearity,  # noqa: F401
                     picard_iterates, propagate_linear, solve_fixed_point,
                     solve_series, support_size)
from .oracles import (brute_convolution, ds_verify, rk4_frequency_oracle,  # noqa: F401
                      s2_closed_form)
from .inflation import (ExperimentReport, InflationConfig, PerturbationSpec,  # noqa: F401
                        RegimeParams, build_perturbation, check_regime,
                        lower_bound_check, run_inflation, select_parameters,
                        tail_and_cross_terms)
