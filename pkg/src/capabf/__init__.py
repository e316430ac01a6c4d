"""Mutual-coupling-aware beamforming for continuous aperture arrays.

The aperture current is sampled on a Gauss-Legendre grid, the radiated
coupling kernel is replaced by a plane-wave expansion with a closed-form
inverse, and a WMMSE loop designs the beamformer under the coupled power
budget. Discrete-array baselines and a CAPA-to-CAPA MIMO extension share
the same machinery.
"""

from .baselines import (DiscreteArray, capa_no_coupling_solve, spda_array,
                        spda_coupling_matrix, spda_solve)
from .coupling import (KernelApprox, apply_inverse_kernel, apply_kernel, build_kernel_approx,
                       d_residual, em_power, kernel_approx_eval)
from .em import (Aperture, Medium, UserScene, c_rad_analytic, c_rad_wavenumber,
                 channel_response, d2y_scalar_green, ft_phi, medium_from_config, phi,
                 scalar_green)
from .estimators import CapaBeamformer, MimoBeamformer, SpdaBeamformer
from .exceptions import (BranchSingularityError, CapaError, ConfigError, DegenerateError,
                         DimensionError, IllConditionedError, InvalidParameterError,
                         SingularityError)
from .mimo import (MimoScene, MimoState, cross_channel_matrix, mimo_gram, mimo_mmse_filter,
                   mimo_rate, mse_matrix, solve_mimo)
from .quadrature import (ApertureGrid, QuadratureRule, build_aperture_grid, gauss_legendre,
                         surface_integral)
from .scenarios import ScenarioConfig, generate_scene, run_sweep, run_trials
from .wmmse import (SolverConfig, WmmseState, beamformer_update, build_gtilde, channel_matrix,
                    compute_beta, effective_gains, equivalent_noise, scale_full_power,
                    solve_multiuser, stationarity_residual, sum_rate, update_receivers)

__version__ = "0.1.0"

__all__ = [
    "Aperture", "ApertureGrid", "BranchSingularityError", "CapaBeamformer", "CapaError",
    "ConfigError", "DegenerateError", "DimensionError", "DiscreteArray", "IllConditionedError",
    "InvalidParameterError", "KernelApprox", "Medium", "MimoBeamformer", "MimoScene",
    "MimoState", "QuadratureRule", "ScenarioConfig", "SingularityError", "SolverConfig",
    "SpdaBeamformer", "UserScene", "WmmseState", "apply_inverse_kernel", "apply_kernel",
    "beamformer_update", "build_aperture_grid", "build_gtilde", "build_kernel_approx",
    "c_rad_analytic", "c_rad_wavenumber", "capa_no_coupling_solve", "channel_matrix",
    "channel_response", "compute_beta", "cross_channel_matrix", "d2y_scalar_green",
    "d_residual", "effective_gains", "em_power", "equivalent_noise", "ft_phi",
    "gauss_legendre", "generate_scene", "kernel_approx_eval", "medium_from_config",
    "mimo_gram", "mimo_mmse_filter", "mimo_rate", "mse_matrix", "phi", "run_sweep",
    "run_trials", "scalar_green", "scale_full_power", "solve_mimo", "solve_multiuser",
    "spda_array", "spda_coupling_matrix", "spda_solve", "stationarity_residual",
    "surface_integral", "sum_rate", "update_receivers",
]
