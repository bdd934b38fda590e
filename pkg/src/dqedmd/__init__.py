"""Koopman operator estimation from dither-quantized data (DQ-EDMD)."""

__version__ = "0.1.0"

from .dictionary import (Coordinate, Dictionary, Lifting, ThinPlateSpline,
                         identity_dictionary, make_tps_dictionary)
from .dynamics import (PENDULUM, VAN_DER_POL, SimConfig, TrajectorySet,
                       build_snapshot_pairs, rk4_step, simulate_trajectories)
from .edmd import (EDMD, KoopmanEstimate, fit_dq_edmd, fit_edmd, koopman_modes,
                   load_model, mean_relative_prediction_error, predict,
                   relative_matrix_error, save_model)
from .quantizer import (DitherQuantizer, DitherStream, QuantizerSpec,
                        auto_range_specs, quantize_trajectory)
from .regularized import (RegularizedEDMD, dmd_regularizer, loglog_slope,
                          perturbation_diagnostics, recover_regularized)

__all__ = [
    "Coordinate", "Dictionary", "Lifting", "ThinPlateSpline",
    "identity_dictionary", "make_tps_dictionary",
    "PENDULUM", "VAN_DER_POL", "SimConfig", "TrajectorySet",
    "build_snapshot_pairs", "rk4_step", "simulate_trajectories",
    "EDMD", "KoopmanEstimate", "fit_dq_edmd", "fit_edmd", "koopman_modes",
    "load_model", "mean_relative_prediction_error", "predict",
    "relative_matrix_error", "save_model",
    "DitherQuantizer", "DitherStream", "QuantizerSpec", "auto_range_specs",
    "quantize_trajectory",
    "RegularizedEDMD", "dmd_regularizer", "loglog_slope",
    "perturbation_diagnostics", "recover_regularized",
]
