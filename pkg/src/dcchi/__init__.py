"""Dual-camera compressive hyperspectral imaging: simulation and unrolled recovery."""

import os as _os

# DCCHI_THREADS caps BLAS/OpenMP parallelism; it must land in the environment
# before numpy first loads, which is why it lives at the top of the package.
_threads = _os.environ.get("DCCHI_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                 "NUMEXPR_NUM_THREADS"):
        _os.environ[_var] = _threads

from .errors import (ConfigError, DcchiError, FormatError, NumericError,
                     ShapeError, StateError)
from .tensor import Tensor
from .sensing import (CodedMask, MeasurementPair, NoiseModel, SensingSystem,
                      cassi_adjoint, cassi_forward, dense_phi, pan_adjoint,
                      pan_forward, phi_adjoint, phi_apply, simulate)
from .network import ArchConfig, GuidedDenoiser, GuideExtractor, pipeline_macs
from .solver import (CG_PRESETS, CgConfig, InitialNet, ReconstructionModel,
                     cg_solve, data_step, identity_prior_pipeline,
                     phi_adjoint_cube, run_pipeline)
from .training import TrainConfig, train
from .metrics import (CorrProxyReport, QualityReport, correlation_map,
                      proxy_compare, psnr, quality, ssim)
from .gradcheck import GradCheckReport, grad_check, grad_check_params
from .storage import (load_checkpoint, load_tensor, read_config,
                      save_checkpoint, save_tensor, config_hash)
from .synth import make_dataset, make_scene, make_smooth_suite
from .estimator import DcchiReconstructor

__version__ = "0.1.0"

__all__ = [
    "ArchConfig", "CG_PRESETS", "CgConfig", "CodedMask", "ConfigError",
    "CorrProxyReport", "DcchiError", "DcchiReconstructor", "FormatError",
    "GradCheckReport", "GuideExtractor", "GuidedDenoiser", "InitialNet",
    "MeasurementPair", "NoiseModel", "NumericError", "QualityReport",
    "ReconstructionModel", "SensingSystem", "ShapeError", "StateError",
    "Tensor", "TrainConfig", "cassi_adjoint", "cassi_forward", "cg_solve",
    "config_hash", "correlation_map", "data_step", "dense_phi", "grad_check",
    "grad_check_params", "identity_prior_pipeline", "load_checkpoint",
    "load_tensor", "make_dataset", "make_scene", "make_smooth_suite",
    "pan_adjoint", "pan_forward", "phi_adjoint", "phi_adjoint_cube",
    "phi_apply", "pipeline_macs", "proxy_compare", "psnr", "quality",
    "read_config", "run_pipeline", "save_checkpoint", "save_tensor",
    "simulate", "ssim", "train",
]
