from .locreg import LocalFit, LocregConfig, local_fit
from .pchip import pchip, pchip_slopes
from .ppoly import PiecewiseCubic
from .trajectory import (
    Algorithm,
    DomainError,
    SmoothedDistances,
    Trajectory,
    eval_a,
    eval_v,
    eval_x,
    fit,
    fit_locreg,
    fit_locreg_pchip,
    fit_lseg,
    fit_pchip,
    running_max_clamp,
    sample,
)

__all__ = [
    "Algorithm", "DomainError", "LocalFit", "LocregConfig", "PiecewiseCubic", "SmoothedDistances",
    "Trajectory", "eval_a", "eval_v", "eval_x", "fit", "fit_locreg", "fit_locreg_pchip", "fit_lseg",
    "fit_pchip", "local_fit", "pchip", "pchip_slopes", "running_max_clamp", "sample",
]
