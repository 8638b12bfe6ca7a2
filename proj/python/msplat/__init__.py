"""Multi-sample Gaussian splatting: rendering, losses, gradients and training.

Images are float64 arrays of shape (H, W, 3) with values in [0, 1].
"""

from ._core import (
    PARAMS_PER_GAUSSIAN,
    Camera,
    Error,
    NumericError,
    ParseError,
    Scene,
    ShapeError,
    TopologyError,
    ValidationError,
    benchmark_ids,
    composite_loss,
    diff_map,
    dssim,
    evaluate_with_gradient,
    gdc_loss,
    grad_check,
    haar_dwt,
    haar_idwt,
    initialize_scene,
    psnr,
    render,
    render_single_sample,
    run_ablation,
    sharp_scene,
    ssim,
    synthetic_target,
    train,
    weight_map,
)

__version__ = "0.1.0"
