"""Anti-aliased Gaussian splatting with spectral pose-graph optimisation."""

import json as _json

from ._core import (
    Camera,
    InvalidArgument,
    NumericalError,
    Scene,
    ate,
    default_camera,
    default_config_json,
    dense_reference_integral,
    descriptor_similarity,
    extract_descriptor,
    generate_scene,
    generate_trajectory,
    integrated_alpha,
    laplacian_spectrum,
    look_at,
    optimize_g2o,
    psnr,
    render,
    render_ground_truth,
    se3_exp,
    se3_log,
    ssim,
    trajectory_signatures,
)
from ._core import run_pipeline as _run_pipeline

__version__ = "0.1.0"


def default_config():
    return _json.loads(default_config_json())


def run_pipeline(out_dir, config=None):
    """Runs the full pipeline; `config` is a dict of overrides. Returns the report."""
    text = "" if config is None else _json.dumps(config)
    return _json.loads(_run_pipeline(text, str(out_dir)))
