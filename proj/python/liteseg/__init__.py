"""Python bindings for the PP-LiteSeg segmentation engine.

The heavy lifting lives in the C++ core; this package re-exports the
pybind11 module. Arrays are float32 NCHW for images/features and uint8
[N,H,W] for label maps (255 = ignore).
"""

from ._liteseg import (
    Model,
    SyntheticShapesDataset,
    adaptive_avg_pool,
    bench,
    bilinear_upsample,
    channel_mean_max,
    conv2d,
    load_model,
    miou,
    num_threads,
    relu,
    set_num_threads,
    sigmoid,
    spatial_avg_max_pool,
    train_from_json,
    uafm_blend,
)

__all__ = [
    "Model",
    "SyntheticShapesDataset",
    "adaptive_avg_pool",
    "bench",
    "bilinear_upsample",
    "channel_mean_max",
    "conv2d",
    "load_model",
    "miou",
    "num_threads",
    "relu",
    "set_num_threads",
    "sigmoid",
    "spatial_avg_max_pool",
    "train_from_json",
    "uafm_blend",
]

__version__ = "0.1.0"
