"""Infrared/visible image fusion: metrics, degradations, and trained fusion.

Images are 2-D float64 numpy arrays with values in [0, 1].
"""

from ._core import (
    FusecurrError,
    TrainConfig,
    add_noise,
    avg_gradient,
    color_jitter,
    dct_compress,
    degrade_image,
    edge_intensity,
    entropy,
    evaluate,
    fuse,
    gaussian_blur,
    iqa_star,
    load_pgm,
    make_synthetic_dataset,
    parse_config_file,
    pretrain,
    rule_fuse,
    save_pgm,
    spatial_frequency,
    std_dev,
    train,
    vif,
    viff_fusion,
    write_metrics_csv,
)

__all__ = [
    "FusecurrError",
    "TrainConfig",
    "add_noise",
    "avg_gradient",
    "color_jitter",
    "dct_compress",
    "degrade_image",
    "edge_intensity",
    "entropy",
    "evaluate",
    "fuse",
    "gaussian_blur",
    "iqa_star",
    "load_pgm",
    "make_synthetic_dataset",
    "parse_config_file",
    "pretrain",
    "rule_fuse",
    "save_pgm",
    "spatial_frequency",
    "std_dev",
    "train",
    "vif",
    "viff_fusion",
    "write_metrics_csv",
]
