"""Python bindings for the cot3d benchmark, alignment trainer and evaluator."""

from ._cot3d import (
    CheckpointError,
    ConfigError,
    DataError,
    Error,
    TransportError,
    ValidationError,
    build_dataset,
    convert,
    evaluate,
    farthest_point_sample,
    generate_shape,
    info_nce_loss,
    lr_at,
    parse_tagged,
    read_records,
    render,
    run_cli,
    score,
    split_dataset,
    train,
    validate,
    write_records,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "DataError",
    "Error",
    "TransportError",
    "ValidationError",
    "build_dataset",
    "convert",
    "evaluate",
    "farthest_point_sample",
    "generate_shape",
    "info_nce_loss",
    "lr_at",
    "parse_tagged",
    "read_records",
    "render",
    "run_cli",
    "score",
    "split_dataset",
    "train",
    "validate",
    "write_records",
]
