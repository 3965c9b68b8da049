"""DaTSCAN SPECT slice classification: phantoms, NIfTI ingest, CNN/MLP/LogReg/SVM, TPE search."""

from ._core import (
    Error,
    InvalidArgument,
    IoError,
    Model,
    ShapeError,
    TrainingError,
    auc,
    average_precision,
    crossval,
    generate_phantoms,
    load_manifest,
    load_model,
    metrics_from_confusion,
    optimize,
    read_nifti,
    run_cli,
    stratified_kfold,
    train,
    write_nifti,
)

__all__ = [
    "Error",
    "InvalidArgument",
    "IoError",
    "Model",
    "ShapeError",
    "TrainingError",
    "auc",
    "average_precision",
    "crossval",
    "generate_phantoms",
    "load_manifest",
    "load_model",
    "metrics_from_confusion",
    "optimize",
    "read_nifti",
    "run_cli",
    "stratified_kfold",
    "train",
    "write_nifti",
]
