"""Reciprocal-point open-set intrusion detection."""

from ._core import (
    ContractError,
    DataError,
    IntegrityError,
    Model,
    NonFiniteError,
    RpmnetError,
    ShapeError,
    TrainingError,
    VersionError,
    __version__,
    aupr,
    auroc,
    calibrate,
    rp_distance,
    run_cli,
    train,
    unknown_f1,
)

__all__ = [
    "ContractError",
    "DataError",
    "IntegrityError",
    "Model",
    "NonFiniteError",
    "RpmnetError",
    "ShapeError",
    "TrainingError",
    "VersionError",
    "__version__",
    "aupr",
    "auroc",
    "calibrate",
    "rp_distance",
    "run_cli",
    "train",
    "unknown_f1",
]
