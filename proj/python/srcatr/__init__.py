"""Sparse-representation classification of synthetic sonar target chips."""

from ._srcatr import (
    FOREIGN_CLASSES,
    MAIN_CLASSES,
    ConfigError,
    DataError,
    Dictionary,
    NumericalError,
    add_noise,
    apply_blur,
    blur_kernel,
    classify,
    generate_chip,
    homotopy_solve,
    ista_solve,
    kkt_violation,
    lasso_objective,
    nearest_neighbor,
    read_pgm,
    run_experiment,
    sci,
    snr_db,
    vectorize,
    write_pgm,
)

__all__ = [
    "FOREIGN_CLASSES",
    "MAIN_CLASSES",
    "ConfigError",
    "DataError",
    "Dictionary",
    "NumericalError",
    "add_noise",
    "apply_blur",
    "blur_kernel",
    "classify",
    "generate_chip",
    "homotopy_solve",
    "ista_solve",
    "kkt_violation",
    "lasso_objective",
    "nearest_neighbor",
    "read_pgm",
    "run_experiment",
    "sci",
    "snr_db",
    "vectorize",
    "write_pgm",
]
