"""Continuous-indexed temporal tensor decomposition with rank determination."""

from ._core import (
    DomainError,
    IntegrationError,
    IoError,
    LookupError,
    Model,
    ObservationSet,
    ParseError,
    StructuralError,
    TrainingError,
    __version__,
    add_noise,
    component_power,
    digamma,
    elbo,
    evaluate,
    gen_synthetic,
    kl_gamma,
    kl_gaussian,
    load_checkpoint,
    load_csv,
    log_gamma,
    predict,
    predict_interval,
    prune,
    rank_report,
    save_checkpoint,
    save_csv,
    split,
    train,
    trigamma,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
