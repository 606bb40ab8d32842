"""Tree, linear and ensemble learners with a household simulator."""

from ._core import (
    BindingError,
    ContractError,
    Dataset,
    InputError,
    Model,
    ParseError,
    SchemaError,
    TrainingError,
    accuracy,
    cli,
    fit,
    generate,
    load,
    load_model,
    mae_rmse,
    repro,
    simulate,
    train,
)

__all__ = [
    "BindingError",
    "ContractError",
    "Dataset",
    "InputError",
    "Model",
    "ParseError",
    "SchemaError",
    "TrainingError",
    "accuracy",
    "cli",
    "fit",
    "generate",
    "load",
    "load_model",
    "mae_rmse",
    "repro",
    "simulate",
    "train",
]
