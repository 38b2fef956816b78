"""Evolutionary search over small neural network architectures."""

from ._core import (
    Chromosome,
    ConfigError,
    DataError,
    Dataset,
    Error,
    EvaluationError,
    InvalidChromosome,
    NonFiniteLoss,
    ParseError,
    RetryExhausted,
    SchemaError,
    ShapeError,
    TaskModality,
    config_keys,
    count_parameters,
    diverged_score,
    evaluate,
    fitness_score,
    load_dataset,
    mutate,
    produce_offspring,
    random_chromosome,
    report,
    run,
    schedule,
    surrogate_val_error,
    synth,
    tournament_select,
    validate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
