"""Learning-to-rank toolkit: losses, metrics, training and prediction."""

from ._ltr import (  # noqa: F401
    ConfigError,
    DomainValueError,
    Model,
    ParseError,
    __version__,
    generate_synthetic,
    loss,
    metric,
    rank_from_scores,
)

__all__ = [
    "ConfigError",
    "DomainValueError",
    "Model",
    "ParseError",
    "generate_synthetic",
    "loss",
    "metric",
    "rank_from_scores",
]
