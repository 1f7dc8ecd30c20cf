"""Python bindings for the ccfl federated optimisation core."""

from ccfedavg._ccfl import (
    Config,
    ConfigError,
    DivergenceError,
    Error,
    Federation,
    InvalidArgument,
    IoError,
    assign_budgets,
    budgets,
    canonical_method,
    probe_lemma2,
    read_metrics,
    run_efficiency,
    run_experiment,
    run_grid_rw,
    two_group_budgets,
)

__all__ = [
    "Config",
    "ConfigError",
    "DivergenceError",
    "Error",
    "Federation",
    "InvalidArgument",
    "IoError",
    "assign_budgets",
    "budgets",
    "canonical_method",
    "make_config",
    "probe_lemma2",
    "read_metrics",
    "run_efficiency",
    "run_experiment",
    "run_grid_rw",
    "two_group_budgets",
]


def _text(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(_text(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def make_config(path=None, **overrides):
    """Builds a Config from an optional file plus key=value overrides."""
    config = Config.load(path) if path is not None else Config()
    for key, value in overrides.items():
        config.set(key, _text(value))
    config.validate()
    return config
