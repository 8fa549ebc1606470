"""Exception types shared across the toolkit."""


class TeamliftError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(TeamliftError):
    """Invalid configuration value or malformed config file."""


class GenerationError(TeamliftError):
    """Synthetic data generation cannot satisfy its contract."""


class LeakageError(TeamliftError):
    """A feature computation would read data at or after the cutoff date."""


class SchemaError(TeamliftError):
    """Feature vector or matrix does not match the expected schema."""


class BudgetError(TeamliftError):
    """A simulation request exceeds the configured compute budget."""
