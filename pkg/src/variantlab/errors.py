"""Shared error types."""


class ConfigurationError(Exception):
    """A config value, path, or matrix entry is missing or inconsistent."""


class InfrastructureError(Exception):
    """An infrastructure dependency failed (store, runner, backend transport)."""


class JudgeUnavailableError(Exception):
    """The redundancy judge cannot answer right now; the gate must fail closed."""
