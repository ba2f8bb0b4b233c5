"""Exception hierarchy shared across the package."""


class ChoiceNetError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ChoiceNetError):
    """Invalid configuration: bad shapes, missing fields, unknown identifiers."""


class NumericDomainError(ChoiceNetError):
    """An operation was evaluated outside its numeric domain."""


class ContractError(ChoiceNetError):
    """An API contract was violated (e.g. backward on a non-scalar)."""


class InputError(ChoiceNetError):
    """Caller-supplied runtime data is invalid (non-finite, wrong encoding)."""


class DataError(ChoiceNetError):
    """A data file failed to parse or is internally inconsistent."""


class DegenerateInputError(ChoiceNetError):
    """Statistic undefined on this input (zero variance, zero MAD)."""
