"""Error taxonomy mapped to CLI exit codes."""


class UsageError(Exception):
    """Bad arguments or configuration (exit code 1)."""


class DataError(Exception):
    """Missing/corrupt dataset or checkpoint, version mismatch (exit code 2)."""


class NumericalError(Exception):
    """Non-finite values during training/evaluation (exit code 3)."""
