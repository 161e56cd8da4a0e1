from __future__ import annotations


class ConfigError(ValueError):
    """Invalid experiment or family configuration."""


class CapExceededError(RuntimeError):
    """A configured resource cap would be exceeded."""

    def __init__(self, what: str, requested: int | float, cap: int | float) -> None:
        self.what = what
        self.requested = requested
        self.cap = cap
        super().__init__(f"{what}: requested {requested} exceeds cap {cap}")


class KernelViolationError(ValueError):
    """A pair partition joins positions carrying different letters."""


class UnknownLabelError(KeyError):
    """A word references a label that is not declared."""

    def __init__(self, label: object, available: object = None) -> None:
        self.label = label
        message = f"Unknown label '{label}'"
        if available is not None:
            message += f". Available: {available}"
        super().__init__(message)

    def __str__(self) -> str:
        return str(self.args[0])


class NumericalResidueError(ArithmeticError):
    """A sample value carries an imaginary part where it must vanish."""
