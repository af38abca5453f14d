"""Exception types shared across the simulator.

The CLI maps :class:`ConfigError` to exit code 3 and every other
:class:`DrangeError` to exit code 1.
"""


class DrangeError(Exception):
    """Base class for simulator errors."""


class ConfigError(DrangeError, ValueError):
    """Invalid configuration value. ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class AddressError(DrangeError, IndexError):
    """A cell, word or region address falls outside the device geometry."""


class ProtocolError(DrangeError):
    """A command sequence violates the DRAM protocol."""

    def __init__(self, index, message):
        self.index = index
        super().__init__(f"command {index}: {message}")


class InputError(DrangeError, ValueError):
    """Invalid argument to a pure computation."""


class LengthError(InputError):
    """Bit stream too short for a statistical test."""

    def __init__(self, test, minimum, got):
        self.test = test
        self.minimum = minimum
        super().__init__(f"{test} needs at least {minimum} bits, got {got}")


class UnavailableError(DrangeError):
    """No RNG cells are available for generation."""
