"""Exception types shared across the package."""


class AdversimError(Exception):
    """Base class for all package errors."""


class SchemaError(AdversimError):
    """A file does not match the expected JSON schema (missing field, wrong type)."""


class ValidationError(AdversimError):
    """A structural invariant is violated; the message names which one."""


class IoError(AdversimError):
    """Filesystem read/write failure."""


class ConfigError(AdversimError):
    """Bad configuration values (e.g. negative template weights)."""


class ParseError(AdversimError):
    """Scoring DSL parse failure with position and expected-token info."""

    def __init__(self, message: str, position: int | None = None,
                 expected: tuple[str, ...] = ()):
        super().__init__(message)
        self.position = position
        self.expected = expected


class UnknownIdentifier(ParseError):
    """An identifier in a scoring program is not a known feature name."""

    def __init__(self, name: str, position: int | None = None):
        super().__init__(f"unknown identifier {name!r}", position=position)
        self.name = name


class TooFewVehicles(AdversimError):
    """Asked to identify more attackers than background vehicles exist."""


class ClientError(AdversimError):
    """Chat backend transport or protocol failure."""


class GenerationError(AdversimError):
    """Repeated unparseable replies from the chat backend."""


class StructureViolation(AdversimError):
    """A coefficient-only edit changed the program structure despite retries."""


class OverrideError(AdversimError):
    """An adversarial plan references a vehicle id not present in the scenario."""


class EmptyBuffer(AdversimError):
    """Ego trajectory buffer queried while empty."""


class LengthMismatch(AdversimError):
    """Two trajectories expected on a common timebase have different lengths."""


class EmptyInput(AdversimError):
    """A metric was asked to summarize an empty collection."""


class TooShort(AdversimError):
    """A track is too short for the requested finite-difference metric."""
