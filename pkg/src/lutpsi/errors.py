"""Exception types shared across the library."""


class LutPsiError(Exception):
    """Base class for all library errors."""


class NotFound(LutPsiError, KeyError):
    """Requested named object (parameter set, key) does not exist."""


class ParamValidationError(LutPsiError, ValueError):
    """A parameter-set invariant is violated; ``code`` names which one."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


class InvalidSubstitution(LutPsiError, ValueError):
    """Substitution exponent must be odd and in range."""


class IncompatibleParams(LutPsiError, ValueError):
    """Operands were produced under incompatible parameter sets."""


class OutOfRange(LutPsiError, IndexError):
    """Index argument outside its legal range."""


class NotSupported(LutPsiError, ValueError):
    """Requested variant is outside the supported surface."""


class KeyNotFound(LutPsiError, KeyError):
    """Key material for the requested operation is missing."""


class CollisionError(LutPsiError, RuntimeError):
    """Two distinct elements landed in the same hash bin."""

    def __init__(self, message: str, retries: int = 0):
        super().__init__(message)
        self.retries = retries


class WireError(LutPsiError):
    """Base class for framing and session errors."""


class TruncatedFrame(WireError):
    """Stream ended mid-frame."""


class ChecksumMismatch(WireError):
    """Frame payload failed its checksum."""


class VersionMismatch(WireError):
    """Peer speaks an unsupported protocol version."""


class UnknownMessageType(WireError):
    """Frame carries an unrecognized message type byte."""


class BadMagic(WireError):
    """Frame does not start with the protocol magic."""


class HandshakeError(WireError):
    """Peer rejected the session parameters."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code
