"""Exception types shared across the package."""


class SpinChainError(Exception):
    """Base class for all package-specific errors."""


class CapacityError(SpinChainError):
    """Requested chain length exceeds what the chosen backend can handle."""


class FrameError(SpinChainError):
    """State-vector frame or time tag does not match the operation's contract."""


class PairingError(SpinChainError):
    """Two-level partition broke down (a state's best partner was not mutual).

    This typically signals that the pulse parameters sit near an accidental
    degeneracy where two transitions of one state compete, e.g. close to a
    fake-resonance value of the coupling.
    """


class ProtocolError(SpinChainError):
    """Pulse sequence is malformed or unsupported for the requested operation."""


class NumericalError(SpinChainError):
    """A numerical guarantee (norm conservation, finite values) was violated."""
