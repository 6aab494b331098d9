"""Exception hierarchy shared by every aalsim subsystem."""


class AalError(Exception):
    """Base class for all aalsim errors."""


class InvalidArgument(AalError, ValueError):
    pass


# -- memory / transport -------------------------------------------------------

class PoolExhausted(AalError):
    pass


class PoolTerminated(AalError):
    pass


class PoolBusy(AalError):
    pass


class BufferTooLarge(AalError):
    pass


class BufferTooSmall(AalError):
    pass


class BufferNotOwned(AalError):
    """A buffer was submitted or freed while not held by the application."""


class NotOwned(BufferNotOwned):
    pass


class DoubleFree(AalError):
    pass


class QueueFull(AalError):
    pass


class UnknownQueue(AalError, KeyError):
    pass


class InvalidCallback(AalError):
    pass


class NoDataAvailable(AalError):
    pass


# -- management ---------------------------------------------------------------

class UnknownDevice(AalError, KeyError):
    pass


class IllegalTransition(AalError):
    pass


class IllegalState(AalError):
    pass


class UnknownKey(AalError, KeyError):
    pass


class DeviceBusy(AalError):
    pass


# -- core ---------------------------------------------------------------------

class UnsupportedProfile(AalError):
    pass


class ProfileMismatch(AalError):
    pass


class RegistrationConflict(AalError):
    pass


# -- profiles -----------------------------------------------------------------

class LengthMismatch(AalError, ValueError):
    pass


class LengthNotDivisible(AalError, ValueError):
    pass


class InputTooShort(AalError, ValueError):
    pass


# -- fronthaul ----------------------------------------------------------------

class PacketError(AalError, ValueError):
    pass


class Truncated(PacketError):
    pass


class BadVersion(PacketError):
    pass


class PayloadLengthMismatch(PacketError, LengthMismatch):
    pass


class MtuTooSmall(AalError, ValueError):
    pass


class DuplicateSeq(AalError):
    pass


class UnknownSlot(AalError, KeyError):
    pass


class MissingPackets(AalError):
    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__(f"missing packets: {self.missing}")


# -- simulator / config -------------------------------------------------------

class ConfigInvalid(AalError, ValueError):
    """Scenario configuration failed validation.

    ``diagnostics`` is a list of ``(field_path, message)`` pairs.
    """

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = [f"{path}: {msg}" for path, msg in self.diagnostics]
        super().__init__("; ".join(lines))
