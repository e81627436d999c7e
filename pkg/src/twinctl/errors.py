"""Exception hierarchy.

Every error carries a short machine-readable ``code`` and the process exit
status the CLI maps it to.
"""


class TwinError(Exception):
    code = "E_TWIN"
    exit_code = 4


class UsageError(TwinError):
    code = "E_USAGE"
    exit_code = 2


class ConfigError(UsageError):
    code = "E_CONFIG"


class MissingPrerequisiteError(TwinError):
    code = "E_MISSING"
    exit_code = 3


# -- data / numerics (exit 5) -------------------------------------------------

class DataError(TwinError, ValueError):
    code = "E_DATA"
    exit_code = 5


class QuantityError(DataError):
    code = "E_QUANTITY"


class RangeError(DataError):
    code = "E_RANGE"

    def __init__(self, message, domain=None):
        super().__init__(message)
        self.domain = domain


class ShapeError(DataError):
    code = "E_SHAPE"


class InsufficientDataError(DataError):
    code = "E_INSUFFICIENT"


class SingularFitError(DataError):
    code = "E_SINGULAR"


class DegenerateStateError(DataError):
    code = "E_DEGENERATE"


class ModelDomainError(DataError):
    code = "E_MODEL_DOMAIN"


class ExtrapolationError(DataError):
    code = "E_EXTRAPOLATION"


class DamagePrecededError(DataError):
    code = "E_DAMAGE"

    def __init__(self, message, sample_id=None, damage=None):
        super().__init__(message)
        self.sample_id = sample_id
        self.damage = damage


class IngestionError(DataError):
    code = "E_INGEST"

    def __init__(self, message, row=None, source=None):
        if row is not None:
            message = f"{source or '<input>'}:{row}: {message}"
        super().__init__(message)
        self.row = row
        self.source = source


class SchemaVersionError(DataError):
    code = "E_SCHEMA"


class CodecError(DataError):
    code = "E_CODEC"


class FrameError(CodecError):
    """Malformed or oversized wire frame; ``offset`` is the offending byte."""

    code = "E_FRAME"

    def __init__(self, message, offset=0):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


# -- device / protocol (exit 4) -----------------------------------------------

class DeviceError(TwinError):
    code = "E_DEVICE"


class DeviceTimeoutError(DeviceError):
    code = "E_TIMEOUT"


class DeviceReplyError(DeviceError):
    code = "E_DEVICE_REPLY"


class ActuationLimitError(DeviceError, ValueError):
    code = "E_LIMIT"

    def __init__(self, message, bound=None):
        super().__init__(message)
        self.bound = bound


class ActuationError(DeviceError):
    code = "E_ACTUATION"


class ContactFailureError(DeviceError):
    code = "E_CONTACT"


class ProtocolSpecError(TwinError, ValueError):
    code = "E_SPEC"
    exit_code = 2


class ExtrapolationWarning(UserWarning):
    pass
