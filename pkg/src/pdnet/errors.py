"""Exception hierarchy shared by the library and the CLI.

Every error carries the process exit code the CLI maps it to.
"""


class PdnError(Exception):
    exit_code = 1


class DomainError(PdnError, ValueError):
    """Invalid argument values or shapes."""

    exit_code = 2


class UsageError(PdnError):
    exit_code = 2


class CapacityError(PdnError):
    exit_code = 3


class FormatError(PdnError):
    """Malformed or incompatible file contents."""

    exit_code = 4

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TrainingError(PdnError):
    exit_code = 5

    def __init__(self, message, epoch=None, batch=None, layer=None):
        parts = [message]
        if epoch is not None:
            parts.append(f"epoch {epoch}")
        if batch is not None:
            parts.append(f"batch {batch}")
        if layer is not None:
            parts.append(f"layer {layer}")
        super().__init__(", ".join(parts))
        self.reason = message
        self.epoch = epoch
        self.batch = batch
        self.layer = layer


class IncompatibleError(PdnError):
    exit_code = 6
