"""Exception hierarchy shared by the toolkit and mapped to CLI exit codes."""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(ToolkitError):
    """Bad arguments, inconsistent shapes, malformed files. CLI exit code 2."""


class SizeError(ValidationError):
    """A requested dense object exceeds the configured size cap."""


class NumericalError(ToolkitError):
    """An iterative solve diverged or produced non-finite values. CLI exit code 3."""


class PluginError(ToolkitError):
    """An external denoiser plugin failed to start, crashed, or timed out.

    CLI exit code 4. ``trace`` carries the partial reconstruction trace when
    the failure happened inside a running cascade.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ProtocolError(PluginError):
    """An external plugin violated the wire protocol (bad magic, version,
    status byte, or payload dimensions)."""


class PluginTimeoutError(PluginError):
    """An external plugin did not answer within the configured timeout."""
