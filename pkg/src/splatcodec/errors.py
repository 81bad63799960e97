"""Exception hierarchy and process exit codes.

Exit code contract: 0 success, 1 usage error, 2 data/format error,
3 external backend failure.
"""

from __future__ import annotations

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3


class SplatCodecError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = EXIT_DATA


class ValidationError(SplatCodecError, ValueError):
    """Input violates a documented invariant (bad shapes, ranges, cameras)."""


class BehindCameraError(ValidationError):
    """A Gaussian has non-positive camera-space depth; the encoder refuses it."""

    def __init__(self, view_index: int, record_index: int, depth: float):
        self.view_index = view_index
        self.record_index = record_index
        self.depth = depth
        super().__init__(
            f"view {view_index}, record {record_index}: camera-space depth "
            f"{depth:.6g} <= 0; scene cannot be encoded from this camera"
        )


class FormatError(SplatCodecError):
    """A file is not in the expected format (bad magic, unsupported version)."""


class CorruptionError(FormatError):
    """A file or payload is structurally valid but truncated or inconsistent."""


class BitstreamError(CorruptionError):
    """Entropy-coded payload cannot be decoded; carries the failing bit offset."""

    def __init__(self, message: str, bit_offset: int):
        self.bit_offset = bit_offset
        super().__init__(f"{message} (bit offset {bit_offset})")


class BackendUnavailableError(SplatCodecError):
    """An external codec backend is not installed or not executable."""

    exit_code = EXIT_BACKEND


class ExternalCodecError(SplatCodecError):
    """An external codec process failed or produced unusable output."""

    exit_code = EXIT_BACKEND
