"""Exception hierarchy shared by all pipeline stages."""

from __future__ import annotations


class RegKGError(Exception):
    """Base class for every error raised by this package."""

    code = "error"


class FormatError(RegKGError):
    code = "format_error"

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyDocumentError(FormatError):
    code = "empty_document"


class LoadError(FormatError):
    code = "load_error"


class IntegrityError(RegKGError):
    code = "integrity_error"


class NotFoundError(RegKGError):
    code = "not_found"


class AmbiguityError(RegKGError):
    code = "ambiguous"

    def __init__(self, message: str, candidates: list[str]) -> None:
        self.candidates = candidates
        super().__init__(f"{message}: {candidates}")


class ConfigError(RegKGError):
    code = "config_error"


class DomainError(RegKGError):
    code = "domain_error"


class StageError(RegKGError):
    code = "stage_error"

    def __init__(self, stage: str, cause: Exception) -> None:
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")


def error_payload(exc: BaseException) -> dict:
    """Machine-readable form used by the CLI and the HTTP facade."""
    body = {
        "code": getattr(exc, "code", "internal_error"),
        "message": str(exc),
        "type": type(exc).__name__,
    }
    for attr in ("line", "candidates", "stage"):
        value = getattr(exc, attr, None)
        if value is not None:
            body[attr] = value
    return {"error": body}
