# dcda/core/exceptions.py
"""Custom exceptions"""

from typing import Any, Dict, List, Optional, Tuple


class DCDAException(Exception):
    """Base exception for the DCDA simulator"""
    pass


class ConfigurationError(DCDAException):
    """Invalid or incompatible configuration.

    ``errors`` holds ``(line, key, message)`` entries when the error comes
    from a config file; ``line`` is None for programmatic configs.
    """

    def __init__(self, message: str, errors: Optional[List[Tuple[Optional[int], str, str]]] = None):
        super().__init__(message)
        self.errors = errors or []

    def __str__(self) -> str:
        if not self.errors:
            return super().__str__()
        lines = [super().__str__()]
        for line, key, msg in self.errors:
            where = f"line {line}" if line is not None else "config"
            lines.append(f"  {where}: {key}: {msg}")
        return "\n".join(lines)


class DomainError(DCDAException):
    """Input outside the domain of an operation"""
    pass


class NumericalError(DCDAException):
    """Numerical procedure failed; ``diagnostics`` says where"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NumericalDivergenceError(NumericalError):
    """Simulation state became non-finite"""
    pass


class DataProcessingException(DCDAException):
    """Exception for dataset generation and import errors"""
    pass


class FileHandlingException(DCDAException):
    """Exception for file handling errors"""
    pass


class CertificateViolation(DCDAException):
    """A simulated gap exceeded its deterministic bound"""
    pass
