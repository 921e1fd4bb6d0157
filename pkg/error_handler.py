"""
Error handling utilities for the curvature command-line tool.
"""
import logging
import sys
from typing import Optional, TextIO

from logging_config import log_cli_error

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class CurvatureError(Exception):
    """Base exception for all library and CLI errors"""
    exit_code = EXIT_NUMERICAL

    def __init__(self, message: str, exit_code: Optional[int] = None):
        self.message = message
        if exit_code is not None:
            self.exit_code = exit_code
        super().__init__(message)


class UsageError(CurvatureError):
    """Invalid command-line flags or parameter values"""
    exit_code = EXIT_USAGE


class DataError(CurvatureError):
    """Input data that cannot be processed as given"""
    exit_code = EXIT_DATA


class NumericalError(CurvatureError):
    """A numerical routine failed to produce a trustworthy result"""
    exit_code = EXIT_NUMERICAL


class ConfigError(UsageError):
    """Malformed or unknown entries in a --config file"""


class CliErrorHandler:
    """Centralized mapping from exceptions to exit codes and messages"""

    @staticmethod
    def exit_code_for(error: BaseException) -> int:
        """
        Resolve the process exit code for an exception

        Args:
            error: The exception that stopped the command

        Returns:
            1 for usage errors, 2 for data errors, 3 for numerical failures
        """
        if isinstance(error, CurvatureError):
            return error.exit_code
        if isinstance(error, (FileNotFoundError, IsADirectoryError, PermissionError)):
            return EXIT_DATA
        return EXIT_NUMERICAL

    @staticmethod
    def user_message(error: BaseException) -> str:
        """Short one-line message suitable for stderr"""
        if isinstance(error, UsageError):
            return f"usage error: {error.message}"
        if isinstance(error, DataError):
            return f"data error: {error.message}"
        if isinstance(error, NumericalError):
            return f"numerical failure: {error.message}"
        if isinstance(error, OSError):
            return f"i/o error: {error}"
        return f"unexpected {type(error).__name__}: {error}"

    @staticmethod
    def handle(
        error: BaseException,
        command: Optional[str] = None,
        stream: Optional[TextIO] = None,
    ) -> int:
        """
        Log an error with structured context and report it to the user

        Args:
            error: The exception raised by a command
            command: Name of the CLI command that was running
            stream: Where the one-line message goes (stderr by default)

        Returns:
            Exit code for the process
        """
        code = CliErrorHandler.exit_code_for(error)
        extra = {"error_type": type(error).__name__}
        if command:
            extra["command"] = command

        if code == EXIT_NUMERICAL and not isinstance(error, CurvatureError):
            log_cli_error(logger, error, extra)
        else:
            logger.error(f"Command {command or 'cli'} failed: {error}", extra=extra)

        out = stream if stream is not None else sys.stderr
        try:
            out.write(CliErrorHandler.user_message(error) + "\n")
        except Exception as write_error:
            logger.error(f"Failed to report error to user: {write_error}")
        return code
