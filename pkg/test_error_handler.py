"""
Unit tests for the error hierarchy and exit-code mapping.
"""
import io

import pytest

from clustering import MissingCurvature
from curvature import SingularSystem
from error_handler import (
    EXIT_DATA,
    EXIT_NUMERICAL,
    EXIT_USAGE,
    CliErrorHandler,
    ConfigError,
    CurvatureError,
    DataError,
    NumericalError,
    UsageError,
)
from local_pca import ConvergenceFailure
from pointcloud import DegenerateCloud, ParseError
from synthetic import CholeskyFailure


class TestErrorHierarchy:
    """Test cases for error categories"""

    @pytest.mark.parametrize("error_class,category", [
        (ParseError, DataError),
        (DegenerateCloud, DataError),
        (MissingCurvature, DataError),
        (ConfigError, UsageError),
        (SingularSystem, NumericalError),
        (ConvergenceFailure, NumericalError),
        (CholeskyFailure, NumericalError),
    ])
    def test_categories(self, error_class, category):
        assert issubclass(error_class, category)
        assert issubclass(error_class, CurvatureError)

    def test_message_and_override(self):
        error = CurvatureError("boom", exit_code=EXIT_DATA)
        assert error.message == "boom"
        assert error.exit_code == EXIT_DATA
        assert str(error) == "boom"


class TestCliErrorHandler:
    """Test cases for exit codes and user messages"""

    @pytest.mark.parametrize("error,code", [
        (UsageError("bad flag"), EXIT_USAGE),
        (ConfigError("bad key"), EXIT_USAGE),
        (ParseError("bad token"), EXIT_DATA),
        (FileNotFoundError("missing.xyz"), EXIT_DATA),
        (SingularSystem("cond"), EXIT_NUMERICAL),
        (RuntimeError("surprise"), EXIT_NUMERICAL),
    ])
    def test_exit_codes(self, error, code):
        assert CliErrorHandler.exit_code_for(error) == code

    def test_user_messages(self):
        assert CliErrorHandler.user_message(UsageError("x")) == "usage error: x"
        assert CliErrorHandler.user_message(DegenerateCloud("y")) == "data error: y"
        assert CliErrorHandler.user_message(ConvergenceFailure("z")) == "numerical failure: z"
        assert CliErrorHandler.user_message(KeyError("k")).startswith("unexpected KeyError")

    def test_handle_reports_and_returns_code(self):
        stream = io.StringIO()
        code = CliErrorHandler.handle(ParseError("line 3: non-numeric token"), command="estimate", stream=stream)
        assert code == EXIT_DATA
        assert stream.getvalue() == "data error: line 3: non-numeric token\n"

    def test_handle_unexpected_error(self):
        stream = io.StringIO()
        try:
            raise ValueError("odd")
        except ValueError as e:
            code = CliErrorHandler.handle(e, stream=stream)
        assert code == EXIT_NUMERICAL
        assert "unexpected ValueError" in stream.getvalue()
