import functools
import logging

import typer

from agent.checkpoint import CheckpointError
from agent.network import ShapeMismatchError
from agent.ppo import NumericalError
from core.config import ConfigValidationError
from core.envsim import EnvProtocolError, MeanTraceError
from core.readout import DegenerateWeightsError, FitConvergenceError, SingularCovarianceError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ERROR = 3

_CONFIG_ERRORS = (
    ConfigValidationError,
    CheckpointError,
    ShapeMismatchError,
    EnvProtocolError,
    MeanTraceError,
)
_NUMERICAL_ERRORS = (
    NumericalError,
    FitConvergenceError,
    SingularCovarianceError,
    DegenerateWeightsError,
    FloatingPointError,
)


class RunError(Exception):
    """A harness-level failure with a message fit for the terminal."""

    def __init__(self, message: str, exit_code: int = EXIT_CONFIG_ERROR):
        super().__init__(message)
        self.message = message
        self.exit_code = exit_code


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, RunError):
        return exc.exit_code
    if isinstance(exc, _CONFIG_ERRORS):
        return EXIT_CONFIG_ERROR
    if isinstance(exc, _NUMERICAL_ERRORS):
        return EXIT_NUMERICAL_ERROR
    return 1


def handle_errors(func):
    """Turn domain exceptions raised by a command into exit codes."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except typer.Exit:
            raise
        except (RunError, *_CONFIG_ERRORS) as exc:
            logger.error("Configuration error: %s", exc)
            raise typer.Exit(code=exit_code_for(exc))
        except _NUMERICAL_ERRORS as exc:
            details = getattr(exc, "diagnostics", None)
            logger.error("Numerical failure: %s%s", exc, f" {details}" if details else "")
            raise typer.Exit(code=EXIT_NUMERICAL_ERROR)

    return wrapper
