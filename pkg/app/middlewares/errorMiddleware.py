import functools
import logging
import sys
from typing import Callable

from pydantic import ValidationError

from app.utils.exceptions import BandAssignmentError

logger = logging.getLogger(__name__)

RUNTIME_FAILURE = 2


def handle_cli_errors(handler: Callable[..., int]) -> Callable[..., int]:
    """Wrap a subcommand so every failure becomes a message on stderr and an exit status."""

    @functools.wraps(handler)
    def wrapper(*args, **kwargs) -> int:
        try:
            return handler(*args, **kwargs)
        except BandAssignmentError as err:
            logger.debug("%s failed", handler.__name__, exc_info=True)
            print(f"error: {err.detail}", file=sys.stderr)
            return err.exit_code
        except OSError as err:
            name = err.filename if err.filename is not None else ""
            print(f"error: {name}: {err.strerror or err}", file=sys.stderr)
            return RUNTIME_FAILURE
        except ValidationError as err:
            first = err.errors()[0]
            where = ".".join(str(p) for p in first["loc"])
            print(f"error: invalid value for {where or err.title}: {first['msg']}", file=sys.stderr)
            return RUNTIME_FAILURE
        except Exception as err:
            logger.exception("unexpected failure in %s", handler.__name__)
            print(f"error: {err}", file=sys.stderr)
            return RUNTIME_FAILURE

    return wrapper
