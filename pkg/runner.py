import asyncio
from concurrent.futures import ThreadPoolExecutor
from functools import partial
from typing import Any, Callable, Optional

import typer
from mcp.server.fastmcp.utilities.logging import get_logger

from config import get_settings
from exceptions import (
    BudgetError,
    CapabilityError,
    ComputationTimeoutError,
    SizeRefusalError,
    SplittingError,
    WindowInstabilityError,
)

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CAPABILITY = 2
EXIT_LIMIT = 3


async def run_bounded(
    what: str,
    func: Callable[..., Any],
    *args: Any,
    timeout_s: Optional[float] = None,
    **kwargs: Any,
) -> Any:
    """
    Run a blocking computation in a worker thread under a time limit.

    The worker is abandoned on timeout, not interrupted; vertex budgets bound
    how long it keeps running.

    Args:
        what: Short description used in logs and errors (e.g., "chop example71")
        func: The computation to run
        timeout_s: Time limit in seconds; defaults to the configured timeout

    Returns:
        Whatever func returns

    Raises:
        ComputationTimeoutError: If the computation does not finish in time
    """
    if timeout_s is None:
        timeout_s = get_settings().timeout_s
    if timeout_s <= 0:
        raise ValueError("timeout_s must be positive")

    logger.info("running %s (limit %ss)", what, timeout_s)
    loop = asyncio.get_running_loop()
    executor = ThreadPoolExecutor(max_workers=1, thread_name_prefix="splitkit")
    try:
        return await asyncio.wait_for(loop.run_in_executor(executor, partial(func, *args, **kwargs)), timeout=timeout_s)
    except asyncio.TimeoutError:
        raise ComputationTimeoutError(what, timeout_s)
    finally:
        executor.shutdown(wait=False)


def run_sync(what: str, func: Callable[..., Any], *args: Any, timeout_s: Optional[float] = None, **kwargs: Any) -> Any:
    """Blocking wrapper around run_bounded for command-line use."""
    return asyncio.run(run_bounded(what, func, *args, timeout_s=timeout_s, **kwargs))


def exit_code(error: BaseException) -> int:
    """Process exit code for an error raised by a command."""
    if isinstance(error, CapabilityError):
        return EXIT_CAPABILITY
    if isinstance(error, (BudgetError, ComputationTimeoutError, SizeRefusalError, WindowInstabilityError)):
        return EXIT_LIMIT
    return EXIT_INPUT


def run_command(what: str, func: Callable[..., Any], *args: Any, timeout_s: Optional[float] = None, **kwargs: Any) -> Any:
    """
    run_sync for a typer command.

    Library errors, bad parameters and missing files print one line on stderr
    and end the command with the matching exit code.

    Raises:
        typer.Exit: On any handled error
    """
    try:
        return run_sync(what, func, *args, timeout_s=timeout_s, **kwargs)
    except (SplittingError, ValueError, FileNotFoundError) as e:
        code = exit_code(e)
        logger.warning("%s failed with exit code %d: %s", what, code, e)
        typer.echo(f"error: {e}", err=True)
        raise typer.Exit(code)
