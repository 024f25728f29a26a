"""Tracing module.

Lightweight tracing utilities for timing and logging pipeline stages:
- TraceSpan context manager for manual stage tracing (yields a Span whose
  duration_s is filled in on exit; the benchmark reads it)
- trace_stage decorator for automatic function tracing
"""

import inspect
import time
from contextlib import contextmanager
from dataclasses import dataclass
from functools import wraps
from logging import Logger
from typing import Callable, Iterator, Optional

from observability.logging_config import get_logger


@dataclass
class Span:
    """Timing record of one traced stage."""

    stage_name: str
    start: float = 0.0
    duration_s: float = 0.0
    failed: bool = False


@contextmanager
def TraceSpan(
    logger: Optional[Logger] = None,
    stage_name: str = "unknown",
    level: str = "info",
) -> Iterator[Span]:
    """
    Context manager for tracing pipeline stages.

    Logs start and end, measures the duration on the monotonic clock and
    re-raises any exception after logging it.

    Args:
        logger: Logger instance (defaults to the "ice-emulator" logger)
        stage_name: Name of the stage being traced
        level: Log method used for the start/finish lines ("info", "debug")

    Example:
        >>> with TraceSpan(logger, stage_name="oracle-sweep") as span:
        ...     run_sweep()
        >>> span.duration_s
    """
    if logger is None:
        logger = get_logger("ice-emulator")
    log = getattr(logger, level)

    span = Span(stage_name=stage_name)
    log(f"Starting stage: {stage_name}")
    span.start = time.monotonic()

    try:
        yield span
        span.duration_s = time.monotonic() - span.start
        log(f"Finished stage: {stage_name} in {span.duration_s * 1000:.2f} ms")

    except Exception as e:
        span.duration_s = time.monotonic() - span.start
        span.failed = True
        logger.error(
            f"Failed stage: {stage_name} after {span.duration_s * 1000:.2f} ms - {type(e).__name__}: {str(e)}"
        )
        raise


def trace_stage(stage_name: str):
    """
    Decorator tracing a sync or async function as a pipeline stage.

    Example:
        >>> @trace_stage("train")
        ... def run_training():
        ...     ...
    """
    def decorator(func: Callable) -> Callable:
        if inspect.iscoroutinefunction(func):
            @wraps(func)
            async def async_wrapper(*args, **kwargs):
                logger = get_logger(func.__module__ or "ice-emulator")
                with TraceSpan(logger, stage_name=stage_name):
                    return await func(*args, **kwargs)
            return async_wrapper

        @wraps(func)
        def sync_wrapper(*args, **kwargs):
            logger = get_logger(func.__module__ or "ice-emulator")
            with TraceSpan(logger, stage_name=stage_name):
                return func(*args, **kwargs)
        return sync_wrapper

    return decorator
