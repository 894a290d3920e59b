from collections import defaultdict
from enum import Enum
from functools import wraps
from typing import Optional

from loguru import logger

from .timer import Timer


class Metric(Enum):
    DURATION = ('duration', 'ms')
    COUNT = ('count', 'calls')

    def __init__(self, type_name: str, unit: str):
        self.type_name = type_name
        self.unit = unit


class PerformanceMonitor:
    """Accumulates stage timings while active; timings go to the log only"""
    _instance: Optional['PerformanceMonitor'] = None

    def __init__(self):
        self.totals: dict[str, dict[Metric, float]] = defaultdict(lambda: defaultdict(float))

    @staticmethod
    def measure(process: str, *metrics: Metric):
        """Decorator recording the given metrics for each call of the wrapped stage

        Args:
            process: name of the stage to measure
            *metrics: variable number of metrics to record
        """
        metrics = metrics or (Metric.DURATION, Metric.COUNT)

        def decorator(func):
            @wraps(func)
            def wrapper(*args, **kwargs):
                monitor = PerformanceMonitor._instance

                # If no monitor is active, just run the function
                if monitor is None:
                    return func(*args, **kwargs)

                with Timer() as timer:
                    result = func(*args, **kwargs)
                monitor.record(process, metrics, timer.elapsed(_format="ms"))
                return result
            return wrapper
        return decorator

    def record(self, process: str, metrics, duration_ms: float) -> None:
        for metric in metrics:
            self.totals[process][metric] += duration_ms if metric is Metric.DURATION else 1
        logger.debug(f"{process}: {duration_ms:.1f} ms")

    def start(self) -> 'PerformanceMonitor':
        PerformanceMonitor._instance = self
        return self

    def stop(self) -> None:
        """Deactivate and log the totals"""
        if PerformanceMonitor._instance is self:
            PerformanceMonitor._instance = None
        for process, values in sorted(self.totals.items()):
            summary = ", ".join(f"{m.type_name}={v:.1f} {m.unit}" for m, v in values.items())
            logger.debug(f"Performance {process}: {summary}")
