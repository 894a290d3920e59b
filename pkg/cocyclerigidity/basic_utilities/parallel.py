from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

from loguru import logger

T = TypeVar('T')
R = TypeVar('R')


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """Map fn over items on a thread pool; results keep the input order"""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    logger.debug(f"Mapping {len(items)} items over {threads} threads")
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(fn, items))
