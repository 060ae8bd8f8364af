"""Order-preserving parallel map for independent grid work."""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(func: Callable[[T], R], items: Iterable[T], threads: int = 1) -> list[R]:
    """Apply func to every item, returning results in input order.

    Args:
        func: Pure function of one grid item
        items: Grid items
        threads: Worker threads, 1 runs inline

    Returns:
        List of results in the order of items
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))
