from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

from crystal_certificates.default_settings import configure, runtime_overrides

T = TypeVar("T")
R = TypeVar("R")


def _init_worker(overrides: dict):
    configure(**overrides)


def ordered_map(fn: Callable[[T], R], items: Iterable[T], parallel: int = 1) -> list[R]:
    """
    Map `fn` over `items`, in worker processes when parallel > 1. Results come
    back in input order, so callers reduce them deterministically whatever the
    worker count. `fn` must be a module-level function.
    """
    items = list(items)
    if parallel <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(
        max_workers=min(parallel, len(items)),
        initializer=_init_worker,
        initargs=(runtime_overrides(),),
    ) as pool:
        return list(pool.map(fn, items))
