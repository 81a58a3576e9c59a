"""
Order-preserving parallel map on top of joblib
"""
from typing import Callable, Iterable, List, Optional, TypeVar

from joblib import Parallel, delayed

from pfkernel.utils.settings import get_settings

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(func: Callable[[T], R], items: Iterable[T], n_jobs: Optional[int] = None) -> List[R]:
    """
    Apply func to every item; results come back in input order.

    Args:
        func: picklable callable
        items: inputs
        n_jobs: worker count (None = PF_N_JOBS, 1 = inline)

    Returns:
        list of results, same order as items
    """
    items = list(items)
    if n_jobs is None:
        n_jobs = get_settings().n_jobs
    if n_jobs == 1 or len(items) < 2:
        return [func(item) for item in items]
    return Parallel(n_jobs=n_jobs)(delayed(func)(item) for item in items)
