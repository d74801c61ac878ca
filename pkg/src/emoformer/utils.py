import math
from concurrent.futures import ThreadPoolExecutor
from typing import Annotated, Callable, Collection, Iterable

type NonEmpty[T] = Annotated[Collection[T], 'Non empty Collection of T.']


def format_human_readable(strings: NonEmpty[str]) -> str:
    """
    Returns a human-readable representation of a list of strings,
    separating the first values by a comma and the last one with "and".
    """
    if len(strings) == 1:
        return next(iter(strings))
    else:
        *init, last = strings
        initial = ', '.join(init)
        return f'{initial} and {last}'


def round_half_up(value: float) -> int:
    """Rounds to the nearest integer, with halves rounded away from zero for positive values."""
    return int(math.floor(value + 0.5))


def is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def parallel_map[X, Y](f: Callable[[X], Y], xs: Iterable[X], jobs: int = 1) -> list[Y]:
    """
    Applies f to every element, using up to `jobs` worker threads.
    Results are returned in input order, independent of the schedule.
    """
    if jobs <= 1:
        return [f(x) for x in xs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(f, xs))
