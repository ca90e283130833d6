"""Parameter and dropout enumerations shared by the exhaustive tests."""

from itertools import combinations


def param_sets(n_max, n_min=1):
    for n in range(n_min, n_max + 1):
        for r_r in range(1, n + 1):
            for k_c in range(1, r_r + 1):
                yield n, r_r, k_c


def subsets(n, size):
    return combinations(range(1, n + 1), size)


def dropout_sets(n, max_size):
    for k in range(0, max_size + 1):
        yield from subsets(n, k)
