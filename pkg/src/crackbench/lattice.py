"""Nearest-neighbour structure of an ``m x n`` pixel lattice.

Pixels are flattened row-major, ``A[i, j] -> a[l]`` with ``l = j + n * i``.
"""

import numpy as np


def lattice_pairs(m: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(i, j)`` index arrays of 4-neighbour pairs with ``i < j``.

    Horizontal pairs ``(l, l + 1)`` skip the row wrap-around (``(l + 1) % n
    == 0``); vertical pairs are ``(l, l + n)``. Horizontal pairs come first.
    The pair count is ``m * (n - 1) + n * (m - 1)``.
    """
    idx = np.arange(m * n).reshape(m, n)
    hi = idx[:, :-1].ravel()
    hj = idx[:, 1:].ravel()
    vi = idx[:-1, :].ravel()
    vj = idx[1:, :].ravel()
    return np.concatenate([hi, vi]), np.concatenate([hj, vj])
