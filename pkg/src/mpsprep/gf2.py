"""Linear algebra over GF(2) for byproduct and loop corrections."""

from __future__ import annotations

import numpy as np


def gf2_elimination(h: np.ndarray, s: np.ndarray):
    """Gauss-Jordan elimination of ``h x = s`` mod 2.

    Returns the reduced matrix, the reduced right-hand side and the pivot
    (rows, cols).
    """
    m, n = h.shape
    a = (np.asarray(h, dtype=np.uint8) & 1).copy()
    b = (np.asarray(s, dtype=np.uint8) & 1).copy()

    pivot_rows: list[int] = []
    pivot_cols: list[int] = []

    row = 0
    for col in range(n):
        if row >= m:
            break
        hits = np.nonzero(a[row:, col])[0]
        if hits.size == 0:
            continue
        pivot = row + int(hits[0])
        if pivot != row:
            a[[row, pivot]] = a[[pivot, row]]
            b[[row, pivot]] = b[[pivot, row]]
        pivot_rows.append(row)
        pivot_cols.append(col)
        for r in np.nonzero(a[:, col])[0]:
            if r != row:
                a[r, :] ^= a[row, :]
                b[r] ^= b[row]
        row += 1

    return a, b, (pivot_rows, pivot_cols)


def solve_gf2(h: np.ndarray, s: np.ndarray) -> np.ndarray | None:
    """One solution of ``h x = s`` mod 2 (free variables zero), or None if inconsistent."""
    h = np.atleast_2d(np.asarray(h, dtype=np.uint8))
    a, b, (rows, cols) = gf2_elimination(h, s)
    if np.any(b[len(rows):]):
        return None
    x = np.zeros(h.shape[1], dtype=np.uint8)
    for r, c in zip(rows, cols):
        x[c] = b[r]
    return x


def gf2_rank(h: np.ndarray) -> int:
    h = np.atleast_2d(np.asarray(h, dtype=np.uint8))
    _, _, (rows, _) = gf2_elimination(h, np.zeros(h.shape[0], dtype=np.uint8))
    return len(rows)
