"""Tests for mod-2 linear algebra."""

import numpy as np

from mpsprep.gf2 import gf2_rank, solve_gf2


class TestSolveGf2:
    def test_identity(self):
        x = solve_gf2(np.eye(3, dtype=np.uint8), np.array([1, 0, 1]))
        assert x.tolist() == [1, 0, 1]

    def test_solution_satisfies_system(self):
        rng = np.random.default_rng(0)
        h = rng.integers(0, 2, size=(4, 6), dtype=np.uint8)
        x_true = rng.integers(0, 2, size=6, dtype=np.uint8)
        s = h @ x_true % 2
        x = solve_gf2(h, s)
        assert x is not None
        assert np.array_equal(h.astype(int) @ x % 2, s)

    def test_inconsistent(self):
        h = np.array([[1, 1], [1, 1]], dtype=np.uint8)
        assert solve_gf2(h, np.array([1, 0])) is None

    def test_cycle_boundary(self):
        # incidence of a 4-cycle: only even charge patterns are boundaries
        h = np.array([[1, 0, 0, 1], [1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1]], dtype=np.uint8)
        assert solve_gf2(h, np.array([1, 1, 0, 0])) is not None
        assert solve_gf2(h, np.array([1, 0, 0, 0])) is None


class TestRank:
    def test_rank(self):
        h = np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]], dtype=np.uint8)
        assert gf2_rank(h) == 2

    def test_full_rank(self):
        assert gf2_rank(np.eye(4, dtype=np.uint8)) == 4
