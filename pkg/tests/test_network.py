"""Tests for labelled dense tensor networks."""

import numpy as np
import pytest

from mpsprep.linalg import DimensionError, ShapeError
from mpsprep.network import Node, TensorNetwork


class TestTensorNetwork:
    def test_matrix_chain(self):
        rng = np.random.default_rng(0)
        a, b = rng.normal(size=(2, 3)), rng.normal(size=(3, 4))
        net = TensorNetwork([Node(a, ("i", "k")), Node(b, ("k", "j"))], output=["i", "j"])
        assert net.shape == (2, 4)
        assert np.allclose(net.contract(), a @ b)

    def test_output_order(self):
        a = np.arange(6.0).reshape(2, 3)
        net = TensorNetwork([Node(a, ("i", "j"))], output=["j", "i"])
        assert np.allclose(net.contract(), a.T)

    def test_override(self):
        a, b = np.ones((2, 2)), np.eye(2)
        net = TensorNetwork([Node(a, ("i", "k")), Node(b, ("k", "j"))], output=["i", "j"])
        assert np.allclose(net.contract({1: 2 * np.eye(2)}), 2 * a)

    def test_override_shape(self):
        net = TensorNetwork([Node(np.ones((2, 2)), ("i", "j"))], output=["i", "j"])
        with pytest.raises(ShapeError):
            net.contract({0: np.ones((3, 3))})

    def test_extent_mismatch(self):
        with pytest.raises(DimensionError, match="leg 'k'"):
            TensorNetwork(
                [Node(np.ones((2, 3)), ("i", "k")), Node(np.ones((2, 2)), ("k", "j"))],
                output=["i", "j"],
            )

    def test_dangling_leg(self):
        with pytest.raises(ShapeError, match="appears 1 times"):
            TensorNetwork([Node(np.ones((2, 2)), ("i", "j"))], output=["i"])

    def test_rank_mismatch(self):
        with pytest.raises(ShapeError, match="rank 2"):
            TensorNetwork([Node(np.ones((2, 2)), ("i",))], output=["i"])
