"""Small dense tensor networks with named legs.

A network is a list of nodes whose legs carry string labels; a label shared by two
nodes is contracted, a label listed in ``output`` stays open. The contraction order is
found once with ``numpy.einsum_path`` and reused for every call, so a network can be
re-contracted cheaply after swapping arrays of the same shape.
"""

from __future__ import annotations

import logging
import string
from collections import Counter
from typing import NamedTuple

import numpy as np

from .linalg import DimensionError, ResourceError, ShapeError

logger = logging.getLogger(__name__)

LETTERS = string.ascii_letters


class Node(NamedTuple):
    array: np.ndarray
    labels: tuple[str, ...]


class TensorNetwork:
    def __init__(self, nodes: list[Node], output: list[str]):
        extents: dict[str, int] = {}
        counts: Counter[str] = Counter()
        for k, node in enumerate(nodes):
            if node.array.ndim != len(node.labels):
                raise ShapeError(
                    f"node {k} has rank {node.array.ndim} but {len(node.labels)} labels"
                )
            for label, extent in zip(node.labels, node.array.shape):
                if extents.setdefault(label, extent) != extent:
                    raise DimensionError(
                        f"leg {label!r} has extents {extents[label]} and {extent}"
                    )
                counts[label] += 1
        for label, count in counts.items():
            open_leg = label in output
            if count > 2 or (open_leg and count != 1) or (not open_leg and count != 2):
                raise ShapeError(f"leg {label!r} appears {count} times")
        if len(extents) > len(LETTERS):
            raise ResourceError(f"{len(extents)} legs exceed the {len(LETTERS)} einsum letters")

        letter = {label: LETTERS[i] for i, label in enumerate(extents)}
        inputs = ",".join("".join(letter[x] for x in node.labels) for node in nodes)
        self.subscripts = f"{inputs}->{''.join(letter[x] for x in output)}"
        self.nodes = list(nodes)
        self.output = list(output)
        self.shape = tuple(extents[x] for x in output)
        self.path = np.einsum_path(
            self.subscripts, *(n.array for n in nodes), optimize="greedy"
        )[0]
        logger.debug("network with %d nodes, %d open legs", len(nodes), len(output))

    def contract(self, overrides: dict[int, np.ndarray] | None = None) -> np.ndarray:
        """Contract, optionally replacing some node arrays (same shapes) first."""
        arrays = [n.array for n in self.nodes]
        for k, array in (overrides or {}).items():
            if array.shape != arrays[k].shape:
                raise ShapeError(f"node {k} override has shape {array.shape}, want {arrays[k].shape}")
            arrays[k] = array
        return np.einsum(self.subscripts, *arrays, optimize=self.path)
