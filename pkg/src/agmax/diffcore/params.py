from __future__ import annotations

from typing import Iterator

import numpy as np

from .node import Node


class ParameterStore:
    """Named trainable leaves in insertion order.

    One store backs every forward pass that should share weights; views of
    a positive pair read the same nodes rather than copies.
    """

    def __init__(self):
        self._params: dict[str, Node] = {}

    def add(self, name: str, value, dtype=np.float64) -> Node:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        node = Node(np.array(value, dtype=dtype), requires_grad=True, op=f"param:{name}")
        self._params[name] = node
        return node

    def __getitem__(self, name: str) -> Node:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[tuple[str, Node]]:
        return iter(self._params.items())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def num_params(self) -> int:
        return int(sum(p.value.size for p in self._params.values()))

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.zero_grad()

    def state(self) -> dict[str, np.ndarray]:
        return {k: p.value.copy() for k, p in self._params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(state)
        extra = set(state) - set(self._params)
        if missing or extra:
            raise KeyError(f"parameter names differ: missing={sorted(missing)} extra={sorted(extra)}")
        for k, p in self._params.items():
            v = np.asarray(state[k], dtype=p.dtype)
            if v.shape != p.shape:
                raise ValueError(f"shape mismatch for {k}: {v.shape} vs {p.shape}")
            p.value = v.copy()
