"""In-memory (input, target) pair store with seeded epoch shuffling."""

import math
from typing import Union

import numpy as np

from svct.errors import EmptyDatasetError, GeometryMismatchError


class PairDataset:
    """Stacked network inputs (M, C, H, W) and targets (M, 1, H, W).

    Each epoch draws one permutation from the shared generator and serves
    it in consecutive batches; the last batch of an epoch may be short.
    """

    def __init__(
        self,
        inputs: np.ndarray,
        targets: np.ndarray,
        batch_size: int = 4,
        rng: Union[np.random.Generator, int] = 0,
    ) -> None:
        if len(inputs) == 0:
            raise EmptyDatasetError("training dataset is empty")
        if len(inputs) != len(targets):
            raise GeometryMismatchError(f"{len(inputs)} inputs but {len(targets)} targets")
        if inputs.shape[2:] != targets.shape[2:]:
            raise GeometryMismatchError(
                f"input grid {inputs.shape[2:]} differs from target grid {targets.shape[2:]}"
            )
        self.inputs = inputs
        self.targets = targets
        self.batch_size = batch_size
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self._order: np.ndarray = np.empty(0, dtype=np.int64)
        self._cursor = 0
        self.epoch = 0

    def __len__(self) -> int:
        return len(self.inputs)

    @property
    def batches_per_epoch(self) -> int:
        return math.ceil(len(self) / self.batch_size)

    def next_batch(self) -> tuple[np.ndarray, np.ndarray]:
        if self._cursor >= len(self._order):
            self._order = self.rng.permutation(len(self))
            self._cursor = 0
            self.epoch += 1
        picked = self._order[self._cursor:self._cursor + self.batch_size]
        self._cursor += len(picked)
        return self.inputs[picked], self.targets[picked]
