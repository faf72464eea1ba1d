"""Incremental GAN training loop.

At generator iteration i (1-based):
  1. draw one batch (x, y) and run the generator once, fake = G(x)
  2. update every discriminator ceil(i/k) times on (y, fake)
  3. update the generator on its weighted objective against the
     freshly updated discriminators

A single generator seeded from TrainConfig.seed drives the batch order
and every local-patch offset, in exactly that order, so a rerun with the
same seed, data and configuration is bitwise identical.
"""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, NamedTuple, Optional

import numpy as np
from tqdm import tqdm

from svct.errors import TrainingDivergedError
from svct.losses import discriminator_step_loss, generator_objective
from svct.models import RampKernel, TrainConfig
from svct.nn_kit.builders import random_patch
from svct.nn_kit.network import Network
from svct.training.adam import AdamState, adam_step
from svct.training.dataset import PairDataset
from svct.training.schedule import discriminator_updates_for

logger = logging.getLogger(__name__)


class TraceRow(NamedTuple):
    iteration: int
    loss_name: str
    value: float


@dataclass
class TrainResult:
    generator: Network
    discriminators: dict[str, Network]
    trace: list[TraceRow] = field(default_factory=list)
    discriminator_updates: list[int] = field(default_factory=list)
    generator_state: AdamState = field(default_factory=AdamState)
    discriminator_states: dict[str, AdamState] = field(default_factory=dict)

    def series(self, loss_name: str) -> np.ndarray:
        """Values of one trace component in iteration order."""
        return np.array([row.value for row in self.trace if row.loss_name == loss_name])


def iteration_budget(config: TrainConfig, dataset: PairDataset) -> int:
    return config.iterations or config.epochs * dataset.batches_per_epoch


def _record(trace: list[TraceRow], iteration: int, values: dict[str, float]) -> None:
    for name, value in values.items():
        trace.append(TraceRow(iteration, name, float(value)))
    bad = [name for name, value in values.items() if not np.isfinite(value)]
    if bad:
        raise TrainingDivergedError(
            f"non-finite {', '.join(bad)} at generator iteration {iteration}", trace
        )


def train_gan_incremental(
    generator: Network,
    discriminators: dict[str, Network],
    dataset: PairDataset,
    config: TrainConfig,
    kind: Literal["sin", "prn"],
    kernel: Optional[RampKernel] = None,
    progress: bool = True,
) -> TrainResult:
    """Train `generator` against discriminators "global" and, optionally, "local".

    The local discriminator only takes part in the sinogram stage and only
    when config.use_local is set.
    """
    disc_global = discriminators["global"]
    disc_local = discriminators.get("local") if kind == "sin" and config.use_local else None
    active = {"global": disc_global}
    if disc_local is not None:
        active["local"] = disc_local

    rng = dataset.rng
    result = TrainResult(
        generator=generator,
        discriminators=discriminators,
        discriminator_states={name: AdamState() for name in active},
    )
    iterations = iteration_budget(config, dataset)
    logger.info(
        "training %s generator: %d iterations, k=%d, batch %d, %d samples",
        kind, iterations, config.schedule_period_k, dataset.batch_size, len(dataset),
    )

    for i in tqdm(range(1, iterations + 1), desc=f"train-{kind}", disable=not progress):
        x, y = dataset.next_batch()
        fake = generator.forward(x, training=True)
        if not np.all(np.isfinite(fake)):
            raise TrainingDivergedError(f"non-finite generator output at generator iteration {i}", result.trace)

        # Discriminators: ceil(i/k) updates on the same (real, fake) batch
        updates = discriminator_updates_for(i, config.schedule_period_k)
        d_values: dict[str, float] = {}
        for _ in range(updates):
            for name, disc in active.items():
                disc.zero_grad()
                if name == "local":
                    patch_fake, patch_real, _ = random_patch((fake, y), rng)
                    d_values[f"d_{name}"] = discriminator_step_loss(disc, patch_real, patch_fake)
                else:
                    d_values[f"d_{name}"] = discriminator_step_loss(disc, y, fake)
                adam_step(disc.parameters(), result.discriminator_states[name], config)
        result.discriminator_updates.append(updates)

        # Generator: weighted objective, gradient pushed back through G
        objective = generator_objective(
            fake, y, disc_global, config.weights, kind,
            kernel=kernel,
            disc_local=disc_local,
            rng=rng if disc_local is not None else None,
            use_dp=config.use_dp,
            use_hf=config.use_hf,
            use_local=disc_local is not None,
        )
        generator.zero_grad()
        generator.backward(objective.grad)
        adam_step(generator.parameters(), result.generator_state, config)

        values = {"total": objective.total, **objective.parts._asdict(), **d_values}
        _record(result.trace, i, values)
        logger.debug("iteration %d: %s", i, values)
        if i % config.log_every == 0 or i == iterations:
            logger.info(
                "%s iteration %d/%d: total=%.4f content=%.4f d_updates=%d",
                kind, i, iterations, objective.total, objective.parts.content, updates,
            )
    return result


def write_loss_trace(trace: list[TraceRow], path: Path) -> None:
    """CSV with header iteration,loss_name,value."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["iteration", "loss_name", "value"])
        for row in trace:
            writer.writerow([row.iteration, row.loss_name, repr(row.value)])
