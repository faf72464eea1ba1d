"""Incremental discriminator schedule: iteration i runs ceil(i/k) discriminator updates."""

import math


def discriminator_updates_for(iteration: int, period_k: int) -> int:
    """Discriminator updates before generator update `iteration` (1-based)."""
    if iteration < 1 or period_k < 1:
        raise ValueError(f"iteration and period must be >= 1, got {iteration}, {period_k}")
    return math.ceil(iteration / period_k)


def total_discriminator_updates(iterations: int, period_k: int) -> int:
    """sum_{i=1..n} ceil(i/k)."""
    return sum(discriminator_updates_for(i, period_k) for i in range(1, iterations + 1))
