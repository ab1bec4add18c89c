"""Central-DP training: per-example clipping, Gaussian noising, accounting.

Each lot's per-example gradients are clipped to L2 norm C, summed, perturbed
with N(0, (z*C)^2) per coordinate, divided by the lot size, and handed to the
plain optimizer. Lots are fixed-size, drawn by reshuffling each epoch, and
accounted with sampling ratio q = lot / n. With z = 0 and clipping disabled
the path reduces numerically to non-private training.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import accountant, kernels, nn


@dataclass
class CdpParams:
    clip: float | None  # clipping norm C; None disables clipping
    z: float  # noise multiplier
    lot_size: int
    delta: float | None = None  # defaults to 1/n at fit time

    def __post_init__(self):
        if self.clip is not None and self.clip <= 0:
            raise ValueError(f"clipping norm must be positive, got {self.clip}")
        if self.z < 0:
            raise ValueError(f"noise multiplier must be >= 0, got {self.z}")
        if self.z > 0 and self.clip is None:
            raise ValueError("noise calibration sigma = z * C needs a finite clipping norm")
        if self.delta is not None and not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")

    @property
    def sigma(self) -> float:
        return self.z * self.clip if self.z > 0 else 0.0


def clip_per_example(grad: np.ndarray, clip: float) -> np.ndarray:
    """Scale a flattened gradient by min(1, C / ||g||_2)."""
    if clip <= 0:
        raise ValueError(f"clipping norm must be positive, got {clip}")
    norm = float(np.linalg.norm(grad))
    if norm <= clip:
        return grad.copy()
    return grad * (clip / norm)


def dp_step(net: nn.Network, state: nn.OptimizerState, batch: nn.Batch,
            params: CdpParams, rng: np.random.Generator) -> float:
    """One DP update on a lot; returns the lot's mean loss."""
    peg = nn.per_example_grads(net, batch)
    flat = peg.flat()
    if not np.isfinite(flat).all():
        raise FloatingPointError("non-finite per-example gradient")
    if params.clip is not None:
        summed, _ = kernels.clip_rows_sum(flat, params.clip)
    else:
        summed = kernels.sum_rows(flat)
    if params.z > 0:
        summed = summed + rng.normal(0.0, params.sigma, size=summed.shape)
    mean_grad = summed / flat.shape[0]
    nn.optimizer_step(net, state, nn.unflatten_grad(mean_grad, net))
    return float(peg.losses.mean())


def dp_fit(net: nn.Network, train, test, params: CdpParams, config: nn.FitConfig,
           rng: np.random.Generator) -> tuple[nn.TrainReport, float]:
    """DP training plus the accounted eps at delta (default 1/n).

    Reuses the nn.fit loop so that shuffling, batching and early stopping are
    identical to the non-private path; only the gradient step differs.
    """
    n = len(train.labels)
    delta = params.delta if params.delta is not None else 1.0 / n
    steps_taken = 0

    def step(net_, state_, batch_):
        nonlocal steps_taken
        steps_taken += 1
        return dp_step(net_, state_, batch_, params, rng)

    lot_config = nn.FitConfig(
        epochs=config.epochs, batch_size=params.lot_size,
        optimizer=config.optimizer, learning_rate=config.learning_rate,
        early_stop=config.early_stop, patience=config.patience,
        tolerance=config.tolerance)
    report = nn.fit(net, train, test, lot_config, rng, step_fn=step)
    q = min(params.lot_size / n, 1.0)
    if params.z == 0.0:
        eps = math.inf
    else:
        eps = accountant.account_training(q, params.z, steps_taken, delta)
    return report, eps
