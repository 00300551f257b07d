"""Sparse Adam over decoder parameters and touched grid rows.

Grid vertices keep per-row first/second moment buffers; a step only
touches rows that received gradient, everything else stays bitwise
unchanged. One global step counter drives bias correction for both the
decoder and the grid.
"""

from dataclasses import dataclass, field

import numpy as np

from .decoder import PARAM_NAMES
from .kernels.scatter import adam_update_rows


@dataclass
class AdamConfig:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")
        if not self.eps > 0:
            raise ValueError("eps must be positive")


@dataclass
class GradientStore:
    """Gradients of one loss evaluation.

    decoder: name -> dense gradient array.
    level_rows: per grid level, unique touched vertex rows (int64).
    level_grads: per grid level, gradient rows aligned with level_rows.
    """

    decoder: dict
    level_rows: list = field(default_factory=list)
    level_grads: list = field(default_factory=list)


def adam_step(grads: GradientStore, grid, decoder, cfg: AdamConfig):
    """Apply one Adam update in place; advances cfg.step."""
    cfg.step += 1
    bc1 = 1.0 - cfg.beta1 ** cfg.step
    bc2 = 1.0 - cfg.beta2 ** cfg.step

    for name in PARAM_NAMES:
        g = grads.decoder[name]
        m = decoder.adam_m[name]
        v = decoder.adam_v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        decoder.params[name] -= cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)

    for lvl, rows, g in zip(grid.levels, grads.level_rows, grads.level_grads):
        if rows.size == 0:
            continue
        feat, adam_m, adam_v = lvl.buffers()
        adam_update_rows(
            feat, adam_m, adam_v, g, rows,
            cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, bc1, bc2,
        )
