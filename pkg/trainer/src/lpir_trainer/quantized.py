"""Quantized answer layer.

Answers leave the answer network through a sigmoid, so they live in
[0, 1]; they are snapped to ``kappa`` equally spaced levels
``(i - 1) / (kappa - 1)``.  During training the forward pass adds uniform
noise as wide as the level spacing; at test time the snap is exact.  The
backward pass flows through a differentiable softmin-weighted average of
the levels instead of the hard assignment.
"""

from __future__ import annotations

import numpy as np
import torch


def quantize_levels(kappa):
    if kappa < 2:
        raise ValueError(f"kappa must be at least 2, got {kappa}")
    return np.arange(kappa) / (kappa - 1)


def quantize_answer_forward(values, kappa, training, rng=None):
    """Nearest-level assignment, plus uniform noise in training mode.

    ``values`` are post-sigmoid reals in [0, 1]; the noise is uniform on
    ``[-1/(2(kappa-1)), +1/(2(kappa-1))]``, the full level spacing.
    """
    levels = quantize_levels(kappa)
    arr = np.asarray(values, dtype=np.float64)
    idx = np.abs(arr[..., None] - levels).argmin(axis=-1)
    snapped = levels[idx]
    if not training:
        return snapped
    if rng is None:
        rng = np.random.default_rng()
    half = 1.0 / (2.0 * (kappa - 1))
    return snapped + rng.uniform(-half, half, size=snapped.shape)


def quantize_answer_backward(values, kappa):
    """Soft assignment: levels averaged under softmin of the L1 distance."""
    levels = quantize_levels(kappa)
    arr = np.asarray(values, dtype=np.float64)
    logits = -np.abs(arr[..., None] - levels)
    logits -= logits.max(axis=-1, keepdims=True)
    weights = np.exp(logits)
    weights /= weights.sum(axis=-1, keepdims=True)
    return (weights * levels).sum(axis=-1)


class QuantizedAnswer(torch.nn.Module):
    """Torch layer: hard (noisy) assignment forward, soft assignment
    backward via the straight-through pattern."""

    def __init__(self, kappa, generator=None):
        super().__init__()
        if kappa < 2:
            raise ValueError(f"kappa must be at least 2, got {kappa}")
        self.kappa = kappa
        self.generator = generator
        self.register_buffer(
            "levels", torch.tensor(quantize_levels(kappa), dtype=torch.float32)
        )

    def forward(self, values):
        soft_w = torch.softmax(
            -torch.abs(values.unsqueeze(-1) - self.levels), dim=-1
        )
        soft = (soft_w * self.levels).sum(dim=-1)
        idx = torch.abs(values.detach().unsqueeze(-1) - self.levels).argmin(dim=-1)
        hard = self.levels[idx]
        if self.training:
            half = 1.0 / (2.0 * (self.kappa - 1))
            noise = (torch.rand(values.shape, generator=self.generator,
                                device=values.device) * 2.0 - 1.0) * half
            hard = hard + noise
        return soft + (hard - soft).detach()
