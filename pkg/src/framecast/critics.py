"""Wasserstein critics for frames and flow fields.

Four stride-2 convolutions (channels doubling from a base width), global
average pooling, and a linear map to one unbounded score. There is no
terminal sigmoid anywhere. After every critic optimizer update, all critic
parameters are clamped into [-clip_bound, clip_bound].
"""

from __future__ import annotations

import torch
from torch import nn

from .encoder import init_module_
from .validation import check_image_batch

DEFAULT_CLIP_BOUND = 0.01


class Critic(nn.Module):
    def __init__(self, in_channels: int, base_width: int = 64):
        super().__init__()
        self.in_channels = in_channels
        w = base_width
        self.features = nn.Sequential(
            nn.Conv2d(in_channels, w, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
            nn.Conv2d(w, 2 * w, 4, stride=2, padding=1),
            nn.InstanceNorm2d(2 * w),
            nn.LeakyReLU(0.2),
            nn.Conv2d(2 * w, 4 * w, 4, stride=2, padding=1),
            nn.InstanceNorm2d(4 * w),
            nn.LeakyReLU(0.2),
            # no norm on the last block: its map is 1x1 at the 16-pixel
            # minimum frame size, where instance statistics are undefined
            nn.Conv2d(4 * w, 8 * w, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2),
        )
        self.score = nn.Linear(8 * w, 1)
        init_module_(self)

    def layer_list(self) -> list[nn.Module]:
        """Flat, ordered module list (used by the structural no-sigmoid audit)."""
        return list(self.features) + [self.score]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Returns one unbounded score per batch element, shape (B,)."""
        check_image_batch(x, self.in_channels, "critic input")
        features = self.features(x)
        pooled = features.mean(dim=(2, 3))
        return self.score(pooled).squeeze(1)


def frame_critic(base_width: int = 64) -> Critic:
    return Critic(3, base_width)


def flow_critic(base_width: int = 64) -> Critic:
    return Critic(2, base_width)


def clip_parameters_(critic: nn.Module, bound: float = DEFAULT_CLIP_BOUND) -> nn.Module:
    """Clamp every parameter (weights and biases) into [-bound, bound]; idempotent."""
    with torch.no_grad():
        for p in critic.parameters():
            p.clamp_(-bound, bound)
    return critic


def max_parameter_magnitude(critic: nn.Module) -> float:
    return max(float(p.detach().abs().max()) for p in critic.parameters())
