"""Recurrent probabilistic motion encoder.

Each frame passes through a 4-layer conv stack (three stride-2 layers and
one stride-1 layer, for an exact x8 spatial reduction), a ConvLSTM trunk
accumulates the per-frame features over time, and two ConvLSTM heads turn
the final trunk state into spatial mean and log-variance maps. The motion
code is a reparameterized Gaussian sample from those maps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn
import torch.nn.functional as F

from .errors import StructuralError
from .validation import check_sequence_batch


def init_module_(module: nn.Module) -> None:
    """Fan-in-scaled uniform weights, zero biases, for every conv/linear layer."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            fan_in, _ = nn.init._calculate_fan_in_and_fan_out(m.weight)
            bound = 1.0 / math.sqrt(fan_in) if fan_in > 0 else 0.0
            nn.init.uniform_(m.weight, -bound, bound)
            if m.bias is not None:
                nn.init.zeros_(m.bias)


@dataclass
class ConvLSTMState:
    hidden: torch.Tensor
    cell: torch.Tensor


@dataclass
class LatentDistribution:
    """Spatial Gaussian over the motion code: mean and log-variance maps."""

    mean: torch.Tensor  # (B, D, h, w)
    log_variance: torch.Tensor  # (B, D, h, w)

    def __post_init__(self):
        if self.mean.shape != self.log_variance.shape:
            raise StructuralError(
                f"mean and log_variance must share a shape: "
                f"{tuple(self.mean.shape)} vs {tuple(self.log_variance.shape)}"
            )


@dataclass
class LatentCode:
    code: torch.Tensor  # (B, D, h, w)
    noise: torch.Tensor  # the epsilon draw, retained for reproducibility


class ConvLSTMCell(nn.Module):
    """Standard ConvLSTM recurrence with a single gate convolution.

    Gate order in the stacked convolution output: input, forget, candidate
    cell, output. The forget-gate bias is initialized to +1.
    """

    def __init__(self, in_channels: int, hidden_channels: int, kernel_size: int = 4):
        super().__init__()
        self.in_channels = in_channels
        self.hidden_channels = hidden_channels
        self.kernel_size = kernel_size
        # even kernels need asymmetric padding to keep H x W
        total = kernel_size - 1
        self._pad = (total // 2, total - total // 2, total // 2, total - total // 2)
        self.gates = nn.Conv2d(in_channels + hidden_channels, 4 * hidden_channels, kernel_size)
        init_module_(self)
        with torch.no_grad():
            self.gates.bias[hidden_channels : 2 * hidden_channels].fill_(1.0)

    def initial_state(self, batch: int, height: int, width: int, *, dtype=None, device=None) -> ConvLSTMState:
        kwargs = {"dtype": dtype or self.gates.weight.dtype, "device": device or self.gates.weight.device}
        zeros = torch.zeros(batch, self.hidden_channels, height, width, **kwargs)
        return ConvLSTMState(hidden=zeros, cell=zeros.clone())

    def forward(self, x: torch.Tensor, state: ConvLSTMState | None = None):
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise StructuralError(
                f"ConvLSTM input must be (B, {self.in_channels}, h, w), got {tuple(x.shape)}"
            )
        if state is None:
            state = self.initial_state(x.shape[0], x.shape[2], x.shape[3], dtype=x.dtype, device=x.device)
        if state.hidden.shape[-2:] != x.shape[-2:]:
            raise StructuralError(
                f"state spatial size {tuple(state.hidden.shape[-2:])} does not match input {tuple(x.shape[-2:])}"
            )
        stacked = F.pad(torch.cat([x, state.hidden], dim=1), self._pad)
        gates = self.gates(stacked)
        in_gate, forget_gate, candidate, out_gate = gates.chunk(4, dim=1)
        cell = torch.sigmoid(forget_gate) * state.cell + torch.sigmoid(in_gate) * torch.tanh(candidate)
        hidden = torch.sigmoid(out_gate) * torch.tanh(cell)
        return hidden, ConvLSTMState(hidden=hidden, cell=cell)


def conv_lstm_step(x: torch.Tensor, state: ConvLSTMState | None, cell: ConvLSTMCell):
    """Functional form of one ConvLSTM step: returns (output, new_state)."""
    return cell(x, state)


class MotionEncoder(nn.Module):
    """Maps a (B, T, 3, H, W) sequence to a LatentDistribution on (B, D, H/8, W/8)."""

    def __init__(self, width: int = 64):
        super().__init__()
        self.width = width
        w = width
        self.frame_stack = nn.Sequential(
            nn.Conv2d(3, w, 4, stride=2, padding=1),
            nn.InstanceNorm2d(w),
            nn.ReLU(),
            nn.Conv2d(w, w, 4, stride=2, padding=1),
            nn.InstanceNorm2d(w),
            nn.ReLU(),
            nn.Conv2d(w, w, 4, stride=2, padding=1),
            nn.InstanceNorm2d(w),
            nn.ReLU(),
            nn.Conv2d(w, w, 3, stride=1, padding=1),
            nn.InstanceNorm2d(w),
            nn.ReLU(),
        )
        self.trunk = ConvLSTMCell(w, w)
        self.head_mean = ConvLSTMCell(w, w)
        self.head_log_variance = ConvLSTMCell(w, w)
        init_module_(self.frame_stack)

    def forward(self, frames: torch.Tensor) -> LatentDistribution:
        check_sequence_batch(frames)
        steps = frames.shape[1]
        state = None
        hidden = None
        for t in range(steps):
            features = self.frame_stack(frames[:, t])
            hidden, state = self.trunk(features, state)
        mean, _ = self.head_mean(hidden)
        log_variance, _ = self.head_log_variance(hidden)
        return LatentDistribution(mean=mean, log_variance=log_variance)


def encode(frames: torch.Tensor, encoder: MotionEncoder) -> LatentDistribution:
    return encoder(frames)


def sample_latent(
    dist: LatentDistribution,
    noise: torch.Tensor | None = None,
    generator: torch.Generator | None = None,
) -> LatentCode:
    """Reparameterized draw: code = mean + exp(log_variance / 2) * noise."""
    if noise is None:
        noise = torch.randn(
            dist.mean.shape, generator=generator, dtype=dist.mean.dtype, device=dist.mean.device
        )
    if noise.shape != dist.mean.shape:
        raise StructuralError(
            f"noise shape {tuple(noise.shape)} does not match distribution {tuple(dist.mean.shape)}"
        )
    code = dist.mean + torch.exp(0.5 * dist.log_variance) * noise
    return LatentCode(code=code, noise=noise)


def kl_divergence(dist: LatentDistribution) -> torch.Tensor:
    """KL(q || N(0, I)), closed form, summed over code elements, averaged over batch."""
    per_element = 0.5 * (
        dist.mean**2 + torch.exp(dist.log_variance) - dist.log_variance - 1.0
    )
    return per_element.reshape(per_element.shape[0], -1).sum(dim=1).mean()
