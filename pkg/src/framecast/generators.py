"""Dual decoders and coupling operators.

The frame decoder and flow decoder mirror the encoder in reverse: five
deconvolution layers with 3x3 kernels (three stride-2 upsampling layers,
then two stride-1 refinement layers) recover the x8 spatial factor. Frames
use a tanh output so pixels stay in [-1, 1]; flows are linear. The flow
estimator is a 4-conv/4-deconv stack over a channel-concatenated frame
pair. Warping is a parameter-free bilinear gather with border replication,
differentiable in both the source image and the flow.
"""

from __future__ import annotations

import torch
from torch import nn

from .encoder import init_module_
from .errors import StructuralError
from .validation import check_flow_batch, check_image_batch, check_same_shape


def _deconv_stack(width: int, out_channels: int) -> nn.Sequential:
    w = width
    return nn.Sequential(
        nn.ConvTranspose2d(w, w, 3, stride=2, padding=1, output_padding=1),
        nn.InstanceNorm2d(w),
        nn.ReLU(),
        nn.ConvTranspose2d(w, w, 3, stride=2, padding=1, output_padding=1),
        nn.InstanceNorm2d(w),
        nn.ReLU(),
        nn.ConvTranspose2d(w, w, 3, stride=2, padding=1, output_padding=1),
        nn.InstanceNorm2d(w),
        nn.ReLU(),
        nn.ConvTranspose2d(w, w, 3, stride=1, padding=1),
        nn.InstanceNorm2d(w),
        nn.ReLU(),
        nn.ConvTranspose2d(w, out_channels, 3, stride=1, padding=1),
    )


class FrameDecoder(nn.Module):
    """Decodes a (B, D, H/8, W/8) motion code into a (B, 3, H, W) frame in [-1, 1]."""

    def __init__(self, width: int = 64):
        super().__init__()
        self.width = width
        self.stack = _deconv_stack(width, 3)
        init_module_(self)

    def forward(self, code: torch.Tensor) -> torch.Tensor:
        check_image_batch(code, self.width, "motion code")
        return torch.tanh(self.stack(code))


class FlowDecoder(nn.Module):
    """Decodes a motion code into a (B, 2, H, W) flow field (linear output)."""

    def __init__(self, width: int = 64):
        super().__init__()
        self.width = width
        self.stack = _deconv_stack(width, 2)
        init_module_(self)

    def forward(self, code: torch.Tensor) -> torch.Tensor:
        check_image_batch(code, self.width, "motion code")
        return self.stack(code)


class FlowEstimator(nn.Module):
    """Estimates the flow between a frame pair (channel-concatenated input)."""

    def __init__(self, width: int = 64):
        super().__init__()
        w = width
        self.encode = nn.Sequential(
            nn.Conv2d(6, w, 4, stride=2, padding=1),
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
        self.decode = nn.Sequential(
            nn.ConvTranspose2d(w, w, 3, stride=2, padding=1, output_padding=1),
            nn.InstanceNorm2d(w),
            nn.ReLU(),
            nn.ConvTranspose2d(w, w, 3, stride=2, padding=1, output_padding=1),
            nn.InstanceNorm2d(w),
            nn.ReLU(),
            nn.ConvTranspose2d(w, w, 3, stride=2, padding=1, output_padding=1),
            nn.InstanceNorm2d(w),
            nn.ReLU(),
            nn.ConvTranspose2d(w, 2, 3, stride=1, padding=1),
        )
        init_module_(self)

    def forward(self, prev_frame: torch.Tensor, candidate_frame: torch.Tensor) -> torch.Tensor:
        check_image_batch(prev_frame, 3, "prev_frame")
        check_same_shape(prev_frame, candidate_frame, "frame pair")
        return self.decode(self.encode(torch.cat([prev_frame, candidate_frame], dim=1)))


def warp(source: torch.Tensor, flow: torch.Tensor) -> torch.Tensor:
    """Backward-warp ``source`` by ``flow`` with bilinear sampling.

    ``out[..., y, x]`` samples ``source`` at ``(x + u(x, y), y + v(x, y))``;
    coordinates outside the image replicate the border. Exactly linear in
    ``source`` and differentiable in both arguments.
    """
    if source.ndim != 4:
        raise StructuralError(f"source must be (B, C, H, W), got {tuple(source.shape)}")
    check_flow_batch(flow)
    if source.shape[0] != flow.shape[0] or source.shape[-2:] != flow.shape[-2:]:
        raise StructuralError(
            f"source {tuple(source.shape)} and flow {tuple(flow.shape)} disagree on batch or size"
        )
    batch, channels, height, width = source.shape
    ys = torch.arange(height, dtype=source.dtype, device=source.device).view(1, height, 1)
    xs = torch.arange(width, dtype=source.dtype, device=source.device).view(1, 1, width)
    sample_x = (xs + flow[:, 0]).clamp(0, width - 1)
    sample_y = (ys + flow[:, 1]).clamp(0, height - 1)

    x0 = sample_x.floor()
    y0 = sample_y.floor()
    wx = sample_x - x0
    wy = sample_y - y0
    x0 = x0.long().clamp(0, width - 1)
    y0 = y0.long().clamp(0, height - 1)
    x1 = (x0 + 1).clamp(0, width - 1)
    y1 = (y0 + 1).clamp(0, height - 1)

    flat = source.reshape(batch, channels, height * width)

    def gather(yy, xx):
        idx = (yy * width + xx).reshape(batch, 1, height * width).expand(batch, channels, -1)
        return flat.gather(2, idx).reshape(batch, channels, height, width)

    wx = wx.unsqueeze(1)
    wy = wy.unsqueeze(1)
    top = (1 - wx) * gather(y0, x0) + wx * gather(y0, x1)
    bottom = (1 - wx) * gather(y1, x0) + wx * gather(y1, x1)
    return (1 - wy) * top + wy * bottom


class FusionLayer(nn.Module):
    """1x1 convolution over the two 3-channel predictions, tanh-bounded.

    Initialized to average the two branches so neither dominates at the
    start of training.
    """

    def __init__(self):
        super().__init__()
        self.mix = nn.Conv2d(6, 3, 1)
        with torch.no_grad():
            self.mix.weight.zero_()
            self.mix.bias.zero_()
            for c in range(3):
                self.mix.weight[c, c, 0, 0] = 0.5
                self.mix.weight[c, c + 3, 0, 0] = 0.5

    def forward(self, frame_pred: torch.Tensor, warped_frame: torch.Tensor) -> torch.Tensor:
        check_image_batch(frame_pred, 3, "frame_pred")
        check_same_shape(frame_pred, warped_frame, "fusion inputs")
        return torch.tanh(self.mix(torch.cat([frame_pred, warped_frame], dim=1)))
