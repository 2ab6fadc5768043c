"""Generator-side composite network and its forward bundle.

One forward pass produces every intermediate the objectives touch: the
directly generated frame, the generated flow, the flow-warped frame, the
flow estimated from the (previous, generated) frame pair, and the fused
prediction. Branches disabled by ablation leave their slots as ``None``;
the coupling operators (estimator, fusion) exist only when both branches
do, since each consumes the other branch's output.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .encoder import LatentCode, LatentDistribution, MotionEncoder, sample_latent
from .errors import StructuralError
from .generators import FlowDecoder, FlowEstimator, FrameDecoder, FusionLayer, warp
from .validation import check_sequence_batch

PREDICTION_MODES = ("fused", "frame_only", "flow_only")


@dataclass
class PredictionBundle:
    """All single-step outputs for one input window.

    frame_pred     directly generated next frame
    flow_pred      generated next-step flow
    warped_frame   previous frame warped by flow_pred
    estimated_flow flow estimated between the previous frame and frame_pred
    fused_frame    1x1-fused final prediction
    """

    frame_pred: torch.Tensor | None
    flow_pred: torch.Tensor | None
    warped_frame: torch.Tensor | None
    estimated_flow: torch.Tensor | None
    fused_frame: torch.Tensor | None
    latent: LatentDistribution
    code: LatentCode

    def prediction(self, mode: str = "fused") -> torch.Tensor:
        """The frame reported as 'the prediction' under the given mode."""
        if mode == "fused":
            out = self.fused_frame
        elif mode == "frame_only":
            out = self.frame_pred
        elif mode == "flow_only":
            out = self.warped_frame
        else:
            raise StructuralError(f"unknown prediction mode {mode!r}; expected one of {PREDICTION_MODES}")
        if out is None:
            raise StructuralError(f"prediction mode {mode!r} is unavailable for this model's branches")
        return out

    def default_mode(self) -> str:
        if self.fused_frame is not None:
            return "fused"
        return "frame_only" if self.frame_pred is not None else "flow_only"


class VideoPredictionModel(nn.Module):
    """Encoder plus the branch decoders and coupling operators."""

    def __init__(
        self,
        width: int = 64,
        frame_branch: bool = True,
        flow_branch: bool = True,
        probabilistic: bool = True,
    ):
        super().__init__()
        if not (frame_branch or flow_branch):
            raise StructuralError("at least one prediction branch must be enabled")
        self.width = width
        self.frame_branch = frame_branch
        self.flow_branch = flow_branch
        self.probabilistic = probabilistic
        self.encoder = MotionEncoder(width)
        self.frame_decoder = FrameDecoder(width) if frame_branch else None
        self.flow_decoder = FlowDecoder(width) if flow_branch else None
        coupled = frame_branch and flow_branch
        self.flow_estimator = FlowEstimator(width) if coupled else None
        self.fusion = FusionLayer() if coupled else None

    def forward_bundle(
        self,
        frames: torch.Tensor,
        noise: torch.Tensor | None = None,
        generator: torch.Generator | None = None,
        deterministic_latent: bool = False,
    ) -> PredictionBundle:
        """Run the full generation path on a (B, T, 3, H, W) window.

        ``noise`` pins the latent draw; ``deterministic_latent`` (or a
        non-probabilistic model) uses the posterior mean instead of a draw.
        """
        check_sequence_batch(frames)
        dist = self.encoder(frames)
        if deterministic_latent or not self.probabilistic:
            code = LatentCode(code=dist.mean, noise=torch.zeros_like(dist.mean))
        else:
            code = sample_latent(dist, noise=noise, generator=generator)
        prev_frame = frames[:, -1]

        frame_pred = self.frame_decoder(code.code) if self.frame_branch else None
        flow_pred = self.flow_decoder(code.code) if self.flow_branch else None
        warped = warp(prev_frame, flow_pred) if flow_pred is not None else None
        estimated = (
            self.flow_estimator(prev_frame, frame_pred) if self.flow_estimator is not None else None
        )
        fused = self.fusion(frame_pred, warped) if self.fusion is not None else None
        return PredictionBundle(
            frame_pred=frame_pred,
            flow_pred=flow_pred,
            warped_frame=warped,
            estimated_flow=estimated,
            fused_frame=fused,
            latent=dist,
            code=code,
        )

    forward = forward_bundle

    def parameter_groups(self) -> dict[str, nn.Module]:
        groups = {"encoder": self.encoder}
        if self.frame_decoder is not None:
            groups["frame_decoder"] = self.frame_decoder
        if self.flow_decoder is not None:
            groups["flow_decoder"] = self.flow_decoder
        if self.flow_estimator is not None:
            groups["flow_estimator"] = self.flow_estimator
        if self.fusion is not None:
            groups["fusion"] = self.fusion
        return groups
