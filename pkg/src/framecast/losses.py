"""Objective terms: reconstruction distances, KL, and the dual GAN objectives.

All distances reduce by mean over elements/pixels so the GAN weight is
resolution-independent. The breakdown's non-GAN part is the variational
bound (frame L1, warped-frame L1, two flow EPE terms, KL) plus a fused-frame
L1 term that gives the fusion layer its training signal; its GAN part is the
two critic objectives, each weighted by lambda in the generator loss.
Critics maximize the GAN objectives, so their losses are the exact
negations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .critics import Critic
from .encoder import LatentDistribution, kl_divergence
from .errors import DatasetError, StructuralError
from .model import PredictionBundle
from .validation import check_same_shape


def l1_distance(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference over all elements."""
    check_same_shape(a, b, "l1 inputs")
    return (a - b).abs().mean()


def epe(f: torch.Tensor, g: torch.Tensor) -> torch.Tensor:
    """Average endpoint error between two (B, 2, H, W) flow batches."""
    check_same_shape(f, g, "flow pair")
    if f.ndim != 4 or f.shape[1] != 2:
        raise StructuralError(f"flows must be (B, 2, H, W), got {tuple(f.shape)}")
    return torch.linalg.vector_norm(f - g, dim=1).mean()


@dataclass
class LossBreakdown:
    """Every objective term for one step, plus the assembled total."""

    l1_frame: torch.Tensor | float = 0.0
    l1_warp: torch.Tensor | float = 0.0
    epe_flow_pred: torch.Tensor | float = 0.0
    epe_flow_est: torch.Tensor | float = 0.0
    kl: torch.Tensor | float = 0.0
    l1_fused: torch.Tensor | float = 0.0
    gan_frame: torch.Tensor | float = 0.0
    gan_flow: torch.Tensor | float = 0.0
    lambda_: float = 0.0

    FIELD_ORDER = (
        "l1_frame",
        "l1_warp",
        "epe_flow_pred",
        "epe_flow_est",
        "kl",
        "l1_fused",
        "gan_frame",
        "gan_flow",
    )

    def reconstruction_total(self):
        """Sum of the non-GAN terms (the variational bound plus fused L1)."""
        return (
            self.l1_frame + self.l1_warp + self.epe_flow_pred + self.epe_flow_est
            + self.kl + self.l1_fused
        )

    @property
    def total(self):
        return self.reconstruction_total() + self.lambda_ * (self.gan_frame + self.gan_flow)

    @staticmethod
    def _scalar(value) -> float:
        return float(value.detach()) if isinstance(value, torch.Tensor) else float(value)

    def as_floats(self) -> dict[str, float]:
        out = {name: self._scalar(self.__dict__[name]) for name in self.FIELD_ORDER}
        out["lambda"] = float(self.lambda_)
        out["total"] = self._scalar(self.total)
        return out

    def is_finite(self) -> bool:
        return all(np.isfinite(v) for v in self.as_floats().values())


def vae_loss(
    bundle: PredictionBundle,
    true_frame: torch.Tensor,
    true_flow: torch.Tensor | None,
    dist: LatentDistribution,
    include_kl: bool = True,
) -> LossBreakdown:
    """Reconstruction + KL part of the objective for one bundle.

    Terms for absent branch outputs are zero. ``true_flow`` may be ``None``
    only when no flow output needs supervision. The ``kl`` term is the
    divergence per latent element, matching the per-element reduction of
    every other term; the summed closed form (a 1024x larger gradient at
    desk scale) provably collapses the posterior against mean-reduced
    reconstructions before the decoders can learn to read the code.
    """
    if (bundle.flow_pred is not None or bundle.estimated_flow is not None) and true_flow is None:
        raise DatasetError("flow outputs need ground-truth flow supervision, but none was provided")
    breakdown = LossBreakdown()
    if bundle.frame_pred is not None:
        breakdown.l1_frame = l1_distance(true_frame, bundle.frame_pred)
    if bundle.warped_frame is not None:
        breakdown.l1_warp = l1_distance(true_frame, bundle.warped_frame)
    if bundle.flow_pred is not None:
        breakdown.epe_flow_pred = epe(true_flow, bundle.flow_pred)
    if bundle.estimated_flow is not None:
        breakdown.epe_flow_est = epe(true_flow, bundle.estimated_flow)
    if include_kl:
        breakdown.kl = kl_divergence(dist) / dist.mean[0].numel()
    if bundle.fused_frame is not None:
        breakdown.l1_fused = l1_distance(true_frame, bundle.fused_frame)
    return breakdown


def _dual_objective(real_score, fake_scores: list[torch.Tensor]):
    weight = 1.0 / len(fake_scores)
    out = real_score.mean()
    for score in fake_scores:
        out = out - weight * score.mean()
    return out


def gan_frame_objective(
    real_frame: torch.Tensor,
    frame_pred: torch.Tensor | None,
    warped_frame: torch.Tensor | None,
    critic: Critic,
) -> torch.Tensor:
    """score(real) - 1/2 score(frame_pred) - 1/2 score(warped), batch-averaged.

    The critic ascends this; the generators descend it (their gradient
    pushes the critic scores of both fakes upward). With a single fake the
    1/2 weights collapse to 1.
    """
    fakes = [f for f in (frame_pred, warped_frame) if f is not None]
    if not fakes:
        raise StructuralError("frame GAN objective needs at least one generated frame")
    return _dual_objective(critic(real_frame), [critic(f) for f in fakes])


def gan_flow_objective(
    real_flow: torch.Tensor,
    flow_pred: torch.Tensor | None,
    estimated_flow: torch.Tensor | None,
    critic: Critic,
) -> torch.Tensor:
    """Flow-side mirror of :func:`gan_frame_objective`."""
    fakes = [f for f in (flow_pred, estimated_flow) if f is not None]
    if not fakes:
        raise StructuralError("flow GAN objective needs at least one generated flow")
    return _dual_objective(critic(real_flow), [critic(f) for f in fakes])


def total_objective(breakdown: LossBreakdown, lambda_: float):
    """Assemble (generator_loss, critic_loss_frame, critic_loss_flow).

    The generator loss is the reconstruction total plus lambda times the GAN
    objectives (critics held fixed); each critic loss is the negated GAN
    objective (critics maximize it).
    """
    breakdown.lambda_ = lambda_
    generator_loss = breakdown.reconstruction_total() + lambda_ * (
        breakdown.gan_frame + breakdown.gan_flow
    )
    critic_loss_frame = -1.0 * breakdown.gan_frame
    critic_loss_flow = -1.0 * breakdown.gan_flow
    return generator_loss, critic_loss_frame, critic_loss_flow
