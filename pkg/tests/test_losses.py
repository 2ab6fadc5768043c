"""Loss primitives, the variational terms, and the dual GAN objectives."""

import numpy as np
import pytest
import torch

from framecast.critics import flow_critic, frame_critic
from framecast.encoder import LatentDistribution
from framecast.errors import DatasetError, StructuralError
from framecast.losses import (
    LossBreakdown,
    epe,
    gan_flow_objective,
    gan_frame_objective,
    l1_distance,
    total_objective,
    vae_loss,
)
from framecast.model import VideoPredictionModel

from gradcheck import assert_gradients_match


# ----------------------------------------------------------------- primitives
def test_l1_anchors():
    x = torch.zeros(1, 3, 4, 4)
    assert float(l1_distance(x, x)) == 0.0
    assert float(l1_distance(x, x + 0.1)) == pytest.approx(0.1)


def test_l1_matches_brute_force():
    rng = np.random.default_rng(0)
    a = rng.uniform(-1, 1, size=(1, 3, 5, 7))
    b = rng.uniform(-1, 1, size=(1, 3, 5, 7))
    expected = np.abs(a - b).sum() / a.size
    got = float(l1_distance(torch.from_numpy(a), torch.from_numpy(b)))
    assert got == pytest.approx(expected, rel=1e-12)


def test_epe_anchors():
    f = torch.zeros(1, 2, 4, 4)
    assert float(epe(f, f)) == 0.0
    g = torch.zeros(1, 2, 4, 4)
    g[:, 0], g[:, 1] = 3.0, 4.0
    assert float(epe(g, f)) == 5.0  # 3-4-5 triangle, exact


def test_epe_matches_brute_force():
    rng = np.random.default_rng(1)
    f = rng.uniform(-3, 3, size=(1, 2, 6, 5))
    g = rng.uniform(-3, 3, size=(1, 2, 6, 5))
    expected = np.sqrt(((f - g) ** 2).sum(axis=1)).mean()
    got = float(epe(torch.from_numpy(f), torch.from_numpy(g)))
    assert got == pytest.approx(expected, abs=1e-6)


def test_primitives_symmetric_and_triangle():
    rng = np.random.default_rng(2)
    for _ in range(20):
        a, b, c = (torch.from_numpy(rng.uniform(-1, 1, size=(1, 2, 4, 4))) for _ in range(3))
        assert float(l1_distance(a, b)) == pytest.approx(float(l1_distance(b, a)))
        assert float(epe(a, b)) == pytest.approx(float(epe(b, a)))
        assert float(l1_distance(a, c)) <= float(l1_distance(a, b)) + float(l1_distance(b, c)) + 1e-12
        assert float(epe(a, c)) <= float(epe(a, b)) + float(epe(b, c)) + 1e-12


def test_primitive_shape_mismatch():
    with pytest.raises(StructuralError):
        l1_distance(torch.zeros(1, 3, 4, 4), torch.zeros(1, 3, 4, 5))
    with pytest.raises(StructuralError):
        epe(torch.zeros(1, 2, 4, 4), torch.zeros(1, 2, 4, 5))


def test_primitive_gradients():
    torch.manual_seed(0)
    a = torch.randn(1, 2, 4, 4).double()
    b = torch.randn(1, 2, 4, 4).double()
    assert_gradients_match(lambda: l1_distance(a, b), a)
    assert_gradients_match(lambda: epe(a, b), a, seed=1)


# ------------------------------------------------------------------- vae part
def _bundle_and_truth(width=8, size=16, seed=0):
    torch.manual_seed(seed)
    model = VideoPredictionModel(width=width)
    frames = torch.rand(1, 3, 3, size, size) * 1.6 - 0.8
    bundle = model.forward_bundle(frames, generator=torch.Generator().manual_seed(5))
    true_frame = torch.rand(1, 3, size, size) * 1.6 - 0.8
    true_flow = torch.randn(1, 2, size, size)
    return bundle, true_frame, true_flow


def test_vae_loss_perfect_prediction_is_zero():
    bundle, _, _ = _bundle_and_truth()
    prior = LatentDistribution(
        mean=torch.zeros_like(bundle.latent.mean),
        log_variance=torch.zeros_like(bundle.latent.log_variance),
    )
    perfect = type(bundle)(
        frame_pred=bundle.frame_pred,
        flow_pred=bundle.flow_pred,
        warped_frame=bundle.frame_pred,
        estimated_flow=bundle.flow_pred,
        fused_frame=bundle.frame_pred,
        latent=prior,
        code=bundle.code,
    )
    breakdown = vae_loss(perfect, bundle.frame_pred, bundle.flow_pred, prior)
    for name in ("l1_frame", "l1_warp", "epe_flow_pred", "epe_flow_est", "kl", "l1_fused"):
        assert breakdown.as_floats()[name] == 0.0


def test_vae_loss_constant_flow_offset():
    # perfect frames, both flows off by (3, 4): only the EPE terms fire, each 5
    bundle, _, _ = _bundle_and_truth()
    prior = LatentDistribution(
        mean=torch.zeros_like(bundle.latent.mean),
        log_variance=torch.zeros_like(bundle.latent.log_variance),
    )
    offset = torch.zeros_like(bundle.flow_pred)
    offset[:, 0], offset[:, 1] = 3.0, 4.0
    shifted = type(bundle)(
        frame_pred=bundle.frame_pred,
        flow_pred=bundle.flow_pred,
        warped_frame=bundle.frame_pred,
        estimated_flow=bundle.flow_pred,
        fused_frame=bundle.frame_pred,
        latent=prior,
        code=bundle.code,
    )
    breakdown = vae_loss(shifted, bundle.frame_pred, bundle.flow_pred + offset, prior)
    assert float(breakdown.l1_frame) == 0.0
    assert float(breakdown.epe_flow_pred) == pytest.approx(5.0)
    assert float(breakdown.epe_flow_est) == pytest.approx(5.0)


def test_vae_loss_decomposes_into_primitives():
    from framecast.encoder import kl_divergence

    bundle, true_frame, true_flow = _bundle_and_truth(seed=3)
    breakdown = vae_loss(bundle, true_frame, true_flow, bundle.latent)
    assert float(breakdown.l1_frame) == pytest.approx(float(l1_distance(true_frame, bundle.frame_pred)))
    assert float(breakdown.l1_warp) == pytest.approx(float(l1_distance(true_frame, bundle.warped_frame)))
    assert float(breakdown.epe_flow_pred) == pytest.approx(float(epe(true_flow, bundle.flow_pred)))
    assert float(breakdown.epe_flow_est) == pytest.approx(float(epe(true_flow, bundle.estimated_flow)))
    # the objective's kl term is per latent element (same reduction as the rest)
    elements = bundle.latent.mean[0].numel()
    assert float(breakdown.kl) == pytest.approx(float(kl_divergence(bundle.latent)) / elements)
    assert float(breakdown.l1_fused) == pytest.approx(float(l1_distance(true_frame, bundle.fused_frame)))
    for name in ("l1_frame", "l1_warp", "epe_flow_pred", "epe_flow_est", "kl", "l1_fused"):
        assert float(getattr(breakdown, name)) >= 0.0


def test_vae_loss_requires_flow_supervision():
    bundle, true_frame, _ = _bundle_and_truth(seed=4)
    with pytest.raises(DatasetError):
        vae_loss(bundle, true_frame, None, bundle.latent)


# ------------------------------------------------------------------ gan terms
def test_gan_objectives_zero_critic():
    torch.manual_seed(1)
    critic = frame_critic(8)
    with torch.no_grad():
        for p in critic.parameters():
            p.zero_()
    real = torch.rand(1, 3, 16, 16)
    assert float(gan_frame_objective(real, real * 0.5, real * 0.2, critic)) == 0.0


def test_gan_objectives_cancel_on_identical_inputs():
    torch.manual_seed(2)
    fr = frame_critic(8)
    fl = flow_critic(8)
    real = torch.rand(1, 3, 16, 16)
    flow = torch.randn(1, 2, 16, 16)
    assert float(gan_frame_objective(real, real, real, fr)) == pytest.approx(0.0, abs=1e-6)
    assert float(gan_flow_objective(flow, flow, flow, fl)) == pytest.approx(0.0, abs=1e-6)


def test_gan_objective_decomposes_into_critic_calls():
    torch.manual_seed(3)
    critic = frame_critic(8)
    real = torch.rand(2, 3, 16, 16)
    fake_a = torch.rand(2, 3, 16, 16)
    fake_b = torch.rand(2, 3, 16, 16)
    got = float(gan_frame_objective(real, fake_a, fake_b, critic))
    expected = (
        float(critic(real).mean())
        - 0.5 * float(critic(fake_a).mean())
        - 0.5 * float(critic(fake_b).mean())
    )
    assert got == pytest.approx(expected, abs=1e-6)


def test_gan_objective_single_fake_full_weight():
    torch.manual_seed(4)
    critic = flow_critic(8)
    real = torch.randn(1, 2, 16, 16)
    fake = torch.randn(1, 2, 16, 16)
    got = float(gan_flow_objective(real, fake, None, critic))
    expected = float(critic(real).mean()) - float(critic(fake).mean())
    assert got == pytest.approx(expected, abs=1e-6)


def test_gan_gradient_wrt_fake():
    torch.manual_seed(5)
    critic = frame_critic(4).double()
    real = torch.rand(1, 3, 16, 16).double()
    fake = torch.rand(1, 3, 16, 16).double()
    assert_gradients_match(lambda: gan_frame_objective(real, fake, None, critic), fake)


# -------------------------------------------------------------- total wiring
def test_total_objective_lambda_zero_decouples():
    breakdown = LossBreakdown(l1_frame=torch.tensor(0.3), kl=torch.tensor(0.2),
                              gan_frame=torch.tensor(1.7), gan_flow=torch.tensor(-0.4))
    gen_loss, critic_frame, critic_flow = total_objective(breakdown, 0.0)
    assert float(gen_loss) == pytest.approx(0.5)
    assert float(critic_frame) == pytest.approx(-1.7)
    assert float(critic_flow) == pytest.approx(0.4)


def test_total_objective_linearity_audit():
    rng = np.random.default_rng(6)
    for _ in range(10):
        values = rng.uniform(-1, 1, size=8)
        breakdown = LossBreakdown(
            l1_frame=abs(values[0]), l1_warp=abs(values[1]), epe_flow_pred=abs(values[2]),
            epe_flow_est=abs(values[3]), kl=abs(values[4]), l1_fused=abs(values[5]),
            gan_frame=values[6], gan_flow=values[7],
        )
        lam = float(rng.uniform(0, 0.1))
        gen_loss, critic_frame, critic_flow = total_objective(breakdown, lam)
        vae_part = float(breakdown.reconstruction_total())
        assert float(gen_loss) - vae_part == pytest.approx(lam * (values[6] + values[7]), abs=1e-6)
        # critic losses are exact negations of the GAN objectives
        assert float(critic_frame) + values[6] == pytest.approx(0.0, abs=1e-12)
        assert float(critic_flow) + values[7] == pytest.approx(0.0, abs=1e-12)


def test_breakdown_total_invariant():
    breakdown = LossBreakdown(
        l1_frame=0.1, l1_warp=0.2, epe_flow_pred=0.3, epe_flow_est=0.4, kl=0.5,
        l1_fused=0.15, gan_frame=2.0, gan_flow=-1.0, lambda_=0.001,
    )
    expected = (0.1 + 0.2 + 0.3 + 0.4 + 0.5 + 0.15) + 0.001 * (2.0 - 1.0)
    assert breakdown.as_floats()["total"] == pytest.approx(expected)
