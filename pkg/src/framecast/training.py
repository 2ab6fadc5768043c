"""Adversarial-dual training loop, checkpointing, and test-time prediction.

One training cycle performs ``critic_steps_per_gen_step`` critic updates
followed by one generator update, each on a freshly drawn window. Critic
steps touch only critic parameters and clamp them afterwards; generator
steps touch only the encoder/decoder/estimator/fusion parameters. Every
optimizer step appends one plain-text record with the full loss breakdown,
so two deterministic runs produce byte-identical logs.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .critics import Critic, clip_parameters_, frame_critic, flow_critic
from .data import FrameSequence, SequenceRecord
from .errors import CheckpointError, DatasetError, NonFiniteLossError, StructuralError
from .losses import LossBreakdown, gan_flow_objective, gan_frame_objective, total_objective, vae_loss
from .model import PredictionBundle, VideoPredictionModel

CHECKPOINT_VERSION = 1


@dataclass
class TrainingConfig:
    lambda_: float = 0.001
    learning_rate: float = 0.0001
    critic_steps_per_gen_step: int = 5
    clip_bound: float = 0.01
    batch_size: int = 1
    steps: int = 2000  # training cycles (one generator update each)
    seed: int = 0
    window: int = 4  # input frames per prediction
    width: int = 64  # channel width of every network
    frame_branch_on: bool = True
    flow_branch_on: bool = True
    frame_gan_on: bool = True
    flow_gan_on: bool = True
    encoder_probabilistic_on: bool = True
    checkpoint_interval: int = 500  # cycles between periodic checkpoints
    deterministic: bool = True

    def validate(self) -> "TrainingConfig":
        if self.lambda_ < 0:
            raise StructuralError("lambda must be nonnegative")
        if self.learning_rate <= 0 or self.clip_bound <= 0:
            raise StructuralError("learning_rate and clip_bound must be positive")
        if self.critic_steps_per_gen_step < 1 or self.batch_size < 1 or self.steps < 1:
            raise StructuralError("critic_steps_per_gen_step, batch_size, and steps must be >= 1")
        if self.window < 2:
            raise StructuralError("window must be at least 2 frames")
        if not (self.frame_branch_on or self.flow_branch_on):
            raise StructuralError("at least one prediction branch must be enabled")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, mapping: dict) -> "TrainingConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise StructuralError(f"unknown config keys: {sorted(unknown)}")
        converted = {}
        for f in dataclasses.fields(cls):
            if f.name not in mapping:
                continue
            value = mapping[f.name]
            if isinstance(value, str):
                if f.type == "bool" or isinstance(f.default, bool):
                    value = value.lower() in ("1", "true", "yes", "on")
                elif isinstance(f.default, int):
                    value = int(value)
                elif isinstance(f.default, float):
                    value = float(value)
            converted[f.name] = value
        return cls(**converted).validate()

    def uses_frame_critic(self) -> bool:
        return self.frame_gan_on

    def uses_flow_critic(self) -> bool:
        return self.flow_gan_on and self.flow_branch_on


@dataclass
class _Window:
    inputs: torch.Tensor  # (B, window, 3, H, W)
    target_frame: torch.Tensor  # (B, 3, H, W)
    target_flow: torch.Tensor | None  # (B, 2, H, W)


def build_model(config: TrainingConfig) -> VideoPredictionModel:
    return VideoPredictionModel(
        width=config.width,
        frame_branch=config.frame_branch_on,
        flow_branch=config.flow_branch_on,
        probabilistic=config.encoder_probabilistic_on,
    )


def format_log_line(step: int, cycle: int, phase: str, breakdown: LossBreakdown) -> str:
    parts = [f"step={step}", f"cycle={cycle}", f"phase={phase}"]
    for name, value in breakdown.as_floats().items():
        parts.append(f"{name}={value!r}")
    return " ".join(parts)


def parameters_snapshot(module: torch.nn.Module) -> list[torch.Tensor]:
    return [p.detach().clone() for p in module.parameters()]


def snapshots_equal(a: list[torch.Tensor], b: list[torch.Tensor]) -> bool:
    return len(a) == len(b) and all(torch.equal(x, y) for x, y in zip(a, b))


class Trainer:
    """Owns the model, critics, optimizers, RNG streams, and the step log."""

    def __init__(self, config: TrainingConfig, records: list[SequenceRecord], log_path=None):
        self.config = config.validate()
        self.records = records
        self.log_path = Path(log_path) if log_path else None
        self.log_lines: list[str] = []
        self.optimizer_steps = 0
        self.cycles = 0

        if config.deterministic:
            # single-threaded execution: bit-reproducible and, at desk-scale
            # tensor sizes, faster than multi-threaded dispatch
            torch.set_num_threads(1)
        seed = config.seed if config.deterministic else int(np.random.SeedSequence().entropy % 2**31)
        torch.manual_seed(seed)
        self.model = build_model(config)
        self.frame_critic = frame_critic(config.width) if config.uses_frame_critic() else None
        self.flow_critic = flow_critic(config.width) if config.uses_flow_critic() else None

        self.opt_generator = torch.optim.RMSprop(
            self.model.parameters(), lr=config.learning_rate, alpha=0.99, eps=1e-8
        )
        critic_params = [p for c in (self.frame_critic, self.flow_critic) if c for p in c.parameters()]
        self.opt_critics = (
            torch.optim.RMSprop(critic_params, lr=config.learning_rate, alpha=0.99, eps=1e-8)
            if critic_params
            else None
        )
        self.noise_rng = torch.Generator().manual_seed(seed + 1)
        self.data_rng = np.random.default_rng(seed + 2)
        self._windows = self._index_windows()

    # ------------------------------------------------------------------ data
    def _index_windows(self) -> list[tuple[int, int]]:
        needed = self.config.window + 1
        windows = []
        for i, rec in enumerate(self.records):
            frames = rec.sequence.frames
            if self.config.flow_branch_on and rec.flows is None:
                raise DatasetError(
                    f"sequence {rec.path or i} has no ground-truth flow but the flow branch is on"
                )
            for t0 in range(frames.shape[0] - needed + 1):
                windows.append((i, t0))
        if not windows:
            raise DatasetError(
                f"no sequence provides {needed} consecutive frames (window={self.config.window})"
            )
        return windows

    def _draw_window(self) -> _Window:
        w = self.config.window
        picks = self.data_rng.integers(0, len(self._windows), size=self.config.batch_size)
        inputs, targets, flows = [], [], []
        for pick in picks:
            rec_idx, t0 = self._windows[int(pick)]
            rec = self.records[rec_idx]
            frames = rec.sequence.frames
            inputs.append(torch.from_numpy(frames[t0 : t0 + w].copy()))
            targets.append(torch.from_numpy(frames[t0 + w].copy()))
            if rec.flows is not None:
                flows.append(torch.from_numpy(rec.flows[t0 + w - 1].to_array().copy()))
        target_flow = torch.stack(flows) if len(flows) == len(picks) else None
        return _Window(
            inputs=torch.stack(inputs), target_frame=torch.stack(targets), target_flow=target_flow
        )

    # ----------------------------------------------------------------- steps
    def _noise_for(self, dist_shape: torch.Size) -> torch.Tensor:
        return torch.randn(dist_shape, generator=self.noise_rng)

    def _bundle(self, window: _Window, grad: bool) -> PredictionBundle:
        latent_shape = torch.Size(
            [
                window.inputs.shape[0],
                self.config.width,
                window.inputs.shape[3] // 8,
                window.inputs.shape[4] // 8,
            ]
        )
        noise = self._noise_for(latent_shape)
        if grad:
            return self.model.forward_bundle(window.inputs, noise=noise)
        with torch.no_grad():
            return self.model.forward_bundle(window.inputs, noise=noise)

    def _gan_terms(self, breakdown: LossBreakdown, window: _Window, bundle: PredictionBundle) -> None:
        if self.frame_critic is not None:
            breakdown.gan_frame = gan_frame_objective(
                window.target_frame, bundle.frame_pred, bundle.warped_frame, self.frame_critic
            )
        if self.flow_critic is not None:
            breakdown.gan_flow = gan_flow_objective(
                window.target_flow, bundle.flow_pred, bundle.estimated_flow, self.flow_critic
            )

    def _check_finite(self, breakdown: LossBreakdown, phase: str) -> None:
        if not breakdown.is_finite():
            raise NonFiniteLossError(
                f"non-finite loss during {phase} step {self.optimizer_steps}: {breakdown.as_floats()}"
            )

    def critic_step(self, window: _Window | None = None) -> LossBreakdown:
        """One RMSprop update on the critics only, then weight clipping."""
        if self.opt_critics is None:
            raise StructuralError("no critics are active under this configuration")
        window = window or self._draw_window()
        bundle = self._bundle(window, grad=False)
        with torch.no_grad():
            breakdown = vae_loss(
                bundle,
                window.target_frame,
                window.target_flow,
                bundle.latent,
                include_kl=self.config.encoder_probabilistic_on,
            )
        self._gan_terms(breakdown, window, bundle)
        _, critic_loss_frame, critic_loss_flow = total_objective(breakdown, self.config.lambda_)
        critic_loss = critic_loss_frame + critic_loss_flow
        self._check_finite(breakdown, "critic")
        self.opt_critics.zero_grad(set_to_none=True)
        critic_loss.backward()
        self.opt_critics.step()
        for critic in (self.frame_critic, self.flow_critic):
            if critic is not None:
                clip_parameters_(critic, self.config.clip_bound)
        self._log("critic", breakdown)
        return breakdown

    def generator_step(self, window: _Window | None = None) -> LossBreakdown:
        """One RMSprop update on encoder/decoders/estimator/fusion only."""
        window = window or self._draw_window()
        bundle = self._bundle(window, grad=True)
        breakdown = vae_loss(
            bundle,
            window.target_frame,
            window.target_flow,
            bundle.latent,
            include_kl=self.config.encoder_probabilistic_on,
        )
        frozen = []
        for critic in (self.frame_critic, self.flow_critic):
            if critic is not None:
                for p in critic.parameters():
                    frozen.append((p, p.requires_grad))
                    p.requires_grad_(False)
        try:
            self._gan_terms(breakdown, window, bundle)
            generator_loss, _, _ = total_objective(breakdown, self.config.lambda_)
            self._check_finite(breakdown, "generator")
            self.opt_generator.zero_grad(set_to_none=True)
            generator_loss.backward()
            self.opt_generator.step()
        finally:
            for p, was in frozen:
                p.requires_grad_(was)
        self._log("generator", breakdown)
        return breakdown

    def run_cycle(self) -> LossBreakdown:
        """critic_steps_per_gen_step critic updates, then one generator update."""
        if self.opt_critics is not None:
            for _ in range(self.config.critic_steps_per_gen_step):
                self.critic_step()
        breakdown = self.generator_step()
        self.cycles += 1
        return breakdown

    def run(self, out_dir=None) -> dict:
        """Train for the configured cycle budget; returns the final checkpoint."""
        out_dir = Path(out_dir) if out_dir else None
        if out_dir:
            out_dir.mkdir(parents=True, exist_ok=True)
        while self.cycles < self.config.steps:
            self.run_cycle()
            if (
                out_dir
                and self.config.checkpoint_interval > 0
                and self.cycles % self.config.checkpoint_interval == 0
                and self.cycles < self.config.steps
            ):
                save_checkpoint(self.checkpoint(), out_dir / f"checkpoint_{self.cycles:06d}.pt")
        ckpt = self.checkpoint()
        if out_dir:
            save_checkpoint(ckpt, out_dir / "checkpoint.pt")
        return ckpt

    def _log(self, phase: str, breakdown: LossBreakdown) -> None:
        self.optimizer_steps += 1
        line = format_log_line(self.optimizer_steps, self.cycles, phase, breakdown)
        self.log_lines.append(line)
        if self.log_path:
            with open(self.log_path, "a") as fh:
                fh.write(line + "\n")

    # ----------------------------------------------------------- persistence
    def checkpoint(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "optimizer_steps": self.optimizer_steps,
            "cycles": self.cycles,
            "config": self.config.to_dict(),
            "model": self.model.state_dict(),
            "frame_critic": self.frame_critic.state_dict() if self.frame_critic else None,
            "flow_critic": self.flow_critic.state_dict() if self.flow_critic else None,
            "opt_generator": self.opt_generator.state_dict(),
            "opt_critics": self.opt_critics.state_dict() if self.opt_critics else None,
            "torch_rng": torch.get_rng_state(),
            "noise_rng": self.noise_rng.get_state(),
            "data_rng": self.data_rng.bit_generator.state,
        }

    @classmethod
    def from_checkpoint(cls, ckpt: dict, records: list[SequenceRecord], log_path=None) -> "Trainer":
        config = TrainingConfig.from_dict(ckpt["config"])
        trainer = cls(config, records, log_path=log_path)
        trainer.model.load_state_dict(ckpt["model"])
        if trainer.frame_critic is not None:
            trainer.frame_critic.load_state_dict(ckpt["frame_critic"])
        if trainer.flow_critic is not None:
            trainer.flow_critic.load_state_dict(ckpt["flow_critic"])
        trainer.opt_generator.load_state_dict(ckpt["opt_generator"])
        if trainer.opt_critics is not None:
            trainer.opt_critics.load_state_dict(ckpt["opt_critics"])
        torch.set_rng_state(ckpt["torch_rng"])
        trainer.noise_rng.set_state(ckpt["noise_rng"])
        trainer.data_rng.bit_generator.state = ckpt["data_rng"]
        trainer.optimizer_steps = ckpt["optimizer_steps"]
        trainer.cycles = ckpt["cycles"]
        return trainer


def train(config: TrainingConfig, records: list[SequenceRecord], out_dir=None, log_path=None):
    """Run a full training; returns (checkpoint_dict, log_lines)."""
    trainer = Trainer(config, records, log_path=log_path)
    ckpt = trainer.run(out_dir=out_dir)
    return ckpt, trainer.log_lines


def save_checkpoint(ckpt: dict, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(ckpt, path)


def load_checkpoint(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint {path} does not exist")
    try:
        ckpt = torch.load(path, weights_only=False)
    except Exception as exc:  # torch raises several unpickling error types
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(ckpt, dict) or ckpt.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path} is not a version-{CHECKPOINT_VERSION} checkpoint"
        )
    return ckpt


def model_from_checkpoint(ckpt: dict) -> tuple[VideoPredictionModel, TrainingConfig]:
    config = TrainingConfig.from_dict(ckpt["config"])
    model = build_model(config)
    try:
        model.load_state_dict(ckpt["model"])
    except RuntimeError as exc:
        raise CheckpointError(f"checkpoint incompatible with its own config: {exc}") from exc
    model.eval()
    return model, config


def _sequence_tensor(sequence) -> torch.Tensor:
    if isinstance(sequence, FrameSequence):
        frames = sequence.frames
    else:
        frames = np.asarray(sequence, dtype=np.float32)
    if frames.ndim != 4 or frames.shape[1] != 3:
        raise StructuralError(f"sequence must be (T, 3, H, W), got {frames.shape}")
    return torch.from_numpy(np.ascontiguousarray(frames))


def predict_next(ckpt: dict, sequence, mode: str = "default") -> PredictionBundle:
    """Deterministic single-step prediction (latent noise = 0).

    ``mode`` is validated against the checkpoint's branches; the returned
    bundle's ``prediction(mode)`` is the reported output.
    """
    model, config = model_from_checkpoint(ckpt)
    frames = _sequence_tensor(sequence)
    window = frames[-config.window :] if frames.shape[0] > config.window else frames
    with torch.no_grad():
        bundle = model.forward_bundle(window.unsqueeze(0), deterministic_latent=True)
    if mode != "default":
        bundle.prediction(mode)  # raises on unavailable mode
    return bundle


def predict_multi(ckpt: dict, sequence, horizon: int, mode: str = "default"):
    """Recursive multi-step prediction.

    Feeds each step's prediction back into the input window and re-predicts.
    Returns ``(frames, flows)`` as numpy arrays of shape (horizon, 3, H, W)
    and (horizon, 2, H, W); ``flows`` is ``None`` for models without the
    flow branch. ``mode`` selects the recycled output ("default": fused when
    available).
    """
    if horizon < 1:
        raise StructuralError(f"horizon must be >= 1, got {horizon}")
    model, config = model_from_checkpoint(ckpt)
    frames = _sequence_tensor(sequence)
    window = (frames[-config.window :] if frames.shape[0] > config.window else frames).unsqueeze(0)
    out_frames, out_flows = [], []
    with torch.no_grad():
        for _ in range(horizon):
            bundle = model.forward_bundle(window, deterministic_latent=True)
            selected = bundle.prediction(bundle.default_mode() if mode == "default" else mode)
            out_frames.append(selected[0].numpy().copy())
            if bundle.flow_pred is not None:
                out_flows.append(bundle.flow_pred[0].numpy().copy())
            window = torch.cat([window[:, 1:], selected.unsqueeze(1)], dim=1)
    flows = np.stack(out_flows) if out_flows else None
    return np.stack(out_frames), flows
