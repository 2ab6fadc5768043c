"""Quantitative evaluation: frame metrics per horizon, flow EPE, baselines,
and the unsupervised-representation linear probe.

Frame metrics (MSE/PSNR/SSIM) are computed in [0, 1] image space for every
available prediction mode plus the copy-last baseline, at each requested
horizon (multi-step predictions recycle the model's default output). Flow
EPE is reported at horizon 1, split into prediction (from past frames only)
and estimation (true frame pair input), next to the zero-flow baseline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from sklearn.linear_model import LogisticRegression

from .data import SequenceRecord
from .encoder import MotionEncoder
from .errors import DatasetError, ProbeError
from .losses import epe
from .metrics import mse, psnr, ssim, to_unit_interval
from .training import TrainingConfig, model_from_checkpoint

FRAME_METRICS = ("mse", "psnr", "ssim")
ORIENTATION = {"mse": "lower", "psnr": "higher", "ssim": "higher", "epe": "lower"}


def copy_last_baseline(frames: np.ndarray) -> np.ndarray:
    """Predict every future frame as a copy of the last observed one."""
    frames = np.asarray(frames)
    if frames.ndim != 4 or frames.shape[0] < 1:
        raise DatasetError(f"need a (T, 3, H, W) stack with T >= 1, got {frames.shape}")
    return frames[-1]


@dataclass
class MetricsReport:
    horizons: list[int]
    modes: list[str]
    aggregate: dict  # mode -> metric -> list indexed like horizons
    per_sequence: list[dict]
    epe: dict | None  # {"prediction","estimation","zero_baseline"} or None
    orientation: dict = field(default_factory=lambda: dict(ORIENTATION))

    def to_json_dict(self) -> dict:
        return {
            "horizons": self.horizons,
            "modes": self.modes,
            "aggregate": self.aggregate,
            "per_sequence": self.per_sequence,
            "epe": self.epe,
            "orientation": self.orientation,
        }

    def to_text(self) -> str:
        lines = []
        header = ["mode", "metric"] + [f"h={h}" for h in self.horizons]
        widths = [12, 8] + [12] * len(self.horizons)
        lines.append("  ".join(c.ljust(w) for c, w in zip(header, widths)))
        for mode in self.modes:
            for metric in FRAME_METRICS:
                row = [mode, metric] + [f"{v:.6f}" for v in self.aggregate[mode][metric]]
                lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
        if self.epe is not None:
            lines.append("")
            lines.append("flow EPE (horizon 1, lower is better):")
            for key, value in self.epe.items():
                if value is not None:
                    lines.append(f"  {key:<14} {value:.6f}")
        return "\n".join(lines)

    def write(self, out_dir) -> list[Path]:
        """Write metrics.txt, metrics.json, and per-metric curve files."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        txt = out_dir / "metrics.txt"
        txt.write_text(self.to_text() + "\n")
        written.append(txt)
        js = out_dir / "metrics.json"
        js.write_text(json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n")
        written.append(js)
        for metric in FRAME_METRICS:
            curve = out_dir / f"curve_{metric}.dat"
            rows = [f"# horizon  " + "  ".join(self.modes)]
            for i, h in enumerate(self.horizons):
                rows.append(
                    f"{h}  " + "  ".join(f"{self.aggregate[m][metric][i]:.8f}" for m in self.modes)
                )
            curve.write_text("\n".join(rows) + "\n")
            written.append(curve)
        return written


def _rollout(model, config: TrainingConfig, frames: np.ndarray, max_horizon: int):
    """Recursive prediction bundles for horizons 1..max_horizon."""
    window = torch.from_numpy(frames[: config.window].copy()).unsqueeze(0)
    bundles = []
    with torch.no_grad():
        for _ in range(max_horizon):
            bundle = model.forward_bundle(window, deterministic_latent=True)
            bundles.append(bundle)
            recycled = bundle.prediction(bundle.default_mode())
            window = torch.cat([window[:, 1:], recycled.unsqueeze(1)], dim=1)
    return bundles


def evaluate_dataset(ckpt: dict, records: list[SequenceRecord], horizons: list[int] | None = None) -> MetricsReport:
    """Evaluate a checkpoint on test records; see the module docstring."""
    if not records:
        raise DatasetError("no sequences to evaluate")
    horizons = sorted(horizons or [1])
    if horizons[0] < 1:
        raise DatasetError(f"horizons must be >= 1, got {horizons}")
    max_h = horizons[-1]
    model, config = model_from_checkpoint(ckpt)

    modes = []
    if config.frame_branch_on and config.flow_branch_on:
        modes.append("fused")
    if config.frame_branch_on:
        modes.append("frame_only")
    if config.flow_branch_on:
        modes.append("flow_only")
    modes.append("copy_last")

    per_sequence = []
    epe_pred_vals, epe_est_vals, epe_zero_vals = [], [], []
    for rec in records:
        frames = rec.sequence.frames
        needed = config.window + max_h
        if frames.shape[0] < needed:
            raise DatasetError(
                f"sequence {rec.path} has {frames.shape[0]} frames; horizon {max_h} "
                f"with window {config.window} needs {needed}"
            )
        bundles = _rollout(model, config, frames, max_h)
        entry: dict = {"path": rec.path, "metrics": {m: {k: [] for k in FRAME_METRICS} for m in modes}}
        copy_pred = to_unit_interval(copy_last_baseline(frames[: config.window]))
        for h in horizons:
            bundle = bundles[h - 1]
            gt = to_unit_interval(frames[config.window + h - 1])
            outputs = {}
            if "fused" in modes:
                outputs["fused"] = to_unit_interval(bundle.fused_frame[0].numpy())
            if "frame_only" in modes:
                outputs["frame_only"] = to_unit_interval(bundle.frame_pred[0].numpy())
            if "flow_only" in modes:
                outputs["flow_only"] = to_unit_interval(bundle.warped_frame[0].numpy())
            outputs["copy_last"] = copy_pred
            for mode, pred in outputs.items():
                entry["metrics"][mode]["mse"].append(mse(pred, gt))
                entry["metrics"][mode]["psnr"].append(psnr(pred, gt))
                entry["metrics"][mode]["ssim"].append(ssim(pred, gt))
        if rec.flows is not None and config.flow_branch_on:
            gt_flow = torch.from_numpy(rec.flows[config.window - 1].to_array()).unsqueeze(0)
            flow_pred = bundles[0].flow_pred
            entry["epe_prediction"] = float(epe(flow_pred, gt_flow))
            entry["epe_zero"] = float(epe(torch.zeros_like(gt_flow), gt_flow))
            epe_pred_vals.append(entry["epe_prediction"])
            epe_zero_vals.append(entry["epe_zero"])
            if model.flow_estimator is not None:
                prev = torch.from_numpy(frames[config.window - 1].copy()).unsqueeze(0)
                true_next = torch.from_numpy(frames[config.window].copy()).unsqueeze(0)
                with torch.no_grad():
                    est = model.flow_estimator(prev, true_next)
                entry["epe_estimation"] = float(epe(est, gt_flow))
                epe_est_vals.append(entry["epe_estimation"])
        per_sequence.append(entry)

    aggregate = {
        mode: {
            metric: [
                float(np.mean([e["metrics"][mode][metric][i] for e in per_sequence]))
                for i in range(len(horizons))
            ]
            for metric in FRAME_METRICS
        }
        for mode in modes
    }
    epe_report = None
    if epe_pred_vals:
        epe_report = {
            "prediction": float(np.mean(epe_pred_vals)),
            "estimation": float(np.mean(epe_est_vals)) if epe_est_vals else None,
            "zero_baseline": float(np.mean(epe_zero_vals)),
        }
    return MetricsReport(
        horizons=horizons, modes=modes, aggregate=aggregate, per_sequence=per_sequence, epe=epe_report
    )


@dataclass
class ProbeResult:
    trained_accuracy: float
    random_accuracy: float | None
    num_classes: int
    n_train: int
    n_test: int


def _pooled_features(encoder: MotionEncoder, records: list[SequenceRecord]) -> np.ndarray:
    rows = []
    with torch.no_grad():
        for rec in records:
            dist = encoder(torch.from_numpy(rec.sequence.frames.copy()).unsqueeze(0))
            rows.append(dist.mean[0].mean(dim=(1, 2)).numpy())
    return np.stack(rows)


def representation_probe(
    ckpt: dict,
    records: list[SequenceRecord],
    seed: int = 0,
    heldout_fraction: float = 0.5,
    compare_random: bool = True,
) -> ProbeResult:
    """Linear probe on pooled encoder mean-map features, frozen encoder.

    Trains a single linear-softmax classifier on motion-class labels and
    reports held-out accuracy, alongside the same probe on a randomly
    initialized encoder when ``compare_random`` is set.
    """
    labels = np.array([rec.label for rec in records])
    if any(label is None for label in labels):
        raise DatasetError("representation probe needs labeled sequences")
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ProbeError(f"probe needs at least 2 motion classes, got {len(classes)}")

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(records))
    n_test = max(1, int(round(heldout_fraction * len(records))))
    test_idx, train_idx = order[:n_test], order[n_test:]
    if len(np.unique(labels[train_idx])) < 2:
        raise ProbeError("train split degenerated to fewer than 2 classes")

    model, config = model_from_checkpoint(ckpt)

    def probe_accuracy(encoder: MotionEncoder) -> float:
        features = _pooled_features(encoder, records)
        clf = LogisticRegression(max_iter=1000)
        clf.fit(features[train_idx], labels[train_idx].astype(int))
        return float(clf.score(features[test_idx], labels[test_idx].astype(int)))

    trained_acc = probe_accuracy(model.encoder)
    random_acc = None
    if compare_random:
        torch.manual_seed(seed + 1000)
        random_acc = probe_accuracy(MotionEncoder(config.width))
    return ProbeResult(
        trained_accuracy=trained_acc,
        random_accuracy=random_acc,
        num_classes=len(classes),
        n_train=len(train_idx),
        n_test=len(test_idx),
    )
