"""Scikit-learn style estimator facade over the training module.

``VideoFramePredictor`` exposes the usual fit/predict/score surface so the
model composes with sklearn tooling (``get_params``/``set_params``/clone
come from ``BaseEstimator``). ``X`` is a list of sequences; each sequence
is either a (T, 3, H, W) float array in [-1, 1] or a ``(frames, flows)``
pair where ``flows`` is a (T-1, 2, H, W) array of ground-truth flow fields.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .data import FrameSequence, SequenceRecord
from .errors import DatasetError
from .flo import FlowField
from .metrics import mse, to_unit_interval
from .training import TrainingConfig, Trainer, predict_next
from .validation import as_sequence_array


def _as_record(item, index: int) -> SequenceRecord:
    if isinstance(item, SequenceRecord):
        return item
    flows = None
    if isinstance(item, tuple) and len(item) == 2:
        frames_arr, flow_arr = item
        frames = as_sequence_array(frames_arr, name=f"X[{index}]")
        if flow_arr is not None:
            flow_arr = np.asarray(flow_arr, dtype=np.float32)
            if flow_arr.ndim != 4 or flow_arr.shape[0] != frames.shape[0] - 1 or flow_arr.shape[1] != 2:
                raise DatasetError(
                    f"X[{index}] flows must be (T-1, 2, H, W) for T={frames.shape[0]}, "
                    f"got {flow_arr.shape}"
                )
            flows = [FlowField.from_array(flow_arr[t]) for t in range(flow_arr.shape[0])]
    else:
        frames = as_sequence_array(item, name=f"X[{index}]")
    return SequenceRecord(
        sequence=FrameSequence(frames=frames, source_id=f"X[{index}]"),
        flows=flows,
        label=None,
        split="train",
        path=f"X[{index}]",
    )


class VideoFramePredictor(BaseEstimator):
    """Next-frame predictor trained with the dual adversarial objective.

    Parameters mirror :class:`~framecast.training.TrainingConfig`; see its
    docstring for semantics. ``mode`` picks which output ``predict``
    reports: "fused", "frame_only", "flow_only", or "default" (fused when
    both branches are on).
    """

    def __init__(
        self,
        steps: int = 2000,
        width: int = 64,
        window: int = 4,
        lambda_: float = 0.001,
        learning_rate: float = 0.0001,
        critic_steps_per_gen_step: int = 5,
        clip_bound: float = 0.01,
        batch_size: int = 1,
        seed: int = 0,
        frame_branch_on: bool = True,
        flow_branch_on: bool = True,
        frame_gan_on: bool = True,
        flow_gan_on: bool = True,
        encoder_probabilistic_on: bool = True,
        deterministic: bool = True,
        mode: str = "default",
    ):
        self.steps = steps
        self.width = width
        self.window = window
        self.lambda_ = lambda_
        self.learning_rate = learning_rate
        self.critic_steps_per_gen_step = critic_steps_per_gen_step
        self.clip_bound = clip_bound
        self.batch_size = batch_size
        self.seed = seed
        self.frame_branch_on = frame_branch_on
        self.flow_branch_on = flow_branch_on
        self.frame_gan_on = frame_gan_on
        self.flow_gan_on = flow_gan_on
        self.encoder_probabilistic_on = encoder_probabilistic_on
        self.deterministic = deterministic
        self.mode = mode

    def _config(self) -> TrainingConfig:
        return TrainingConfig(
            lambda_=self.lambda_,
            learning_rate=self.learning_rate,
            critic_steps_per_gen_step=self.critic_steps_per_gen_step,
            clip_bound=self.clip_bound,
            batch_size=self.batch_size,
            steps=self.steps,
            seed=self.seed,
            window=self.window,
            width=self.width,
            frame_branch_on=self.frame_branch_on,
            flow_branch_on=self.flow_branch_on,
            frame_gan_on=self.frame_gan_on,
            flow_gan_on=self.flow_gan_on,
            encoder_probabilistic_on=self.encoder_probabilistic_on,
            deterministic=self.deterministic,
        ).validate()

    def fit(self, X, y=None):
        records = [_as_record(item, i) for i, item in enumerate(X)]
        trainer = Trainer(self._config(), records)
        self.checkpoint_ = trainer.run()
        self.loss_log_ = list(trainer.log_lines)
        return self

    def _check_fitted(self):
        if not hasattr(self, "checkpoint_"):
            raise NotFittedError("this VideoFramePredictor is not fitted; call fit first")

    def predict(self, X) -> np.ndarray:
        """Predicted next frame per sequence, as a (N, 3, H, W) array in [-1, 1]."""
        self._check_fitted()
        out = []
        for i, item in enumerate(X):
            record = _as_record(item, i)
            bundle = predict_next(self.checkpoint_, record.sequence)
            mode = bundle.default_mode() if self.mode == "default" else self.mode
            out.append(bundle.prediction(mode)[0].numpy())
        return np.stack(out)

    def predict_flow(self, X) -> np.ndarray:
        """Predicted next-step flow per sequence, as a (N, 2, H, W) array."""
        self._check_fitted()
        out = []
        for i, item in enumerate(X):
            record = _as_record(item, i)
            bundle = predict_next(self.checkpoint_, record.sequence)
            if bundle.flow_pred is None:
                raise DatasetError("this model was trained without the flow branch")
            out.append(bundle.flow_pred[0].numpy())
        return np.stack(out)

    def score(self, X, y=None) -> float:
        """Negative mean MSE (in [0, 1] space) of predicting each sequence's
        last frame from the preceding ones; higher is better."""
        self._check_fitted()
        errors = []
        for i, item in enumerate(X):
            record = _as_record(item, i)
            frames = record.sequence.frames
            if frames.shape[0] < 3:
                raise DatasetError(f"scoring needs at least 3 frames, got {frames.shape[0]}")
            bundle = predict_next(self.checkpoint_, frames[:-1])
            mode = bundle.default_mode() if self.mode == "default" else self.mode
            pred = to_unit_interval(bundle.prediction(mode)[0].numpy())
            errors.append(mse(pred, to_unit_interval(frames[-1])))
        return -float(np.mean(errors))
