"""Future-frame and future-flow video prediction with dual adversarial training."""

from .data import (
    DatasetManifest,
    FrameSequence,
    ManifestEntry,
    SequenceRecord,
    denormalize_frame,
    load_frame_folder,
    normalize_frame,
    read_manifest,
    write_manifest,
)
from .encoder import (
    ConvLSTMCell,
    LatentCode,
    LatentDistribution,
    MotionEncoder,
    kl_divergence,
    sample_latent,
)
from .errors import (
    CheckpointError,
    DatasetError,
    FlowFormatError,
    FramecastError,
    IngestionError,
    NonFiniteLossError,
    ProbeError,
    SceneSpecError,
    StructuralError,
)
from .estimator import VideoFramePredictor
from .evaluation import MetricsReport, ProbeResult, copy_last_baseline, evaluate_dataset, representation_probe
from .flo import FlowField, flow_to_color, read_flo, write_flo
from .generators import FlowDecoder, FlowEstimator, FrameDecoder, FusionLayer, warp
from .critics import Critic, clip_parameters_, flow_critic, frame_critic
from .losses import LossBreakdown, epe, gan_flow_objective, gan_frame_objective, l1_distance, total_objective, vae_loss
from .metrics import mse, psnr, ssim
from .model import PredictionBundle, VideoPredictionModel
from .synthetic import ShapeSpec, SyntheticSceneSpec, direction_class, generate_moving_shapes, random_scene_spec
from .training import (
    Trainer,
    TrainingConfig,
    load_checkpoint,
    predict_multi,
    predict_next,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"
