"""rio: rotation-equivariant inertial odometry lab.

A numpy library for learning velocity from IMU windows with a
rotation-equivariance self-supervised task, adapting the model online
with an uncertainty-gated test-time-training controller, and scoring
trajectories with standard metrics on synthetic or file-based sequences.
"""

from .autodiff import Tensor, backward, evaluate_graph
from .data import ImuSequence, load_sequence, make_windows, save_sequence, stream_windows
from .ensemble import EnsembleEstimate, EnsembleState, ensemble_predict, load_ensemble, save_ensemble, train_ensemble
from .equivariance import EquivarianceConfig, aux_loss, batch_aux_loss, cosine_dissimilarity
from .geometry import RigidTransform, normalize_angle, rotate_window, rotate_z, umeyama_align
from .model import ModelConfig, ModelParams, init_model, load_checkpoint, predict_velocity, save_checkpoint
from .optim import AdamState, adam_step, init_adam
from .synth import PRESETS, ScenarioSpec, Segment, ShiftSpec, gen_preset, gen_scenario, inject_shift, preset_spec
from .trajmetrics import TrajMetrics, Trajectory, ate, d_drift, evaluate_sequence, integrate, rte
from .training import TrainConfig, joint_train, supervised_velocity_loss
from .ttt import Action, TttConfig, TttEvent, decide, run_stream, ttt_batch

__version__ = "0.1.0"

__all__ = [
    "Action", "AdamState", "EnsembleEstimate", "EnsembleState", "EquivarianceConfig",
    "ImuSequence", "ModelConfig", "ModelParams", "PRESETS", "RigidTransform",
    "ScenarioSpec", "Segment", "ShiftSpec", "Tensor", "TrainConfig", "TrajMetrics",
    "Trajectory", "TttConfig", "TttEvent", "adam_step", "ate", "aux_loss", "backward",
    "batch_aux_loss", "cosine_dissimilarity", "d_drift", "decide", "ensemble_predict",
    "evaluate_graph", "evaluate_sequence", "gen_preset", "gen_scenario", "init_adam",
    "init_model", "inject_shift", "integrate", "joint_train", "load_checkpoint",
    "load_ensemble", "load_sequence", "make_windows", "normalize_angle",
    "predict_velocity", "preset_spec", "rotate_window", "rotate_z", "rte",
    "run_stream", "save_checkpoint", "save_ensemble", "save_sequence",
    "stream_windows", "supervised_velocity_loss", "train_ensemble", "ttt_batch",
    "umeyama_align",
]
