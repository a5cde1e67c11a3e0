"""Residual MLP stacks with skip connections at configurable width.

Two block shapes share one training stack: conventional blocks keep the skip
at the narrow input width and expand inside the residual branch; hourglass
blocks keep the skip at an expanded latent width and contract through a
bottleneck, fed by a (fixed or trainable) random input projection.
"""

__version__ = "0.1.0"

from .data import Dataset, ImageBatch, Splits, TaskData, TaskSpec, build_task, load_idx, split
from .metrics import MetricReport, proto_accuracy, psnr, ssim
from .model import ArchConfig, Network, ParamCount, load, param_count, save
from .optim import AdamW, linear_lr
from .randproj import ProjectionSpec, materialize, project
from .search import Candidate, ParetoPoint, SearchSpace, aggregate, enumerate_configs, pareto_front, run_search
from .trainer import RunResult, TrainConfig, evaluate, train

__all__ = [
    "__version__",
    "AdamW",
    "ArchConfig",
    "Candidate",
    "Dataset",
    "ImageBatch",
    "MetricReport",
    "Network",
    "ParamCount",
    "ParetoPoint",
    "ProjectionSpec",
    "RunResult",
    "SearchSpace",
    "Splits",
    "TaskData",
    "TaskSpec",
    "TrainConfig",
    "aggregate",
    "build_task",
    "enumerate_configs",
    "evaluate",
    "linear_lr",
    "load",
    "load_idx",
    "materialize",
    "param_count",
    "pareto_front",
    "project",
    "proto_accuracy",
    "psnr",
    "run_search",
    "save",
    "split",
    "ssim",
    "train",
]
