"""Minimal numpy NN engine: explicit forward/backward layers, Adam, gradient checks."""

from hscl.engine.backbone import Backbone, BackboneConfig, ProjectionHead
from hscl.engine.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from hscl.engine.gradcheck import GradCheckReport, gradient_check
from hscl.engine.optim import OptimizerState, adam_step, effective_lr
from hscl.engine.params import Parameter

__all__ = [
    "Backbone",
    "BackboneConfig",
    "CheckpointError",
    "GradCheckReport",
    "OptimizerState",
    "Parameter",
    "ProjectionHead",
    "adam_step",
    "effective_lr",
    "gradient_check",
    "load_checkpoint",
    "save_checkpoint",
]
